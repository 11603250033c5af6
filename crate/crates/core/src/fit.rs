//! Least-squares construction of a tensor-product spline from a gridded
//! field, with an optional adaptive knot-refinement loop.
//!
//! Because the samples form a tensor grid, the global collocation matrix is a
//! Kronecker product of per-axis collocation matrices, and the normal
//! equations separate into one small symmetric solve per axis applied along
//! the data tensor. The result is the exact global least-squares minimizer.

use crate::error::{Error, Result};
use crate::field::GridScalarField;
use crate::lattice::{map_axis, strides, MultiIndexIter};
use crate::spline::{KnotVector, TensorSplineModel};
use nalgebra::{Cholesky, DMatrix, DVector};

/// Outcome of a fit: error statistics plus the refinement history.
#[derive(Debug, Clone)]
pub struct FitReport {
    /// Root-mean-square pointwise error over the input samples.
    pub rms: f64,
    /// Largest absolute pointwise error over the input samples.
    pub max_error: f64,
    /// Number of knot-insertion rounds performed (0 for fixed fits).
    pub rounds: usize,
    /// Final control-point count per axis.
    pub control_dims: Vec<usize>,
    /// RMS after each fit, first entry is the initial fit.
    pub rms_history: Vec<f64>,
}

/// Best-fit model on clamped uniform knots with the requested per-axis
/// control counts.
pub fn fit_fixed(
    field: &GridScalarField,
    degree: usize,
    control_dims: &[usize],
) -> Result<(TensorSplineModel, FitReport)> {
    if control_dims.len() != field.dim() {
        return Err(Error::InvalidField(format!(
            "{} control counts for a {}-dimensional field",
            control_dims.len(),
            field.dim()
        )));
    }
    let knots: Vec<KnotVector> = control_dims
        .iter()
        .map(|&n| KnotVector::uniform_clamped(degree, n))
        .collect::<Result<_>>()?;
    fit_with_knots(field, knots)
}

/// Best-fit model on explicit per-axis knot vectors.
pub fn fit_with_knots(
    field: &GridScalarField,
    knots: Vec<KnotVector>,
) -> Result<(TensorSplineModel, FitReport)> {
    let (model, residuals) = solve_least_squares(field, knots)?;
    let (rms, max_error) = error_stats(&residuals);
    let report = FitReport {
        rms,
        max_error,
        rounds: 0,
        control_dims: model.control_dims().to_vec(),
        rms_history: vec![rms],
    };
    Ok((model, report))
}

/// Fit-check-refine loop: after each fit, the knot span containing the worst
/// sample is bisected in every axis, until the maximum pointwise error drops
/// to `tolerance` or `max_rounds` insertion rounds have run.
pub fn fit_adaptive(
    field: &GridScalarField,
    degree: usize,
    tolerance: f64,
    max_rounds: usize,
) -> Result<(TensorSplineModel, FitReport)> {
    let d = field.dim();
    let mut knots: Vec<KnotVector> = (0..d)
        .map(|_| KnotVector::uniform_clamped(degree, degree + 1))
        .collect::<Result<_>>()?;
    let mut rms_history = Vec::new();
    let mut rounds = 0usize;

    loop {
        let (model, residuals) = solve_least_squares(field, knots.clone())?;
        let (rms, max_error) = error_stats(&residuals);
        rms_history.push(rms);
        let done = max_error <= tolerance || rounds == max_rounds;
        if done {
            let control_dims = model.control_dims().to_vec();
            return Ok((
                model,
                FitReport {
                    rms,
                    max_error,
                    rounds,
                    control_dims,
                    rms_history,
                },
            ));
        }

        // locate the worst sample and bisect its span in every axis that can
        // still take another control point
        let worst = residuals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let dims = field.dims();
        let grid_strides = strides(dims);
        let mut inserted = false;
        for l in 0..d {
            if knots[l].control_count() + 1 > dims[l] {
                continue; // this axis is at sample capacity
            }
            let i = worst / grid_strides[l] % dims[l];
            let u = field.param_coord(l, i);
            let span = knots[l].find_span(u);
            let t = knots[l].knots();
            let mid = 0.5 * (t[span] + t[span + 1]);
            knots[l] = knots[l].inserted(mid);
            inserted = true;
        }
        if !inserted {
            let control_dims = model.control_dims().to_vec();
            return Ok((
                model,
                FitReport {
                    rms,
                    max_error,
                    rounds,
                    control_dims,
                    rms_history,
                },
            ));
        }
        rounds += 1;
    }
}

/// Per-axis collocation matrix: row `i` holds the active basis values of
/// sample `i` scattered into `n` columns.
fn collocation(kv: &KnotVector, samples: usize) -> DMatrix<f64> {
    let n = kv.control_count();
    let p = kv.degree();
    let mut b = DMatrix::zeros(samples, n);
    let mut values = vec![0.0; p + 1];
    for i in 0..samples {
        let u = i as f64 / (samples - 1) as f64;
        let span = kv.find_span(u);
        kv.basis_into(u, span, &mut values);
        for (k, &v) in values.iter().enumerate() {
            b[(i, span - p + k)] = v;
        }
    }
    b
}

fn solve_least_squares(
    field: &GridScalarField,
    knots: Vec<KnotVector>,
) -> Result<(TensorSplineModel, Vec<f64>)> {
    let d = field.dim();
    let dims = field.dims();

    let mut colloc = Vec::with_capacity(d);
    let mut factors: Vec<Cholesky<f64, nalgebra::Dyn>> = Vec::with_capacity(d);
    for (axis, kv) in knots.iter().enumerate() {
        let n = kv.control_count();
        if dims[axis] < n {
            return Err(Error::InsufficientSamples {
                axis,
                controls: n,
                samples: dims[axis],
            });
        }
        let b = collocation(kv, dims[axis]);
        let normal = b.transpose() * &b;
        let chol = Cholesky::new(normal).ok_or(Error::RankDeficient { axis })?;
        colloc.push(b);
        factors.push(chol);
    }

    // sweep the separable normal equations one axis at a time
    let mut values = field.values().to_vec();
    let mut cur_dims = dims.to_vec();
    for axis in 0..d {
        let n = knots[axis].control_count();
        let bt = colloc[axis].transpose();
        let chol = &factors[axis];
        let (next, next_dims) = map_axis(&values, &cur_dims, axis, n, |line, out| {
            let rhs = &bt * DVector::from_column_slice(line);
            let sol = chol.solve(&rhs);
            out.copy_from_slice(sol.as_slice());
        });
        values = next;
        cur_dims = next_dims;
    }

    let model = TensorSplineModel::new(knots, values, field.extents().to_vec())?;

    // pointwise residuals over the grid, via the same collocation matrices
    let mut approx = model.controls().to_vec();
    let mut approx_dims = model.control_dims().to_vec();
    for axis in 0..d {
        let b = &colloc[axis];
        let (next, next_dims) = map_axis(&approx, &approx_dims, axis, dims[axis], |line, out| {
            let prod = b * DVector::from_column_slice(line);
            out.copy_from_slice(prod.as_slice());
        });
        approx = next;
        approx_dims = next_dims;
    }
    let residuals: Vec<f64> = approx
        .iter()
        .zip(field.values())
        .map(|(a, f)| a - f)
        .collect();
    Ok((model, residuals))
}

fn error_stats(residuals: &[f64]) -> (f64, f64) {
    let m = residuals.len() as f64;
    let rms = (residuals.iter().map(|r| r * r).sum::<f64>() / m).sqrt();
    let max = residuals.iter().fold(0.0f64, |acc, r| acc.max(r.abs()));
    (rms, max)
}

/// RMS of a model over the samples of a field, used by tests to compare
/// alternative control lattices on equal terms.
pub fn rms_on_field(model: &TensorSplineModel, field: &GridScalarField) -> Result<f64> {
    let dims = field.dims();
    let mut sum = 0.0;
    for idx in MultiIndexIter::new(dims) {
        let u: Vec<f64> = idx
            .iter()
            .enumerate()
            .map(|(l, &i)| field.param_coord(l, i))
            .collect();
        let r = model.evaluate(&u)? - field.value(&idx);
        sum += r * r;
    }
    Ok((sum / dims.iter().product::<usize>() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{test_field, TestFieldKind};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn sample_model_exactly(model: &TensorSplineModel, dims: &[usize]) -> GridScalarField {
        let mut values = Vec::new();
        for idx in MultiIndexIter::new(dims) {
            let u: Vec<f64> = idx
                .iter()
                .zip(dims)
                .map(|(&i, &m)| i as f64 / (m - 1) as f64)
                .collect();
            values.push(model.evaluate(&u).unwrap());
        }
        GridScalarField::new(dims.to_vec(), model.extents().to_vec(), values).unwrap()
    }

    #[test]
    fn exact_recovery_of_a_spline_sampled_field() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let kv = KnotVector::uniform_clamped(3, 8).unwrap();
        let controls: Vec<f64> = (0..64).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let truth = TensorSplineModel::new(
            vec![kv.clone(), kv.clone()],
            controls,
            vec![(0.0, 1.0); 2],
        )
        .unwrap();
        let field = sample_model_exactly(&truth, &[25, 25]);
        let (fitted, report) = fit_with_knots(&field, vec![kv.clone(), kv]).unwrap();
        for (a, b) in fitted.controls().iter().zip(truth.controls()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        assert!(report.rms <= 1e-9);
    }

    #[test]
    fn constant_field_yields_constant_controls() {
        let field = GridScalarField::new(
            vec![10, 10],
            vec![(0.0, 1.0); 2],
            vec![7.5; 100],
        )
        .unwrap();
        let (model, report) = fit_fixed(&field, 2, &[5, 5]).unwrap();
        for &c in model.controls() {
            assert!((c - 7.5).abs() < 1e-10);
        }
        assert!(report.rms < 1e-10);
    }

    #[test]
    fn too_many_controls_names_the_offending_axis() {
        let field = GridScalarField::new(
            vec![10, 4],
            vec![(0.0, 1.0); 2],
            vec![0.0; 40],
        )
        .unwrap();
        let err = fit_fixed(&field, 2, &[5, 5]).unwrap_err();
        match err {
            Error::InsufficientSamples { axis, .. } => assert_eq!(axis, 1),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn unsupported_basis_columns_are_rank_deficient() {
        // interior knots crowd the top of the axis, leaving basis functions
        // with no sample in their support: the normal matrix is singular
        // even though m >= n
        let field = GridScalarField::new(
            vec![5, 8],
            vec![(0.0, 1.0); 2],
            (0..40).map(|i| i as f64).collect(),
        )
        .unwrap();
        let crowded = KnotVector::new(
            1,
            vec![0.0, 0.0, 0.9, 0.95, 0.98, 1.0, 1.0],
        )
        .unwrap();
        let healthy = KnotVector::uniform_clamped(1, 5).unwrap();
        let err = fit_with_knots(&field, vec![crowded, healthy]).unwrap_err();
        match err {
            Error::RankDeficient { axis } => assert_eq!(axis, 0),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn derivative_of_fitted_quadratic_is_linear() {
        // fit samples of u^2 (exactly representable at degree >= 2), then
        // check the derivative model against 2u
        let field = GridScalarField::from_fn(vec![21], vec![(0.0, 1.0)], |x| x[0] * x[0])
            .unwrap();
        let (model, report) = fit_fixed(&field, 2, &[6]).unwrap();
        assert!(report.rms < 1e-10);
        let deriv = model.derivative_model(0).unwrap();
        for i in 0..=50 {
            let u = i as f64 / 50.0;
            assert!((deriv.evaluate(&[u]).unwrap() - 2.0 * u).abs() < 1e-9);
        }
    }

    #[test]
    fn fitted_solution_beats_perturbed_lattices() {
        let extents = vec![(0.0, 1.0), (0.0, 1.0)];
        let field = test_field(TestFieldKind::Bump, &[20, 20], &extents).unwrap();
        let (model, report) = fit_fixed(&field, 3, &[8, 8]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let controls: Vec<f64> = model
                .controls()
                .iter()
                .map(|&c| c + rng.gen_range(-1e-3..1e-3))
                .collect();
            let knots = (0..2).map(|l| model.knot_vector(l).clone()).collect();
            let other =
                TensorSplineModel::new(knots, controls, model.extents().to_vec()).unwrap();
            let rms = rms_on_field(&other, &field).unwrap();
            assert!(rms + 1e-12 >= report.rms, "{rms} < {}", report.rms);
        }
    }

    #[test]
    fn nested_knot_insertion_never_hurts_rms() {
        let extents = vec![(0.0, 1.0), (0.0, 1.0)];
        let field = test_field(TestFieldKind::Bump, &[24, 24], &extents).unwrap();
        let k0 = KnotVector::uniform_clamped(3, 6).unwrap();
        let (_, first) = fit_with_knots(&field, vec![k0.clone(), k0.clone()]).unwrap();
        let refined = k0.inserted(0.37);
        let (_, second) = fit_with_knots(&field, vec![refined, k0]).unwrap();
        assert!(second.rms <= first.rms + 1e-9);
    }

    #[test]
    fn adaptive_stops_immediately_when_tolerance_already_met() {
        let field = GridScalarField::new(
            vec![12, 12],
            vec![(0.0, 1.0); 2],
            vec![2.0; 144],
        )
        .unwrap();
        let (_, report) = fit_adaptive(&field, 2, 1e-6, 10).unwrap();
        assert_eq!(report.rounds, 0);
    }

    #[test]
    fn adaptive_rms_is_monotone_on_smooth_bump() {
        let extents = vec![(0.0, 1.0), (0.0, 1.0)];
        let field = test_field(TestFieldKind::Bump, &[40, 40], &extents).unwrap();
        let (_, report) = fit_adaptive(&field, 3, 1e-12, 12).unwrap();
        assert!(report.rounds > 0);
        for w in report.rms_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "rms went up: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn adaptive_returns_best_model_when_rounds_run_out() {
        let extents = vec![(0.0, 1.0), (0.0, 1.0)];
        let field = test_field(TestFieldKind::Bump, &[30, 30], &extents).unwrap();
        let (_, report) = fit_adaptive(&field, 2, 0.0, 3).unwrap();
        assert_eq!(report.rounds, 3);
        assert!(report.max_error > 0.0);
    }
}
