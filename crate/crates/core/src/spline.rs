//! Tensor-product B-spline representation, evaluation, and analytic
//! differentiation.
//!
//! A model is a control-point lattice combined with one clamped knot vector
//! per axis. Evaluation touches only the local `(p+1)^d` window of control
//! points active over the knot span containing the query; partial-derivative
//! models are themselves B-splines of reduced degree whose control points are
//! scaled differences of the parent lattice.

use crate::error::{Error, Result};
use crate::lattice::{strides, MultiIndexIter};
#[cfg(test)]
use crate::lattice::ravel;
use nalgebra::{DMatrix, DVector};

/// Clamped (open) knot vector for one axis.
///
/// A degree-`p` vector over `n` control points stores `n + p + 1`
/// nondecreasing knots in `[0, 1]`, with the first and last `p + 1` knots
/// pinned to 0 and 1 respectively.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    degree: usize,
    knots: Vec<f64>,
}

impl KnotVector {
    pub fn new(degree: usize, knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 * (degree + 1) {
            return Err(Error::InvalidKnots(format!(
                "degree {} needs at least {} knots, got {}",
                degree,
                2 * (degree + 1),
                knots.len()
            )));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidKnots("knots must be nondecreasing".into()));
        }
        if knots[..=degree].iter().any(|&t| t != 0.0) {
            return Err(Error::InvalidKnots(format!(
                "first {} knots must equal 0",
                degree + 1
            )));
        }
        if knots[knots.len() - degree - 1..].iter().any(|&t| t != 1.0) {
            return Err(Error::InvalidKnots(format!(
                "last {} knots must equal 1",
                degree + 1
            )));
        }
        Ok(KnotVector { degree, knots })
    }

    /// Clamped vector with uniformly spaced interior knots.
    pub fn uniform_clamped(degree: usize, control_count: usize) -> Result<Self> {
        if control_count < degree + 1 {
            return Err(Error::InvalidKnots(format!(
                "degree {} needs at least {} control points, got {}",
                degree,
                degree + 1,
                control_count
            )));
        }
        let segments = control_count - degree; // number of interior intervals
        let mut knots = vec![0.0; degree + 1];
        for i in 1..segments {
            knots.push(i as f64 / segments as f64);
        }
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Ok(KnotVector { degree, knots })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of control points this vector supports: `len − p − 1`.
    pub fn control_count(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Knot span index `j` with `t_j <= u < t_{j+1}` (the last positive-width
    /// span for `u = 1`).
    pub fn find_span(&self, u: f64) -> usize {
        let n = self.control_count();
        let p = self.degree;
        if u >= self.knots[n] {
            return n - 1;
        }
        if u <= self.knots[p] {
            return p;
        }
        let mut lo = p;
        let mut hi = n;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if u < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// The `p + 1` basis functions that are nonzero at `u`, together with the
    /// containing span index. Values are nonnegative and sum to 1.
    pub fn basis(&self, u: f64) -> Result<(usize, Vec<f64>)> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::OutOfDomain { axis: 0, value: u });
        }
        let span = self.find_span(u);
        let mut values = vec![0.0; self.degree + 1];
        self.basis_into(u, span, &mut values);
        Ok((span, values))
    }

    /// Cox–de Boor evaluation into a caller-provided buffer of length `p + 1`.
    pub(crate) fn basis_into(&self, u: f64, span: usize, out: &mut [f64]) {
        let p = self.degree;
        debug_assert_eq!(out.len(), p + 1);
        out[0] = 1.0;
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        for j in 1..=p {
            left[j] = u - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - u;
            let mut saved = 0.0;
            for r in 0..j {
                let tmp = out[r] / (right[r + 1] + left[j - r]);
                out[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            out[j] = saved;
        }
    }

    /// Positive-width spans as `(span index, lower, upper)`, in order.
    pub fn spans(&self) -> Vec<(usize, f64, f64)> {
        let n = self.control_count();
        (self.degree..n)
            .filter(|&j| self.knots[j + 1] > self.knots[j])
            .map(|j| (j, self.knots[j], self.knots[j + 1]))
            .collect()
    }

    /// Knot vector of the derivative spline: degree reduced by one, first and
    /// last knot dropped.
    fn derivative(&self) -> KnotVector {
        KnotVector {
            degree: self.degree - 1,
            knots: self.knots[1..self.knots.len() - 1].to_vec(),
        }
    }

    /// New vector with `u` inserted (multiplicity grows by one).
    pub fn inserted(&self, u: f64) -> KnotVector {
        let mut knots = self.knots.clone();
        let pos = knots.partition_point(|&t| t <= u);
        knots.insert(pos, u);
        KnotVector {
            degree: self.degree,
            knots,
        }
    }
}

/// One d-dimensional knot span: the box between adjacent knots in every axis,
/// together with the window of control points governing it.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotSpan {
    /// Per-axis span index `j_l` into the owning knot vector.
    pub indices: Vec<usize>,
    /// Per-axis interval lower bounds `t_{j_l}`.
    pub lower: Vec<f64>,
    /// Per-axis interval upper bounds `t_{j_l + 1}`.
    pub upper: Vec<f64>,
}

impl KnotSpan {
    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn diagonal(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    /// Half-open membership test: `[lo, hi)` per axis, closed at `hi` only
    /// where the span ends the global domain (`hi == 1`). Prevents a point on
    /// a shared face from being accepted by two neighboring spans.
    pub fn contains(&self, u: &[f64]) -> bool {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&x, (&lo, &hi))| x >= lo && (x < hi || (x == hi && hi == 1.0)))
    }
}

/// A d-dimensional tensor-product B-spline over `[0,1]^d` with a linear map
/// between parameter space and the original physical extents.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSplineModel {
    knots: Vec<KnotVector>,
    control_dims: Vec<usize>,
    control_strides: Vec<usize>,
    controls: Vec<f64>,
    extents: Vec<(f64, f64)>,
}

impl TensorSplineModel {
    /// `controls` is the flat lattice, row-major with the last axis fastest;
    /// its extent per axis must match what each knot vector supports.
    pub fn new(
        knots: Vec<KnotVector>,
        controls: Vec<f64>,
        extents: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidModel("dimension must be positive".into()));
        }
        if extents.len() != knots.len() {
            return Err(Error::InvalidModel(format!(
                "{} extents for {} axes",
                extents.len(),
                knots.len()
            )));
        }
        let control_dims: Vec<usize> = knots.iter().map(|kv| kv.control_count()).collect();
        let expected: usize = control_dims.iter().product();
        if controls.len() != expected {
            return Err(Error::InvalidModel(format!(
                "control lattice has {} values, knot vectors require {}",
                controls.len(),
                expected
            )));
        }
        if !extents
            .iter()
            .all(|&(lo, hi)| crate::field::valid_extent(lo, hi))
        {
            return Err(Error::InvalidModel(
                "physical extent must have positive width per axis".into(),
            ));
        }
        let control_strides = strides(&control_dims);
        Ok(TensorSplineModel {
            knots,
            control_dims,
            control_strides,
            controls,
            extents,
        })
    }

    pub fn dim(&self) -> usize {
        self.knots.len()
    }

    pub fn degree(&self, axis: usize) -> usize {
        self.knots[axis].degree()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.knots.iter().map(|kv| kv.degree()).collect()
    }

    pub fn knot_vector(&self, axis: usize) -> &KnotVector {
        &self.knots[axis]
    }

    pub fn control_dims(&self) -> &[usize] {
        &self.control_dims
    }

    pub fn controls(&self) -> &[f64] {
        &self.controls
    }

    pub fn extents(&self) -> &[(f64, f64)] {
        &self.extents
    }

    pub fn param_to_physical(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.extents)
            .map(|(&t, &(lo, hi))| lo + t * (hi - lo))
            .collect()
    }

    pub fn physical_to_param(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.extents)
            .map(|(&v, &(lo, hi))| (v - lo) / (hi - lo))
            .collect()
    }

    fn check_domain(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::InvalidModel(format!(
                "query has {} coordinates, model is {}-dimensional",
                u.len(),
                self.dim()
            )));
        }
        for (axis, &v) in u.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfDomain { axis, value: v });
            }
        }
        Ok(())
    }

    /// Evaluate the spline at a parameter-space point. Only the control
    /// points of the containing span's window contribute.
    pub fn evaluate(&self, u: &[f64]) -> Result<f64> {
        self.check_domain(u)?;
        let d = self.dim();
        let mut spans = vec![0usize; d];
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
        for l in 0..d {
            let kv = &self.knots[l];
            let span = kv.find_span(u[l]);
            spans[l] = span;
            let mut b = vec![0.0; kv.degree() + 1];
            kv.basis_into(u[l], span, &mut b);
            basis.push(b);
        }
        let window: Vec<usize> = (0..d).map(|l| self.degree(l) + 1).collect();
        let starts: Vec<usize> = (0..d).map(|l| spans[l] - self.degree(l)).collect();

        let mut sum = 0.0;
        for offset in MultiIndexIter::new(&window) {
            let mut w = 1.0;
            let mut flat = 0usize;
            for l in 0..d {
                w *= basis[l][offset[l]];
                flat += (starts[l] + offset[l]) * self.control_strides[l];
            }
            sum += w * self.controls[flat];
        }
        Ok(sum)
    }

    /// The exact partial-derivative spline along `axis`: degree drops by one
    /// there, and control points become knot-difference-scaled differences of
    /// neighbors. Zero-width knot differences yield a zero control point.
    pub fn derivative_model(&self, axis: usize) -> Result<TensorSplineModel> {
        let p = self.degree(axis);
        if p < 1 {
            return Err(Error::InvalidModel(format!(
                "axis {axis} has degree 0 and cannot be differentiated"
            )));
        }
        let t = self.knots[axis].knots();
        let n = self.control_dims[axis];
        let scale: Vec<f64> = (0..n - 1)
            .map(|j| {
                let denom = t[j + p + 1] - t[j + 1];
                if denom == 0.0 {
                    0.0
                } else {
                    p as f64 / denom
                }
            })
            .collect();

        let (values, _) = crate::lattice::map_axis(
            &self.controls,
            &self.control_dims,
            axis,
            n - 1,
            |line, out| {
                for j in 0..n - 1 {
                    out[j] = scale[j] * (line[j + 1] - line[j]);
                }
            },
        );
        let mut knots = self.knots.clone();
        knots[axis] = self.knots[axis].derivative();
        TensorSplineModel::new(knots, values, self.extents.clone())
    }

    /// All positive-width knot spans, in lexicographic axis order.
    pub fn enumerate_spans(&self) -> Vec<KnotSpan> {
        let per_axis: Vec<Vec<(usize, f64, f64)>> =
            self.knots.iter().map(|kv| kv.spans()).collect();
        let dims: Vec<usize> = per_axis.iter().map(|s| s.len()).collect();
        MultiIndexIter::new(&dims)
            .map(|idx| {
                let d = idx.len();
                let mut indices = Vec::with_capacity(d);
                let mut lower = Vec::with_capacity(d);
                let mut upper = Vec::with_capacity(d);
                for l in 0..d {
                    let (j, lo, hi) = per_axis[l][idx[l]];
                    indices.push(j);
                    lower.push(lo);
                    upper.push(hi);
                }
                KnotSpan {
                    indices,
                    lower,
                    upper,
                }
            })
            .collect()
    }

    /// Min and max of the control window governing the axis-aligned box
    /// `[lower, upper]`. The window is located through this model's own knot
    /// vectors, so the same box can be probed on a derivative model.
    pub fn window_bounds(&self, lower: &[f64], upper: &[f64]) -> (f64, f64) {
        let d = self.dim();
        let starts: Vec<usize> = (0..d)
            .map(|l| {
                let mid = 0.5 * (lower[l] + upper[l]);
                self.knots[l].find_span(mid) - self.degree(l)
            })
            .collect();
        let window: Vec<usize> = (0..d).map(|l| self.degree(l) + 1).collect();
        let mut mn = f64::INFINITY;
        let mut mx = f64::NEG_INFINITY;
        for offset in MultiIndexIter::new(&window) {
            let mut flat = 0usize;
            for l in 0..d {
                flat += (starts[l] + offset[l]) * self.control_strides[l];
            }
            let v = self.controls[flat];
            mn = mn.min(v);
            mx = mx.max(v);
        }
        (mn, mx)
    }

    /// Control-window start indices for a span of this model.
    pub fn window_start(&self, span: &KnotSpan) -> Vec<usize> {
        (0..self.dim())
            .map(|l| span.indices[l] - self.degree(l))
            .collect()
    }
}

/// Precomputed first- and second-derivative splines of a model, with the
/// second derivatives stored once per unordered axis pair.
#[derive(Debug, Clone)]
pub struct DerivativeModels {
    dim: usize,
    first: Vec<TensorSplineModel>,
    second: Vec<TensorSplineModel>,
}

impl DerivativeModels {
    pub fn new(model: &TensorSplineModel) -> Result<Self> {
        let d = model.dim();
        let first: Vec<TensorSplineModel> = (0..d)
            .map(|l| model.derivative_model(l))
            .collect::<Result<_>>()?;
        let mut second = Vec::with_capacity(d * (d + 1) / 2);
        for (l, f) in first.iter().enumerate() {
            for m in l..d {
                second.push(f.derivative_model(m)?);
            }
        }
        Ok(DerivativeModels {
            dim: d,
            first,
            second,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn first(&self, axis: usize) -> &TensorSplineModel {
        &self.first[axis]
    }

    pub fn second(&self, l: usize, m: usize) -> &TensorSplineModel {
        let (l, m) = if l <= m { (l, m) } else { (m, l) };
        // packed upper triangle: row l starts after rows of length d, d-1, ..
        &self.second[l * (2 * self.dim - l + 1) / 2 + (m - l)]
    }

    /// Analytic gradient in parameter coordinates.
    pub fn gradient(&self, u: &[f64]) -> Result<DVector<f64>> {
        let mut g = DVector::zeros(self.dim);
        for (l, model) in self.first.iter().enumerate() {
            g[l] = model.evaluate(u)?;
        }
        Ok(g)
    }

    /// Analytic gradient and Hessian. The Hessian is symmetric by
    /// construction: each unordered pair is evaluated once and mirrored.
    pub fn gradient_and_hessian(&self, u: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let d = self.dim;
        let g = self.gradient(u)?;
        let mut h = DMatrix::zeros(d, d);
        for l in 0..d {
            for m in l..d {
                let v = self.second(l, m).evaluate(u)?;
                h[(l, m)] = v;
                h[(m, l)] = v;
            }
        }
        Ok((g, h))
    }
}
