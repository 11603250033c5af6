//! Per-span Newton extraction of isolated, non-degenerate critical points,
//! with Morse classification by Hessian eigenvalue signs.
//!
//! Each retained span is seeded with a uniform offset-half grid of initial
//! points. A run is abandoned when the Hessian determinant magnitude falls
//! below the degeneracy floor, when an iterate strays past the escape radius
//! or outside the domain, or when the iteration budget runs out. A converged
//! point is accepted only if it lies inside the span (half-open faces), off
//! the global domain boundary, and at least the duplicate radius away from
//! points already accepted in the same span.

use crate::dedup;
use crate::error::{Error, Result};
use crate::filter::{filter_spans_on, FiltrationResult};
use crate::spline::{DerivativeModels, KnotSpan, TensorSplineModel};
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use std::time::{Duration, Instant};

/// Newton iteration parameters.
#[derive(Debug, Clone)]
pub struct NewtonConfig {
    /// Gradient-norm convergence threshold.
    pub eps: f64,
    /// Iteration budget per initial point.
    pub max_iter: usize,
    /// Hessian-determinant degeneracy floor: abandon when `|det H| < delta`.
    pub delta: f64,
    /// Escape radius as a multiple of the span diagonal.
    pub xi_factor: f64,
    /// Duplicate radius in parameter coordinates, both within a span and for
    /// the global spatial-hash pass.
    pub tau: f64,
    /// Initial points per axis; `None` derives `degree + 1` from the model.
    pub init_per_axis: Option<usize>,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            eps: 1e-7,
            max_iter: 20,
            delta: 1e-13,
            xi_factor: 5.0,
            tau: 1e-4,
            init_per_axis: None,
        }
    }
}

impl NewtonConfig {
    pub fn init_count(&self, degree: usize) -> usize {
        self.init_per_axis.unwrap_or(degree + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = self.eps > 0.0
            && self.delta > 0.0
            && self.xi_factor > 0.0
            && self.tau > 0.0
            && self.max_iter >= 1
            && self.init_per_axis != Some(0);
        if positive {
            Ok(())
        } else {
            Err(Error::InvalidModel(
                "Newton configuration values must be positive and max_iter >= 1".into(),
            ))
        }
    }
}

/// Morse type by the number of negative Hessian eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MorseType {
    Minimum,
    Saddle(usize),
    Maximum,
}

impl MorseType {
    pub fn from_index(lambda: usize, dim: usize) -> MorseType {
        if lambda == 0 {
            MorseType::Minimum
        } else if lambda == dim {
            MorseType::Maximum
        } else {
            MorseType::Saddle(lambda)
        }
    }

    pub fn label(&self) -> String {
        match self {
            MorseType::Minimum => "min".to_string(),
            MorseType::Maximum => "max".to_string(),
            MorseType::Saddle(k) => format!("saddle{k}"),
        }
    }

    pub fn parse(s: &str) -> Option<MorseType> {
        match s {
            "min" => Some(MorseType::Minimum),
            "max" => Some(MorseType::Maximum),
            _ => s
                .strip_prefix("saddle")
                .and_then(|k| k.parse().ok())
                .map(MorseType::Saddle),
        }
    }
}

/// A converged, accepted critical point.
#[derive(Debug, Clone)]
pub struct CriticalPoint {
    /// Location in parameter coordinates, inside `[0,1]^d`.
    pub location: Vec<f64>,
    /// The same location in physical coordinates.
    pub physical: Vec<f64>,
    /// Field value at the point.
    pub value: f64,
    /// Gradient norm at convergence.
    pub grad_norm: f64,
    /// Hessian determinant at the point.
    pub det_hessian: f64,
    /// Number of negative Hessian eigenvalues.
    pub lambda: usize,
    pub morse_type: MorseType,
    /// Newton iterations spent reaching the point.
    pub iterations: usize,
}

/// Counters and timings for one extraction run.
#[derive(Debug, Clone, Default)]
pub struct ExtractionStats {
    pub spans_total: usize,
    pub spans_processed: usize,
    /// Newton steps over every initial point, converged or not.
    pub newton_iterations: u64,
    /// Initial points that ran out of iterations before converging.
    pub exhausted: u64,
    /// Initial points abandoned on the degeneracy floor.
    pub abandoned_degenerate: u64,
    /// Initial points abandoned past the escape radius or outside the domain.
    pub abandoned_escaped: u64,
    /// Mean iterations over the returned points.
    pub avg_iterations: f64,
    /// Mean gradient norm over the returned points.
    pub avg_grad_norm: f64,
    pub filtration_time: Duration,
    pub newton_time: Duration,
    pub dedup_time: Duration,
}

#[derive(Debug, Clone, Copy, Default)]
struct RunCounters {
    iterations: u64,
    exhausted: u64,
    degenerate: u64,
    escaped: u64,
}

/// Count negative eigenvalues of a symmetric Hessian and classify. Callers
/// are expected to have screened degenerate Hessians with the `delta` floor.
pub fn classify(hessian: &DMatrix<f64>, delta: f64) -> Result<(usize, MorseType)> {
    let d = hessian.nrows();
    let eigen = SymmetricEigen::new(hessian.clone());
    let det: f64 = eigen.eigenvalues.iter().product();
    if det.abs() < delta {
        return Err(Error::DegenerateHessian {
            det: det.abs(),
            floor: delta,
        });
    }
    let lambda = eigen.eigenvalues.iter().filter(|&&e| e < 0.0).count();
    Ok((lambda, MorseType::from_index(lambda, d)))
}

/// Newton extraction over a single span. Legal on any span; spans that the
/// filtration would skip simply return no points.
pub fn extract_in_span(
    span: &KnotSpan,
    model: &TensorSplineModel,
    derivs: &DerivativeModels,
    cfg: &NewtonConfig,
) -> Result<Vec<CriticalPoint>> {
    let (points, _) = extract_in_span_counted(span, model, derivs, cfg)?;
    Ok(points)
}

fn extract_in_span_counted(
    span: &KnotSpan,
    model: &TensorSplineModel,
    derivs: &DerivativeModels,
    cfg: &NewtonConfig,
) -> Result<(Vec<CriticalPoint>, RunCounters)> {
    cfg.validate()?;
    let d = model.dim();
    let center = span.center();
    let xi = cfg.xi_factor * span.diagonal();
    let max_degree = (0..d).map(|l| model.degree(l)).max().unwrap();
    let per_axis = cfg.init_count(max_degree);

    let mut accepted: Vec<CriticalPoint> = Vec::new();
    let mut counters = RunCounters::default();

    let mut start_index = vec![0usize; d];
    'starts: loop {
        // offset-half placement: cell centers of a uniform subdivision, so
        // span boundaries are never seeds
        let mut x: Vec<f64> = (0..d)
            .map(|l| {
                let w = span.upper[l] - span.lower[l];
                span.lower[l] + w * (start_index[l] as f64 + 0.5) / per_axis as f64
            })
            .collect();

        let mut i = 0;
        while i < cfg.max_iter {
            if !in_domain(&x) {
                counters.escaped += 1;
                break;
            }
            let (g, h) = derivs.gradient_and_hessian(&x)?;
            let lu = h.clone().lu();
            let det = lu.determinant();
            if det.abs() < cfg.delta {
                counters.degenerate += 1;
                break;
            }
            let Some(step) = lu.solve(&g) else {
                counters.degenerate += 1;
                break;
            };
            let next: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a - s).collect();
            counters.iterations += 1;
            i += 1;

            let dist_center: f64 = next
                .iter()
                .zip(&center)
                .map(|(a, c)| (a - c) * (a - c))
                .sum::<f64>()
                .sqrt();
            if dist_center > xi {
                counters.escaped += 1;
                break;
            }
            if !in_domain(&next) {
                counters.escaped += 1;
                break;
            }
            let grad = derivs.gradient(&next)?;
            let grad_norm = grad.norm();
            if grad_norm < cfg.eps {
                let separated = accepted
                    .iter()
                    .all(|cp| distance(&cp.location, &next) >= cfg.tau);
                if span.contains(&next) && separated && !on_domain_boundary(&next) {
                    let (_, h_final) = derivs.gradient_and_hessian(&next)?;
                    let det_final = h_final.clone().lu().determinant();
                    if det_final.abs() >= cfg.delta {
                        let (lambda, morse_type) = classify(&h_final, cfg.delta)?;
                        let value = model.evaluate(&next)?;
                        accepted.push(CriticalPoint {
                            physical: model.param_to_physical(&next),
                            location: next,
                            value,
                            grad_norm,
                            det_hessian: det_final,
                            lambda,
                            morse_type,
                            iterations: i,
                        });
                    }
                }
                break;
            }
            x = next;
            if i == cfg.max_iter {
                counters.exhausted += 1;
            }
        }

        // odometer over the start grid
        let mut l = d;
        loop {
            if l == 0 {
                break 'starts;
            }
            l -= 1;
            start_index[l] += 1;
            if start_index[l] < per_axis {
                break;
            }
            start_index[l] = 0;
        }
    }
    Ok((accepted, counters))
}

fn in_domain(u: &[f64]) -> bool {
    u.iter().all(|&v| (0.0..=1.0).contains(&v))
}

fn on_domain_boundary(u: &[f64]) -> bool {
    u.iter().any(|&v| v == 0.0 || v == 1.0)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// The full pipeline over a fitted model: span filtration, parallel per-span
/// Newton extraction, then global spatial-hash deduplication. The point list
/// is sorted lexicographically by location before deduplication, so the
/// output is deterministic for a fixed configuration regardless of thread
/// count.
pub fn extract_all(
    model: &TensorSplineModel,
    cfg: &NewtonConfig,
) -> Result<(Vec<CriticalPoint>, FiltrationResult, ExtractionStats)> {
    cfg.validate()?;
    let derivs = DerivativeModels::new(model)?;
    let spans = model.enumerate_spans();

    let t0 = Instant::now();
    let filtration = filter_spans_on(&spans, model, &derivs);
    let filtration_time = t0.elapsed();

    let t1 = Instant::now();
    let per_span: Vec<(Vec<CriticalPoint>, RunCounters)> = filtration
        .retained
        .par_iter()
        .map(|&i| extract_in_span_counted(&spans[i], model, &derivs, cfg))
        .collect::<Result<_>>()?;
    let newton_time = t1.elapsed();

    let mut counters = RunCounters::default();
    let mut points: Vec<CriticalPoint> = Vec::new();
    for (pts, c) in per_span {
        counters.iterations += c.iterations;
        counters.exhausted += c.exhausted;
        counters.degenerate += c.degenerate;
        counters.escaped += c.escaped;
        points.extend(pts);
    }
    points.sort_by(|a, b| a.location.partial_cmp(&b.location).unwrap());

    let t2 = Instant::now();
    let locations: Vec<&[f64]> = points.iter().map(|p| p.location.as_slice()).collect();
    let keep = dedup::dedup_indices(&locations, cfg.tau);
    let mut survivors = Vec::with_capacity(keep.len());
    let mut take = keep.into_iter().peekable();
    for (i, p) in points.into_iter().enumerate() {
        if take.peek() == Some(&i) {
            survivors.push(p);
            take.next();
        }
    }
    let dedup_time = t2.elapsed();

    let count = survivors.len() as f64;
    let stats = ExtractionStats {
        spans_total: filtration.total,
        spans_processed: filtration.retained.len(),
        newton_iterations: counters.iterations,
        exhausted: counters.exhausted,
        abandoned_degenerate: counters.degenerate,
        abandoned_escaped: counters.escaped,
        avg_iterations: if survivors.is_empty() {
            0.0
        } else {
            survivors.iter().map(|p| p.iterations as f64).sum::<f64>() / count
        },
        avg_grad_norm: if survivors.is_empty() {
            0.0
        } else {
            survivors.iter().map(|p| p.grad_norm).sum::<f64>() / count
        },
        filtration_time,
        newton_time,
        dedup_time,
    };
    Ok((survivors, filtration, stats))
}
