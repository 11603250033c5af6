//! Convex-hull span filtration: a span is discarded when some partial
//! derivative's control window excludes zero, because the derivative spline
//! then cannot vanish anywhere in the span.
//!
//! Control values are scalars, so the convex-hull-contains-zero test is the
//! interval test `min <= 0 <= max`. A control value exactly at zero retains
//! the span.

use crate::spline::{DerivativeModels, KnotSpan, TensorSplineModel};
use rayon::prelude::*;

/// Outcome of filtering every span of a model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiltrationResult {
    /// Total number of positive-width spans.
    pub total: usize,
    /// Indices (into the model's span enumeration) that survived.
    pub retained: Vec<usize>,
    /// Number of spans discarded.
    pub skipped: usize,
    /// Spans discarded per axis, attributed to the first excluding axis.
    pub eliminated_by_axis: Vec<usize>,
}

impl FiltrationResult {
    pub fn evaluated(&self) -> usize {
        self.retained.len()
    }

    pub fn evaluated_pct(&self) -> f64 {
        100.0 * self.retained.len() as f64 / self.total as f64
    }

    pub fn skipped_pct(&self) -> f64 {
        100.0 * self.skipped as f64 / self.total as f64
    }
}

/// Filter every span of the model. Convenience wrapper that enumerates the
/// spans itself; the indices in the result refer to that enumeration order.
pub fn filter_spans(model: &TensorSplineModel, derivs: &DerivativeModels) -> FiltrationResult {
    filter_spans_on(&model.enumerate_spans(), model, derivs)
}

/// Filter an explicit span list. Span tests are independent and run under
/// rayon's work-stealing pool; the result is assembled in span order so the
/// outcome does not depend on thread count.
pub fn filter_spans_on(
    spans: &[KnotSpan],
    model: &TensorSplineModel,
    derivs: &DerivativeModels,
) -> FiltrationResult {
    let d = model.dim();
    let verdicts: Vec<Option<usize>> = spans
        .par_iter()
        .map(|span| excluding_axis(span, derivs))
        .collect();

    let mut retained = Vec::new();
    let mut eliminated_by_axis = vec![0usize; d];
    for (i, verdict) in verdicts.iter().enumerate() {
        match verdict {
            None => retained.push(i),
            Some(axis) => eliminated_by_axis[*axis] += 1,
        }
    }
    let skipped = spans.len() - retained.len();
    FiltrationResult {
        total: spans.len(),
        retained,
        skipped,
        eliminated_by_axis,
    }
}

/// First axis whose derivative control window excludes zero over the span,
/// if any. `None` means the span must be searched.
fn excluding_axis(span: &KnotSpan, derivs: &DerivativeModels) -> Option<usize> {
    for l in 0..derivs.dim() {
        let (mn, mx) = derivs.first(l).window_bounds(&span.lower, &span.upper);
        if mn > 0.0 || mx < 0.0 {
            return Some(l);
        }
    }
    None
}
