//! Tensor-product B-spline models of gridded scalar data, and extraction of
//! their critical points directly in the continuous domain.
//!
//! The pipeline has three stages: least-squares fitting of a
//! [`TensorSplineModel`] to a [`GridScalarField`], convex-hull span filtration
//! to discard regions that cannot contain a critical point, and per-span
//! Newton iteration with analytic gradients and Hessians followed by
//! spatial-hash duplicate removal. A piecewise-linear (Banchoff lower/upper
//! link) extractor on sampled grids and alignment metrics are included for
//! cross-validation.

pub mod dedup;
pub mod error;
pub mod extract;
pub mod field;
pub mod filter;
pub mod fit;
pub mod io;
mod lattice;
pub mod metrics;
pub mod pl;
pub mod spline;
pub mod synthetic;

pub use error::{Error, Result};
pub use extract::{classify, extract_all, extract_in_span, CriticalPoint, ExtractionStats, MorseType, NewtonConfig};
pub use field::GridScalarField;
pub use filter::{filter_spans, FiltrationResult};
pub use fit::{fit_adaptive, fit_fixed, fit_with_knots, FitReport};
pub use spline::{DerivativeModels, KnotSpan, KnotVector, TensorSplineModel};
