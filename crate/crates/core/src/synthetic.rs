//! Generators for ground-truth test fields, principally the scaled Schwefel
//! function whose critical points form an axis-aligned product grid.

use crate::error::Result;
use crate::field::GridScalarField;

/// Scaled Schwefel function: `f(x) = (418.9829 d - sum x_i sin(sqrt|x_i|)) / 2`.
pub fn schwefel(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let sum: f64 = x.iter().map(|&v| v * v.abs().sqrt().sin()).sum();
    0.5 * (418.9829 * d - sum)
}

/// Configuration for a Schwefel raster. `k` sets the nominal domain
/// `[-((k + 1/2) pi)^2, ((k + 1/2) pi)^2]` per axis.
#[derive(Debug, Clone)]
pub struct SchwefelSpec {
    pub dim: usize,
    pub k: u32,
    pub samples: Vec<usize>,
}

impl SchwefelSpec {
    pub fn domain(&self) -> (f64, f64) {
        let half = (self.k as f64 + 0.5) * std::f64::consts::PI;
        let edge = half * half;
        (-edge, edge)
    }
}

/// Uniform raster of Schwefel values over the configured nominal domain.
pub fn generate_field(spec: &SchwefelSpec) -> Result<GridScalarField> {
    schwefel_field(spec.domain(), &spec.samples)
}

/// Uniform raster of Schwefel values over an explicit per-axis domain.
pub fn schwefel_field(domain: (f64, f64), samples: &[usize]) -> Result<GridScalarField> {
    let extents = vec![domain; samples.len()];
    GridScalarField::from_fn(samples.to_vec(), extents, schwefel)
}

/// Built-in analytic fields with closed-form critical sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFieldKind {
    /// Gaussian bump centered in the domain; one interior maximum.
    Bump,
    /// Sum of squared offsets from the domain center; one interior minimum.
    Bowl,
    /// `(x0 - c0)^2 - (x1 - c1)^2`; one interior saddle (dim >= 2).
    Saddle,
    /// Linear ramp; no critical points anywhere.
    Ramp,
    /// Constant; degenerate everywhere.
    Const,
}

impl TestFieldKind {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "bump" => Some(TestFieldKind::Bump),
            "bowl" => Some(TestFieldKind::Bowl),
            "saddle" => Some(TestFieldKind::Saddle),
            "ramp" => Some(TestFieldKind::Ramp),
            "const" => Some(TestFieldKind::Const),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TestFieldKind::Bump => "bump",
            TestFieldKind::Bowl => "bowl",
            TestFieldKind::Saddle => "saddle",
            TestFieldKind::Ramp => "ramp",
            TestFieldKind::Const => "const",
        }
    }

    /// Value of the field at physical coordinates, given the extents it will
    /// be rastered over (centers and widths derive from them).
    pub fn evaluate(&self, x: &[f64], extents: &[(f64, f64)]) -> f64 {
        let center: Vec<f64> = extents.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
        let width: Vec<f64> = extents.iter().map(|&(lo, hi)| hi - lo).collect();
        match self {
            TestFieldKind::Bump => {
                let r2: f64 = x
                    .iter()
                    .zip(center.iter().zip(&width))
                    .map(|(&v, (&c, &w))| {
                        let s = (v - c) / (0.15 * w);
                        s * s
                    })
                    .sum();
                (-0.5 * r2).exp()
            }
            TestFieldKind::Bowl => x
                .iter()
                .zip(center.iter().zip(&width))
                .map(|(&v, (&c, &w))| {
                    let s = (v - c) / w;
                    s * s
                })
                .sum(),
            TestFieldKind::Saddle => {
                let s0 = (x[0] - center[0]) / width[0];
                let s1 = (x[1] - center[1]) / width[1];
                s0 * s0 - s1 * s1
            }
            TestFieldKind::Ramp => x
                .iter()
                .zip(&width)
                .enumerate()
                .map(|(l, (&v, &w))| (l + 1) as f64 * v / w)
                .sum(),
            TestFieldKind::Const => 1.0,
        }
    }
}

/// Raster one of the built-in fields.
pub fn test_field(
    kind: TestFieldKind,
    samples: &[usize],
    extents: &[(f64, f64)],
) -> Result<GridScalarField> {
    GridScalarField::from_fn(samples.to_vec(), extents.to_vec(), |x| {
        kind.evaluate(x, extents)
    })
}
