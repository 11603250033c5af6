//! Axis-aligned rasters of scalar samples: the input to fitting and to the
//! piecewise-linear reference extractor.

use crate::error::{Error, Result};
use crate::lattice::{ravel, strides, MultiIndexIter};

pub(crate) fn valid_extent(lo: f64, hi: f64) -> bool {
    lo.is_finite() && hi.is_finite() && lo < hi
}

/// A d-dimensional grid of scalar samples with per-axis physical extents.
/// Values are stored row-major with the last axis fastest. Sample `i` along
/// an axis with `m` samples sits at parameter `i / (m - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridScalarField {
    dims: Vec<usize>,
    extents: Vec<(f64, f64)>,
    values: Vec<f64>,
}

impl GridScalarField {
    pub fn new(dims: Vec<usize>, extents: Vec<(f64, f64)>, values: Vec<f64>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidField("dimension must be positive".into()));
        }
        if dims.iter().any(|&m| m < 2) {
            return Err(Error::InvalidField(
                "every axis needs at least 2 samples".into(),
            ));
        }
        if extents.len() != dims.len() {
            return Err(Error::InvalidField(format!(
                "{} extents for {} axes",
                extents.len(),
                dims.len()
            )));
        }
        if !extents.iter().all(|&(lo, hi)| valid_extent(lo, hi)) {
            return Err(Error::InvalidField(
                "physical extent must have positive width per axis".into(),
            ));
        }
        let expected: usize = dims.iter().product();
        if values.len() != expected {
            return Err(Error::InvalidField(format!(
                "expected {} values, got {}",
                expected,
                values.len()
            )));
        }
        Ok(GridScalarField {
            dims,
            extents,
            values,
        })
    }

    /// Fill a raster by evaluating `f` at every sample's physical coordinates.
    pub fn from_fn(
        dims: Vec<usize>,
        extents: Vec<(f64, f64)>,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let count: usize = dims.iter().product();
        let mut values = Vec::with_capacity(count);
        for idx in MultiIndexIter::new(&dims) {
            let x: Vec<f64> = idx
                .iter()
                .zip(dims.iter().zip(&extents))
                .map(|(&i, (&m, &(lo, hi)))| lo + (hi - lo) * i as f64 / (m - 1) as f64)
                .collect();
            values.push(f(&x));
        }
        GridScalarField::new(dims, extents, values)
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn extents(&self) -> &[(f64, f64)] {
        &self.extents
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, index: &[usize]) -> f64 {
        self.values[ravel(index, &strides(&self.dims))]
    }

    /// Parameter-space coordinate of sample `i` along `axis`.
    pub fn param_coord(&self, axis: usize, i: usize) -> f64 {
        i as f64 / (self.dims[axis] - 1) as f64
    }

    /// Physical coordinate of sample `i` along `axis`.
    pub fn physical_coord(&self, axis: usize, i: usize) -> f64 {
        let (lo, hi) = self.extents[axis];
        lo + (hi - lo) * self.param_coord(axis, i)
    }

    /// Grid cell size per axis in parameter space: `1 / (m - 1)`.
    pub fn cell_sizes_param(&self) -> Vec<f64> {
        self.dims.iter().map(|&m| 1.0 / (m - 1) as f64).collect()
    }

    /// Grid cell size per axis in physical units.
    pub fn cell_sizes_physical(&self) -> Vec<f64> {
        self.dims
            .iter()
            .zip(&self.extents)
            .map(|(&m, &(lo, hi))| (hi - lo) / (m - 1) as f64)
            .collect()
    }
}
