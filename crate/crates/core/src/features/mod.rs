//! Per-point feature providers and the `NFRM` binary matrix format used to
//! import features computed elsewhere.

mod descriptor;
mod nfrm;

use nalgebra::DMatrix;

use crate::geometry::PointSet;
use crate::{Error, Result};

pub use descriptor::{spectral_descriptor, BasisRef, DEFAULT_SCALES};
pub use nfrm::{load_basis, load_features, save_basis, save_features, save_matrix};

/// `n × d` per-point features tagged with their provider and shape.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: DMatrix<f64>,
    provider: String,
    shape_tag: u64,
}

impl FeatureMatrix {
    pub fn new(values: DMatrix<f64>, provider: impl Into<String>, shape_tag: u64) -> Result<Self> {
        if values.ncols() == 0 || values.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "feature matrix must be nonempty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            // Column-major storage.
            let n = values.nrows();
            return Err(Error::NonFiniteEntry { row: i % n, col: i / n });
        }
        Ok(Self {
            values,
            provider: provider.into(),
            shape_tag,
        })
    }

    /// Untagged features, mostly for tests and ad-hoc use.
    pub fn from_values(values: DMatrix<f64>) -> Result<Self> {
        Self::new(values, "raw", 0)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn provider(&self) -> &str {
        &self.provider
    }

    pub fn shape_tag(&self) -> u64 {
        self.shape_tag
    }

    /// Row `i` as a contiguous vector.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            values: self.values.select_rows(rows),
            provider: self.provider.clone(),
            shape_tag: self.shape_tag,
        }
    }
}

/// Raw coordinates as 3-dimensional features.
pub fn coordinate_features<S: PointSet + ?Sized>(shape: &S) -> FeatureMatrix {
    let pts = shape.points();
    let values = DMatrix::from_fn(pts.len(), 3, |r, c| pts[r][c]);
    FeatureMatrix {
        values,
        provider: "coordinates".into(),
        shape_tag: shape.shape_tag(),
    }
}
