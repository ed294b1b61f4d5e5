use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::features::FeatureMatrix;
use crate::geometry::KdTree;
use crate::{Error, Result};

/// Correspondence from the points of one shape (rows) to the points of
/// another (columns / indices).
#[derive(Debug, Clone, PartialEq)]
pub enum PointMap {
    /// `indices[i]` is the image of row `i`.
    Hard { indices: Vec<usize>, image_len: usize },
    /// Row-stochastic `rows × image_len` matrix.
    Soft(DMatrix<f64>),
}

/// How `pointmap_from_features` turns feature distances into a map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MapMode {
    /// Nearest neighbour, ties to the lowest index.
    Hard,
    /// Row-wise softmax of `−α · distance`.
    Soft { temperature: f64 },
}

impl PointMap {
    pub fn hard(indices: Vec<usize>, image_len: usize) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= image_len) {
            return Err(Error::SizeMismatch(format!(
                "map index {bad} out of range for {image_len} points"
            )));
        }
        Ok(PointMap::Hard { indices, image_len })
    }

    pub fn identity(n: usize) -> Self {
        PointMap::Hard {
            indices: (0..n).collect(),
            image_len: n,
        }
    }

    pub fn soft(matrix: DMatrix<f64>) -> Result<Self> {
        for (r, row) in matrix.row_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::SizeMismatch(format!("soft map row {r} has a negative or non-finite entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::SizeMismatch(format!("soft map row {r} sums to {s}")));
            }
        }
        Ok(PointMap::Soft(matrix))
    }

    /// Number of mapped points.
    pub fn rows(&self) -> usize {
        match self {
            PointMap::Hard { indices, .. } => indices.len(),
            PointMap::Soft(m) => m.nrows(),
        }
    }

    /// Number of points in the image shape.
    pub fn image_len(&self) -> usize {
        match self {
            PointMap::Hard { image_len, .. } => *image_len,
            PointMap::Soft(m) => m.ncols(),
        }
    }

    pub fn as_hard(&self) -> Option<&[usize]> {
        match self {
            PointMap::Hard { indices, .. } => Some(indices),
            PointMap::Soft(_) => None,
        }
    }

    /// `Π X` for a matrix `X` with one row per image point.
    pub fn transfer(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.image_len());
        match self {
            PointMap::Hard { indices, .. } => x.select_rows(indices),
            PointMap::Soft(m) => m * x,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            PointMap::Hard { indices, image_len } => {
                let mut m = DMatrix::zeros(indices.len(), *image_len);
                for (r, &c) in indices.iter().enumerate() {
                    m[(r, c)] = 1.0;
                }
                m
            }
            PointMap::Soft(m) => m.clone(),
        }
    }

    /// Restriction to a subset of rows.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        match self {
            PointMap::Hard { indices, image_len } => PointMap::Hard {
                indices: rows.iter().map(|&r| indices[r]).collect(),
                image_len: *image_len,
            },
            PointMap::Soft(m) => PointMap::Soft(m.select_rows(rows)),
        }
    }
}

/// Map from the rows of `target` to the rows of `source` by feature
/// similarity.
pub fn pointmap_from_features(
    source: &FeatureMatrix,
    target: &FeatureMatrix,
    mode: MapMode,
) -> Result<PointMap> {
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch(format!(
            "feature dimensions differ: {} vs {}",
            source.dim(),
            target.dim()
        )));
    }
    let (fs, ft) = (source.values(), target.values());
    match mode {
        MapMode::Hard => {
            let d = fs.ncols();
            let data: Vec<f64> = (0..fs.nrows()).flat_map(|r| (0..d).map(move |c| fs[(r, c)])).collect();
            let tree = KdTree::new(data, d);
            let indices = (0..ft.nrows())
                .into_par_iter()
                .map(|r| {
                    let q: Vec<f64> = ft.row(r).iter().copied().collect();
                    tree.nearest(&q).expect("source features nonempty").0
                })
                .collect();
            Ok(PointMap::Hard {
                indices,
                image_len: fs.nrows(),
            })
        }
        MapMode::Soft { temperature } => {
            let rows: Vec<Vec<f64>> = (0..ft.nrows())
                .into_par_iter()
                .map(|r| {
                    let logits: Vec<f64> = (0..fs.nrows())
                        .map(|c| -temperature * (ft.row(r) - fs.row(c)).norm())
                        .collect();
                    softmax(&logits)
                })
                .collect();
            Ok(PointMap::Soft(DMatrix::from_fn(ft.nrows(), fs.nrows(), |r, c| rows[r][c])))
        }
    }
}

/// Numerically stable softmax.
fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}
