//! Correspondence and registration quality metrics.
//!
//! Values are stored raw; scaling for display (geodesic errors ×100) is left
//! to the caller.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::geometry::{GeodesicMatrix, KdTree};
use crate::{Error, Result, Vec3};

/// Per-point normalized geodesic errors of a predicted map.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicError {
    pub per_point: Vec<f64>,
    pub mean: f64,
}

impl GeodesicError {
    /// Fraction of points with error ≤ each threshold.
    pub fn curve(&self, thresholds: &[f64]) -> Vec<(f64, f64)> {
        fraction_within(&self.per_point, thresholds)
    }
}

/// Geodesic distance between predicted and true images of every target
/// point, divided by `√area`.
pub fn geodesic_error(pred: &[usize], truth: &[usize], geo: &GeodesicMatrix, area: f64) -> Result<GeodesicError> {
    if pred.len() != truth.len() {
        return Err(Error::SizeMismatch(format!(
            "predicted map has {} entries, ground truth {}",
            pred.len(),
            truth.len()
        )));
    }
    if let Some(&i) = pred.iter().chain(truth).find(|&&i| i >= geo.len()) {
        return Err(Error::SizeMismatch(format!(
            "map index {i} outside the {}-vertex geodesic matrix",
            geo.len()
        )));
    }
    if !(area > 0.0) {
        return Err(Error::DegenerateGeometry(format!("surface area {area} is not positive")));
    }
    let norm = area.sqrt();
    let per_point: Vec<f64> = pred.iter().zip(truth).map(|(&p, &t)| geo.get(p, t) / norm).collect();
    let mean = mean(&per_point);
    Ok(GeodesicError { per_point, mean })
}

/// `count` evenly spaced thresholds on `[0, max]`.
pub fn uniform_thresholds(max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![max],
        _ => (0..count).map(|i| max * i as f64 / (count - 1) as f64).collect(),
    }
}

/// Average Euclidean error and recall at absolute thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct Recall {
    pub average_error: f64,
    /// `(threshold, fraction with distance ≤ threshold)`.
    pub recalls: Vec<(f64, f64)>,
}

pub fn euclidean_recall(pred: &[Vec3], truth: &[Vec3], thresholds: &[f64]) -> Result<Recall> {
    if pred.len() != truth.len() {
        return Err(Error::SizeMismatch(format!(
            "{} predicted points, {} ground-truth points",
            pred.len(),
            truth.len()
        )));
    }
    let d: Vec<f64> = pred.iter().zip(truth).map(|(a, b)| (a - b).norm()).collect();
    Ok(Recall {
        average_error: mean(&d),
        recalls: fraction_within(&d, thresholds),
    })
}

/// Nearest-neighbour distances between two point sets, both directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chamfer {
    /// Mean squared distance from each point of A to B.
    pub a_to_b_squared: f64,
    pub b_to_a_squared: f64,
    /// Mean distance from each point of A to B.
    pub a_to_b: f64,
    pub b_to_a: f64,
}

impl Chamfer {
    /// Sum of both mean squared distances.
    pub fn squared(&self) -> f64 {
        self.a_to_b_squared + self.b_to_a_squared
    }

    /// Sum of both mean distances.
    pub fn unsquared(&self) -> f64 {
        self.a_to_b + self.b_to_a
    }
}

pub fn chamfer_metric(a: &[Vec3], b: &[Vec3]) -> Result<Chamfer> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::SizeMismatch("Chamfer distance needs two nonempty sets".into()));
    }
    let (a_to_b_squared, a_to_b) = one_sided(a, b);
    let (b_to_a_squared, b_to_a) = one_sided(b, a);
    Ok(Chamfer {
        a_to_b_squared,
        b_to_a_squared,
        a_to_b,
        b_to_a,
    })
}

/// Mean squared and mean nearest-neighbour distance from `from` to `to`.
pub fn one_sided(from: &[Vec3], to: &[Vec3]) -> (f64, f64) {
    let tree = KdTree::from_points(to);
    let d2: Vec<f64> = from
        .par_iter()
        .map(|p| tree.nearest_point(p).expect("nonempty").1)
        .collect();
    let d: Vec<f64> = d2.iter().map(|x| x.sqrt()).collect();
    (mean(&d2), mean(&d))
}

/// Metrics of one evaluation, printable as `key=value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub geodesic: Option<GeodesicError>,
    /// `(threshold, fraction)` samples of the geodesic error curve.
    pub curve: Vec<(f64, f64)>,
    pub recall: Option<Recall>,
    pub chamfer: Option<Chamfer>,
}

impl EvalReport {
    /// One `key=value` per line. `geodesic_scale` multiplies geodesic errors
    /// and curve thresholds.
    pub fn to_key_values(&self, geodesic_scale: f64) -> String {
        let mut out = String::new();
        if let Some(g) = &self.geodesic {
            writeln!(out, "geodesic_error={}", g.mean * geodesic_scale).unwrap();
            writeln!(out, "points={}", g.per_point.len()).unwrap();
        }
        for (t, f) in &self.curve {
            writeln!(out, "geodesic_within[{}]={f}", t * geodesic_scale).unwrap();
        }
        if let Some(r) = &self.recall {
            writeln!(out, "average_error={}", r.average_error).unwrap();
            for (t, f) in &r.recalls {
                writeln!(out, "recall[{t}]={f}").unwrap();
            }
        }
        if let Some(c) = &self.chamfer {
            writeln!(out, "chamfer={}", c.unsquared()).unwrap();
            writeln!(out, "chamfer_squared={}", c.squared()).unwrap();
            writeln!(out, "chamfer_a_to_b={}", c.a_to_b).unwrap();
            writeln!(out, "chamfer_b_to_a={}", c.b_to_a).unwrap();
        }
        out
    }

    /// The error curve as CSV with a header row.
    pub fn curve_csv(&self, geodesic_scale: f64) -> String {
        let mut out = String::from("threshold,fraction\n");
        for (t, f) in &self.curve {
            writeln!(out, "{},{f}", t * geodesic_scale).unwrap();
        }
        out
    }
}

fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

fn fraction_within(d: &[f64], thresholds: &[f64]) -> Vec<(f64, f64)> {
    thresholds
        .iter()
        .map(|&t| {
            let n = d.iter().filter(|&&x| x <= t).count();
            (t, if d.is_empty() { 0.0 } else { n as f64 / d.len() as f64 })
        })
        .collect()
}
