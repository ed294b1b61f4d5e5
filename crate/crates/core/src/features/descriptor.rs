use nalgebra::DMatrix;

use super::FeatureMatrix;
use crate::spectral::{Embedding, SpectralBasis, TruncatedBasis};

/// Default number of diffusion time scales.
pub const DEFAULT_SCALES: usize = 16;

/// Either kind of basis. Descriptors of a truncated basis are the parent's
/// descriptors restricted to the selected rows, so they share normalization.
#[derive(Clone, Copy)]
pub enum BasisRef<'a> {
    Full(&'a SpectralBasis),
    Truncated(&'a TruncatedBasis),
}

impl<'a> From<&'a SpectralBasis> for BasisRef<'a> {
    fn from(b: &'a SpectralBasis) -> Self {
        BasisRef::Full(b)
    }
}

impl<'a> From<&'a TruncatedBasis> for BasisRef<'a> {
    fn from(b: &'a TruncatedBasis) -> Self {
        BasisRef::Truncated(b)
    }
}

/// Heat-kernel signature: `Σ_i exp(−μ_i t) φ_i(x)²` at `n_scales`
/// log-spaced times in `[4 ln 10 / μ_{k−1}, 4 ln 10 / μ_1]`, each column
/// scaled to unit mass-weighted norm.
pub fn spectral_descriptor<'a>(basis: impl Into<BasisRef<'a>>, n_scales: usize) -> FeatureMatrix {
    match basis.into() {
        BasisRef::Full(b) => full_descriptor(b, n_scales),
        BasisRef::Truncated(t) => full_descriptor(t.parent(), n_scales).select_rows(t.selection()),
    }
}

fn diffusion_times(mu: &[f64], n_scales: usize) -> Vec<f64> {
    let k = mu.len();
    if k < 2 || mu[1] <= 0.0 {
        return vec![1.0; n_scales];
    }
    let c = 4.0 * 10f64.ln();
    let (lo, hi) = ((c / mu[k - 1]).ln(), (c / mu[1]).ln());
    if n_scales == 1 {
        return vec![(0.5 * (lo + hi)).exp()];
    }
    (0..n_scales)
        .map(|s| (lo + (hi - lo) * s as f64 / (n_scales - 1) as f64).exp())
        .collect()
}

fn full_descriptor(b: &SpectralBasis, n_scales: usize) -> FeatureMatrix {
    let n_scales = n_scales.max(1);
    let phi = b.phi();
    let mu = b.eigenvalues();
    let times = diffusion_times(mu, n_scales);
    let mut values = DMatrix::zeros(phi.nrows(), n_scales);
    for (s, &t) in times.iter().enumerate() {
        let decay: Vec<f64> = mu.iter().map(|m| (-m.max(0.0) * t).exp()).collect();
        for x in 0..phi.nrows() {
            values[(x, s)] = decay
                .iter()
                .enumerate()
                .map(|(i, d)| d * phi[(x, i)] * phi[(x, i)])
                .sum();
        }
        let norm: f64 = (0..phi.nrows())
            .map(|x| b.mass()[x] * values[(x, s)] * values[(x, s)])
            .sum::<f64>()
            .sqrt();
        if norm > 0.0 {
            values.column_mut(s).scale_mut(1.0 / norm);
        }
    }
    FeatureMatrix::new(values, "spectral", b.mesh_tag()).expect("descriptor entries are finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defgraph::rodrigues;
    use crate::geometry::{primitives, PointCloud};
    use crate::spectral::{eigenbasis, truncate_basis};
    use crate::Vec3;
    use std::sync::Arc;

    #[test]
    fn rigid_motion_invariance() {
        let m = primitives::blob(2, 0.3);
        let r = rodrigues(&Vec3::new(0.4, 1.0, -0.3));
        let moved = m
            .with_vertices(m.vertices().iter().map(|p| r * p + Vec3::new(2.0, 1.0, 0.0)).collect())
            .unwrap();
        let a = spectral_descriptor(&eigenbasis(&m, 12).unwrap(), DEFAULT_SCALES);
        let b = spectral_descriptor(&eigenbasis(&moved, 12).unwrap(), DEFAULT_SCALES);
        assert!((a.values() - b.values()).amax() < 1e-6);
    }

    #[test]
    fn constant_basis_gives_equal_rows() {
        let m = primitives::blob(1, 0.3);
        let f = spectral_descriptor(&eigenbasis(&m, 1).unwrap(), 4);
        for r in 1..f.rows() {
            assert!((f.row(r)[0] - f.row(0)[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn column_sign_flips_do_not_matter() {
        let m = primitives::blob(2, 0.3);
        let b = eigenbasis(&m, 10).unwrap();
        let mut phi = b.phi().clone();
        for c in (1..10).step_by(2) {
            phi.column_mut(c).neg_mut();
        }
        let flipped =
            SpectralBasis::from_parts(phi, b.eigenvalues().to_vec(), b.mass().to_vec(), 0).unwrap();
        let (x, y) = (spectral_descriptor(&b, 8), spectral_descriptor(&flipped, 8));
        assert!((x.values() - y.values()).amax() < 1e-14);
    }

    #[test]
    fn truncated_rows_match_parent() {
        let m = primitives::blob(2, 0.3);
        let b = Arc::new(eigenbasis(&m, 10).unwrap());
        let sel = vec![5, 0, 17, 100];
        let cloud = PointCloud::from_mesh_subset(&m, &sel).unwrap();
        let t = truncate_basis(&b, &cloud).unwrap();
        let full = spectral_descriptor(b.as_ref(), 6);
        let part = spectral_descriptor(&t, 6);
        for (r, &s) in sel.iter().enumerate() {
            assert_eq!(part.row(r), full.row(s));
        }
    }
}
