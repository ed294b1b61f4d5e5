use std::sync::Arc;

use nalgebra::DMatrix;

use super::eigen::{smallest_eigenpairs, EigenOptions};
use super::laplacian::cotan_laplacian;
use crate::geometry::{Mesh, PointCloud, PointSet};
use crate::{Error, Result};

/// Default number of basis functions.
pub const DEFAULT_K: usize = 30;

/// Read access shared by full and truncated spectral embeddings.
pub trait Embedding {
    /// Rows are points, columns basis functions.
    fn phi(&self) -> &DMatrix<f64>;
    /// Laplacian eigenvalues, ascending.
    fn eigenvalues(&self) -> &[f64];
    /// Per-row least-squares weights: vertex masses for a full basis, `None`
    /// (unweighted) for a truncated one.
    fn weights(&self) -> Option<&[f64]>;
    /// Identity tag of the mesh the basis was computed on.
    fn tag(&self) -> u64;

    fn k(&self) -> usize {
        self.phi().ncols()
    }

    fn rows(&self) -> usize {
        self.phi().nrows()
    }
}

/// First `k` Laplace–Beltrami eigenpairs of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    phi: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    mass: Vec<f64>,
    mesh_tag: u64,
}

impl SpectralBasis {
    /// Assembles a basis from precomputed parts (e.g. read from disk).
    pub fn from_parts(
        phi: DMatrix<f64>,
        eigenvalues: Vec<f64>,
        mass: Vec<f64>,
        mesh_tag: u64,
    ) -> Result<Self> {
        if phi.ncols() != eigenvalues.len() || phi.nrows() != mass.len() {
            return Err(Error::DimensionMismatch(format!(
                "phi {}x{}, {} eigenvalues, {} masses",
                phi.nrows(),
                phi.ncols(),
                eigenvalues.len(),
                mass.len()
            )));
        }
        Ok(Self {
            phi,
            eigenvalues,
            mass,
            mesh_tag,
        })
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn mesh_tag(&self) -> u64 {
        self.mesh_tag
    }

    /// Largest `|ΦᵀMΦ - I|` entry.
    pub fn orthonormality_error(&self) -> f64 {
        let k = self.k();
        let mut g = DMatrix::zeros(k, k);
        for a in 0..k {
            for b in a..k {
                let v: f64 = (0..self.rows())
                    .map(|r| self.phi[(r, a)] * self.mass[r] * self.phi[(r, b)])
                    .sum();
                g[(a, b)] = v;
                g[(b, a)] = v;
            }
        }
        (g - DMatrix::identity(k, k)).amax()
    }
}

impl Embedding for SpectralBasis {
    fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }
    fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
    fn weights(&self) -> Option<&[f64]> {
        Some(&self.mass)
    }
    fn tag(&self) -> u64 {
        self.mesh_tag
    }
}

/// Computes `k` eigenpairs with the default solver selection.
pub fn eigenbasis(mesh: &Mesh, k: usize) -> Result<SpectralBasis> {
    eigenbasis_with(mesh, k, &EigenOptions::default())
}

pub fn eigenbasis_with(mesh: &Mesh, k: usize, opts: &EigenOptions) -> Result<SpectralBasis> {
    let n = mesh.vertex_count();
    if k >= n {
        return Err(Error::KTooLarge { k, n });
    }
    if k == 0 {
        return Err(Error::InvalidConfig("basis size k must be at least 1".into()));
    }
    if mesh.component_count() > 1 {
        log::warn!("eigenbasis requested on a mesh with several components");
    }
    let (l, mass) = cotan_laplacian(mesh)?;
    let (vals, mut phi) = smallest_eigenpairs(&l, &mass, k, opts)?;
    fix_signs(&mut phi);
    let mu_max = vals.last().copied().unwrap_or(0.0).abs();
    for w in vals.windows(2) {
        if (w[1] - w[0]).abs() < 1e-6 * mu_max {
            log::warn!(
                "near-repeated Laplacian eigenvalues {} / {}: eigenvector order and sign may be unstable",
                w[0],
                w[1]
            );
        }
    }
    Ok(SpectralBasis {
        phi,
        eigenvalues: vals,
        mass,
        mesh_tag: mesh.fingerprint(),
    })
}

/// Makes the first clearly nonzero entry of every column positive.
fn fix_signs(phi: &mut DMatrix<f64>) {
    for mut col in phi.column_iter_mut() {
        let amax = col.amax();
        if let Some(&v) = col.iter().find(|v| v.abs() > 1e-8 * amax) {
            if v < 0.0 {
                col.neg_mut();
            }
        }
    }
}

/// Rows of a parent basis selected at the points of a partial cloud.
#[derive(Debug, Clone)]
pub struct TruncatedBasis {
    parent: Arc<SpectralBasis>,
    phi: DMatrix<f64>,
    selection: Vec<usize>,
}

impl TruncatedBasis {
    pub fn new(parent: Arc<SpectralBasis>, selection: Vec<usize>) -> Result<Self> {
        let n = parent.rows();
        if let Some(&bad) = selection.iter().find(|&&i| i >= n) {
            return Err(Error::SizeMismatch(format!(
                "selection index {bad} out of range for a {n}-row basis"
            )));
        }
        let phi = parent.phi.select_rows(selection.iter());
        Ok(Self {
            parent,
            phi,
            selection,
        })
    }

    pub fn parent(&self) -> &SpectralBasis {
        &self.parent
    }

    pub fn selection(&self) -> &[usize] {
        &self.selection
    }
}

impl Embedding for TruncatedBasis {
    fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }
    fn eigenvalues(&self) -> &[f64] {
        &self.parent.eigenvalues
    }
    fn weights(&self) -> Option<&[f64]> {
        None
    }
    fn tag(&self) -> u64 {
        self.parent.mesh_tag
    }
}

/// Spatially truncated embedding of a partial cloud: pure row selection by
/// the cloud's provenance, no recomputation.
pub fn truncate_basis(basis: &Arc<SpectralBasis>, cloud: &PointCloud) -> Result<TruncatedBasis> {
    let prov = cloud.provenance().ok_or(Error::MissingProvenance)?;
    debug_assert_eq!(prov.len(), cloud.len());
    TruncatedBasis::new(Arc::clone(basis), prov.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defgraph::rodrigues;
    use crate::geometry::primitives;
    use crate::spectral::{cotan_laplacian, EigenSolver};
    use crate::Vec3;
    use proptest::prelude::*;

    #[test]
    fn constant_first_eigenfunction() {
        let m = primitives::blob(2, 0.3);
        let b = eigenbasis(&m, 8).unwrap();
        assert!(b.eigenvalues()[0].abs() < 1e-8);
        let c0 = b.phi().column(0);
        assert!(c0.max() - c0.min() < 1e-8);
        assert!(c0[0] > 0.0);
        assert!(b.orthonormality_error() < 1e-6);
    }

    #[test]
    fn k_equal_to_n_is_rejected() {
        let m = primitives::tetrahedron();
        assert!(matches!(eigenbasis(&m, 4), Err(Error::KTooLarge { k: 4, n: 4 })));
    }

    #[test]
    fn residuals_and_dirichlet_energy() {
        let m = primitives::blob(3, 0.3);
        let opts = EigenOptions {
            solver: EigenSolver::ShiftInvert,
            ..Default::default()
        };
        let b = eigenbasis_with(&m, 12, &opts).unwrap();
        let (l, mass) = cotan_laplacian(&m).unwrap();
        let mu_max = b.eigenvalues()[11];
        for (i, &mu) in b.eigenvalues().iter().enumerate() {
            let phi: Vec<f64> = b.phi().column(i).iter().copied().collect();
            let mut lphi = vec![0.0; phi.len()];
            l.mul_vec(&phi, &mut lphi);
            let energy: f64 = phi.iter().zip(&lphi).map(|(a, b)| a * b).sum();
            let mnorm: f64 = phi.iter().zip(&mass).map(|(a, m)| a * a * m).sum();
            assert!((energy - mu * mnorm).abs() <= 1e-6 * mu_max, "{i}");
            let res: f64 = lphi
                .iter()
                .zip(&phi)
                .zip(&mass)
                .map(|((lp, p), m)| (lp - mu * m * p).powi(2) / m)
                .sum::<f64>()
                .sqrt();
            assert!(res <= 1e-6 * mu_max, "{i}: {res}");
        }
    }

    #[test]
    fn truncation_examples() {
        let m = primitives::blob(2, 0.3);
        let b = Arc::new(eigenbasis(&m, 6).unwrap());
        let all: Vec<usize> = (0..m.vertex_count()).collect();
        let full = truncate_basis(&b, &PointCloud::from_mesh_subset(&m, &all).unwrap()).unwrap();
        assert_eq!(full.phi(), b.phi());
        let one = truncate_basis(&b, &PointCloud::from_mesh_subset(&m, &[3]).unwrap()).unwrap();
        assert_eq!(one.phi().row(0), b.phi().row(3));
        assert!(matches!(
            truncate_basis(&b, &PointCloud::new(m.vertices().to_vec()).unwrap()),
            Err(Error::MissingProvenance)
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn random_half_rows_are_bit_identical(seed in 0u64..1000) {
            use rand::SeedableRng;
            let m = primitives::blob(2, 0.3);
            let b = Arc::new(eigenbasis(&m, 6).unwrap());
            let n = m.vertex_count();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let sel = rand::seq::index::sample(&mut rng, n, n / 2).into_vec();
            let t = truncate_basis(&b, &PointCloud::from_mesh_subset(&m, &sel).unwrap()).unwrap();
            for (r, &s) in sel.iter().enumerate() {
                for c in 0..6 {
                    prop_assert_eq!(t.phi()[(r, c)].to_bits(), b.phi()[(s, c)].to_bits());
                }
            }
        }

        #[test]
        fn rigid_motion_keeps_spectrum(x in -3.0..3.0f64, y in -3.0..3.0f64, z in -3.0..3.0f64, t in -5.0..5.0f64) {
            let m = primitives::blob(2, 0.3);
            let r = rodrigues(&Vec3::new(x, y, z));
            let moved = m.with_vertices(m.vertices().iter().map(|p| r * p + Vec3::new(t, -t, 0.5)).collect()).unwrap();
            let (l0, m0) = cotan_laplacian(&m).unwrap();
            let (l1, m1) = cotan_laplacian(&moved).unwrap();
            prop_assert!((l0.to_dense() - l1.to_dense()).amax() < 1e-9);
            prop_assert!(m0.iter().zip(&m1).all(|(a, b)| (a - b).abs() < 1e-9));
            let (a, b) = (eigenbasis(&m, 8).unwrap(), eigenbasis(&moved, 8).unwrap());
            for (u, v) in a.eigenvalues().iter().zip(b.eigenvalues()) {
                prop_assert!((u - v).abs() < 1e-9 * (1.0 + u.abs()));
            }
        }

        #[test]
        fn scaling_divides_eigenvalues(s in 0.2..5.0f64) {
            let m = primitives::blob(2, 0.3);
            let scaled = m.with_vertices(m.vertices().iter().map(|p| p * s).collect()).unwrap();
            let (a, b) = (eigenbasis(&m, 8).unwrap(), eigenbasis(&scaled, 8).unwrap());
            for (u, v) in a.eigenvalues().iter().zip(b.eigenvalues()).skip(1) {
                prop_assert!((v * s * s - u).abs() <= 1e-6 * u);
            }
        }
    }
}
