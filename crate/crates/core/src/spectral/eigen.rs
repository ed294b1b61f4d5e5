//! Smallest eigenpairs of the generalized problem `L φ = μ M φ`.
//!
//! Two routes: a dense solve of `M^{-1/2} L M^{-1/2}` (exact up to LAPACK-style
//! accuracy, O(N³)) and shift-invert block subspace iteration around a small
//! negative shift with Rayleigh–Ritz extraction, which only needs sparse
//! factorizations.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::envelope::EnvelopeCholesky;
use super::laplacian::SparseSym;
use crate::{Error, Result};

/// Below this size `EigenSolver::Auto` uses the dense route.
pub const DENSE_LIMIT: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenSolver {
    #[default]
    Auto,
    Dense,
    ShiftInvert,
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    pub solver: EigenSolver,
    /// Spectral shift σ for `(L - σM)⁻¹ M`.
    pub shift: f64,
    /// Residual tolerance relative to the largest wanted eigenvalue.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            solver: EigenSolver::Auto,
            shift: -1e-8,
            tolerance: 1e-10,
            max_iterations: 600,
        }
    }
}

/// Eigenvalues (ascending) and M-orthonormal eigenvectors (columns).
pub(crate) fn smallest_eigenpairs(
    l: &SparseSym,
    mass: &[f64],
    k: usize,
    opts: &EigenOptions,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = l.dim();
    let dense = match opts.solver {
        EigenSolver::Dense => true,
        EigenSolver::ShiftInvert => false,
        EigenSolver::Auto => n <= DENSE_LIMIT,
    };
    if dense {
        Ok(dense_generalized(&l.to_dense(), mass, k))
    } else {
        shift_invert(l, mass, k, opts)
    }
}

/// Dense generalized eigensolve with diagonal mass. Also serves as the test
/// oracle for the iterative route.
pub fn dense_generalized(l: &DMatrix<f64>, mass: &[f64], k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let n = l.nrows();
    let isq: Vec<f64> = mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut a = l.clone();
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] *= isq[i] * isq[j];
        }
    }
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let vals = idx[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, k);
    for (c, &i) in idx[..k].iter().enumerate() {
        for r in 0..n {
            vecs[(r, c)] = eig.eigenvectors[(r, i)] * isq[r];
        }
    }
    (vals, vecs)
}

fn shift_invert(
    l: &SparseSym,
    mass: &[f64],
    k: usize,
    opts: &EigenOptions,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = l.dim();
    let p = (2 * k).max(k + 8).min(n);

    // The Laplacian is singular, so the shift must make L - σM definite.
    // Retry with larger shifts if rounding produces a non-positive pivot.
    let mut shift = opts.shift;
    let factor = loop {
        if let Some(f) = EnvelopeCholesky::factor(&l.add_diagonal(-shift, mass)) {
            break f;
        }
        shift *= 10.0;
        if shift.abs() > 1e3 {
            return Err(Error::ConvergenceFailure(
                "could not factor the shifted Laplacian".into(),
            ));
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q = DMatrix::from_fn(n, p, |_, c| {
        if c == 0 {
            1.0
        } else {
            rng.random::<f64>() * 2.0 - 1.0
        }
    });
    m_orthonormalize(&mut q, mass, &mut rng);

    let mut theta = vec![0.0; p];
    for _ in 0..opts.max_iterations {
        // Y = (L - σM)⁻¹ M Q, one independent solve per column.
        let cols: Vec<Vec<f64>> = (0..p)
            .into_par_iter()
            .map(|c| {
                let mut b: Vec<f64> = (0..n).map(|i| mass[i] * q[(i, c)]).collect();
                factor.solve_in_place(&mut b);
                b
            })
            .collect();
        for (c, col) in cols.iter().enumerate() {
            q.column_mut(c).copy_from_slice(col);
        }
        m_orthonormalize(&mut q, mass, &mut rng);

        // Rayleigh–Ritz on span(Q).
        let lq = l.mul_dense(&q);
        let h = q.transpose() * &lq;
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let z = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, order[c])]);
        for (c, &o) in order.iter().enumerate() {
            theta[c] = eig.eigenvalues[o];
        }
        q = &q * &z;
        let lq = &lq * &z;

        let scale = theta[k - 1].abs().max(f64::MIN_POSITIVE);
        let converged = (0..k).all(|c| {
            let r2: f64 = (0..n)
                .map(|i| {
                    let r = lq[(i, c)] - theta[c] * mass[i] * q[(i, c)];
                    r * r / mass[i]
                })
                .sum();
            r2.sqrt() <= opts.tolerance * scale
        });
        if converged {
            let vecs = q.columns(0, k).into_owned();
            return Ok((theta[..k].to_vec(), vecs));
        }
    }
    Err(Error::ConvergenceFailure(format!(
        "subspace iteration did not reach tolerance {:e} in {} iterations",
        opts.tolerance, opts.max_iterations
    )))
}

/// Modified Gram–Schmidt in the `M` inner product, applied twice for
/// stability. Columns that vanish are replaced with fresh random vectors.
fn m_orthonormalize(q: &mut DMatrix<f64>, mass: &[f64], rng: &mut ChaCha8Rng) {
    let (n, p) = q.shape();
    let dot = |a: &DMatrix<f64>, i: usize, j: usize| -> f64 {
        (0..n).map(|r| a[(r, i)] * mass[r] * a[(r, j)]).sum()
    };
    for c in 0..p {
        let mut attempts = 0;
        loop {
            let before = dot(q, c, c).sqrt();
            for _ in 0..2 {
                for prev in 0..c {
                    let proj = dot(q, prev, c);
                    for r in 0..n {
                        let v = q[(r, prev)];
                        q[(r, c)] -= proj * v;
                    }
                }
            }
            let norm = dot(q, c, c).sqrt();
            if norm > 1e-10 * before && norm > 0.0 {
                q.column_mut(c).scale_mut(1.0 / norm);
                break;
            }
            attempts += 1;
            assert!(attempts < 10, "cannot complete an M-orthonormal block");
            for r in 0..n {
                q[(r, c)] = rng.random::<f64>() * 2.0 - 1.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;
    use crate::spectral::cotan_laplacian;

    #[test]
    fn shift_invert_matches_dense_on_grid() {
        let mesh = primitives::grid(10, 20, 1.0, 2.3);
        let (l, m) = cotan_laplacian(&mesh).unwrap();
        let (dv, _) = dense_generalized(&l.to_dense(), &m, 20);
        let opts = EigenOptions {
            solver: EigenSolver::ShiftInvert,
            ..Default::default()
        };
        let (sv, sphi) = smallest_eigenpairs(&l, &m, 20, &opts).unwrap();
        for i in 1..20 {
            assert!(((sv[i] - dv[i]) / dv[i]).abs() < 1e-6, "{i}: {} vs {}", sv[i], dv[i]);
        }
        assert!(sv[0].abs() < 1e-8);
        // M-orthonormal.
        let g = sphi.transpose() * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(m.clone())) * &sphi;
        assert!((g - DMatrix::identity(20, 20)).amax() < 1e-9);
    }
}
