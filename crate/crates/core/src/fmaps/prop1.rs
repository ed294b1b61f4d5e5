//! Empirical check that the full-shape functional map remains the
//! least-squares optimum when the target is restricted to a subset of its
//! points (under isometry and a simple spectrum).

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{fmap_from_pointmap, FunctionalMap, PointMap};
use crate::geometry::Mesh;
use crate::spectral::{eigenbasis, Embedding, SpectralBasis, TruncatedBasis};
use crate::Result;

#[derive(Debug, Clone)]
pub struct Prop1Options {
    pub k: usize,
    /// Random subsets drawn per size.
    pub trials: usize,
    pub seed: u64,
}

impl Default for Prop1Options {
    fn default() -> Self {
        Self {
            k: 20,
            trials: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prop1Trial {
    pub subset_size: usize,
    /// `‖Φ_{T_p} C − Π Φ_S‖²_F` at the full-shape map.
    pub residual_full_map: f64,
    /// The same residual at the subset's own least-squares optimum.
    pub residual_optimum: f64,
}

impl Prop1Trial {
    pub fn gap(&self) -> f64 {
        self.residual_full_map - self.residual_optimum
    }
}

#[derive(Debug, Clone)]
pub struct Prop1Report {
    /// Map computed from the complete ground-truth correspondence.
    pub fmap: FunctionalMap,
    pub trials: Vec<Prop1Trial>,
}

impl Prop1Report {
    pub fn max_gap(&self) -> f64 {
        self.trials.iter().map(Prop1Trial::gap).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Off-diagonal Frobenius mass relative to the whole matrix.
    pub fn off_diagonal_ratio(&self) -> f64 {
        let c = self.fmap.matrix();
        let off: f64 = c
            .iter()
            .enumerate()
            .filter(|(i, _)| i % c.nrows() != i / c.nrows())
            .map(|(_, v)| v * v)
            .sum();
        off.sqrt() / c.norm()
    }

    /// Largest `| |C_ii| − 1 |`.
    pub fn diagonal_deviation(&self) -> f64 {
        let c = self.fmap.matrix();
        (0..c.nrows().min(c.ncols()))
            .map(|i| (c[(i, i)].abs() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

fn residual(phi_p: &DMatrix<f64>, c: &DMatrix<f64>, rhs: &DMatrix<f64>) -> f64 {
    (phi_p * c - rhs).norm_squared()
}

/// `pi_ts` maps every target vertex to a source vertex. For each subset size
/// draws `trials` random target subsets and compares the residual of the
/// full-shape map against the subset optimum.
pub fn check_prop1(
    source: &Mesh,
    target: &Mesh,
    pi_ts: &PointMap,
    subset_sizes: &[usize],
    opts: &Prop1Options,
) -> Result<Prop1Report> {
    let bs = eigenbasis(source, opts.k)?;
    let bt = Arc::new(eigenbasis(target, opts.k)?);
    check_prop1_with_bases(&bs, &bt, pi_ts, subset_sizes, opts)
}

pub fn check_prop1_with_bases(
    bs: &SpectralBasis,
    bt: &Arc<SpectralBasis>,
    pi_ts: &PointMap,
    subset_sizes: &[usize],
    opts: &Prop1Options,
) -> Result<Prop1Report> {
    let fmap = fmap_from_pointmap(pi_ts, bs, bt.as_ref())?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = bt.rows();
    let mut trials = Vec::new();
    for &size in subset_sizes {
        let size = size.clamp(1, n);
        for _ in 0..opts.trials.max(1) {
            let mut rows = sample(&mut rng, n, size).into_vec();
            rows.sort_unstable();
            let tb = TruncatedBasis::new(Arc::clone(bt), rows.clone())?;
            let pi_p = pi_ts.select_rows(&rows);
            let rhs = pi_p.transfer(bs.phi());
            let optimum = fmap_from_pointmap(&pi_p, bs, &tb)?;
            trials.push(Prop1Trial {
                subset_size: size,
                residual_full_map: residual(tb.phi(), fmap.matrix(), &rhs),
                residual_optimum: residual(tb.phi(), optimum.matrix(), &rhs),
            });
        }
    }
    Ok(Prop1Report { fmap, trials })
}
