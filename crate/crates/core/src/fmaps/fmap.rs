use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use super::PointMap;
use crate::spectral::Embedding;
use crate::{Error, Result};

/// Relative singular-value cutoff for the rank check.
const RANK_TOL: f64 = 1e-10;

/// Default weight of the Laplacian-commutativity regularizer.
pub const DEFAULT_COMMUTATIVITY_WEIGHT: f64 = 1e-2;

/// `k_T × k_S` matrix carrying functions on the source to the target.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalMap {
    matrix: DMatrix<f64>,
    source_tag: u64,
    target_tag: u64,
}

impl FunctionalMap {
    pub fn new(matrix: DMatrix<f64>, source_tag: u64, target_tag: u64) -> Result<Self> {
        if let Some(i) = matrix.iter().position(|v| !v.is_finite()) {
            let n = matrix.nrows();
            return Err(Error::NonFiniteEntry { row: i % n, col: i / n });
        }
        Ok(Self {
            matrix,
            source_tag,
            target_tag,
        })
    }

    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        Self::new(matrix, 0, 0)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn source_tag(&self) -> u64 {
        self.source_tag
    }

    pub fn target_tag(&self) -> u64 {
        self.target_tag
    }

    /// Whitespace-separated rows, full round-trip precision.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for row in self.matrix.row_iter() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn save_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load_text(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let rows: Vec<Vec<f64>> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("{t:?}: {e}"))))
                    .collect()
            })
            .collect::<Result<_>>()?;
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Parse("ragged matrix rows".into()));
        }
        Self::from_matrix(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
    }
}

fn check_shapes(pi: &PointMap, source: &impl Embedding, target: &impl Embedding) -> Result<()> {
    if pi.rows() != target.rows() || pi.image_len() != source.rows() {
        return Err(Error::DimensionMismatch(format!(
            "map is {}→{} points, bases have {} (target) and {} (source) rows",
            pi.rows(),
            pi.image_len(),
            target.rows(),
            source.rows()
        )));
    }
    Ok(())
}

fn scale_rows(m: &mut DMatrix<f64>, w: &[f64]) {
    for (r, &wr) in w.iter().enumerate() {
        m.row_mut(r).scale_mut(wr);
    }
}

/// `C = Φ_T⁺ Π Φ_S`: the least-squares solution of `Φ_T C ≈ Π Φ_S`,
/// weighted by vertex masses when the target basis carries them.
pub fn fmap_from_pointmap(
    pi: &PointMap,
    source: &impl Embedding,
    target: &impl Embedding,
) -> Result<FunctionalMap> {
    check_shapes(pi, source, target)?;
    let mut a = target.phi().clone();
    let mut b = pi.transfer(source.phi());
    if let Some(w) = target.weights() {
        let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
        scale_rows(&mut a, &sw);
        scale_rows(&mut b, &sw);
    }
    let k = a.ncols();
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > RANK_TOL * smax).count();
    if rank < k {
        return Err(Error::RankDeficient { rank, k });
    }
    let c = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::SingularSystem(e.to_string()))?;
    FunctionalMap::new(c, source.tag(), target.tag())
}

/// Least squares with a Laplacian-commutativity penalty, solved column by
/// column of `C` (one independent `k_T × k_T` system per source function):
///
/// `(Φᵀ W Φ + λ diag_j((μ^T_j − μ^S_i)²)) C[:, i] = Φᵀ W (Π Φ_S)[:, i]`
pub fn solve_regularized_fmap(
    target: &impl Embedding,
    pi: &PointMap,
    source: &impl Embedding,
    lambda: f64,
) -> Result<FunctionalMap> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidConfig(format!("regularizer weight {lambda} must be ≥ 0")));
    }
    check_shapes(pi, source, target)?;
    let phi = target.phi();
    let mut wphi = phi.clone();
    if let Some(w) = target.weights() {
        scale_rows(&mut wphi, w);
    }
    let gram = wphi.transpose() * phi;
    let rhs = wphi.transpose() * pi.transfer(source.phi());
    let (mu_t, mu_s) = (target.eigenvalues(), source.eigenvalues());
    let (kt, ks) = (phi.ncols(), source.k());
    let mut c = DMatrix::zeros(kt, ks);
    for i in 0..ks {
        let mut sys = gram.clone();
        for j in 0..kt {
            let d = mu_t[j] - mu_s[i];
            sys[(j, j)] += lambda * d * d;
        }
        let chol = sys.cholesky().ok_or_else(|| {
            Error::SingularSystem(format!("normal matrix for column {i} is not positive definite"))
        })?;
        c.set_column(i, &chol.solve(&rhs.column(i)));
    }
    FunctionalMap::new(c, source.tag(), target.tag())
}

/// `‖C_ref − C_opt‖²_F`.
pub fn fmap_supervision_loss(c_opt: &FunctionalMap, c_ref: &FunctionalMap) -> Result<f64> {
    if c_opt.matrix.shape() != c_ref.matrix.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            c_opt.matrix.shape(),
            c_ref.matrix.shape()
        )));
    }
    Ok((&c_ref.matrix - &c_opt.matrix).norm_squared())
}
