use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the registration toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("mesh has no vertices or no faces")]
    EmptyMesh,

    #[error("matrix is not a proper rotation: {0}")]
    NotARotation(String),

    #[error("view {view} produced no visible surface samples")]
    NoVisibleSurface { view: usize },

    #[error("requested {k} eigenpairs but the mesh only has {n} vertices")]
    KTooLarge { k: usize, n: usize },

    #[error("eigensolver did not converge: {0}")]
    ConvergenceFailure(String),

    #[error("point cloud carries no provenance indices")]
    MissingProvenance,

    #[error("embedding has column rank {rank} < {k} on the selected rows")]
    RankDeficient { rank: usize, k: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("linear system is singular: {0}")]
    SingularSystem(String),

    #[error("expected {expected} rows, found {found}")]
    CountMismatch { expected: usize, found: usize },

    #[error("non-finite entry at row {row}, column {col}")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("correspondence filter rejected every pair at iteration {iteration}")]
    NoCorrespondences { iteration: usize },

    #[error("energy became non-finite at iteration {iteration}")]
    NonFiniteEnergy { iteration: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
