//! Cotangent Laplacian, eigenbases and spatially truncated embeddings.

mod basis;
mod eigen;
mod envelope;
mod laplacian;

pub use basis::{
    eigenbasis, eigenbasis_with, truncate_basis, Embedding, SpectralBasis, TruncatedBasis,
    DEFAULT_K,
};
pub use eigen::{dense_generalized, EigenOptions, EigenSolver, DENSE_LIMIT};
pub use envelope::{reverse_cuthill_mckee, EnvelopeCholesky};
pub use laplacian::{cotan_laplacian, SparseSym, COT_CLAMP};
