//! Non-rigid registration of a source triangle mesh onto a full or partial
//! target point cloud.
//!
//! The pipeline deforms the source with an embedded deformation graph whose
//! node rotations and translations minimize a weighted sum of a filtered
//! correspondence term, a (one- or two-sided) Chamfer term and an
//! as-rigid-as-possible regularizer. Correspondences come from a pluggable
//! per-point feature layer and are refreshed periodically; a second stage
//! switches to raw coordinates once the feature-driven stage has converged.
//!
//! Alongside the optimizer the crate provides the spectral machinery used to
//! reason about correspondences: cotangent Laplacians, eigenbases, spatially
//! truncated embeddings for partial clouds and functional-map estimation.
//!
//! Module map:
//! - [`geometry`]: meshes, point clouds, I/O, geodesics, alignment, partial views
//! - [`spectral`]: Laplacian, eigenbasis, truncated embeddings
//! - [`fmaps`]: point maps, functional maps and their structural energies
//! - [`features`]: per-point feature providers and the `NFRM` matrix format
//! - [`defgraph`]: deformation graph, Rodrigues rotations, ARAP energy
//! - [`registration`]: energies, bijectivity filter, two-stage optimizer
//! - [`eval`]: correspondence and registration metrics
//! - [`cli`]: command implementations behind the `nfr` binary

pub mod cli;
pub mod defgraph;
pub mod error;
pub mod eval;
pub mod features;
pub mod fmaps;
pub mod geometry;
pub mod registration;
pub mod spectral;

pub use error::{Error, Result};

/// 3D point / vector type used throughout the crate.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3x3 matrix type used for rotations.
pub type Mat3 = nalgebra::Matrix3<f64>;
