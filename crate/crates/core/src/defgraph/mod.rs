//! Embedded deformation graph: node selection by edge-collapse decimation,
//! geodesic skinning, axis-angle parameters and the ARAP regularizer.

mod arap;
mod decimate;
mod graph;
mod rotation;

pub use arap::{arap_energy, DEFAULT_SMOOTHNESS};
pub use graph::{
    build_graph, default_node_count, DeformationGraph, GraphParams, NodeSelection, SKIN_NODES,
};
pub use rotation::{rodrigues, rodrigues_with_jacobian, skew, wrap_angle, SMALL_ANGLE};
