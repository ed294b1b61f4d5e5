//! Meshes, point clouds and the geometric utilities built on them.

mod align;
mod geodesic;
pub mod io;
mod kdtree;
mod mesh;
mod partial;
pub mod primitives;

pub use align::{center_and_orient, check_rotation, Orientable};
pub use geodesic::{geodesic_distances, geodesic_matrix, GeodesicMatrix};
pub(crate) use geodesic::dijkstra;
pub use io::{load_cloud, load_mesh, save_cloud, save_mesh};
pub use kdtree::{nearest_indices, KdTree};
pub use mesh::{triangle_area, Mesh, PointCloud, PointSet, AREA_EPSILON};
pub use partial::{
    icosahedron_directions, ray_triangle, sample_partial_views, sample_views, ViewSampling,
};
