use std::collections::HashSet;

use sha2::{Digest, Sha256};

use crate::{Error, Result, Vec3};

/// Faces with area at or below this are rejected as degenerate.
pub const AREA_EPSILON: f64 = 1e-12;

/// Anything that exposes an ordered list of 3D points.
pub trait PointSet {
    fn points(&self) -> &[Vec3];

    fn len(&self) -> usize {
        self.points().len()
    }

    fn is_empty(&self) -> bool {
        self.points().is_empty()
    }

    /// Length of the axis-aligned bounding box diagonal.
    fn bbox_diagonal(&self) -> f64 {
        let pts = self.points();
        if pts.is_empty() {
            return 0.0;
        }
        let mut lo = pts[0];
        let mut hi = pts[0];
        for p in pts {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (hi - lo).norm()
    }

    /// Content tag used to associate derived data with this shape.
    fn shape_tag(&self) -> u64 {
        let mut h = Sha256::new();
        for v in self.points() {
            for c in v.iter() {
                h.update(c.to_le_bytes());
            }
        }
        digest_u64(h)
    }
}

fn digest_u64(h: Sha256) -> u64 {
    let digest = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(b)
}

/// Indexed triangle surface with lumped per-vertex areas and vertex adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    areas: Vec<f64>,
    neighbors: Vec<Vec<usize>>,
}

impl Mesh {
    /// Builds a mesh, validating indices and rejecting degenerate faces.
    ///
    /// Every vertex must be referenced by at least one face so that its
    /// lumped area is positive.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.is_empty() || faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&i| i >= n) {
                return Err(Error::Parse(format!(
                    "face {fi} references vertex out of range [0, {n}): {f:?}"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::DegenerateGeometry(format!(
                    "face {fi} repeats a vertex: {f:?}"
                )));
            }
        }
        let areas = lumped_areas(&vertices, &faces)?;
        let neighbors = adjacency(n, &faces);
        Ok(Self {
            vertices,
            faces,
            areas,
            neighbors,
        })
    }

    /// Same connectivity, new positions. Fails if a face collapses.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} vertices, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        let areas = lumped_areas(&vertices, &self.faces)?;
        Ok(Self {
            vertices,
            faces: self.faces.clone(),
            areas,
            neighbors: self.neighbors.clone(),
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Lumped (barycentric) vertex areas: one third of each incident face.
    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    /// Sorted one-ring neighbors of vertex `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.faces[f];
        triangle_area(&self.vertices[a], &self.vertices[b], &self.vertices[c])
    }

    /// Unique undirected edges `(i, j)` with `i < j`, in ascending order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, nbrs) in self.neighbors.iter().enumerate() {
            for &j in nbrs {
                if i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Area-weighted centroid.
    pub fn mass_centroid(&self) -> Vec3 {
        let total = self.total_area();
        let mut c = Vec3::zeros();
        for (p, a) in self.vertices.iter().zip(&self.areas) {
            c += p * *a;
        }
        c / total
    }

    /// Number of connected components of the edge graph.
    pub fn component_count(&self) -> usize {
        let n = self.vertex_count();
        let mut seen = vec![false; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for &w in &self.neighbors[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }

    /// Content fingerprint over positions and faces, used to tag derived data.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Sha256::new();
        for v in &self.vertices {
            for c in v.iter() {
                h.update(c.to_le_bytes());
            }
        }
        for f in &self.faces {
            for &i in f {
                h.update((i as u64).to_le_bytes());
            }
        }
        digest_u64(h)
    }
}

impl PointSet for Mesh {
    fn points(&self) -> &[Vec3] {
        &self.vertices
    }

    fn shape_tag(&self) -> u64 {
        self.fingerprint()
    }
}

pub fn triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

fn lumped_areas(vertices: &[Vec3], faces: &[[usize; 3]]) -> Result<Vec<f64>> {
    let mut areas = vec![0.0; vertices.len()];
    for (fi, f) in faces.iter().enumerate() {
        let a = triangle_area(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]]);
        if !(a > AREA_EPSILON) {
            return Err(Error::DegenerateGeometry(format!(
                "face {fi} has area {a:e}"
            )));
        }
        for &i in f {
            areas[i] += a / 3.0;
        }
    }
    if let Some(i) = areas.iter().position(|&a| a <= 0.0) {
        return Err(Error::DegenerateGeometry(format!(
            "vertex {i} is not referenced by any face"
        )));
    }
    Ok(areas)
}

fn adjacency(n: usize, faces: &[[usize; 3]]) -> Vec<Vec<usize>> {
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for f in faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            nbrs[a].push(b);
            nbrs[b].push(a);
        }
    }
    for l in &mut nbrs {
        l.sort_unstable();
        l.dedup();
    }
    nbrs
}

/// Unordered 3D points, optionally tagged with the parent mesh vertex each
/// point was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
    provenance: Option<Vec<usize>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::SizeMismatch("point cloud must be nonempty".into()));
        }
        Ok(Self {
            points,
            provenance: None,
        })
    }

    /// Cloud whose point `i` originates from vertex `provenance[i]` of a parent
    /// mesh with `parent_len` vertices. Indices must be unique and in range.
    pub fn with_provenance(
        points: Vec<Vec3>,
        provenance: Vec<usize>,
        parent_len: usize,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::SizeMismatch("point cloud must be nonempty".into()));
        }
        if provenance.len() != points.len() {
            return Err(Error::CountMismatch {
                expected: points.len(),
                found: provenance.len(),
            });
        }
        let mut seen = HashSet::with_capacity(provenance.len());
        for &p in &provenance {
            if p >= parent_len {
                return Err(Error::Parse(format!(
                    "provenance index {p} out of range [0, {parent_len})"
                )));
            }
            if !seen.insert(p) {
                return Err(Error::Parse(format!("duplicate provenance index {p}")));
            }
        }
        Ok(Self {
            points,
            provenance: Some(provenance),
        })
    }

    /// The vertices of `mesh` as a cloud, with identity provenance.
    pub fn from_mesh(mesh: &Mesh) -> Self {
        Self {
            points: mesh.vertices().to_vec(),
            provenance: Some((0..mesh.vertex_count()).collect()),
        }
    }

    /// The subset of `mesh` vertices listed in `indices`.
    pub fn from_mesh_subset(mesh: &Mesh, indices: &[usize]) -> Result<Self> {
        let n = mesh.vertex_count();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::Parse(format!("vertex index {bad} out of range")));
        }
        let pts = indices.iter().map(|&i| mesh.vertices()[i]).collect();
        Self::with_provenance(pts, indices.to_vec(), n)
    }

    pub fn provenance(&self) -> Option<&[usize]> {
        self.provenance.as_deref()
    }

    pub fn into_points(self) -> Vec<Vec3> {
        self.points
    }

    pub(crate) fn map_points(&self, points: Vec<Vec3>) -> Self {
        debug_assert_eq!(points.len(), self.points.len());
        Self {
            points,
            provenance: self.provenance.clone(),
        }
    }

    pub fn centroid(&self) -> Vec3 {
        let mut c = Vec3::zeros();
        for p in &self.points {
            c += p;
        }
        c / self.points.len() as f64
    }
}

impl PointSet for PointCloud {
    fn points(&self) -> &[Vec3] {
        &self.points
    }
}
