//! Edge-graph geodesics: Dijkstra over mesh edges with Euclidean weights.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use super::Mesh;

#[derive(Clone, Copy)]
struct Entry {
    dist: f64,
    vertex: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    // Min-heap on distance, ties broken by lower vertex index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

/// Single-source distances to every vertex (`+inf` when unreachable).
pub fn geodesic_distances(mesh: &Mesh, source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; mesh.vertex_count()];
    dijkstra(mesh, &[source], &mut dist, |_, _| true);
    dist
}

/// Multi-source Dijkstra. `visit(v, d)` is called when `v` is settled at
/// distance `d`; returning `false` stops the search.
pub(crate) fn dijkstra(
    mesh: &Mesh,
    sources: &[usize],
    dist: &mut [f64],
    mut visit: impl FnMut(usize, f64) -> bool,
) {
    let pos = mesh.vertices();
    let mut heap = BinaryHeap::new();
    for &s in sources {
        dist[s] = 0.0;
        heap.push(Entry {
            dist: 0.0,
            vertex: s,
        });
    }
    while let Some(Entry { dist: d, vertex: v }) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        if !visit(v, d) {
            return;
        }
        for &w in mesh.neighbors(v) {
            let nd = d + (pos[v] - pos[w]).norm();
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Entry { dist: nd, vertex: w });
            }
        }
    }
}

/// Dense all-pairs edge-graph distances for one mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicMatrix {
    n: usize,
    data: Vec<f64>,
    mesh_tag: u64,
}

impl GeodesicMatrix {
    /// All-pairs Dijkstra, one source per task. Each row is computed
    /// independently, so the result does not depend on the thread count.
    pub fn compute(mesh: &Mesh) -> Self {
        let n = mesh.vertex_count();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|s| geodesic_distances(mesh, s))
            .collect();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            data.extend(r);
        }
        // Floating-point path sums can differ in the last ulp between the two
        // directions; mirror the upper triangle to make the matrix exactly
        // symmetric.
        for i in 0..n {
            for j in (i + 1)..n {
                let v = data[i * n + j].min(data[j * n + i]);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Self {
            n,
            data,
            mesh_tag: mesh.fingerprint(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Fingerprint of the mesh the matrix was computed on.
    pub fn mesh_tag(&self) -> u64 {
        self.mesh_tag
    }
}

/// Convenience wrapper matching the operation name used by the CLI.
pub fn geodesic_matrix(mesh: &Mesh) -> GeodesicMatrix {
    GeodesicMatrix::compute(mesh)
}
