use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::decimate::decimate;
use super::rotation::{rodrigues, rodrigues_with_jacobian, wrap_angle};
use crate::geometry::{dijkstra, Mesh};
use crate::{Error, Mat3, Result, Vec3};

/// Skinning fan-out: nodes bound to each vertex.
pub const SKIN_NODES: usize = 4;

/// How the node set was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeSelection {
    /// Every mesh vertex is a node.
    AllVertices,
    /// Survivors of quadric-error edge collapse.
    Decimation,
    /// Geodesic farthest-point sampling, used when decimation cannot reach
    /// the requested count.
    FarthestPointFallback,
}

#[derive(Debug, Clone)]
pub struct DeformationGraph {
    nodes: Vec<Vec3>,
    node_vertex: Vec<usize>,
    neighbors: Vec<Vec<usize>>,
    skin: Vec<Vec<(usize, f64)>>,
    selection: NodeSelection,
}

/// Default node count `⌊N/2⌋`.
pub fn default_node_count(vertex_count: usize) -> usize {
    (vertex_count / 2).max(1)
}

/// Builds a graph with `target_nodes` nodes taken from the mesh vertices.
pub fn build_graph(mesh: &Mesh, target_nodes: usize) -> Result<DeformationGraph> {
    let n = mesh.vertex_count();
    if target_nodes == 0 || target_nodes > n {
        return Err(Error::InvalidConfig(format!(
            "node count {target_nodes} outside [1, {n}]"
        )));
    }
    if target_nodes == n {
        let neighbors = (0..n).map(|i| mesh.neighbors(i).to_vec()).collect();
        return Ok(DeformationGraph {
            nodes: mesh.vertices().to_vec(),
            node_vertex: (0..n).collect(),
            neighbors,
            skin: (0..n).map(|i| vec![(i, 1.0)]).collect(),
            selection: NodeSelection::AllVertices,
        });
    }
    let decimated = if target_nodes >= 4 {
        decimate(mesh, target_nodes)
    } else {
        None
    };
    let (node_vertex, neighbors, selection) = match decimated {
        Some(d) => {
            let mut index = vec![usize::MAX; n];
            for (h, &v) in d.kept.iter().enumerate() {
                index[v] = h;
            }
            let mut nb = vec![Vec::new(); d.kept.len()];
            for (a, b) in d.edges {
                nb[index[a]].push(index[b]);
                nb[index[b]].push(index[a]);
            }
            (d.kept, nb, NodeSelection::Decimation)
        }
        None => {
            log::warn!("decimation could not reach {target_nodes} nodes; using farthest-point sampling");
            let (kept, nb) = farthest_point_nodes(mesh, target_nodes);
            (kept, nb, NodeSelection::FarthestPointFallback)
        }
    };
    let mut neighbors = neighbors;
    for nb in &mut neighbors {
        nb.sort_unstable();
        nb.dedup();
    }
    let skin = skin_weights(mesh, &node_vertex);
    Ok(DeformationGraph {
        nodes: node_vertex.iter().map(|&v| mesh.vertices()[v]).collect(),
        node_vertex,
        neighbors,
        skin,
        selection,
    })
}

/// Farthest-point sampling under edge-graph geodesics, with node adjacency
/// given by shared boundaries of the geodesic Voronoi cells.
fn farthest_point_nodes(mesh: &Mesh, count: usize) -> (Vec<usize>, Vec<Vec<usize>>) {
    let n = mesh.vertex_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut nodes = vec![0usize];
    dijkstra(mesh, &[0], &mut dist, |_, _| true);
    while nodes.len() < count {
        let next = (0..n)
            .filter(|&v| dist[v].is_finite())
            .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
            .unwrap();
        if dist[next] == 0.0 {
            break;
        }
        nodes.push(next);
        let mut d = vec![f64::INFINITY; n];
        dijkstra(mesh, &[next], &mut d, |_, _| true);
        for (a, b) in dist.iter_mut().zip(d) {
            *a = a.min(b);
        }
    }
    nodes.sort_unstable();
    let owner = voronoi_labels(mesh, &nodes);
    let mut nb = vec![Vec::new(); nodes.len()];
    for (a, b) in mesh.edges() {
        let (oa, ob) = (owner[a], owner[b]);
        if oa != ob && oa != usize::MAX && ob != usize::MAX {
            nb[oa].push(ob);
            nb[ob].push(oa);
        }
    }
    (nodes, nb)
}

fn voronoi_labels(mesh: &Mesh, nodes: &[usize]) -> Vec<usize> {
    let n = mesh.vertex_count();
    let mut owner = vec![usize::MAX; n];
    let pos = mesh.vertices();
    // Settled vertices inherit the owner of their shortest-path parent,
    // resolved via one pass over neighbours in settling order.
    let mut dist = vec![f64::INFINITY; n];
    let mut order = Vec::with_capacity(n);
    dijkstra(mesh, nodes, &mut dist, |v, _| {
        order.push(v);
        true
    });
    for (h, &v) in nodes.iter().enumerate() {
        owner[v] = h;
    }
    for &v in &order {
        if owner[v] != usize::MAX {
            continue;
        }
        owner[v] = mesh
            .neighbors(v)
            .iter()
            .filter(|&&w| owner[w] != usize::MAX)
            .min_by(|&&a, &&b| {
                (dist[a] + (pos[a] - pos[v]).norm()).total_cmp(&(dist[b] + (pos[b] - pos[v]).norm()))
            })
            .map(|&w| owner[w])
            .unwrap_or(usize::MAX);
    }
    owner
}

/// `K` geodesic-nearest nodes per vertex with weights `(1 - d/d_{K+1})²`,
/// normalized.
fn skin_weights(mesh: &Mesh, node_vertex: &[usize]) -> Vec<Vec<(usize, f64)>> {
    let n = mesh.vertex_count();
    let mut node_of = vec![usize::MAX; n];
    for (h, &v) in node_vertex.iter().enumerate() {
        node_of[v] = h;
    }
    (0..n)
        .into_par_iter()
        .map(|v| {
            let mut dist = vec![f64::INFINITY; n];
            let mut found: Vec<(usize, f64)> = Vec::with_capacity(SKIN_NODES + 1);
            dijkstra(mesh, &[v], &mut dist, |w, d| {
                if node_of[w] != usize::MAX {
                    found.push((node_of[w], d));
                }
                found.len() <= SKIN_NODES
            });
            let reference = if found.len() > SKIN_NODES {
                found.pop().unwrap().1
            } else {
                // Fewer nodes than the fan-out: pad the falloff radius.
                found.last().map_or(1.0, |f| f.1) * 1.5
            };
            let mut w: Vec<(usize, f64)> = found
                .iter()
                .map(|&(h, d)| {
                    let t = if reference > 0.0 { (1.0 - d / reference).max(0.0) } else { 1.0 };
                    (h, t * t)
                })
                .collect();
            let total: f64 = w.iter().map(|e| e.1).sum();
            if total > 0.0 {
                w.iter_mut().for_each(|e| e.1 /= total);
            } else {
                let u = 1.0 / w.len() as f64;
                w.iter_mut().for_each(|e| e.1 = u);
            }
            w
        })
        .collect()
}

impl DeformationGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Rest positions of the nodes.
    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    /// Mesh vertex each node sits on.
    pub fn node_vertices(&self) -> &[usize] {
        &self.node_vertex
    }

    pub fn neighbors(&self, h: usize) -> &[usize] {
        &self.neighbors[h]
    }

    /// `(node, weight)` pairs bound to mesh vertex `v`.
    pub fn skin(&self, v: usize) -> &[(usize, f64)] {
        &self.skin[v]
    }

    pub fn vertex_count(&self) -> usize {
        self.skin.len()
    }

    pub fn selection(&self) -> NodeSelection {
        self.selection
    }

    pub fn used_fallback(&self) -> bool {
        self.selection == NodeSelection::FarthestPointFallback
    }

    /// Deforms `rest` (the vertices the graph was built on).
    pub fn apply(&self, params: &GraphParams, rest: &[Vec3]) -> Result<Vec<Vec3>> {
        self.check(params, rest)?;
        let rots: Vec<Mat3> = params.rotations.iter().map(rodrigues).collect();
        Ok(rest
            .par_iter()
            .zip(&self.skin)
            .map(|(v, skin)| {
                skin.iter().fold(Vec3::zeros(), |acc, &(h, w)| {
                    let g = self.nodes[h];
                    acc + (rots[h] * (v - g) + g + params.translations[h]) * w
                })
            })
            .collect())
    }

    /// Pulls per-vertex gradients `∂E/∂v'` of a function of the deformed
    /// vertices back to the graph parameters.
    pub fn pull_back(
        &self,
        params: &GraphParams,
        rest: &[Vec3],
        vertex_grad: &[Vec3],
    ) -> Result<GraphParams> {
        self.check(params, rest)?;
        if vertex_grad.len() != rest.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} vertex gradients for {} vertices",
                vertex_grad.len(),
                rest.len()
            )));
        }
        let h = self.node_count();
        // Per node: Σ w G and Σ w G (v - g)ᵀ, accumulated in vertex order.
        let mut gt = vec![Vec3::zeros(); h];
        let mut outer = vec![Mat3::zeros(); h];
        for ((v, skin), g) in rest.iter().zip(&self.skin).zip(vertex_grad) {
            for &(node, w) in skin {
                gt[node] += g * w;
                outer[node] += (g * w) * (v - self.nodes[node]).transpose();
            }
        }
        let rotations = params
            .rotations
            .par_iter()
            .zip(&outer)
            .map(|(theta, m)| {
                let (_, d) = rodrigues_with_jacobian(theta);
                Vec3::new(d[0].dot(m), d[1].dot(m), d[2].dot(m))
            })
            .collect();
        Ok(GraphParams {
            rotations,
            translations: gt,
        })
    }

    fn check(&self, params: &GraphParams, rest: &[Vec3]) -> Result<()> {
        if params.node_count() != self.node_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameter sets for {} nodes",
                params.node_count(),
                self.node_count()
            )));
        }
        if rest.len() != self.vertex_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} vertices for a graph skinned on {}",
                rest.len(),
                self.vertex_count()
            )));
        }
        Ok(())
    }

    /// Text dump of nodes, edges and skin weights for debugging.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# nodes {}", self.node_count());
        for (h, (g, v)) in self.nodes.iter().zip(&self.node_vertex).enumerate() {
            let _ = writeln!(s, "n {h} {v} {} {} {}", g.x, g.y, g.z);
        }
        for (h, nb) in self.neighbors.iter().enumerate() {
            for &l in nb.iter().filter(|&&l| l > h) {
                let _ = writeln!(s, "e {h} {l}");
            }
        }
        for (v, skin) in self.skin.iter().enumerate() {
            let _ = write!(s, "w {v}");
            for (h, w) in skin {
                let _ = write!(s, " {h}:{w}");
            }
            s.push('\n');
        }
        s
    }

    pub fn write_dump(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.dump()).map_err(|e| Error::io(path, e))
    }
}

/// Per-node axis-angle rotations and translations.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphParams {
    pub rotations: Vec<Vec3>,
    pub translations: Vec<Vec3>,
}

impl GraphParams {
    pub fn identity(nodes: usize) -> Self {
        Self {
            rotations: vec![Vec3::zeros(); nodes],
            translations: vec![Vec3::zeros(); nodes],
        }
    }

    pub fn node_count(&self) -> usize {
        self.rotations.len()
    }

    /// Keeps every axis-angle below `2π` in norm.
    pub fn wrap(&mut self) {
        for t in &mut self.rotations {
            *t = wrap_angle(t);
        }
    }

    /// Flattened as `[θ_0, t_0, θ_1, t_1, ...]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(6 * self.node_count());
        for (r, t) in self.rotations.iter().zip(&self.translations) {
            out.extend_from_slice(r.as_slice());
            out.extend_from_slice(t.as_slice());
        }
        out
    }

    pub fn from_flat(x: &[f64]) -> Self {
        assert_eq!(x.len() % 6, 0);
        let (rotations, translations) = x
            .chunks_exact(6)
            .map(|c| (Vec3::new(c[0], c[1], c[2]), Vec3::new(c[3], c[4], c[5])))
            .unzip();
        Self {
            rotations,
            translations,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.rotations
            .iter()
            .chain(&self.translations)
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// One rigid motion `p ↦ R p + t` expressed on every node.
    pub fn rigid(graph: &DeformationGraph, theta: &Vec3, t: &Vec3) -> Self {
        let r = rodrigues(theta);
        Self {
            rotations: vec![*theta; graph.node_count()],
            translations: graph.nodes.iter().map(|g| r * g + t - g).collect(),
        }
    }
}
