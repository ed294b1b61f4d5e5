//! Quadric-error edge collapse. Collapses always move one endpoint onto the
//! other, so every surviving vertex is an original mesh vertex.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use nalgebra::Matrix4;

use crate::geometry::Mesh;
use crate::Vec3;

#[derive(Clone, Copy)]
struct Candidate {
    cost: f64,
    /// Vertex removed by the collapse.
    from: usize,
    /// Vertex kept.
    to: usize,
    stamp: (u32, u32),
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.from.cmp(&self.from))
            .then_with(|| other.to.cmp(&self.to))
    }
}

/// Result of decimation: the surviving original vertex indices (ascending)
/// and the edges between them.
pub(crate) struct Decimated {
    pub kept: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
}

struct State<'a> {
    pos: &'a [Vec3],
    faces: Vec<[usize; 3]>,
    face_alive: Vec<bool>,
    vert_faces: Vec<HashSet<usize>>,
    alive: Vec<bool>,
    quadric: Vec<Matrix4<f64>>,
    version: Vec<u32>,
}

impl State<'_> {
    fn neighbors(&self, v: usize) -> HashSet<usize> {
        let mut out = HashSet::new();
        for &f in &self.vert_faces[v] {
            for &w in &self.faces[f] {
                if w != v {
                    out.insert(w);
                }
            }
        }
        out
    }

    fn cost(&self, from: usize, to: usize) -> f64 {
        let q = self.quadric[from] + self.quadric[to];
        let p = self.pos[to];
        let h = nalgebra::Vector4::new(p.x, p.y, p.z, 1.0);
        (h.transpose() * q * h)[0].max(0.0)
    }

    fn push_edge(&self, heap: &mut BinaryHeap<Candidate>, a: usize, b: usize) {
        for (from, to) in [(a, b), (b, a)] {
            heap.push(Candidate {
                cost: self.cost(from, to),
                from,
                to,
                stamp: (self.version[from], self.version[to]),
            });
        }
    }

    /// Link condition plus a normal-flip check for the faces that move.
    fn can_collapse(&self, from: usize, to: usize) -> bool {
        let shared: Vec<usize> = self.vert_faces[from]
            .intersection(&self.vert_faces[to])
            .copied()
            .collect();
        if shared.is_empty() {
            return false;
        }
        let common: HashSet<usize> = self
            .neighbors(from)
            .intersection(&self.neighbors(to))
            .copied()
            .collect();
        let opposite: HashSet<usize> = shared
            .iter()
            .flat_map(|&f| self.faces[f])
            .filter(|&w| w != from && w != to)
            .collect();
        if common != opposite {
            return false;
        }
        for &f in &self.vert_faces[from] {
            if shared.contains(&f) {
                continue;
            }
            let tri = self.faces[f];
            let before = normal(self.pos, tri);
            let moved = tri.map(|w| if w == from { to } else { w });
            let after = normal(self.pos, moved);
            if after.norm() <= 1e-14 || before.dot(&after) <= 0.0 {
                return false;
            }
        }
        true
    }

    fn collapse(&mut self, from: usize, to: usize) -> Vec<usize> {
        let incident: Vec<usize> = self.vert_faces[from].iter().copied().collect();
        for f in incident {
            let tri = self.faces[f];
            if tri.contains(&to) {
                self.face_alive[f] = false;
                for w in tri {
                    self.vert_faces[w].remove(&f);
                }
            } else {
                self.faces[f] = tri.map(|w| if w == from { to } else { w });
                self.vert_faces[to].insert(f);
            }
        }
        self.vert_faces[from].clear();
        self.alive[from] = false;
        self.quadric[to] = self.quadric[to] + self.quadric[from];
        self.version[to] += 1;
        let mut nb: Vec<usize> = self.neighbors(to).into_iter().collect();
        nb.sort_unstable();
        nb
    }
}

fn normal(pos: &[Vec3], t: [usize; 3]) -> Vec3 {
    (pos[t[1]] - pos[t[0]]).cross(&(pos[t[2]] - pos[t[0]]))
}

fn plane_quadric(pos: &[Vec3], t: [usize; 3]) -> Matrix4<f64> {
    let n = normal(pos, t);
    let len = n.norm();
    if len == 0.0 {
        return Matrix4::zeros();
    }
    let unit = n / len;
    let p = nalgebra::Vector4::new(unit.x, unit.y, unit.z, -unit.dot(&pos[t[0]]));
    // Area-weighted so large faces dominate.
    p * p.transpose() * (0.5 * len)
}

/// Collapses edges until `target` vertices remain. Returns `None` if no
/// valid collapse is left before reaching the target.
pub(crate) fn decimate(mesh: &Mesh, target: usize) -> Option<Decimated> {
    let pos = mesh.vertices();
    let n = pos.len();
    let mut quadric = vec![Matrix4::zeros(); n];
    let mut vert_faces = vec![HashSet::new(); n];
    for (fi, &t) in mesh.faces().iter().enumerate() {
        let q = plane_quadric(pos, t);
        for v in t {
            quadric[v] += q;
            vert_faces[v].insert(fi);
        }
    }
    let mut st = State {
        pos,
        faces: mesh.faces().to_vec(),
        face_alive: vec![true; mesh.face_count()],
        vert_faces,
        alive: vec![true; n],
        quadric,
        version: vec![0; n],
    };
    let mut heap = BinaryHeap::new();
    for (a, b) in mesh.edges() {
        st.push_edge(&mut heap, a, b);
    }
    let mut remaining = n;
    while remaining > target {
        let c = heap.pop()?;
        if !st.alive[c.from] || !st.alive[c.to] {
            continue;
        }
        if c.stamp != (st.version[c.from], st.version[c.to]) {
            continue;
        }
        if !st.can_collapse(c.from, c.to) {
            continue;
        }
        // Only edges at the kept vertex change cost; link validity of the
        // others is rechecked when they are popped.
        for w in st.collapse(c.from, c.to) {
            st.push_edge(&mut heap, c.to, w);
        }
        remaining -= 1;
    }
    let kept: Vec<usize> = (0..n).filter(|&v| st.alive[v]).collect();
    let mut edges = Vec::new();
    for (f, &t) in st.faces.iter().enumerate() {
        if !st.face_alive[f] {
            continue;
        }
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            edges.push((a.min(b), a.max(b)));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    Some(Decimated { kept, edges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;

    #[test]
    fn reaches_target_with_valid_edges() {
        let m = primitives::icosphere(3);
        let d = decimate(&m, 300).unwrap();
        assert_eq!(d.kept.len(), 300);
        for &(a, b) in &d.edges {
            assert!(a < b);
            assert!(d.kept.binary_search(&a).is_ok() && d.kept.binary_search(&b).is_ok());
        }
        // Closed genus-0 surface stays closed: E = 3V - 6.
        assert_eq!(d.edges.len(), 3 * 300 - 6);
    }

    #[test]
    fn flat_region_collapses_first() {
        let m = primitives::grid(6, 6, 1.0, 1.0);
        let d = decimate(&m, 30).unwrap();
        assert_eq!(d.kept.len(), 30);
    }
}
