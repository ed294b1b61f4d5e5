//! Envelope (profile) Cholesky factorization under a reverse Cuthill–McKee
//! ordering. Mesh Laplacians have bandwidth around √N after RCM, which keeps
//! the factor small enough for direct shift-invert solves.

use std::collections::VecDeque;

use super::laplacian::SparseSym;

/// Reverse Cuthill–McKee permutation: `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &SparseSym) -> Vec<usize> {
    let n = a.dim();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).filter(|&(j, _)| j != i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut nbrs = Vec::new();
    while order.len() < n {
        // Start each component at an unvisited vertex of minimum degree, then
        // hop to the far end of its BFS tree (pseudo-peripheral start).
        let seed = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
            .unwrap();
        let start = last_bfs_vertex(a, seed, &visited, &degree);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            nbrs.clear();
            nbrs.extend(a.row(v).map(|(j, _)| j).filter(|&j| j != v && !visited[j]));
            nbrs.sort_by_key(|&j| (degree[j], j));
            for &w in &nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn last_bfs_vertex(a: &SparseSym, seed: usize, visited: &[bool], degree: &[usize]) -> usize {
    let mut seen = visited.to_vec();
    let mut queue = VecDeque::from([seed]);
    seen[seed] = true;
    let mut last = seed;
    while let Some(v) = queue.pop_front() {
        last = v;
        let mut nb: Vec<usize> = a.row(v).map(|(j, _)| j).filter(|&j| !seen[j]).collect();
        nb.sort_by_key(|&j| (degree[j], j));
        for w in nb {
            seen[w] = true;
            queue.push_back(w);
        }
    }
    last
}

/// Lower-triangular factor `L` with `P A Pᵀ = L Lᵀ`, stored row-wise over
/// each row's envelope.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    values: Vec<f64>,
}

impl EnvelopeCholesky {
    /// Factorizes `a`. Returns `None` when a pivot is not strictly positive.
    pub fn factor(a: &SparseSym) -> Option<Self> {
        let n = a.dim();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first = vec![0; n];
        for (i, &old) in perm.iter().enumerate() {
            first[i] = a.row(old).map(|(j, _)| inv[j]).filter(|&j| j <= i).min().unwrap_or(i);
        }
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + (i - first[i] + 1));
        }
        let mut values = vec![0.0; offset[n]];
        for (i, &old) in perm.iter().enumerate() {
            for (j_old, v) in a.row(old) {
                let j = inv[j_old];
                if j <= i {
                    values[offset[i] + j - first[i]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let start = fi.max(fj);
                let mut s = values[offset[i] + j - fi];
                let ri = &values[offset[i] + start - fi..offset[i] + j - fi];
                let rj = &values[offset[j] + start - fj..offset[j] + j - fj];
                s -= ri.iter().zip(rj).map(|(x, y)| x * y).sum::<f64>();
                let djj = values[offset[j] + j - fj];
                values[offset[i] + j - fi] = s / djj;
            }
            let row = &values[offset[i]..offset[i] + i - fi];
            let d = values[offset[i] + i - fi] - row.iter().map(|x| x * x).sum::<f64>();
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            values[offset[i] + i - fi] = d.sqrt();
        }
        Some(Self {
            perm,
            first,
            offset,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Number of stored factor entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        // Forward: L y = b.
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.offset[i]..self.offset[i + 1]];
            let s: f64 = row[..i - fi].iter().zip(&y[fi..i]).map(|(l, x)| l * x).sum();
            y[i] = (y[i] - s) / row[i - fi];
        }
        // Backward: Lᵀ x = y, column sweep over the row storage.
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.offset[i]..self.offset[i + 1]];
            y[i] /= row[i - fi];
            let xi = y[i];
            for (k, l) in (fi..i).zip(row) {
                y[k] -= l * xi;
            }
        }
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = y[new];
        }
    }
}
