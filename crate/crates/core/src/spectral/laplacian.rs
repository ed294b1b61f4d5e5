use nalgebra::DMatrix;

use crate::geometry::Mesh;
use crate::{Error, Result};

/// Cotangent values are clamped into this range before assembly.
pub const COT_CLAMP: (f64, f64) = (1e-6, 1e6);

/// Symmetric sparse matrix in CSR form (both triangles stored).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSym {
    /// Assembles from per-row `(col, value)` lists; duplicates are summed.
    pub fn from_rows(mut rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for r in &mut rows {
            r.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for &(c, v) in r.iter() {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `(col, value)` pairs of row `i`, ascending by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `self · X` for a dense `n × p` block.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, x.ncols());
        for c in 0..x.ncols() {
            let col = x.column(c);
            for i in 0..self.n {
                out[(i, c)] = self.row(i).map(|(j, v)| v * col[j]).sum();
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[(i, j)] = v;
            }
        }
        d
    }

    /// `self + alpha · diag(d)`
    pub fn add_diagonal(&self, alpha: f64, d: &[f64]) -> Self {
        let mut out = self.clone();
        for (i, &di) in d.iter().enumerate().take(self.n) {
            let r = out.row_ptr[i]..out.row_ptr[i + 1];
            let k = out.cols[r.clone()]
                .binary_search(&i)
                .expect("Laplacian rows always store the diagonal");
            out.vals[r.start + k] += alpha * di;
        }
        out
    }
}

/// Cotangent stiffness matrix (positive semidefinite convention: positive
/// diagonal, `L_ij = -(cot α + cot β)/2` on edges) and lumped vertex masses.
pub fn cotan_laplacian(mesh: &Mesh) -> Result<(SparseSym, Vec<f64>)> {
    let n = mesh.vertex_count();
    let p = mesh.vertices();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (fi, f) in mesh.faces().iter().enumerate() {
        for k in 0..3 {
            // Angle at corner k is opposite edge (i, j).
            let o = f[k];
            let i = f[(k + 1) % 3];
            let j = f[(k + 2) % 3];
            let u = p[i] - p[o];
            let v = p[j] - p[o];
            let cross = u.cross(&v).norm();
            if cross <= 0.0 {
                return Err(Error::DegenerateGeometry(format!("face {fi} is degenerate")));
            }
            let cot = (u.dot(&v) / cross).clamp(COT_CLAMP.0, COT_CLAMP.1);
            let w = 0.5 * cot;
            rows[i].push((j, -w));
            rows[j].push((i, -w));
            rows[i].push((i, w));
            rows[j].push((j, w));
        }
    }
    Ok((SparseSym::from_rows(rows), mesh.areas().to_vec()))
}
