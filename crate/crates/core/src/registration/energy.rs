use rayon::prelude::*;

use crate::defgraph::{arap_energy, DeformationGraph, GraphParams};
use crate::geometry::{GeodesicMatrix, KdTree};
use crate::{Error, Result, Vec3};

/// A kept correspondence: source vertex and target point.
pub type Pair = (usize, usize);

/// Weights of the three energy terms.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyWeights {
    pub corr: f64,
    pub cd: f64,
    pub arap: f64,
}

/// Individual term values (unweighted) and the weighted total.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyTerms {
    pub total: f64,
    pub corr: f64,
    pub cd: f64,
    pub arap: f64,
}

/// Mean squared distance over `pairs` and its gradient with respect to the
/// source vertices. An empty set has zero energy.
pub fn corr_energy(vertices: &[Vec3], target: &[Vec3], pairs: &[Pair]) -> (f64, Vec<Vec3>) {
    let mut grad = vec![Vec3::zeros(); vertices.len()];
    if pairs.is_empty() {
        log::warn!("correspondence energy evaluated on an empty pair set");
        return (0.0, grad);
    }
    let inv = 1.0 / pairs.len() as f64;
    let mut e = 0.0;
    for &(i, j) in pairs {
        let d = vertices[i] - target[j];
        e += d.norm_squared();
        grad[i] += d * (2.0 * inv);
    }
    (e * inv, grad)
}

/// Squared Chamfer distance and its gradient with nearest-neighbour matches
/// held fixed. `partial` keeps only the target→source term, so source
/// vertices without a nearby target point are not penalized.
pub fn chamfer_energy(vertices: &[Vec3], target: &[Vec3], partial: bool) -> (f64, Vec<Vec3>) {
    let mut grad = vec![Vec3::zeros(); vertices.len()];
    let mut e = 0.0;
    if !partial {
        let tree = KdTree::from_points(target);
        let nn: Vec<usize> = vertices
            .par_iter()
            .map(|v| tree.nearest_point(v).expect("target nonempty").0)
            .collect();
        let inv = 1.0 / vertices.len() as f64;
        for (i, &j) in nn.iter().enumerate() {
            let d = vertices[i] - target[j];
            e += d.norm_squared() * inv;
            grad[i] += d * (2.0 * inv);
        }
    }
    let tree = KdTree::from_points(vertices);
    let nn: Vec<usize> = target
        .par_iter()
        .map(|u| tree.nearest_point(u).expect("source nonempty").0)
        .collect();
    let inv = 1.0 / target.len() as f64;
    for (j, &i) in nn.iter().enumerate() {
        let d = vertices[i] - target[j];
        e += d.norm_squared() * inv;
        grad[i] += d * (2.0 * inv);
    }
    (e, grad)
}

/// Keeps `(i, Π_ST(i))` when mapping there and back lands within
/// `tau · √area` (edge-graph geodesic distance on the source) of `i`.
pub fn bijectivity_filter(
    pi_st: &[usize],
    pi_ts: &[usize],
    geo: &GeodesicMatrix,
    tau: f64,
    total_area: f64,
) -> Result<Vec<Pair>> {
    if pi_st.len() != geo.len() {
        return Err(Error::SizeMismatch(format!(
            "source map covers {} vertices, geodesics {}",
            pi_st.len(),
            geo.len()
        )));
    }
    if let Some(&j) = pi_st.iter().find(|&&j| j >= pi_ts.len()) {
        return Err(Error::SizeMismatch(format!("target index {j} out of range")));
    }
    if let Some(&i) = pi_ts.iter().find(|&&i| i >= geo.len()) {
        return Err(Error::SizeMismatch(format!("source index {i} out of range")));
    }
    let limit = tau * total_area.sqrt();
    Ok(pi_st
        .iter()
        .enumerate()
        .filter(|&(i, &j)| geo.get(i, pi_ts[j]) <= limit)
        .map(|(i, &j)| (i, j))
        .collect())
}

/// Everything the total energy needs besides the parameters.
pub struct EnergyContext<'a> {
    pub graph: &'a DeformationGraph,
    pub rest: &'a [Vec3],
    pub target: &'a [Vec3],
    pub pairs: &'a [Pair],
    pub weights: EnergyWeights,
    pub smoothness: f64,
    pub partial: bool,
}

impl EnergyContext<'_> {
    /// Weighted total energy and, optionally, its gradient with respect to
    /// the graph parameters.
    pub fn evaluate(
        &self,
        params: &GraphParams,
        with_gradient: bool,
    ) -> Result<(EnergyTerms, Option<GraphParams>)> {
        let w = self.weights;
        let mut terms = EnergyTerms::default();
        let mut vgrad = vec![Vec3::zeros(); self.rest.len()];
        let mut any_vertex_term = false;
        let deformed = if w.corr != 0.0 || w.cd != 0.0 {
            Some(self.graph.apply(params, self.rest)?)
        } else {
            None
        };
        if let Some(v) = &deformed {
            if w.corr != 0.0 {
                let (e, g) = corr_energy(v, self.target, self.pairs);
                terms.corr = e;
                axpy(&mut vgrad, w.corr, &g);
                any_vertex_term = true;
            }
            if w.cd != 0.0 {
                let (e, g) = chamfer_energy(v, self.target, self.partial);
                terms.cd = e;
                axpy(&mut vgrad, w.cd, &g);
                any_vertex_term = true;
            }
        }
        let mut grad = if with_gradient && any_vertex_term {
            Some(self.graph.pull_back(params, self.rest, &vgrad)?)
        } else if with_gradient {
            Some(GraphParams::identity(params.node_count()))
        } else {
            None
        };
        if w.arap != 0.0 {
            let (e, g) = arap_energy(self.graph, params, self.smoothness);
            terms.arap = e;
            if let Some(grad) = grad.as_mut() {
                for (a, b) in grad.rotations.iter_mut().zip(&g.rotations) {
                    *a += b * w.arap;
                }
                for (a, b) in grad.translations.iter_mut().zip(&g.translations) {
                    *a += b * w.arap;
                }
            }
        }
        terms.total = w.corr * terms.corr + w.cd * terms.cd + w.arap * terms.arap;
        Ok((terms, grad))
    }
}

impl EnergyContext<'_> {
    /// Curvature weight of every deformed vertex: the data terms equal
    /// `Σ_i c_i ‖v_i − target_i‖²` up to a constant, with matches fixed.
    pub(crate) fn vertex_weights(&self, deformed: &[Vec3]) -> Vec<f64> {
        let w = self.weights;
        let mut c = vec![0.0; deformed.len()];
        if w.corr != 0.0 && !self.pairs.is_empty() {
            let a = w.corr / self.pairs.len() as f64;
            for &(i, _) in self.pairs {
                c[i] += a;
            }
        }
        if w.cd != 0.0 {
            if !self.partial {
                let a = w.cd / deformed.len() as f64;
                c.iter_mut().for_each(|x| *x += a);
            }
            let tree = KdTree::from_points(deformed);
            let a = w.cd / self.target.len() as f64;
            let nn: Vec<usize> = self
                .target
                .par_iter()
                .map(|u| tree.nearest_point(u).expect("source nonempty").0)
                .collect();
            for i in nn {
                c[i] += a;
            }
        }
        c
    }
}

fn axpy(acc: &mut [Vec3], a: f64, x: &[Vec3]) {
    for (y, x) in acc.iter_mut().zip(x) {
        *y += x * a;
    }
}
