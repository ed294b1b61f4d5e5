//! Damped Gauss–Newton (Levenberg–Marquardt) steps on the graph parameters.
//! Steps are accepted only under an Armijo condition on the true energy, so
//! accepted steps never increase it.

use super::energy::{EnergyContext, EnergyTerms};
use crate::defgraph::{rodrigues, rodrigues_with_jacobian, DeformationGraph, GraphParams};
use crate::spectral::{EnvelopeCholesky, SparseSym};
use crate::{Mat3, Result, Vec3};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Sufficient-decrease constant.
    pub armijo: f64,
    /// Damping of the first step, relative to the normal-matrix diagonal.
    pub initial_damping: f64,
    /// Smallest damping used. The diagonal is dominated by the stiff
    /// smoothness terms, so this must be small for near-rigid motions to
    /// take full steps.
    pub min_damping: f64,
    /// Damping multiplier after a rejected step.
    pub damping_increase: f64,
    /// Damping divisor after a step whose decrease the quadratic model
    /// predicted well.
    pub damping_decrease: f64,
    /// Damping above which the step search gives up.
    pub max_damping: f64,
    /// A refresh window ends early once a step lowers the energy by less
    /// than this fraction.
    pub step_tolerance: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            armijo: 1e-4,
            initial_damping: 1e-10,
            min_damping: 1e-12,
            damping_increase: 10.0,
            damping_decrease: 10.0,
            max_damping: 1e10,
            step_tolerance: 1e-3,
        }
    }
}

/// Predicted decreases below this fraction of the energy are rounding noise.
const NOISE_LEVEL: f64 = 1e-12;

/// An accepted step.
pub(crate) struct Step {
    pub params: GraphParams,
    pub terms: EnergyTerms,
    pub gradient: Vec<f64>,
}

/// Gauss–Newton approximation `2 JᵀWJ` of the energy Hessian in the flat
/// `[θ, t]`-per-node layout.
pub(crate) fn normal_matrix(ctx: &EnergyContext, params: &GraphParams) -> Result<SparseSym> {
    let graph = ctx.graph;
    let nodes = graph.nodes();
    let h_count = graph.node_count();
    let rj: Vec<_> = params.rotations.iter().map(rodrigues_with_jacobian).collect();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); 6 * h_count];
    let w = ctx.weights;
    if w.corr != 0.0 || w.cd != 0.0 {
        let deformed = graph.apply(params, ctx.rest)?;
        let c = ctx.vertex_weights(&deformed);
        let mut cols: Vec<(usize, Vec3)> = Vec::new();
        for (v, (&p, &ci)) in ctx.rest.iter().zip(&c).enumerate() {
            if ci == 0.0 {
                continue;
            }
            cols.clear();
            for &(h, wt) in graph.skin(v) {
                let q = p - nodes[h];
                for a in 0..3 {
                    cols.push((6 * h + a, rj[h].1[a] * q * wt));
                }
                for a in 0..3 {
                    let mut e = Vec3::zeros();
                    e[a] = wt;
                    cols.push((6 * h + 3 + a, e));
                }
            }
            add_gram(&mut rows, &cols, 2.0 * ci, |x, y| x.dot(y));
        }
    }
    if w.arap != 0.0 {
        let mut cols: Vec<(usize, Vec3)> = Vec::with_capacity(12);
        let mut rot_cols: Vec<(usize, nalgebra::Matrix3<f64>)> = Vec::with_capacity(6);
        for h in 0..h_count {
            for &l in graph.neighbors(h) {
                let e = nodes[l] - nodes[h];
                cols.clear();
                for a in 0..3 {
                    cols.push((6 * h + a, rj[h].1[a] * e));
                }
                for a in 0..3 {
                    let mut u = Vec3::zeros();
                    u[a] = 1.0;
                    cols.push((6 * h + 3 + a, u));
                    cols.push((6 * l + 3 + a, -u));
                }
                add_gram(&mut rows, &cols, 2.0 * w.arap, |x, y| x.dot(y));
                if ctx.smoothness != 0.0 {
                    rot_cols.clear();
                    for a in 0..3 {
                        rot_cols.push((6 * h + a, rj[h].1[a]));
                        rot_cols.push((6 * l + a, -rj[l].1[a]));
                    }
                    add_gram(&mut rows, &rot_cols, 2.0 * w.arap * ctx.smoothness, |x, y| x.dot(y));
                }
            }
        }
    }
    Ok(SparseSym::from_rows(rows))
}

fn add_gram<T>(rows: &mut [Vec<(usize, f64)>], cols: &[(usize, T)], scale: f64, dot: impl Fn(&T, &T) -> f64) {
    for (i, a) in cols {
        for (j, b) in cols {
            let v = dot(a, b);
            if v != 0.0 {
                rows[*i].push((*j, scale * v));
            }
        }
    }
}

/// Applies a flat step. Rotations move additively; each translation gets the
/// second-order part of its node's rotation increment about the centroid of
/// the deformed node positions, so a step that is rigid to first order is
/// applied as an exact rigid motion and leaves the ARAP residuals at zero.
pub(crate) fn retract(graph: &DeformationGraph, params: &GraphParams, delta: &[f64]) -> GraphParams {
    let nodes = graph.nodes();
    let images: Vec<Vec3> = nodes.iter().zip(&params.translations).map(|(g, t)| g + t).collect();
    let center = images.iter().sum::<Vec3>() / images.len().max(1) as f64;
    let mut out = params.clone();
    for h in 0..params.node_count() {
        let d = &delta[6 * h..6 * h + 6];
        let dtheta = Vec3::new(d[0], d[1], d[2]);
        let theta = params.rotations[h];
        let (r, jac) = rodrigues_with_jacobian(&theta);
        let linear = (jac[0] * dtheta.x + jac[1] * dtheta.y + jac[2] * dtheta.z) * r.transpose();
        let exact = rodrigues(&(theta + dtheta)) * r.transpose();
        let curve = (exact - Mat3::identity() - linear) * (images[h] - center);
        out.rotations[h] = theta + dtheta;
        out.translations[h] += Vec3::new(d[3], d[4], d[5]) + curve;
    }
    out.wrap();
    out
}

/// Factorized damped normal matrix, reused across steps while it keeps
/// producing acceptable steps.
pub(crate) struct StepSolver {
    damping: f64,
    /// Energies below `NOISE_LEVEL` times this are treated as zero.
    energy_scale: f64,
    factor: Option<Factor>,
}

struct Factor {
    normal: SparseSym,
    chol: EnvelopeCholesky,
    fresh: bool,
}

impl StepSolver {
    pub fn new(opt: &OptimizerConfig, energy_scale: f64) -> Self {
        Self {
            damping: opt.initial_damping,
            energy_scale,
            factor: None,
        }
    }

    /// Factorizations dominate the cost, so a factor built at an earlier
    /// point is tried first. After a rejection the matrix is rebuilt at the
    /// current point, and only a rejection with a fresh matrix raises the
    /// damping. A step whose decrease matches the quadratic model lowers the
    /// damping, which also forces a rebuild. `None` when the damping limit
    /// is reached without an acceptable step.
    pub fn step(
        &mut self,
        ctx: &EnergyContext,
        params: &GraphParams,
        terms: &EnergyTerms,
        gradient: &[f64],
        opt: &OptimizerConfig,
    ) -> Result<Option<Step>> {
        let noise = NOISE_LEVEL * terms.total.max(self.energy_scale);
        if !(terms.total > noise) {
            return Ok(None);
        }
        loop {
            if self.factor.is_none() {
                if self.damping > opt.max_damping {
                    return Ok(None);
                }
                let h = normal_matrix(ctx, params)?;
                let diag: Vec<f64> = (0..h.dim()).map(|i| h.get(i, i)).collect();
                let floor = 1e-12 * diag.iter().fold(0.0f64, |m, &d| m.max(d)).max(f64::MIN_POSITIVE);
                let scale: Vec<f64> = diag.iter().map(|&d| d.max(floor)).collect();
                match EnvelopeCholesky::factor(&h.add_diagonal(self.damping, &scale)) {
                    Some(chol) => {
                        self.factor = Some(Factor {
                            normal: h,
                            chol,
                            fresh: true,
                        })
                    }
                    None => {
                        self.damping *= opt.damping_increase;
                        continue;
                    }
                }
            }
            let factor = self.factor.as_ref().expect("factor present");
            let fresh = factor.fresh;
            let mut delta: Vec<f64> = gradient.iter().map(|g| -g).collect();
            factor.chol.solve_in_place(&mut delta);
            let slope: f64 = delta.iter().zip(gradient).map(|(d, g)| d * g).sum();
            if slope < 0.0 {
                let candidate = retract(ctx.graph, params, &delta);
                let (tn, gn) = ctx.evaluate(&candidate, true)?;
                if tn.total.is_finite() && tn.total <= terms.total + opt.armijo * slope {
                    let mut hd = vec![0.0; delta.len()];
                    factor.normal.mul_vec(&delta, &mut hd);
                    let curvature: f64 = delta.iter().zip(&hd).map(|(a, b)| a * b).sum();
                    let predicted = -(slope + 0.5 * curvature);
                    let gain = (terms.total - tn.total) / predicted;
                    if gain > 0.75 && self.damping > opt.min_damping {
                        self.damping = (self.damping / opt.damping_decrease).max(opt.min_damping);
                        self.factor = None;
                    } else if let Some(f) = self.factor.as_mut() {
                        f.fresh = false;
                    }
                    return Ok(Some(Step {
                        params: candidate,
                        terms: tn,
                        gradient: gn.expect("gradient requested").to_flat(),
                    }));
                }
            }
            if fresh {
                // Nothing left to gain at rounding level.
                if -slope <= noise {
                    return Ok(None);
                }
                self.damping *= opt.damping_increase;
            }
            self.factor = None;
        }
    }
}
