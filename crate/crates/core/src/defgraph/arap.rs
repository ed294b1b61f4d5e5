use super::graph::{DeformationGraph, GraphParams};
use super::rotation::rodrigues_with_jacobian;
use crate::Mat3;

/// Default weight of the rotation-smoothness term.
pub const DEFAULT_SMOOTHNESS: f64 = 10.0;

/// As-rigid-as-possible energy over graph edges (both directions of every
/// edge) and its gradient:
///
/// `Σ_h Σ_{l∈N(h)} ‖R_h (g_l − g_h) + g_h + t_h − (g_l + t_l)‖² + β ‖R_h − R_l‖²_F`
pub fn arap_energy(graph: &DeformationGraph, params: &GraphParams, beta: f64) -> (f64, GraphParams) {
    let h_count = graph.node_count();
    let g = graph.nodes();
    let rj: Vec<(Mat3, [Mat3; 3])> = params.rotations.iter().map(rodrigues_with_jacobian).collect();
    let mut grad = GraphParams::identity(h_count);
    let mut energy = 0.0;
    for h in 0..h_count {
        let (rh, dh) = &rj[h];
        let th = params.translations[h];
        for &l in graph.neighbors(h) {
            let e = g[l] - g[h];
            // Grouped so that identity parameters give exactly zero.
            let d = (rh * e - e) + (th - params.translations[l]);
            energy += d.norm_squared();
            grad.translations[h] += 2.0 * d;
            grad.translations[l] -= 2.0 * d;
            for i in 0..3 {
                grad.rotations[h][i] += 2.0 * d.dot(&(dh[i] * e));
            }
            if beta != 0.0 {
                let (rl, dl) = &rj[l];
                let diff = rh - rl;
                energy += beta * diff.norm_squared();
                for i in 0..3 {
                    grad.rotations[h][i] += 2.0 * beta * diff.dot(&dh[i]);
                    grad.rotations[l][i] -= 2.0 * beta * diff.dot(&dl[i]);
                }
            }
        }
    }
    (energy, grad)
}
