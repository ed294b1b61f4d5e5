//! Axis-angle rotations (Rodrigues' formula) and their derivatives.

use crate::{Mat3, Vec3};

/// Below this angle the closed-form coefficients switch to Taylor series.
pub const SMALL_ANGLE: f64 = 1e-8;

/// Below this angle the derivative coefficients use series expansions.
const SERIES_DERIV: f64 = 1e-2;

/// `[v]×`, the cross-product matrix.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Coefficients `(A, B)` of `R = I + A K + B K²` with `K = [θ]×`.
fn coefficients(x: f64) -> (f64, f64) {
    if x < SMALL_ANGLE {
        let x2 = x * x;
        (1.0 - x2 / 6.0, 0.5 - x2 / 24.0)
    } else {
        let h = (0.5 * x).sin() / x;
        (x.sin() / x, 2.0 * h * h)
    }
}

/// `(A'(x)/x, B'(x)/x)`.
fn derivative_coefficients(x: f64) -> (f64, f64) {
    let x2 = x * x;
    if x < SERIES_DERIV {
        (
            -1.0 / 3.0 + x2 / 30.0 - x2 * x2 / 840.0,
            -1.0 / 12.0 + x2 / 180.0 - x2 * x2 / 6720.0,
        )
    } else {
        let (s, c) = x.sin_cos();
        let x3 = x2 * x;
        let h = (0.5 * x).sin();
        ((x * c - s) / x3, (x * s - 4.0 * h * h) / (x3 * x))
    }
}

/// Rotation by `‖θ‖` radians about `θ / ‖θ‖`.
pub fn rodrigues(theta: &Vec3) -> Mat3 {
    let (a, b) = coefficients(theta.norm());
    let k = skew(theta);
    Mat3::identity() + k * a + k * k * b
}

/// Rotation and its partial derivatives with respect to each component of
/// `θ`.
pub fn rodrigues_with_jacobian(theta: &Vec3) -> (Mat3, [Mat3; 3]) {
    let x = theta.norm();
    let (a, b) = coefficients(x);
    let (da, db) = derivative_coefficients(x);
    let k = skew(theta);
    let k2 = k * k;
    let r = Mat3::identity() + k * a + k2 * b;
    let d = [0, 1, 2].map(|i| {
        let e = skew(&Vec3::ith(i, 1.0));
        k * (da * theta[i]) + e * a + k2 * (db * theta[i]) + (e * k + k * e) * b
    });
    (r, d)
}

/// Maps `θ` to an equivalent axis-angle with `‖θ‖ < 2π`.
pub fn wrap_angle(theta: &Vec3) -> Vec3 {
    let x = theta.norm();
    let tau = std::f64::consts::TAU;
    if x < tau {
        *theta
    } else {
        theta * (x.rem_euclid(tau) / x)
    }
}
