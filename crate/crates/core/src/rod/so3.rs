//! Rotation-group helpers for director frames.
//!
//! Frames are stored as matrices whose rows are the directors, so a lab-frame
//! vector `a` has material coordinates `Q * a`. Under a material-frame angular
//! velocity `w` the frame evolves as `dQ/dt = -hat(w) Q`.

use nalgebra::{Matrix3, Vector3};

const SMALL_ANGLE: f64 = 1e-4;

pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues exponential of `hat(v)`.
pub fn exp(v: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = v.norm_squared();
    let theta = theta2.sqrt();
    let k = hat(v);
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Principal logarithm, returned as the rotation vector. Valid for angles below pi.
pub fn log(r: &Matrix3<f64>) -> Vector3<f64> {
    let w = 0.5 * Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    let sin_t = w.norm();
    let cos_t = 0.5 * (r.trace() - 1.0);
    let theta = sin_t.atan2(cos_t);
    let scale = if theta < SMALL_ANGLE {
        1.0 + theta * theta / 6.0
    } else {
        theta / sin_t
    };
    w * scale
}

fn inverse_jacobian_coefficient(theta: f64) -> f64 {
    if theta < SMALL_ANGLE {
        1.0 / 12.0 + theta * theta / 720.0
    } else {
        1.0 / (theta * theta) - (1.0 + theta.cos()) / (2.0 * theta * theta.sin())
    }
}

/// Inverse left Jacobian: `Exp(phi + d) ~= Exp(Jl(phi) d) Exp(phi)`.
pub fn left_jacobian_inv(phi: &Vector3<f64>) -> Matrix3<f64> {
    let k = hat(phi);
    Matrix3::identity() - k * 0.5 + k * k * inverse_jacobian_coefficient(phi.norm())
}

/// Inverse right Jacobian: `Exp(phi + d) ~= Exp(phi) Exp(Jr(phi) d)`.
pub fn right_jacobian_inv(phi: &Vector3<f64>) -> Matrix3<f64> {
    let k = hat(phi);
    Matrix3::identity() + k * 0.5 + k * k * inverse_jacobian_coefficient(phi.norm())
}

/// Gram-Schmidt on the rows, keeping the third director's direction.
pub fn orthonormalize(q: &mut Matrix3<f64>) {
    let d3 = q.row(2).transpose().normalize();
    let d1_raw = q.row(0).transpose();
    let d1 = (d1_raw - d3 * d3.dot(&d1_raw)).normalize();
    let d2 = d3.cross(&d1);
    q.set_row(0, &d1.transpose());
    q.set_row(1, &d2.transpose());
    q.set_row(2, &d3.transpose());
}

/// Largest absolute entry of `Q Q^T - I`.
pub fn orthonormality_error(q: &Matrix3<f64>) -> f64 {
    (q * q.transpose() - Matrix3::identity()).abs().max()
}
