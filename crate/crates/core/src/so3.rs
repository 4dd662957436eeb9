//! Rotation kinematics: axis-angle maps, angular velocity, signed cylindrical
//! coordinates and the reflection `Σ = diag(1, 1, -1)`.
//!
//! Angular velocity follows the body convention `Rᵀ R' y = ω × y`, so
//! `R' = R [ω]ₓ` and `R'' = R([ω]ₓ² + [ω']ₓ)`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Rᵀ R' + (Rᵀ R')ᵀ` before a derivative is rejected.
pub const ANTISYMMETRY_TOL: f64 = 1e-8;
/// Tolerance on `‖RᵀR - I‖_F` for accepting a matrix as a rotation.
pub const ORTHOGONALITY_TOL: f64 = 1e-9;

pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Inverse of [`hat`] applied to the antisymmetric part of `a`.
pub fn vee(a: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (a[(2, 1)] - a[(1, 2)]),
        0.5 * (a[(0, 2)] - a[(2, 0)]),
        0.5 * (a[(1, 0)] - a[(0, 1)]),
    )
}

pub fn orthogonality_defect(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).norm()
}

pub fn is_rotation(r: &Matrix3<f64>, tol: f64) -> bool {
    orthogonality_defect(r) <= tol && (r.determinant() - 1.0).abs() <= tol
}

/// Nearest rotation in the Frobenius norm (polar factor).
pub fn project_to_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut uf = u;
        uf.column_mut(2).neg_mut();
        r = uf * vt;
    }
    r
}

/// Rotation by `angle` about the unit axis `w`:
/// `R x = ⟨w,x⟩ w + sin α (w × x) − cos α w × (w × x)`.
pub fn rodrigues(axis: &Vector3<f64>, angle: f64) -> Result<Matrix3<f64>> {
    let n = axis.norm();
    if !n.is_finite() || (n - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "rotation axis must be a unit vector, got norm {n}"
        )));
    }
    if !angle.is_finite() {
        return Err(Error::invalid("rotation angle must be finite"));
    }
    let w = axis / n;
    let k = hat(&w);
    Ok(w * w.transpose() + angle.sin() * k - angle.cos() * k * k)
}

/// Signed cylindrical coordinates `(ρ, φ, ζ)` with `φ ∈ [0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cylindrical {
    pub rho: f64,
    pub phi: f64,
    pub zeta: f64,
}

impl Cylindrical {
    /// The in-plane unit direction `(cos φ, sin φ)`.
    pub fn direction(&self) -> [f64; 2] {
        [self.phi.cos(), self.phi.sin()]
    }
}

pub fn to_cylindrical(x: &Vector3<f64>) -> Cylindrical {
    let r = x.x.hypot(x.y);
    if r == 0.0 {
        return Cylindrical {
            rho: 0.0,
            phi: 0.0,
            zeta: x.z,
        };
    }
    let mut phi = x.y.atan2(x.x);
    let mut rho = r;
    if phi < 0.0 {
        phi += PI;
        rho = -rho;
    }
    if phi >= PI {
        phi -= PI;
        rho = -rho;
    }
    Cylindrical { rho, phi, zeta: x.z }
}

pub fn from_cylindrical(c: &Cylindrical) -> Result<Vector3<f64>> {
    if !(c.rho.is_finite() && c.phi.is_finite() && c.zeta.is_finite()) {
        return Err(Error::invalid("cylindrical coordinates must be finite"));
    }
    if !(0.0..PI).contains(&c.phi) {
        return Err(Error::invalid(format!("azimuth {} outside [0, π)", c.phi)));
    }
    Ok(Vector3::new(c.rho * c.phi.cos(), c.rho * c.phi.sin(), c.zeta))
}

/// `ω` from `(R, R')`, rejecting derivatives that are not tangent to SO(3).
pub fn angular_velocity(r: &Matrix3<f64>, r_dot: &Matrix3<f64>) -> Result<Vector3<f64>> {
    if !is_rotation(r, 1e-8) {
        return Err(Error::invalid("base point is not a rotation"));
    }
    let a = r.transpose() * r_dot;
    let sym = (a + a.transpose()).norm();
    if sym > ANTISYMMETRY_TOL * a.norm().max(1.0) {
        return Err(Error::InconsistentDerivative(format!(
            "RᵀR' has symmetric part of norm {sym:.3e}"
        )));
    }
    Ok(vee(&a))
}

/// `ω'` from `(R, R', R'')`.
pub fn angular_acceleration(r: &Matrix3<f64>, r_dot: &Matrix3<f64>, r_ddot: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let w = angular_velocity(r, r_dot)?;
    let k = hat(&w);
    let a = r.transpose() * r_ddot - k * k;
    let sym = (a + a.transpose()).norm();
    if sym > ANTISYMMETRY_TOL * a.norm().max(1.0) {
        return Err(Error::InconsistentDerivative(format!(
            "RᵀR'' - [ω]² has symmetric part of norm {sym:.3e}"
        )));
    }
    Ok(vee(&a))
}

pub fn sigma() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0))
}

/// `Σ R Σ`.
pub fn sigma_conjugate(r: &Matrix3<f64>) -> Matrix3<f64> {
    let s = sigma();
    s * r * s
}

/// Angular velocity of `Σ R Σ`, namely `−Σ ω`.
pub fn sigma_velocity(w: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(-w.x, -w.y, w.z)
}

/// Azimuth rate `φ'` of `ω`, or `None` when `ρ_ω = 0`.
pub fn azimuth_rate(w: &Vector3<f64>, w_dot: &Vector3<f64>) -> Option<f64> {
    let r2 = w.x * w.x + w.y * w.y;
    (r2 > 0.0).then(|| (w.x * w_dot.y - w.y * w_dot.x) / r2)
}

/// Derivative of the signed radius, consistent with a continuous choice of
/// azimuth: `ρ' = ⟨ω', φ⟩` where `ω = (ρ φ, ζ)`.
pub fn radius_rate(w: &Vector3<f64>, w_dot: &Vector3<f64>) -> f64 {
    let c = to_cylindrical(w);
    let [cx, cy] = c.direction();
    w_dot.x * cx + w_dot.y * cy
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NondegeneracyCertificate {
    /// `det(R e₃, R' e₃, R'' e₃)`.
    pub det: f64,
    /// `ρ_ω² (ζ_ω + φ_ω')`.
    pub cyl: f64,
}

impl NondegeneracyCertificate {
    pub fn discrepancy(&self) -> f64 {
        (self.det - self.cyl).abs()
    }
}

pub fn nondegeneracy_certificate(
    r: &Matrix3<f64>,
    r_dot: &Matrix3<f64>,
    r_ddot: &Matrix3<f64>,
) -> Result<NondegeneracyCertificate> {
    let w = angular_velocity(r, r_dot)?;
    let w_dot = angular_acceleration(r, r_dot, r_ddot)?;
    let e3 = Vector3::z();
    let det = Matrix3::from_columns(&[r * e3, r_dot * e3, r_ddot * e3]).determinant();
    let rho2 = w.x * w.x + w.y * w.y;
    let cyl = rho2 * w.z + (w.x * w_dot.y - w.y * w_dot.x);
    Ok(NondegeneracyCertificate { det, cyl })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rodrigues_quarter_turn_about_e3() {
        let r = rodrigues(&Vector3::z(), PI / 2.0).unwrap();
        assert!((r * Vector3::x() - Vector3::y()).norm() < 1e-15);
    }

    #[test]
    fn rodrigues_rejects_non_unit_axis() {
        assert!(matches!(
            rodrigues(&Vector3::new(0.0, 0.0, 2.0), 0.1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn cylindrical_examples() {
        let c = to_cylindrical(&Vector3::new(-1.0, 0.0, 2.0));
        assert_eq!((c.rho, c.phi, c.zeta), (-1.0, 0.0, 2.0));
        let c = to_cylindrical(&Vector3::new(0.0, 0.0, 5.0));
        assert_eq!((c.rho, c.phi, c.zeta), (0.0, 0.0, 5.0));
        let c = to_cylindrical(&Vector3::new(0.0, -2.0, 0.0));
        assert!((c.rho + 2.0).abs() < 1e-15 && (c.phi - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn angular_velocity_rejects_symmetric_part() {
        let r = Matrix3::identity();
        let rd = Matrix3::from_diagonal(&Vector3::new(1.0, 0.0, 0.0));
        assert!(matches!(
            angular_velocity(&r, &rd),
            Err(Error::InconsistentDerivative(_))
        ));
    }

    #[test]
    fn certificate_for_tilted_constant_velocity() {
        let w = Vector3::new(1.0, 0.0, 1.0);
        let r = Matrix3::identity();
        let rd = r * hat(&w);
        let rdd = r * hat(&w) * hat(&w);
        let c = nondegeneracy_certificate(&r, &rd, &rdd).unwrap();
        assert!((c.det - 1.0).abs() < 1e-14 && (c.cyl - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sigma_velocity_flips_planar_part() {
        let w = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(sigma_velocity(&w), Vector3::new(-1.0, -2.0, 3.0));
    }
}
