//! Geometric primitives on ℝ³, SO(3) and the two-sphere.
//!
//! Vectors are plain [`nalgebra::Vector3`] values. Rotations and unit vectors
//! are newtypes that validate their invariants on construction; the
//! integrator and the analysis code build them through the unchecked
//! constructors only where the invariant holds by construction (products of
//! rotations, exponentials).

use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Orthogonality tolerance accepted by [`Rotation::new`] (Frobenius norm of `RᵀR − I`).
pub const ROTATION_TOL: f64 = 1e-9;
/// Norm tolerance accepted by [`UnitVec::new`].
pub const UNIT_TOL: f64 = 1e-12;
/// Tangency tolerance accepted by [`TangentVec::new`].
pub const TANGENT_TOL: f64 = 1e-10;

const SKEW_TOL: f64 = 1e-9;
const EXP_TAYLOR_THRESHOLD: f64 = 1e-8;
const POLAR_MAX_DEVIATION: f64 = 0.1;

/// Cross-product (hat) map: `hat(r) * v == r × v`.
pub fn hat(r: &Vec3) -> Mat3 {
    Mat3::new(0.0, -r.z, r.y, r.z, 0.0, -r.x, -r.y, r.x, 0.0)
}

/// Inverse of [`hat`]. Rejects matrices that are not skew-symmetric within 1e-9.
pub fn vee(m: &Mat3) -> Result<Vec3> {
    let asymmetry = (m + m.transpose()).abs().max();
    if !(asymmetry <= SKEW_TOL) {
        return Err(Error::NotSkew { asymmetry });
    }
    Ok(Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)]))
}

/// Rodrigues exponential `exp(angle·S(axis))`.
///
/// A non-unit axis is normalised and the angle scaled by its norm, so
/// `rodrigues_exp(v, ε) == exp_so3(ε·v)`. The zero axis maps to the identity.
pub fn rodrigues_exp(axis: &Vec3, angle: f64) -> Rotation {
    exp_so3(&(axis * angle))
}

/// Matrix exponential of `S(v)`.
pub fn exp_so3(v: &Vec3) -> Rotation {
    let theta = v.norm();
    let k = hat(v);
    if theta < EXP_TAYLOR_THRESHOLD {
        return Rotation(Mat3::identity() + k + 0.5 * k * k);
    }
    let (s, c) = theta.sin_cos();
    let k_unit = k / theta;
    Rotation(Mat3::identity() + k_unit * s + k_unit * k_unit * (1.0 - c))
}

/// Closest rotation (orthogonal polar factor) to a near-rotation matrix.
pub fn reorthonormalize(m: &Mat3) -> Result<Rotation> {
    let deviation = (m.transpose() * m - Mat3::identity()).norm();
    if !(deviation < POLAR_MAX_DEVIATION) {
        return Err(Error::NotRotation(format!(
            "too far from SO(3) to repair (‖MᵀM − I‖ = {deviation:.3e})"
        )));
    }
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::NotRotation("SVD failed".into())),
    };
    let r = u * v_t;
    if r.determinant() < 0.0 {
        return Err(Error::NotRotation("reflection, det < 0".into()));
    }
    Ok(Rotation(r))
}

/// Orthogonal projection of `v` onto the tangent plane at `q`.
pub fn project_tangent(q: &UnitVec, v: &Vec3) -> TangentVec {
    let qv = q.as_vec();
    TangentVec {
        base: *q,
        vector: v - qv * qv.dot(v),
    }
}

/// Element of SO(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn new(m: Mat3) -> Result<Self> {
        let orth = (m.transpose() * m - Mat3::identity()).norm();
        let det = m.determinant();
        if !(orth <= ROTATION_TOL) || !((det - 1.0).abs() <= ROTATION_TOL) {
            return Err(Error::NotRotation(format!(
                "‖RᵀR − I‖ = {orth:.3e}, det = {det}"
            )));
        }
        Ok(Rotation(m))
    }

    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    /// Third body axis expressed in the inertial frame, `R e₃`.
    pub fn pointing(&self) -> UnitVec {
        UnitVec(self.0.column(2).into_owned())
    }

    /// Frobenius norm of `RᵀR − I`.
    pub fn orthogonality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Mat3::identity()).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<&Vec3> for &Rotation {
    type Output = Vec3;
    fn mul(self, rhs: &Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// Point on the two-sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVec(Vec3);

impl UnitVec {
    pub fn new(v: Vec3) -> Result<Self> {
        let norm = v.norm();
        if !((norm - 1.0).abs() <= UNIT_TOL) {
            return Err(Error::NotUnit { norm });
        }
        Ok(UnitVec(v))
    }

    pub fn normalize(v: &Vec3) -> Result<Self> {
        let norm = v.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NotUnit { norm });
        }
        Ok(UnitVec(v / norm))
    }

    pub fn e1() -> Self {
        UnitVec(Vec3::x())
    }

    pub fn e2() -> Self {
        UnitVec(Vec3::y())
    }

    pub fn e3() -> Self {
        UnitVec(Vec3::z())
    }

    pub fn as_vec(&self) -> &Vec3 {
        &self.0
    }

    pub fn dot(&self, other: &UnitVec) -> f64 {
        self.0.dot(&other.0)
    }
}

impl std::ops::Neg for UnitVec {
    type Output = UnitVec;
    fn neg(self) -> UnitVec {
        UnitVec(-self.0)
    }
}

/// Vector in the tangent plane `T_q S²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVec {
    base: UnitVec,
    vector: Vec3,
}

impl TangentVec {
    pub fn new(base: UnitVec, vector: Vec3) -> Result<Self> {
        let dot = base.as_vec().dot(&vector);
        if !(dot.abs() <= TANGENT_TOL) {
            return Err(Error::NotTangent { dot });
        }
        Ok(TangentVec { base, vector })
    }

    pub fn zero(base: UnitVec) -> Self {
        TangentVec {
            base,
            vector: Vec3::zeros(),
        }
    }

    pub fn base(&self) -> &UnitVec {
        &self.base
    }

    pub fn vector(&self) -> &Vec3 {
        &self.vector
    }
}
