//! Coordinate-free linearization of the closed loop.
//!
//! The attitude is perturbed on the left, `R_ε = exp(ε S(ξ)) R`, and the body
//! rate additively, `ω_ε = ω + ε δω`. The state of the linear system is
//! `x = (ξ, δω) ∈ ℝ⁶`, where only ξ tangent to the sphere at `q` is physical.

use nalgebra::{Matrix6, RowVector6, Vector6};

use crate::dynamics::{closed_loop_field, pointing_rate, BodyState, GainSet, ReferenceSample, TrackingErrors};
use crate::error::{Error, Result};
use crate::geom::{exp_so3, hat, Mat3, TangentVec, UnitVec, Vec3};

pub type Vec6 = Vector6<f64>;
pub type Mat6 = Matrix6<f64>;

/// Split a 6-vector into its attitude and rate parts.
pub fn split(x: &Vec6) -> (Vec3, Vec3) {
    (x.fixed_rows::<3>(0).into_owned(), x.fixed_rows::<3>(3).into_owned())
}

pub fn join(xi: &Vec3, delta_omega: &Vec3) -> Vec6 {
    Vec6::new(xi.x, xi.y, xi.z, delta_omega.x, delta_omega.y, delta_omega.z)
}

/// First-order variations of the error vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbedErrors {
    pub e_q: Vec3,
    pub e_q_rate: Vec3,
    pub e_omega: Vec3,
}

/// `S(S(q_d) q) − S(q_d) S(q)`, the map taking ξ to `R e_qᵉ`.
fn attitude_error_map(q: &Vec3, q_d: &Vec3) -> Mat3 {
    hat(&q_d.cross(q)) - hat(q_d) * hat(q)
}

/// Variations of `e_q`, `ė_q` and `e_ω` along `(ξ, δω)`.
pub fn perturbed_errors(
    state: &BodyState,
    reference: &ReferenceSample,
    xi: &TangentVec,
    delta_omega: &Vec3,
) -> PerturbedErrors {
    let r = state.attitude.matrix();
    let r_t = r.transpose();
    let w = &state.omega;
    let q = *state.pointing().as_vec();
    let q_d = *reference.pointing.as_vec();
    let qd_dot = reference.pointing_rate;
    let q_dot = pointing_rate(state);
    let e = TrackingErrors::evaluate(state, reference);
    let xi = xi.vector();

    let e_q = r_t * attitude_error_map(&q, &q_d) * xi;
    let e_q_rate = r_t * hat(&(qd_dot.cross(&q) + q_d.cross(&q_dot))) * xi
        - r_t * hat(&qd_dot) * hat(&q) * xi
        - r_t * hat(&q_d) * hat(&q_dot) * xi
        - hat(&(r_t * q_d)) * hat(&Vec3::z()) * delta_omega
        + hat(&e.e_q) * delta_omega
        - w.cross(&e_q);
    let e_omega = delta_omega - r_t * hat(&(reference.attitude.matrix() * reference.omega)) * xi;
    PerturbedErrors {
        e_q,
        e_q_rate,
        e_omega,
    }
}

/// The 6×6 linear system `ẋ = A x` and its four 3×3 blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSystem {
    pub a: Mat6,
    /// ∂ξ̇/∂ξ
    pub xi_xi: Mat3,
    /// ∂ξ̇/∂δω
    pub xi_omega: Mat3,
    /// ∂δω̇/∂ξ
    pub omega_xi: Mat3,
    /// ∂δω̇/∂δω
    pub omega_omega: Mat3,
    pub state: BodyState,
    pub reference: ReferenceSample,
}

impl LinearizedSystem {
    pub fn constraint(&self) -> ConstraintRow {
        constraint_row(&self.state.pointing())
    }

    /// `exp(A t) x₀`.
    pub fn propagate(&self, x0: &Vec6, t: f64) -> Vec6 {
        (self.a * t).exp() * x0
    }
}

/// Evaluate the linearization at an arbitrary state.
pub fn assemble_a(state: &BodyState, reference: &ReferenceSample, gains: &GainSet) -> LinearizedSystem {
    let i3 = Mat3::identity();
    let e3 = Vec3::z();
    let r = *state.attitude.matrix();
    let r_t = r.transpose();
    let w = state.omega;
    let q = *state.pointing().as_vec();
    let q_dot = pointing_rate(state);
    let q_d = *reference.pointing.as_vec();
    let qd_dot = reference.pointing_rate;
    let rd = reference.attitude.matrix();
    let wd_inertial = rd * reference.omega;
    let wd_rate_inertial = rd * reference.omega_rate;
    let (lambda, eta, gamma) = (gains.lambda, gains.eta, gains.gamma);

    let e = TrackingErrors::evaluate(state, reference);
    let k = lambda + e.psi;
    let r_eq = r * e.e_q;
    let r_ew = r * e.e_omega;
    let m = attitude_error_map(&q, &q_d);
    let qqt = q * q.transpose();

    let xi_xi = qqt * hat(&(r * w));
    let xi_omega = (i3 - qqt) * r;

    let damping = e.e_q * r_eq.transpose() * r + i3 * (eta * gamma);
    let omega_omega = hat(&(r_t * wd_inertial))
        - (damping + (hat(&e.e_q) - hat(&(r_t * q_d)) * hat(&e3)) * k) / eta;

    let inner = e.e_q * r_ew.transpose() * hat(&r_eq)
        + e.e_q * r_eq.transpose() * hat(&r_ew)
        + e.e_q_rate * q_d.transpose() * hat(&q)
        + (r_t * hat(&(qd_dot.cross(&q) + q_d.cross(&q_dot)))
            - r_t * hat(&q_d) * hat(&(r * w.cross(&e3)))
            - r_t * hat(&qd_dot) * hat(&q)
            - hat(&w) * r_t * m)
            * k
        + (e.e_q * r_ew.transpose() * r + i3 * (e.psi_rate + gamma * k)) * r_t * m
        + e.e_q * q_d.transpose() * hat(&q) * gamma
        - damping * r_t * hat(&wd_inertial);
    let omega_xi = r_t * hat(&wd_rate_inertial) - hat(&w) * r_t * hat(&wd_inertial) - inner / eta;

    let mut a = Mat6::zeros();
    a.fixed_view_mut::<3, 3>(0, 0).copy_from(&xi_xi);
    a.fixed_view_mut::<3, 3>(0, 3).copy_from(&xi_omega);
    a.fixed_view_mut::<3, 3>(3, 0).copy_from(&omega_xi);
    a.fixed_view_mut::<3, 3>(3, 3).copy_from(&omega_omega);
    LinearizedSystem {
        a,
        xi_xi,
        xi_omega,
        omega_xi,
        omega_omega,
        state: *state,
        reference: *reference,
    }
}

/// The pointing constraint `C x = qᵀξ = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintRow(RowVector6<f64>);

impl ConstraintRow {
    pub fn row(&self) -> &RowVector6<f64> {
        &self.0
    }

    pub fn apply(&self, x: &Vec6) -> f64 {
        (self.0 * x)[0]
    }

    pub fn pointing(&self) -> Vec3 {
        Vec3::new(self.0[0], self.0[1], self.0[2])
    }
}

pub fn constraint_row(q: &UnitVec) -> ConstraintRow {
    let q = q.as_vec();
    ConstraintRow(RowVector6::new(q.x, q.y, q.z, 0.0, 0.0, 0.0))
}

/// Orthonormal basis of the plane perpendicular to `q`. Coordinate axes
/// already perpendicular to `q` are returned unchanged.
pub fn tangent_basis(q: &Vec3) -> [Vec3; 2] {
    let axes = [Vec3::x(), Vec3::y(), Vec3::z()];
    let drop = (0..3)
        .max_by(|&i, &j| q[i].abs().total_cmp(&q[j].abs()))
        .expect("three axes");
    let mut out = Vec::with_capacity(2);
    for (i, axis) in axes.iter().enumerate() {
        if i == drop {
            continue;
        }
        let mut v = axis - q * q.dot(axis);
        for u in &out {
            let u: &Vec3 = u;
            v -= u * u.dot(&v);
        }
        out.push(v.normalize());
    }
    [out[0], out[1]]
}

/// Five orthonormal vectors spanning the null space of `C`.
pub fn nullspace_basis(c: &ConstraintRow) -> [Vec6; 5] {
    let [t1, t2] = tangent_basis(&c.pointing());
    let z = Vec3::zeros();
    [
        join(&t1, &z),
        join(&t2, &z),
        join(&z, &Vec3::x()),
        join(&z, &Vec3::y()),
        join(&z, &Vec3::z()),
    ]
}

/// Orthogonal projection onto the null space of `C`.
pub fn project_nullspace(c: &ConstraintRow, x: &Vec6) -> Vec6 {
    let row = c.row().transpose();
    x - row * row.dot(x)
}

/// Central-difference Jacobian of the closed loop in the `(ξ, δω)` coordinates.
///
/// Column `j < 3` perturbs the attitude by `exp(ε S(e_j)) R`; columns `j ≥ 3`
/// perturb ω along `e_{j−3}`. The attitude rows are recovered from the
/// perturbed pointing rate through `ξ̇ = q × (δq̇ − ξ × q̇) − (ξᵀq̇) q`.
pub fn fd_jacobian(state: &BodyState, reference: &ReferenceSample, gains: &GainSet, eps: f64) -> Result<Mat6> {
    if !(1e-8..=1e-4).contains(&eps) {
        return Err(Error::invalid("eps", format!("must lie in [1e-8, 1e-4], got {eps}")));
    }
    let q = *state.pointing().as_vec();
    let q_dot = pointing_rate(state);
    let mut a = Mat6::zeros();
    for j in 0..6 {
        let mut basis = Vec6::zeros();
        basis[j] = 1.0;
        let (xi, dw) = split(&basis);
        let eval = |e: f64| {
            let s = BodyState::new(exp_so3(&(xi * e)) * state.attitude, state.omega + dw * e);
            let f = closed_loop_field(&s, reference, gains);
            (f.pointing_dot, f.omega_dot)
        };
        let (qp, wp) = eval(eps);
        let (qm, wm) = eval(-eps);
        let dq_dot = (qp - qm) / (2.0 * eps);
        let dw_dot = (wp - wm) / (2.0 * eps);
        let xi_dot = q.cross(&(dq_dot - xi.cross(&q_dot))) - q * xi.dot(&q_dot);
        a.fixed_view_mut::<3, 1>(0, j).copy_from(&xi_dot);
        a.fixed_view_mut::<3, 1>(3, j).copy_from(&dw_dot);
    }
    Ok(a)
}

/// Finite-difference Jacobian at `eps` together with the largest elementwise
/// change when the step is enlarged tenfold.
pub fn fd_jacobian_checked(
    state: &BodyState,
    reference: &ReferenceSample,
    gains: &GainSet,
    eps: f64,
) -> Result<(Mat6, f64)> {
    let fine = fd_jacobian(state, reference, gains, eps)?;
    let coarse = fd_jacobian(state, reference, gains, (eps * 10.0).min(1e-4))?;
    Ok((fine, (fine - coarse).abs().max()))
}
