//! Plant model, tracking errors, the pointing/spin control law and the
//! resulting closed-loop vector field.
//!
//! Body-frame quantities (angular velocity, torques, error vectors) are
//! expressed in the rotating body frame `{e₁, e₂, e₃}`; pointing directions
//! and their rates live in the inertial frame `{E₁, E₂, E₃}`.

use crate::error::{Error, Result};
use crate::geom::{exp_so3, hat, Mat3, Rotation, UnitVec, Vec3, UNIT_TOL};

/// Inertia of the out-runner shell and propeller assembly, kg·m².
pub fn reference_inertia() -> Mat3 {
    Mat3::new(3.612, 0.762, 0.0, 0.762, 8.709, 0.0, 0.0, 0.0, 6.076) * 1e-5
}

/// Physical parameters of the spinning body.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantParams {
    inertia: Mat3,
    inertia_inv: Mat3,
    /// kg
    pub mass: f64,
    /// Distance from the pivot to the centre of mass, m.
    pub axle_length: f64,
    /// m/s²
    pub gravity: f64,
    /// Propeller drag torque coefficient, N·m·s²/rad².
    pub drag_coeff: f64,
    /// Propeller thrust coefficient, N·s²/rad².
    pub thrust_coeff: f64,
}

impl PlantParams {
    pub fn new(
        inertia: Mat3,
        mass: f64,
        axle_length: f64,
        gravity: f64,
        drag_coeff: f64,
        thrust_coeff: f64,
    ) -> Result<Self> {
        if !inertia.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("inertia", "entries must be finite"));
        }
        let asym = (inertia - inertia.transpose()).abs().max();
        if asym > 1e-12 * inertia.abs().max() {
            return Err(Error::invalid("inertia", "matrix must be symmetric"));
        }
        if inertia.cholesky().is_none() {
            return Err(Error::invalid("inertia", "matrix must be positive definite"));
        }
        let inertia_inv = inertia
            .try_inverse()
            .ok_or_else(|| Error::invalid("inertia", "matrix is singular"))?;
        for (name, value) in [
            ("mass", mass),
            ("axle_length", axle_length),
            ("gravity", gravity),
            ("drag_coeff", drag_coeff),
            ("thrust_coeff", thrust_coeff),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::invalid(name, format!("must be finite and ≥ 0, got {value}")));
            }
        }
        Ok(Self {
            inertia,
            inertia_inv,
            mass,
            axle_length,
            gravity,
            drag_coeff,
            thrust_coeff,
        })
    }

    pub fn inertia(&self) -> &Mat3 {
        &self.inertia
    }

    pub fn inertia_inv(&self) -> &Mat3 {
        &self.inertia_inv
    }

    /// Propeller drag torque `M_p = −c_drag·ω₃|ω₃|·e₃`, body frame.
    pub fn drag_torque(&self, omega: &Vec3) -> Vec3 {
        Vec3::new(0.0, 0.0, -self.drag_coeff * omega.z * omega.z.abs())
    }

    /// Propeller thrust `F_p = c_thrust·ω₃|ω₃|·e₃`, body frame. It acts along
    /// the axle and therefore produces no torque about the pivot.
    pub fn thrust(&self, omega: &Vec3) -> Vec3 {
        Vec3::new(0.0, 0.0, self.thrust_coeff * omega.z * omega.z.abs())
    }

    /// Gravity torque about the pivot, `−S(d·e₃)·m·g·RᵀE₃`.
    pub fn gravity_torque(&self, attitude: &Rotation) -> Vec3 {
        let down_body = attitude.matrix().transpose() * Vec3::z();
        -hat(&Vec3::new(0.0, 0.0, self.axle_length)) * down_body * (self.mass * self.gravity)
    }
}

impl Default for PlantParams {
    fn default() -> Self {
        Self::new(reference_inertia(), 0.1, 0.0, 9.81, 0.0, 0.0)
            .expect("reference plant parameters are valid")
    }
}

/// Controller gains and the desired spin rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSet {
    pub lambda: f64,
    pub eta: f64,
    pub gamma: f64,
    /// Desired spin about the pointing axis, rad/s.
    pub desired_spin: f64,
}

impl GainSet {
    pub fn new(lambda: f64, eta: f64, gamma: f64, desired_spin: f64) -> Result<Self> {
        for (name, value) in [("lambda", lambda), ("eta", eta), ("gamma", gamma)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive, got {value}")));
            }
        }
        if !desired_spin.is_finite() {
            return Err(Error::invalid("desired_spin", "must be finite"));
        }
        Ok(Self {
            lambda,
            eta,
            gamma,
            desired_spin,
        })
    }
}

impl Default for GainSet {
    fn default() -> Self {
        Self {
            lambda: 25e6,
            eta: 12e3,
            gamma: 500.0,
            desired_spin: 1000.0,
        }
    }
}

/// Attitude and body angular velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyState {
    pub attitude: Rotation,
    /// rad/s, body frame
    pub omega: Vec3,
}

impl BodyState {
    pub fn new(attitude: Rotation, omega: Vec3) -> Self {
        Self { attitude, omega }
    }

    pub fn pointing(&self) -> UnitVec {
        self.attitude.pointing()
    }

    /// Spin component `ω·e₃`.
    pub fn spin(&self) -> f64 {
        self.omega.z
    }

    pub fn is_finite(&self) -> bool {
        self.attitude.is_finite() && self.omega.iter().all(|x| x.is_finite())
    }
}

/// Desired attitude, pointing direction and body rate at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSample {
    pub attitude: Rotation,
    pub pointing: UnitVec,
    /// Inertial rate of the desired pointing direction, 1/s.
    pub pointing_rate: Vec3,
    /// Desired body angular velocity, rad/s.
    pub omega: Vec3,
    /// Desired body angular acceleration, rad/s².
    pub omega_rate: Vec3,
}

impl ReferenceSample {
    pub fn new(attitude: Rotation, pointing_rate: Vec3, omega: Vec3, omega_rate: Vec3) -> Result<Self> {
        let pointing = attitude.pointing();
        let dot = pointing.as_vec().dot(&pointing_rate);
        if dot.abs() > 1e-10 * (1.0 + pointing_rate.norm()) {
            return Err(Error::invalid(
                "pointing_rate",
                format!("must be orthogonal to the pointing direction (q·q̇ = {dot:.3e})"),
            ));
        }
        if (pointing.as_vec().norm() - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotUnit {
                norm: pointing.as_vec().norm(),
            });
        }
        Ok(Self {
            attitude,
            pointing,
            pointing_rate,
            omega,
            omega_rate,
        })
    }

    /// Constant attitude command with a steady spin `spin·e₃`.
    pub fn stationary(attitude: Rotation, spin: f64) -> Self {
        Self {
            attitude,
            pointing: attitude.pointing(),
            pointing_rate: Vec3::zeros(),
            omega: Vec3::new(0.0, 0.0, spin),
            omega_rate: Vec3::zeros(),
        }
    }

    /// Reference whose desired attitude rotates with body rate `omega`, so that
    /// `q̇_d = R_d (ω_d × e₃)`.
    pub fn rotating(attitude: Rotation, omega: Vec3, omega_rate: Vec3) -> Self {
        let pointing_rate = attitude.matrix() * omega.cross(&Vec3::z());
        Self {
            attitude,
            pointing: attitude.pointing(),
            pointing_rate,
            omega,
            omega_rate,
        }
    }

    pub fn is_static(&self) -> bool {
        self.pointing_rate.norm() <= 1e-12 && self.omega_rate.norm() <= 1e-12
    }

    /// `RᵀR_d ω_d`, the desired rate seen in the actual body frame.
    fn omega_in_body(&self, attitude: &Rotation) -> Vec3 {
        attitude.matrix().transpose() * (self.attitude.matrix() * self.omega)
    }
}

/// Pointing error `Ψ = 1 − qᵀq_d`.
pub fn error_psi(q: &UnitVec, q_d: &UnitVec) -> f64 {
    1.0 - q.dot(q_d)
}

/// Attitude error vector `Rᵀ(q_d × q)`, body frame.
pub fn error_eq(attitude: &Rotation, q_d: &UnitVec) -> Vec3 {
    let q = attitude.pointing();
    attitude.matrix().transpose() * q_d.as_vec().cross(q.as_vec())
}

/// Angular velocity error `ω − RᵀR_d ω_d`.
pub fn error_eomega(state: &BodyState, reference: &ReferenceSample) -> Vec3 {
    state.omega - reference.omega_in_body(&state.attitude)
}

/// Inertial rate of the pointing direction, `q̇ = R S(ω) e₃`.
pub fn pointing_rate(state: &BodyState) -> Vec3 {
    state.attitude.matrix() * state.omega.cross(&Vec3::z())
}

/// Time derivatives `(Ψ̇, ė_q)` along the motion.
pub fn error_rates(state: &BodyState, reference: &ReferenceSample) -> (f64, Vec3) {
    let e = TrackingErrors::evaluate(state, reference);
    (e.psi_rate, e.e_q_rate)
}

/// All error quantities used by the controller at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingErrors {
    pub psi: f64,
    pub e_q: Vec3,
    pub e_omega: Vec3,
    pub psi_rate: f64,
    pub e_q_rate: Vec3,
}

impl TrackingErrors {
    pub fn evaluate(state: &BodyState, reference: &ReferenceSample) -> Self {
        let r = state.attitude.matrix();
        let r_t = r.transpose();
        let q = state.pointing();
        let q_d = reference.pointing.as_vec();
        let q_dot = pointing_rate(state);

        let psi = error_psi(&q, &reference.pointing);
        let e_q = error_eq(&state.attitude, &reference.pointing);
        let e_omega = error_eomega(state, reference);
        let psi_rate = (r * e_q).dot(&(r * e_omega));
        let e_q_rate = r_t * (reference.pointing_rate.cross(q.as_vec()) + q_d.cross(&q_dot))
            - state.omega.cross(&e_q);
        Self {
            psi,
            e_q,
            e_omega,
            psi_rate,
            e_q_rate,
        }
    }

    pub fn sliding(&self, gains: &GainSet) -> Vec3 {
        sliding_vector(self.psi, &self.e_q, &self.e_omega, gains)
    }

    pub fn lyapunov(&self, gains: &GainSet) -> f64 {
        lyapunov(self.psi, &self.e_q, &self.e_omega, gains)
    }
}

/// `s = (Λ + Ψ) e_q + η e_ω`.
pub fn sliding_vector(psi: f64, e_q: &Vec3, e_omega: &Vec3, gains: &GainSet) -> Vec3 {
    e_q * (gains.lambda + psi) + e_omega * gains.eta
}

/// `V = ½‖s‖²`.
pub fn lyapunov(psi: f64, e_q: &Vec3, e_omega: &Vec3, gains: &GainSet) -> f64 {
    0.5 * sliding_vector(psi, e_q, e_omega, gains).norm_squared()
}

/// Feed-forward term `α = S(ω) RᵀR_d ω_d − RᵀR_d ω̇_d`.
fn feedforward(state: &BodyState, reference: &ReferenceSample) -> Vec3 {
    let r_t_rd = state.attitude.matrix().transpose() * reference.attitude.matrix();
    state.omega.cross(&(r_t_rd * reference.omega)) - r_t_rd * reference.omega_rate
}

/// Commanded closed-loop angular acceleration
/// `η⁻¹(−(Λ+Ψ)ė_q − Ψ̇e_q − γs) − α`.
fn commanded_acceleration(state: &BodyState, reference: &ReferenceSample, gains: &GainSet) -> Vec3 {
    let e = TrackingErrors::evaluate(state, reference);
    let s = e.sliding(gains);
    let alpha = feedforward(state, reference);
    (-(gains.lambda + e.psi) * e.e_q_rate - e.psi_rate * e.e_q - gains.gamma * s) / gains.eta - alpha
}

/// Torque cancelled by the controller: drag, gravity and gyroscopic terms.
fn plant_bias(state: &BodyState, plant: &PlantParams) -> Vec3 {
    let omega = &state.omega;
    plant.drag_torque(omega) + plant.gravity_torque(&state.attitude)
        - omega.cross(&(plant.inertia() * omega))
}

/// Control torque (N·m, body frame).
pub fn control_law(
    state: &BodyState,
    reference: &ReferenceSample,
    gains: &GainSet,
    plant: &PlantParams,
) -> Vec3 {
    plant.inertia() * commanded_acceleration(state, reference, gains) - plant_bias(state, plant)
}

/// Time derivative of the open-loop state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpenLoopRates {
    pub omega_dot: Vec3,
    pub attitude_dot: Mat3,
}

/// Rigid-body equations of motion under a body torque `u`.
pub fn open_loop_field(state: &BodyState, torque: &Vec3, plant: &PlantParams) -> OpenLoopRates {
    let omega = &state.omega;
    let net = torque + plant.drag_torque(omega) + plant.gravity_torque(&state.attitude)
        - omega.cross(&(plant.inertia() * omega));
    OpenLoopRates {
        omega_dot: plant.inertia_inv() * net,
        attitude_dot: state.attitude.matrix() * hat(omega),
    }
}

/// Time derivative of the closed-loop state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedLoopRates {
    pub omega_dot: Vec3,
    pub attitude_dot: Mat3,
    pub pointing_dot: Vec3,
}

/// Closed-loop vector field. Independent of the plant parameters, which the
/// control law cancels exactly.
pub fn closed_loop_field(state: &BodyState, reference: &ReferenceSample, gains: &GainSet) -> ClosedLoopRates {
    ClosedLoopRates {
        omega_dot: commanded_acceleration(state, reference, gains),
        attitude_dot: state.attitude.matrix() * hat(&state.omega),
        pointing_dot: pointing_rate(state),
    }
}

/// A closed-loop equilibrium in `(q, ω)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub pointing: UnitVec,
    pub omega: Vec3,
}

/// The desired and the antipodal equilibria of a stationary reference, in that order.
pub fn equilibria_of(reference: &ReferenceSample) -> Result<[Equilibrium; 2]> {
    if !reference.is_static() {
        return Err(Error::NonStaticReference(format!(
            "|q̇_d| = {:.3e}, |ω̇_d| = {:.3e}",
            reference.pointing_rate.norm(),
            reference.omega_rate.norm()
        )));
    }
    Ok([
        Equilibrium {
            pointing: reference.pointing,
            omega: reference.omega,
        },
        Equilibrium {
            pointing: -reference.pointing,
            omega: -reference.omega,
        },
    ])
}

/// Attitude representative of the antipodal equilibrium,
/// `exp(π S(R_d e₁)) exp(ζ S(R_d e₃)) R_d`.
pub fn antipodal_frame(desired: &Rotation, zeta: f64) -> Rotation {
    let rd = desired.matrix();
    let flip = exp_so3(&(rd.column(0).into_owned() * std::f64::consts::PI));
    let twist = exp_so3(&(rd.column(2).into_owned() * zeta));
    flip * twist * *desired
}

/// Full state at the desired equilibrium of a stationary reference.
pub fn desired_equilibrium_state(reference: &ReferenceSample) -> BodyState {
    BodyState::new(reference.attitude, reference.omega)
}

/// Full state at the antipodal equilibrium (ζ = 0 representative).
pub fn antipodal_equilibrium_state(reference: &ReferenceSample) -> BodyState {
    BodyState::new(antipodal_frame(&reference.attitude, 0.0), -reference.omega)
}
