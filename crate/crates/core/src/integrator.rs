//! Fourth-order Runge–Kutta–Munthe-Kaas integration on SO(3) × ℝ³.
//!
//! The attitude is advanced as `R·exp(S(Θ))` where Θ is built from stage
//! values of `dexp⁻¹`, so every step lands exactly on SO(3) up to rounding.
//! Backward flows use the same scheme with a negative step.

use crate::dynamics::{
    antipodal_equilibrium_state, closed_loop_field, control_law, open_loop_field, BodyState, GainSet,
    PlantParams, ReferenceSample, TrackingErrors,
};
use crate::error::{Error, Result};
use crate::geom::{exp_so3, reorthonormalize, UnitVec, Vec3};
use crate::reference::{reference_at, TrajectoryConfig};

/// Distance `Ψ(q₁, q₂) + ‖ω₁ − ω₂‖` on the tangent bundle of the sphere.
pub fn distance_metric(a: (&UnitVec, &Vec3), b: (&UnitVec, &Vec3)) -> f64 {
    (1.0 - a.0.dot(b.0)) + (a.1 - b.1).norm()
}

/// Where the desired attitude comes from at each instant.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceSource {
    Fixed(ReferenceSample),
    Trajectory(TrajectoryConfig),
}

impl ReferenceSource {
    pub fn at(&self, t: f64) -> ReferenceSample {
        match self {
            ReferenceSource::Fixed(r) => *r,
            ReferenceSource::Trajectory(cfg) => reference_at(cfg, t),
        }
    }
}

/// Quantities recorded alongside each state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMetrics {
    /// Pointing error to the current reference.
    pub psi: f64,
    /// Lyapunov value `½‖s‖²`.
    pub lyapunov: f64,
    /// Distance to `(q_d, ω_d)`.
    pub dist_desired: f64,
    /// Distance to `(−q_d, −ω_d)`.
    pub dist_antipodal: f64,
}

/// Angular-acceleration law of a rigid body; attitude kinematics are always `Ṙ = R S(ω)`.
pub trait Field: Sync {
    fn angular_acceleration(&self, t: f64, state: &BodyState) -> Vec3;

    /// Metrics to record with each sample, if the field has a reference.
    fn metrics(&self, _t: f64, _state: &BodyState) -> Option<SampleMetrics> {
        None
    }
}

impl<F> Field for F
where
    F: Fn(f64, &BodyState) -> Vec3 + Sync,
{
    fn angular_acceleration(&self, t: f64, state: &BodyState) -> Vec3 {
        self(t, state)
    }
}

fn reference_metrics(reference: &ReferenceSample, gains: &GainSet, state: &BodyState) -> SampleMetrics {
    let e = TrackingErrors::evaluate(state, reference);
    let q = state.pointing();
    SampleMetrics {
        psi: e.psi,
        lyapunov: e.lyapunov(gains),
        dist_desired: distance_metric((&q, &state.omega), (&reference.pointing, &reference.omega)),
        dist_antipodal: distance_metric((&q, &state.omega), (&-reference.pointing, &-reference.omega)),
    }
}

/// The closed loop evaluated directly, with the plant cancelled analytically.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    pub reference: ReferenceSource,
    pub gains: GainSet,
}

impl ClosedLoop {
    pub fn fixed(reference: ReferenceSample, gains: GainSet) -> Self {
        Self {
            reference: ReferenceSource::Fixed(reference),
            gains,
        }
    }
}

impl Field for ClosedLoop {
    fn angular_acceleration(&self, t: f64, state: &BodyState) -> Vec3 {
        closed_loop_field(state, &self.reference.at(t), &self.gains).omega_dot
    }

    fn metrics(&self, t: f64, state: &BodyState) -> Option<SampleMetrics> {
        Some(reference_metrics(&self.reference.at(t), &self.gains, state))
    }
}

/// The rigid-body plant driven by the control law.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlledPlant {
    pub plant: PlantParams,
    pub reference: ReferenceSource,
    pub gains: GainSet,
}

impl ControlledPlant {
    pub fn torque(&self, t: f64, state: &BodyState) -> Vec3 {
        control_law(state, &self.reference.at(t), &self.gains, &self.plant)
    }
}

impl Field for ControlledPlant {
    fn angular_acceleration(&self, t: f64, state: &BodyState) -> Vec3 {
        let u = self.torque(t, state);
        open_loop_field(state, &u, &self.plant).omega_dot
    }

    fn metrics(&self, t: f64, state: &BodyState) -> Option<SampleMetrics> {
        Some(reference_metrics(&self.reference.at(t), &self.gains, state))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        })
    }
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    /// Step magnitude, s.
    pub h: f64,
    /// Project the attitude back onto SO(3) every this many steps (0 disables).
    pub reorthonormalize_every: usize,
    /// Record every n-th step.
    pub record_decimation: usize,
    /// Angular speed beyond which a flow is declared divergent, rad/s.
    pub divergence_limit: f64,
}

impl IntegratorConfig {
    pub fn new(h: f64, reorthonormalize_every: usize, record_decimation: usize) -> Result<Self> {
        let cfg = Self {
            h,
            reorthonormalize_every,
            record_decimation,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_step(h: f64) -> Result<Self> {
        Self::new(h, Self::default().reorthonormalize_every, 1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::invalid("integrator.h", format!("must be positive, got {}", self.h)));
        }
        if self.record_decimation == 0 {
            return Err(Error::invalid("integrator.record_decimation", "must be at least 1"));
        }
        if !(self.divergence_limit > 0.0) {
            return Err(Error::invalid("integrator.divergence_limit", "must be positive"));
        }
        Ok(())
    }
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            h: 1e-5,
            reorthonormalize_every: 100,
            record_decimation: 1,
            divergence_limit: 1e9,
        }
    }
}

/// Inverse of the right-trivialized derivative of the exponential, applied to `v`.
fn dexp_inv(theta: &Vec3, v: &Vec3) -> Vec3 {
    let n = theta.norm();
    let c = if n < 1e-4 {
        1.0 / 12.0 + n * n / 720.0
    } else {
        let half = 0.5 * n;
        (1.0 - half / half.tan()) / (n * n)
    };
    let tv = theta.cross(v);
    v + tv * 0.5 + theta.cross(&tv) * c
}

/// Advance one step of signed size `h` from time `t`.
pub fn step_signed(field: &dyn Field, t: f64, state: &BodyState, h: f64) -> BodyState {
    let r = state.attitude;
    let w = state.omega;
    let stage = |theta: Vec3, omega: Vec3| BodyState::new(r * exp_so3(&theta), omega);

    let k1t = w;
    let k1w = field.angular_acceleration(t, state);

    let th2 = k1t * (0.5 * h);
    let w2 = w + k1w * (0.5 * h);
    let k2t = dexp_inv(&th2, &w2);
    let k2w = field.angular_acceleration(t + 0.5 * h, &stage(th2, w2));

    let th3 = k2t * (0.5 * h);
    let w3 = w + k2w * (0.5 * h);
    let k3t = dexp_inv(&th3, &w3);
    let k3w = field.angular_acceleration(t + 0.5 * h, &stage(th3, w3));

    let th4 = k3t * h;
    let w4 = w + k3w * h;
    let k4t = dexp_inv(&th4, &w4);
    let k4w = field.angular_acceleration(t + h, &stage(th4, w4));

    let theta = (k1t + (k2t + k3t) * 2.0 + k4t) * (h / 6.0);
    let omega = w + (k1w + (k2w + k3w) * 2.0 + k4w) * (h / 6.0);
    stage(theta, omega)
}

/// Advance one step of size `h > 0` in the given direction.
pub fn step(field: &dyn Field, t: f64, state: &BodyState, h: f64, direction: Direction) -> Result<BodyState> {
    let next = step_signed(field, t, state, h * direction.sign());
    if !next.is_finite() {
        return Err(Error::NonFiniteState { t: t + h * direction.sign() });
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSample {
    pub t: f64,
    pub state: BodyState,
    pub metrics: Option<SampleMetrics>,
}

/// Recorded trajectory of one flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace {
    pub direction: Direction,
    pub samples: Vec<FlowSample>,
    /// Set when the flow stopped early because the state blew up.
    pub truncated: Option<String>,
}

impl FlowTrace {
    pub fn final_sample(&self) -> Option<&FlowSample> {
        self.samples.last()
    }

    pub fn final_state(&self) -> Option<&BodyState> {
        self.samples.last().map(|s| &s.state)
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated.is_some()
    }
}

/// Integrate over a duration `duration > 0` starting at `t0`, stopping
/// at the first non-finite or divergent state and recording why.
pub fn flow_truncating(
    field: &dyn Field,
    initial: &BodyState,
    t0: f64,
    duration: f64,
    direction: Direction,
    cfg: &IntegratorConfig,
) -> Result<FlowTrace> {
    cfg.validate()?;
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::invalid("duration", format!("must be positive, got {duration}")));
    }
    let n_steps = (duration / cfg.h - 1e-9).ceil().max(1.0) as usize;
    let h = duration / n_steps as f64 * direction.sign();

    let record = |t: f64, state: BodyState| FlowSample {
        t,
        state,
        metrics: field.metrics(t, &state),
    };

    let mut trace = FlowTrace {
        direction,
        samples: Vec::with_capacity(n_steps / cfg.record_decimation + 2),
        truncated: None,
    };
    let mut state = *initial;
    trace.samples.push(record(t0, state));
    for k in 1..=n_steps {
        let t_prev = t0 + (k - 1) as f64 * h;
        let t = t0 + k as f64 * h;
        state = step_signed(field, t_prev, &state, h);
        if cfg.reorthonormalize_every > 0 && k % cfg.reorthonormalize_every == 0 && state.is_finite() {
            match reorthonormalize(state.attitude.matrix()) {
                Ok(r) => state.attitude = r,
                Err(e) => {
                    trace.truncated = Some(e.to_string());
                    break;
                }
            }
        }
        if !state.is_finite() {
            trace.truncated = Some(Error::NonFiniteState { t }.to_string());
            break;
        }
        let speed = state.omega.norm();
        if speed > cfg.divergence_limit {
            trace.truncated = Some(Error::Diverged { t, norm: speed }.to_string());
            break;
        }
        if k % cfg.record_decimation == 0 || k == n_steps {
            trace.samples.push(record(t, state));
        }
    }
    Ok(trace)
}

/// Integrate over `duration`; any blowup is an error.
pub fn flow(
    field: &dyn Field,
    initial: &BodyState,
    t0: f64,
    duration: f64,
    direction: Direction,
    cfg: &IntegratorConfig,
) -> Result<FlowTrace> {
    let trace = flow_truncating(field, initial, t0, duration, direction, cfg)?;
    match &trace.truncated {
        None => Ok(trace),
        Some(_) => {
            let t = trace.final_sample().map_or(t0, |s| s.t);
            let norm = trace.final_state().map_or(f64::NAN, |s| s.omega.norm());
            Err(Error::Diverged { t, norm })
        }
    }
}

/// Attitude representative used when reporting distances at the antipodal
/// equilibrium of a fixed reference.
pub fn antipodal_state_of(reference: &ReferenceSample) -> BodyState {
    antipodal_equilibrium_state(reference)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::geom::{rodrigues_exp, Rotation};

    fn zero_field(_t: f64, _s: &BodyState) -> Vec3 {
        Vec3::zeros()
    }

    fn desired_loop() -> ClosedLoop {
        ClosedLoop::fixed(ReferenceSample::stationary(Rotation::identity(), 1000.0), GainSet::default())
    }

    #[test]
    fn dexp_inv_series_matches_closed_form_near_switch() {
        let v = Vec3::new(0.3, -1.2, 0.7);
        let theta = Vec3::new(1.0, 2.0, -0.5).normalize() * 1.01e-4;
        let n = theta.norm();
        let series_c = 1.0 / 12.0 + n * n / 720.0;
        let tv = theta.cross(&v);
        let series = v + tv * 0.5 + theta.cross(&tv) * series_c;
        assert!((dexp_inv(&theta, &v) - series).norm() < 1e-14);
    }

    #[test]
    fn zero_field_at_rest_is_fixed() {
        let s = BodyState::new(rodrigues_exp(&Vec3::new(1.0, 1.0, 0.0), 0.4), Vec3::zeros());
        let next = step(&zero_field, 0.0, &s, 1e-3, Direction::Forward).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn constant_spin_is_exact() {
        let w = 1000.0;
        let h = 1e-5;
        let s = BodyState::new(Rotation::identity(), Vec3::new(0.0, 0.0, w));
        let next = step(&zero_field, 0.0, &s, h, Direction::Forward).unwrap();
        let expected = rodrigues_exp(&Vec3::z(), w * h);
        assert!((next.attitude.matrix() - expected.matrix()).abs().max() < 1e-12);

        let trace = flow(&zero_field, &s, 0.0, 0.01, Direction::Forward, &IntegratorConfig::default()).unwrap();
        for sample in &trace.samples {
            assert!((sample.state.spin() - w).abs() < 1e-12);
        }
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let field = desired_loop();
        let eq = BodyState::new(Rotation::identity(), Vec3::new(0.0, 0.0, 1000.0));
        let mut s = eq;
        for k in 0..10_000 {
            s = step(&field, k as f64 * 1e-5, &s, 1e-5, Direction::Forward).unwrap();
        }
        let q = s.pointing();
        assert!(distance_metric((&q, &s.omega), (&UnitVec::e3(), &eq.omega)) < 1e-12);
    }

    #[test]
    fn times_are_strictly_monotone() {
        let field = desired_loop();
        let s = BodyState::new(rodrigues_exp(&Vec3::x(), 0.1), Vec3::new(0.0, 0.0, 1000.0));
        let cfg = IntegratorConfig::new(1e-5, 100, 7).unwrap();
        for dir in [Direction::Forward, Direction::Backward] {
            let trace = flow(&field, &s, 0.0, 0.003, dir, &cfg).unwrap();
            for w in trace.samples.windows(2) {
                assert!((w[1].t - w[0].t) * dir.sign() > 0.0);
            }
            let last = trace.final_sample().unwrap().t;
            assert!((last - 0.003 * dir.sign()).abs() < 1e-15);
        }
    }

    #[test]
    fn small_perturbation_converges_forward() {
        let field = desired_loop();
        let s = BodyState::new(rodrigues_exp(&Vec3::x(), 1e-6), Vec3::new(0.0, 0.0, 1000.0));
        let trace = flow(&field, &s, 0.0, 0.1, Direction::Forward, &IntegratorConfig::default()).unwrap();
        let m = trace.final_sample().unwrap().metrics.unwrap();
        assert!(m.dist_desired < 1e-9, "{}", m.dist_desired);
        for sample in &trace.samples {
            assert!((sample.state.pointing().as_vec().norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn backward_then_forward_returns_to_start() {
        let field = desired_loop();
        let s = BodyState::new(
            rodrigues_exp(&Vec3::new(0.2, -0.4, 0.1).normalize(), 0.3),
            Vec3::new(5.0, -3.0, 990.0),
        );
        let cfg = IntegratorConfig::with_step(1e-6).unwrap();
        let back = flow(&field, &s, 0.0, 0.005, Direction::Backward, &cfg).unwrap();
        let mid = *back.final_state().unwrap();
        let fwd = flow(&field, &mid, -0.005, 0.005, Direction::Forward, &cfg).unwrap();
        let end = fwd.final_state().unwrap();
        let d = distance_metric((&end.pointing(), &end.omega), (&s.pointing(), &s.omega));
        assert!(d < 1e-6, "{d}");
    }

    #[test]
    fn attitude_stays_orthogonal() {
        let field = desired_loop();
        let s = BodyState::new(rodrigues_exp(&Vec3::y(), 2.0), Vec3::new(40.0, -30.0, -200.0));
        let trace = flow(&field, &s, 0.0, 0.05, Direction::Forward, &IntegratorConfig::default()).unwrap();
        for sample in &trace.samples {
            assert!(sample.state.attitude.orthogonality_error() < 1e-9);
        }
    }

    #[test]
    fn plant_and_closed_loop_agree() {
        let reference = ReferenceSource::Fixed(ReferenceSample::stationary(rodrigues_exp(&Vec3::y(), 0.3), 1000.0));
        let gains = GainSet::default();
        let plant = PlantParams::new(crate::dynamics::reference_inertia(), 0.2, 0.03, 9.81, 1e-8, 1e-6).unwrap();
        let direct = ClosedLoop {
            reference: reference.clone(),
            gains,
        };
        let via_plant = ControlledPlant {
            plant,
            reference,
            gains,
        };
        let s = BodyState::new(rodrigues_exp(&Vec3::x(), 0.8), Vec3::new(30.0, -10.0, 800.0));
        let cfg = IntegratorConfig::default();
        let a = flow(&direct, &s, 0.0, 0.01, Direction::Forward, &cfg).unwrap();
        let b = flow(&via_plant, &s, 0.0, 0.01, Direction::Forward, &cfg).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert!((x.state.attitude.matrix() - y.state.attitude.matrix()).abs().max() < 1e-8);
            assert!((x.state.omega - y.state.omega).norm() < 1e-8 * (1.0 + x.state.omega.norm()));
        }
    }

    #[test]
    fn closed_loop_matches_flow_finite_difference() {
        let field = desired_loop();
        let s = BodyState::new(rodrigues_exp(&Vec3::new(1.0, 2.0, 0.0).normalize(), 1.1), Vec3::new(3.0, 7.0, 600.0));
        let h = 1e-7;
        let fwd = step_signed(&field, 0.0, &s, h);
        let bwd = step_signed(&field, 0.0, &s, -h);
        let fd = (fwd.omega - bwd.omega) / (2.0 * h);
        let exact = field.angular_acceleration(0.0, &s);
        assert!((fd - exact).norm() < 1e-4 * exact.norm());
    }

    #[test]
    fn fourth_order_convergence() {
        let field = desired_loop();
        let s = BodyState::new(rodrigues_exp(&Vec3::new(0.3, 1.0, 0.0).normalize(), 0.7), Vec3::new(20.0, -15.0, 700.0));
        let run = |h: f64| {
            let cfg = IntegratorConfig::new(h, 0, usize::MAX).unwrap();
            *flow(&field, &s, 0.0, 0.01, Direction::Forward, &cfg).unwrap().final_state().unwrap()
        };
        let hs = [1e-4, 5e-5, 2.5e-5];
        let reference = run(2.5e-6);
        let errs: Vec<f64> = hs
            .iter()
            .map(|&h| {
                let x = run(h);
                (x.attitude.matrix() - reference.attitude.matrix()).abs().max()
                    + (x.omega - reference.omega).norm() / reference.omega.norm()
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 3.5, "order {order}, errors {errs:?}");
        }
    }

    #[test]
    fn backward_flow_from_antipode_neighbourhood_truncates_not_panics() {
        let field = desired_loop();
        let r = ReferenceSample::stationary(Rotation::identity(), 1000.0);
        let mut s = antipodal_state_of(&r);
        s.attitude = rodrigues_exp(&Vec3::x(), PI - 0.5);
        let cfg = IntegratorConfig {
            divergence_limit: 1e5,
            ..IntegratorConfig::default()
        };
        let trace = flow_truncating(&field, &s, 0.0, 0.5, Direction::Backward, &cfg).unwrap();
        if trace.is_truncated() {
            assert!(flow(&field, &s, 0.0, 0.5, Direction::Backward, &cfg).is_err());
        }
        assert!(trace.samples.iter().all(|x| x.state.is_finite()));
    }
}
