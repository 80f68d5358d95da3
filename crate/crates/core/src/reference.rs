//! Rest-to-rest pointing maneuvers built from minimum-snap profiles.

use std::f64::consts::FRAC_PI_2;

use crate::dynamics::ReferenceSample;
use crate::error::{Error, Result};
use crate::geom::{exp_so3, Rotation, UnitVec, Vec3};

/// Value and first two derivatives of the normalized profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapSample {
    pub s: f64,
    pub ds: f64,
    pub dds: f64,
    /// Set when τ was outside `[0, 1]` and had to be clamped.
    pub clamped: bool,
}

/// Seventh-order rest-to-rest polynomial with vanishing first to third
/// derivatives at both ends.
pub fn min_snap_profile(tau: f64) -> SnapSample {
    let clamped = !(0.0..=1.0).contains(&tau);
    let t = tau.clamp(0.0, 1.0);
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    SnapSample {
        s: t4 * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t))),
        ds: t3 * (140.0 + t * (-420.0 + t * (420.0 - 140.0 * t))),
        dds: t2 * (420.0 + t * (-1680.0 + t * (2100.0 - 840.0 * t))),
        clamped,
    }
}

/// Rotation by `angle` about a fixed inertial `axis` during `[t_start, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManeuverSegment {
    pub axis: UnitVec,
    pub angle: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl ManeuverSegment {
    pub fn new(axis: UnitVec, angle: f64, t_start: f64, t_end: f64) -> Result<Self> {
        if !(t_end > t_start) || !t_start.is_finite() || !t_end.is_finite() {
            return Err(Error::invalid(
                "segment",
                format!("t_end ({t_end}) must exceed t_start ({t_start})"),
            ));
        }
        if !angle.is_finite() {
            return Err(Error::invalid("segment.angle", "must be finite"));
        }
        Ok(Self {
            axis,
            angle,
            t_start,
            t_end,
        })
    }

    fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    fn profile_at(&self, t: f64) -> SnapSample {
        min_snap_profile((t - self.t_start) / self.duration())
    }

    fn is_active(&self, t: f64) -> bool {
        t > self.t_start && t < self.t_end
    }
}

/// A time-ordered list of segments flown at constant spin.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    initial: Rotation,
    segments: Vec<ManeuverSegment>,
    spin: f64,
    duration: f64,
}

impl TrajectoryConfig {
    pub fn new(initial: Rotation, segments: Vec<ManeuverSegment>, spin: f64, duration: f64) -> Result<Self> {
        for pair in segments.windows(2) {
            if pair[1].t_start < pair[0].t_end {
                return Err(Error::invalid(
                    "segments",
                    format!(
                        "segments overlap or are out of order ({} < {})",
                        pair[1].t_start, pair[0].t_end
                    ),
                ));
            }
        }
        if let Some(first) = segments.first() {
            if first.t_start < 0.0 {
                return Err(Error::invalid("segments", "first segment starts before t = 0"));
            }
        }
        let last_end = segments.last().map_or(0.0, |s| s.t_end);
        if !(duration >= last_end) {
            return Err(Error::invalid(
                "duration",
                format!("{duration} s ends before the last segment ({last_end} s)"),
            ));
        }
        if !spin.is_finite() {
            return Err(Error::invalid("spin", "must be finite"));
        }
        Ok(Self {
            initial,
            segments,
            spin,
            duration,
        })
    }

    /// Quarter turn about E₁ over `[0.1, 0.6]` s, then a quarter turn about E₃
    /// over `[0.7, 1.2]` s, holding until 1.7 s.
    pub fn standard_maneuver(spin: f64) -> Self {
        let segments = vec![
            ManeuverSegment::new(UnitVec::e1(), FRAC_PI_2, 0.1, 0.6).unwrap(),
            ManeuverSegment::new(UnitVec::e3(), FRAC_PI_2, 0.7, 1.2).unwrap(),
        ];
        Self::new(Rotation::identity(), segments, spin, 1.7).unwrap()
    }

    /// Constant attitude at `initial` for `duration` seconds.
    pub fn hold(initial: Rotation, spin: f64, duration: f64) -> Result<Self> {
        Self::new(initial, Vec::new(), spin, duration)
    }

    pub fn initial(&self) -> &Rotation {
        &self.initial
    }

    pub fn segments(&self) -> &[ManeuverSegment] {
        &self.segments
    }

    pub fn spin(&self) -> f64 {
        self.spin
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }
}

/// Desired attitude, pointing and body rate at time `t`.
pub fn reference_at(cfg: &TrajectoryConfig, t: f64) -> ReferenceSample {
    let mut attitude = cfg.initial;
    for seg in &cfg.segments {
        let p = seg.profile_at(t);
        attitude = exp_so3(&(seg.axis.as_vec() * (seg.angle * p.s))) * attitude;
    }

    // Segments never overlap, so at most one contributes a rate.
    let mut omega = Vec3::new(0.0, 0.0, cfg.spin);
    let mut omega_rate = Vec3::zeros();
    if let Some(seg) = cfg.segments.iter().find(|s| s.is_active(t)) {
        let p = seg.profile_at(t);
        let dur = seg.duration();
        let axis_body = attitude.matrix().transpose() * seg.axis.as_vec();
        omega += axis_body * (seg.angle * p.ds / dur);
        // d/dt(R_dᵀ a) = −S(ω_p) R_dᵀ a = 0, since ω_p is parallel to R_dᵀ a.
        omega_rate = axis_body * (seg.angle * p.dds / (dur * dur));
    }
    ReferenceSample::rotating(attitude, omega, omega_rate)
}
