//! Seeding and batch integration of trajectories near the two equilibria of a
//! stationary reference.
//!
//! Saddle seeds perturb the antipodal equilibrium along the real span of its
//! stable eigenvectors; desired seeds are small planar tilts and spin offsets
//! about the desired equilibrium.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{antipodal_equilibrium_state, desired_equilibrium_state, BodyState, GainSet, ReferenceSample};
use crate::error::{Error, Result};
use crate::geom::{exp_so3, Vec3};
use crate::integrator::{flow_truncating, ClosedLoop, Direction, FlowTrace, IntegratorConfig};
use crate::linearization::{assemble_a, constraint_row, Vec6};
use crate::spectral::eig::CVec6;
use crate::spectral::{classify_equilibrium, eig6, Classification, EigenStructure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquilibriumKind {
    Desired,
    Antipodal,
}

impl std::fmt::Display for EquilibriumKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EquilibriumKind::Desired => "desired",
            EquilibriumKind::Antipodal => "antipodal",
        })
    }
}

/// Which eigenvector carries the `ς sin ϑ` part of a saddle seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpinVectorChoice {
    /// The third eigenvector in canonical order (zero eigenvalue, pure `ξ₃`).
    /// Its ω part vanishes and the tangent projection removes the rest, so
    /// the term has no effect.
    LiteralV3,
    /// The fourth eigenvector (eigenvalue `−γ`, pure `δω₃`).
    SpinMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSpec {
    pub equilibrium: EquilibriumKind,
    pub eps: f64,
    pub varsigma: f64,
    /// Complex weight on the stable focus eigenvector (saddle seeds only).
    pub sigma: Complex64,
    pub thetas: Vec<f64>,
    pub spin_vector: SpinVectorChoice,
}

/// `k·2π/n` for `k = 0..n`.
pub fn evenly_spaced_angles(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 * TAU / n as f64).collect()
}

impl SeedSpec {
    pub fn saddle_default() -> Self {
        Self {
            equilibrium: EquilibriumKind::Antipodal,
            eps: 1e-6,
            varsigma: 1e-6,
            sigma: Complex64::new(1.0, 1.0),
            thetas: evenly_spaced_angles(10),
            spin_vector: SpinVectorChoice::LiteralV3,
        }
    }

    pub fn desired_default() -> Self {
        Self {
            equilibrium: EquilibriumKind::Desired,
            eps: 1e-6,
            varsigma: 1e-7,
            sigma: Complex64::new(1.0, 1.0),
            thetas: evenly_spaced_angles(10),
            spin_vector: SpinVectorChoice::LiteralV3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::invalid("eps", format!("must be positive, got {}", self.eps)));
        }
        if !(self.varsigma >= 0.0 && self.varsigma.is_finite()) {
            return Err(Error::invalid("varsigma", format!("must be non-negative, got {}", self.varsigma)));
        }
        if !(self.sigma.re.is_finite() && self.sigma.im.is_finite()) {
            return Err(Error::invalid("sigma", "must be finite"));
        }
        if self.thetas.is_empty() {
            return Err(Error::invalid("thetas", "at least one angle is required"));
        }
        if let Some(t) = self.thetas.iter().find(|t| !t.is_finite()) {
            return Err(Error::invalid("thetas", format!("angle {t} is not finite")));
        }
        let mut sorted = self.thetas.clone();
        sorted.sort_by(f64::total_cmp);
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid("thetas", format!("angle {} appears more than once", w[0])));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Seed {
    pub theta: f64,
    pub state: BodyState,
    /// The perturbation leaves `(q, ω)` unchanged, so the seed sits on the
    /// equilibrium itself.
    pub degenerate: bool,
}

/// Real perturbation `ε cos ϑ (σ v₁ + σ̄ v̄₁) + ς sin ϑ v_spin` in `(ξ, δω)` coordinates.
fn saddle_perturbation(spec: &SeedSpec, theta: f64, v1: &CVec6, v_spin: &CVec6) -> Vec6 {
    let focus = (v1 * spec.sigma).map(|c| 2.0 * c.re);
    let spin = v_spin.map(|c| c.re);
    focus * (spec.eps * theta.cos()) + spin * (spec.varsigma * theta.sin())
}

/// Seeds on the stable eigenspace of the antipodal equilibrium.
///
/// `es` must be the classified eigen-structure at that equilibrium; the stable
/// focus pair is the complex pair with negative real part.
pub fn seeds_saddle(spec: &SeedSpec, reference: &ReferenceSample, es: &EigenStructure) -> Result<Vec<Seed>> {
    spec.validate()?;
    if es.classification != Some(Classification::Saddle) {
        return Err(Error::invalid(
            "equilibrium",
            format!("saddle seeds need a saddle, got {:?}", es.classification),
        ));
    }
    let v1_index = (0..es.complex_pair_count())
        .find(|&k| es.value(k).re < 0.0)
        .ok_or_else(|| Error::NoComplexPair("no stable complex pair at the antipodal equilibrium".into()))?;
    let v1 = es.vector(v1_index);
    let spin_index = match spec.spin_vector {
        SpinVectorChoice::LiteralV3 => 2,
        SpinVectorChoice::SpinMode => 3,
    };
    let v_spin = es.vector(spin_index);
    let base = antipodal_equilibrium_state(reference);
    let tol = 1e-9 * spec.eps.max(spec.varsigma);

    Ok(spec
        .thetas
        .iter()
        .map(|&theta| {
            let p = saddle_perturbation(spec, theta, v1, v_spin);
            let (xi, dw) = (p.fixed_rows::<3>(0).into_owned(), p.fixed_rows::<3>(3).into_owned());
            let q = base.pointing();
            let felt = (xi - q.as_vec() * xi.dot(q.as_vec())).norm() + dw.norm();
            Seed {
                theta,
                state: BodyState::new(exp_so3(&xi) * base.attitude, base.omega + dw),
                degenerate: felt <= tol,
            }
        })
        .collect())
}

/// Seeds tilted by `ε` in the plane normal to `q_d` and spun off by `ς`.
pub fn seeds_desired(spec: &SeedSpec, reference: &ReferenceSample) -> Result<Vec<Seed>> {
    spec.validate()?;
    let base = desired_equilibrium_state(reference);
    let rd = reference.attitude.matrix();
    let (a1, a2) = (rd.column(0).into_owned(), rd.column(1).into_owned());
    Ok(spec
        .thetas
        .iter()
        .map(|&theta| {
            let (s, c) = theta.sin_cos();
            let tilt = (a1 * c + a2 * s) * spec.eps;
            let dw = Vec3::new(c, s, 0.0) * spec.eps + Vec3::z() * spec.varsigma;
            Seed {
                theta,
                state: BodyState::new(exp_so3(&tilt) * base.attitude, base.omega + dw),
                degenerate: false,
            }
        })
        .collect())
}

/// Build seeds for `spec`, computing the antipodal eigen-structure when needed.
pub fn generate_seeds(spec: &SeedSpec, reference: &ReferenceSample, gains: &GainSet) -> Result<Vec<Seed>> {
    match spec.equilibrium {
        EquilibriumKind::Desired => seeds_desired(spec, reference),
        EquilibriumKind::Antipodal => {
            let state = antipodal_equilibrium_state(reference);
            let lin = assemble_a(&state, reference, gains);
            let es = classify_equilibrium(&eig6(&lin.a)?, &constraint_row(&state.pointing()));
            seeds_saddle(spec, reference, &es)
        }
    }
}

/// Integrate every seed under the closed loop of a fixed reference, in
/// parallel. Blowups truncate the individual trace; output order follows
/// the seeds.
pub fn run_flow_batch(
    seeds: &[Seed],
    reference: &ReferenceSample,
    gains: &GainSet,
    duration: f64,
    direction: Direction,
    cfg: &IntegratorConfig,
) -> Result<Vec<FlowTrace>> {
    cfg.validate()?;
    let field = ClosedLoop::fixed(*reference, *gains);
    seeds
        .par_iter()
        .map(|seed| flow_truncating(&field, &seed.state, 0.0, duration, direction, cfg))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceVerdict {
    pub target: EquilibriumKind,
    pub final_distance: f64,
    /// Earliest recorded time after which the distance stays below the threshold.
    pub time_to_threshold: Option<f64>,
    pub converged: bool,
}

fn distance_to(sample: &crate::integrator::FlowSample, target: EquilibriumKind) -> Option<f64> {
    sample.metrics.map(|m| match target {
        EquilibriumKind::Desired => m.dist_desired,
        EquilibriumKind::Antipodal => m.dist_antipodal,
    })
}

/// Whether a trace ends within `threshold` of `target` without truncation.
pub fn convergence_check(trace: &FlowTrace, target: EquilibriumKind, threshold: f64) -> Result<ConvergenceVerdict> {
    let distances: Vec<(f64, f64)> = trace
        .samples
        .iter()
        .map(|s| distance_to(s, target).map(|d| (s.t, d)))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::invalid("trace", "samples carry no reference metrics"))?;
    let &(_, final_distance) = distances
        .last()
        .ok_or_else(|| Error::invalid("trace", "no samples"))?;
    let mut time_to_threshold = None;
    for &(t, d) in distances.iter().rev() {
        if d < threshold {
            time_to_threshold = Some(t);
        } else {
            break;
        }
    }
    Ok(ConvergenceVerdict {
        target,
        final_distance,
        time_to_threshold,
        converged: !trace.is_truncated() && final_distance < threshold,
    })
}

/// Smallest recorded distance to `target` along a trace.
pub fn min_distance(trace: &FlowTrace, target: EquilibriumKind) -> Option<f64> {
    trace
        .samples
        .iter()
        .filter_map(|s| distance_to(s, target))
        .min_by(f64::total_cmp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rotation;
    use crate::integrator::distance_metric;

    fn reference() -> ReferenceSample {
        ReferenceSample::stationary(Rotation::identity(), 1000.0)
    }

    #[test]
    fn first_saddle_seed_tilts_about_minus_e1() {
        let seeds = generate_seeds(&SeedSpec::saddle_default(), &reference(), &GainSet::default()).unwrap();
        assert_eq!(seeds.len(), 10);
        let s0 = &seeds[0];
        assert_eq!(s0.theta, 0.0);
        assert!(!s0.degenerate);
        // The pointing moves from −e₃ by ξ × (−e₃) with ξ ≈ (−1.84e-9, −4e-11, 0).
        let q = s0.state.pointing();
        assert!(q.as_vec().x.abs() < 1e-10);
        assert!((q.as_vec().y + 1.84e-9).abs() < 0.02e-9, "{}", q.as_vec().y);
        let w = s0.state.omega;
        assert!((w.z + 1000.0).abs() < 1e-12);
        assert!((w.x - 1e-6 * 2.0 * (0.7071 * 1.0)).abs() < 1e-9, "{w}");
    }

    #[test]
    fn saddle_seeds_are_close_to_the_antipodal_equilibrium() {
        let r = reference();
        let anti = antipodal_equilibrium_state(&r);
        for spec in [
            SeedSpec::saddle_default(),
            SeedSpec {
                spin_vector: SpinVectorChoice::SpinMode,
                ..SeedSpec::saddle_default()
            },
        ] {
            for seed in generate_seeds(&spec, &r, &GainSet::default()).unwrap() {
                let d = distance_metric(
                    (&seed.state.pointing(), &seed.state.omega),
                    (&anti.pointing(), &anti.omega),
                );
                assert!(d < 10.0 * (spec.eps + spec.varsigma), "{d}");
                assert!(d > 0.0);
            }
        }
    }

    #[test]
    fn literal_v3_term_is_inert_but_spin_mode_moves_omega3() {
        let r = reference();
        let g = GainSet::default();
        let theta = vec![0.7];
        let lit = SeedSpec {
            thetas: theta.clone(),
            ..SeedSpec::saddle_default()
        };
        let spin = SeedSpec {
            spin_vector: SpinVectorChoice::SpinMode,
            ..lit.clone()
        };
        let a = generate_seeds(&lit, &r, &g).unwrap()[0];
        let b = generate_seeds(&spin, &r, &g).unwrap()[0];
        assert!((a.state.omega.z + 1000.0).abs() < 1e-12);
        assert!((b.state.omega.z - a.state.omega.z - 1e-6 * 0.7f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn pure_spin_seed_is_degenerate_with_literal_v3() {
        let spec = SeedSpec {
            thetas: vec![std::f64::consts::FRAC_PI_2],
            ..SeedSpec::saddle_default()
        };
        let seeds = generate_seeds(&spec, &reference(), &GainSet::default()).unwrap();
        assert!(seeds[0].degenerate);
    }

    #[test]
    fn desired_seeds_match_the_tilt_formula() {
        let seeds = seeds_desired(&SeedSpec::desired_default(), &reference()).unwrap();
        let s = seeds[0].state;
        assert!((s.pointing().as_vec() - Vec3::new(0.0, -1e-6, 1.0)).norm() < 1e-12);
        assert!((s.omega - Vec3::new(1e-6, 0.0, 1000.0 + 1e-7)).norm() < 1e-12);
    }

    #[test]
    fn saddle_seeds_need_a_saddle() {
        let r = reference();
        let st = desired_equilibrium_state(&r);
        let lin = assemble_a(&st, &r, &GainSet::default());
        let es = classify_equilibrium(&eig6(&lin.a).unwrap(), &constraint_row(&st.pointing()));
        assert!(seeds_saddle(&SeedSpec::saddle_default(), &r, &es).is_err());
    }

    #[test]
    fn spec_validation() {
        let bad = SeedSpec {
            eps: 0.0,
            ..SeedSpec::saddle_default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidParameter { .. })));
        let empty = SeedSpec {
            thetas: vec![],
            ..SeedSpec::desired_default()
        };
        assert!(empty.validate().is_err());
        let repeated = SeedSpec {
            thetas: vec![0.5, 1.0, 0.5],
            ..SeedSpec::desired_default()
        };
        assert!(repeated.validate().is_err());
    }

    #[test]
    fn desired_seeds_converge_forward_and_batch_preserves_order() {
        let r = reference();
        let g = GainSet::default();
        let spec = SeedSpec {
            thetas: vec![0.0, 2.0, 4.0],
            ..SeedSpec::desired_default()
        };
        let seeds = seeds_desired(&spec, &r).unwrap();
        let cfg = IntegratorConfig {
            record_decimation: 50,
            ..IntegratorConfig::default()
        };
        let traces = run_flow_batch(&seeds, &r, &g, 0.05, Direction::Forward, &cfg).unwrap();
        for (seed, trace) in seeds.iter().zip(&traces) {
            assert_eq!(trace.samples[0].state, seed.state);
            let v = convergence_check(trace, EquilibriumKind::Desired, 1e-6).unwrap();
            assert!(v.converged, "{v:?}");
            assert!(v.time_to_threshold.is_some_and(|t| t > 0.0 && t < 0.05), "{v:?}");
        }
    }
}
