//! Run configuration: a single TOML document whose omitted fields fall back to
//! the reference setup.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{reference_inertia, GainSet, PlantParams};
use crate::error::{Error, Result};
use crate::flow::{evenly_spaced_angles, EquilibriumKind, SeedSpec, SpinVectorChoice};
use crate::geom::{exp_so3, UnitVec, Vec3};
use crate::integrator::IntegratorConfig;
use crate::reference::{ManeuverSegment, TrajectoryConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "PDAV_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub plant: PlantSection,
    pub gains: GainSection,
    pub reference: ReferenceSection,
    pub integrator: IntegratorSection,
    pub seeds: SeedsSection,
    pub flow: FlowSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSection {
    /// Row-major inertia matrix, kg·m².
    pub inertia: [[f64; 3]; 3],
    pub mass: f64,
    pub axle_length: f64,
    pub gravity: f64,
    pub drag_coeff: f64,
    pub thrust_coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainSection {
    pub lambda: f64,
    pub eta: f64,
    pub gamma: f64,
    pub desired_spin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSection {
    pub axis: [f64; 3],
    /// rad
    pub angle: f64,
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSection {
    /// Initial desired attitude as a rotation vector (axis × angle).
    pub initial_rotation: [f64; 3],
    pub segments: Vec<SegmentSection>,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSection {
    pub h: f64,
    pub reorthonormalize_every: usize,
    pub record_decimation: usize,
    pub divergence_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedSection {
    pub eps: f64,
    pub varsigma: f64,
    /// `[re, im]`
    pub sigma: [f64; 2],
    /// Number of evenly spaced angles, used when `thetas` is empty.
    pub count: usize,
    pub thetas: Vec<f64>,
    pub spin_vector: SpinVectorChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedsSection {
    pub saddle: SeedSection,
    pub desired: SeedSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    pub backward_duration: f64,
    pub forward_duration: f64,
    pub convergence_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            plant: PlantSection::default(),
            gains: GainSection::default(),
            reference: ReferenceSection::default(),
            integrator: IntegratorSection::default(),
            seeds: SeedsSection::default(),
            flow: FlowSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl Default for PlantSection {
    fn default() -> Self {
        let p = PlantParams::default();
        let j = reference_inertia();
        Self {
            inertia: [0, 1, 2].map(|r| [0, 1, 2].map(|c| j[(r, c)])),
            mass: p.mass,
            axle_length: p.axle_length,
            gravity: p.gravity,
            drag_coeff: p.drag_coeff,
            thrust_coeff: p.thrust_coeff,
        }
    }
}

impl Default for GainSection {
    fn default() -> Self {
        let g = GainSet::default();
        Self {
            lambda: g.lambda,
            eta: g.eta,
            gamma: g.gamma,
            desired_spin: g.desired_spin,
        }
    }
}

impl Default for ReferenceSection {
    fn default() -> Self {
        let std = TrajectoryConfig::standard_maneuver(GainSet::default().desired_spin);
        Self {
            initial_rotation: [0.0; 3],
            segments: std
                .segments()
                .iter()
                .map(|s| SegmentSection {
                    axis: [s.axis.as_vec().x, s.axis.as_vec().y, s.axis.as_vec().z],
                    angle: s.angle,
                    t_start: s.t_start,
                    t_end: s.t_end,
                })
                .collect(),
            duration: std.duration(),
        }
    }
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let c = IntegratorConfig::default();
        Self {
            h: c.h,
            reorthonormalize_every: c.reorthonormalize_every,
            record_decimation: 10,
            divergence_limit: c.divergence_limit,
        }
    }
}

impl SeedSection {
    fn from_spec(spec: &SeedSpec) -> Self {
        Self {
            eps: spec.eps,
            varsigma: spec.varsigma,
            sigma: [spec.sigma.re, spec.sigma.im],
            count: spec.thetas.len(),
            thetas: Vec::new(),
            spin_vector: spec.spin_vector,
        }
    }

    fn to_spec(&self, equilibrium: EquilibriumKind) -> SeedSpec {
        SeedSpec {
            equilibrium,
            eps: self.eps,
            varsigma: self.varsigma,
            sigma: Complex64::new(self.sigma[0], self.sigma[1]),
            thetas: if self.thetas.is_empty() {
                evenly_spaced_angles(self.count)
            } else {
                self.thetas.clone()
            },
            spin_vector: self.spin_vector,
        }
    }
}

impl Default for SeedSection {
    fn default() -> Self {
        Self::from_spec(&SeedSpec::saddle_default())
    }
}

impl Default for SeedsSection {
    fn default() -> Self {
        Self {
            saddle: SeedSection::from_spec(&SeedSpec::saddle_default()),
            desired: SeedSection::from_spec(&SeedSpec::desired_default()),
        }
    }
}

impl Default for FlowSection {
    fn default() -> Self {
        Self {
            backward_duration: 0.045,
            forward_duration: 0.5,
            convergence_threshold: 1e-6,
        }
    }
}

/// Validated model objects built from a [`RunConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub plant: PlantParams,
    pub gains: GainSet,
    pub trajectory: TrajectoryConfig,
    pub integrator: IntegratorConfig,
    pub saddle_seeds: SeedSpec,
    pub desired_seeds: SeedSpec,
    pub flow: FlowSection,
}

/// Prefix the field of a validation error with its section.
fn in_section<T>(section: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::InvalidParameter { field, reason } if !field.starts_with(&format!("{section}.")) => {
            Error::InvalidParameter {
                field: format!("{section}.{}", field.trim_start_matches("integrator.")),
                reason,
            }
        }
        other => other,
    })
}

impl RunConfig {
    pub fn resolve(&self) -> Result<Resolved> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        let p = &self.plant;
        let j = crate::geom::Mat3::from_fn(|r, c| p.inertia[r][c]);
        let plant = in_section(
            "plant",
            PlantParams::new(j, p.mass, p.axle_length, p.gravity, p.drag_coeff, p.thrust_coeff),
        )?;
        let g = &self.gains;
        let gains = in_section("gains", GainSet::new(g.lambda, g.eta, g.gamma, g.desired_spin))?;

        let r = &self.reference;
        let segments = r
            .segments
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let section = format!("reference.segments[{i}]");
                let axis = in_section(&section, UnitVec::normalize(&Vec3::from(s.axis)).map_err(|e| {
                    Error::invalid("axis", e.to_string())
                }))?;
                in_section(&section, ManeuverSegment::new(axis, s.angle, s.t_start, s.t_end))
            })
            .collect::<Result<Vec<_>>>()?;
        let initial = Vec3::from(r.initial_rotation);
        if !initial.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("reference.initial_rotation", "entries must be finite"));
        }
        let trajectory = in_section(
            "reference",
            TrajectoryConfig::new(exp_so3(&initial), segments, gains.desired_spin, r.duration),
        )?;

        let i = &self.integrator;
        let integrator = IntegratorConfig {
            h: i.h,
            reorthonormalize_every: i.reorthonormalize_every,
            record_decimation: i.record_decimation,
            divergence_limit: i.divergence_limit,
        };
        in_section("integrator", integrator.validate())?;

        let saddle_seeds = self.seeds.saddle.to_spec(EquilibriumKind::Antipodal);
        in_section("seeds.saddle", saddle_seeds.validate())?;
        let desired_seeds = self.seeds.desired.to_spec(EquilibriumKind::Desired);
        in_section("seeds.desired", desired_seeds.validate())?;

        let f = &self.flow;
        for (name, v) in [
            ("flow.backward_duration", f.backward_duration),
            ("flow.forward_duration", f.forward_duration),
            ("flow.convergence_threshold", f.convergence_threshold),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }

        Ok(Resolved {
            plant,
            gains,
            trajectory,
            integrator,
            saddle_seeds,
            desired_seeds,
            flow: f.clone(),
        })
    }

    /// Canonical TOML text; equal configs give equal text.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// Output directory: the environment override, then the config, then the
    /// working directory.
    pub fn output_dir(&self) -> PathBuf {
        std::env::var_os(OUT_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .or_else(|| self.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

pub fn parse_config(text: &str, path: &Path) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    cfg.resolve().map_err(|e| Error::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(cfg)
}

/// Read, parse and validate a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}
