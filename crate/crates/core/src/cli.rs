//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{load_config, Resolved, RunConfig};
use crate::dynamics::{antipodal_equilibrium_state, desired_equilibrium_state, BodyState, ReferenceSample};
use crate::error::{Error, Result};
use crate::flow::{convergence_check, generate_seeds, min_distance, run_flow_batch, EquilibriumKind, SpinVectorChoice};
use crate::integrator::{flow, ControlledPlant, Direction, ReferenceSource};
use crate::linearization::{assemble_a, constraint_row, LinearizedSystem, Mat6};
use crate::reference::reference_at;
use crate::spectral::eig::{classify_equilibrium, eig6, EigenStructure};
use crate::spectral::fft::{fft_peak, fft_peak_in_band};
use crate::spectral::nutation::{nutation_frequency, slow_pair_index};
use crate::trace_io::{flow_table, read_table, tracking_table, write_atomic, write_table};

#[derive(Debug, Parser)]
#[command(name = "pdav", version, about = "Pointing and spin tracking of a fast-spinning rigid body")]
struct Cli {
    /// TOML run configuration; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EquilibriumArg {
    Desired,
    Antipodal,
}

impl From<EquilibriumArg> for EquilibriumKind {
    fn from(e: EquilibriumArg) -> Self {
        match e {
            EquilibriumArg::Desired => EquilibriumKind::Desired,
            EquilibriumArg::Antipodal => EquilibriumKind::Antipodal,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DirectionArg {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SpinVectorArg {
    LiteralV3,
    SpinMode,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fly the reference maneuver and write a tracking trace.
    Simulate {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Integration step, s.
        #[arg(long)]
        h: Option<f64>,
        /// Record every n-th step.
        #[arg(long)]
        decimation: Option<usize>,
    },
    /// Write the linearization and its blocks at an equilibrium.
    Linearize {
        #[arg(long, value_enum, default_value = "desired")]
        equilibrium: EquilibriumArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report eigenpairs and the equilibrium classification.
    Eigen {
        #[arg(long, value_enum, default_value = "desired")]
        equilibrium: EquilibriumArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict the nutation frequency, optionally checking it against a trace.
    EstimateFreq {
        /// Desired spin, rad/s (defaults to the configured value).
        #[arg(long)]
        spin: Option<f64>,
        /// Tracking trace whose `nutation_rate` column is FFT'd for comparison.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Integrate seeds near an equilibrium and write one trace per seed.
    Flow {
        #[arg(long, value_enum)]
        equilibrium: EquilibriumArg,
        #[arg(long, value_enum)]
        direction: DirectionArg,
        /// Number of evenly spaced seed angles (defaults to the configured list).
        #[arg(long)]
        seeds: Option<usize>,
        /// Duration, s (defaults per direction from the config).
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long, value_enum)]
        spin_vector: Option<SpinVectorArg>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Dominant frequency of one column of a trace file.
    Fft {
        file: PathBuf,
        #[arg(long, default_value = "nutation_rate")]
        column: String,
        /// Restrict the search to `LO HI` Hz.
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        band: Option<Vec<f64>>,
        /// Ignore samples before this time, s.
        #[arg(long)]
        t_min: Option<f64>,
    },
}

/// Run with process arguments, writing to the given streams. Returns the exit code:
/// 0 on success, 2 on usage errors, 1 on any other failure.
pub fn run_cli_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(text.as_bytes());
            } else {
                let _ = err.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match dispatch(cli) {
        Ok(report) => {
            let _ = out.write_all(report.as_bytes());
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_cli_with(argv, &mut std::io::stdout(), &mut std::io::stderr())
}

fn dispatch(cli: Cli) -> Result<String> {
    let config = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    let resolved = config.resolve()?;
    match cli.command {
        Command::Simulate { out, h, decimation } => simulate(&config, &resolved, out, h, decimation),
        Command::Linearize { equilibrium, out } => linearize(&config, &resolved, equilibrium.into(), out),
        Command::Eigen { equilibrium, out } => eigen(&config, &resolved, equilibrium.into(), out),
        Command::EstimateFreq { spin, trace } => estimate_freq(&resolved, spin, trace),
        Command::Flow {
            equilibrium,
            direction,
            seeds,
            duration,
            spin_vector,
            out_dir,
        } => run_flow(&config, &resolved, equilibrium.into(), direction, seeds, duration, spin_vector, out_dir),
        Command::Fft {
            file,
            column,
            band,
            t_min,
        } => fft(&file, &column, band, t_min),
    }
}

fn out_path(config: &RunConfig, explicit: Option<PathBuf>, name: &str) -> PathBuf {
    explicit.unwrap_or_else(|| config.output_dir().join(name))
}

/// Stationary reference at the start of the configured trajectory.
pub fn stationary_reference(resolved: &Resolved) -> ReferenceSample {
    ReferenceSample::stationary(*resolved.trajectory.initial(), resolved.gains.desired_spin)
}

/// Linearization and classified spectrum at one equilibrium.
pub fn analyze_equilibrium(
    resolved: &Resolved,
    kind: EquilibriumKind,
) -> Result<(BodyState, LinearizedSystem, EigenStructure)> {
    let reference = stationary_reference(resolved);
    let state = match kind {
        EquilibriumKind::Desired => desired_equilibrium_state(&reference),
        EquilibriumKind::Antipodal => antipodal_equilibrium_state(&reference),
    };
    let lin = assemble_a(&state, &reference, &resolved.gains);
    let es = classify_equilibrium(&eig6(&lin.a)?, &constraint_row(&state.pointing()));
    Ok((state, lin, es))
}

fn simulate(
    config: &RunConfig,
    resolved: &Resolved,
    out: Option<PathBuf>,
    h: Option<f64>,
    decimation: Option<usize>,
) -> Result<String> {
    let mut cfg = resolved.integrator;
    if let Some(h) = h {
        cfg.h = h;
    }
    if let Some(d) = decimation {
        cfg.record_decimation = d;
    }
    let plant = ControlledPlant {
        plant: resolved.plant.clone(),
        reference: ReferenceSource::Trajectory(resolved.trajectory.clone()),
        gains: resolved.gains,
    };
    let r0 = reference_at(&resolved.trajectory, 0.0);
    let initial = BodyState::new(r0.attitude, r0.omega);
    let trace = flow(&plant, &initial, 0.0, resolved.trajectory.duration(), Direction::Forward, &cfg)?;
    let table = tracking_table(&trace, &plant, &config.hash())?;
    let path = out_path(config, out, "simulate.csv");
    write_table(&table, &path)?;

    let max_abs = |name: &str| -> Result<f64> { Ok(table.column(name)?.iter().fold(0.0, |m: f64, x| m.max(x.abs()))) };
    let drift = trace
        .samples
        .iter()
        .map(|s| (s.state.pointing().as_vec().norm() - 1.0).abs())
        .fold(0.0, f64::max);
    let mut report = String::new();
    writeln!(report, "trace: {}", path.display()).unwrap();
    writeln!(report, "samples: {}", table.rows.len()).unwrap();
    writeln!(report, "max_psi_pct: {:.6e}", max_abs("psi_pct")?).unwrap();
    writeln!(report, "max_abs_ew3: {:.6e}", max_abs("ew3")?).unwrap();
    writeln!(report, "max_unit_drift: {drift:.3e}").unwrap();
    Ok(report)
}

fn format_matrix(name: &str, m: impl Iterator<Item = Vec<f64>>) -> String {
    let mut s = format!("[{name}]\n");
    for row in m {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn linearize(config: &RunConfig, resolved: &Resolved, kind: EquilibriumKind, out: Option<PathBuf>) -> Result<String> {
    let (_, lin, _) = analyze_equilibrium(resolved, kind)?;
    let rows6 = |m: &Mat6| (0..6).map(move |r| (0..6).map(|c| m[(r, c)]).collect()).collect::<Vec<Vec<f64>>>();
    let rows3 = |m: &crate::geom::Mat3| (0..3).map(|r| (0..3).map(|c| m[(r, c)]).collect()).collect::<Vec<Vec<f64>>>();
    let mut text = format!("# pdav-linearization equilibrium={kind} config_sha256={}\n", config.hash());
    text.push_str(&format_matrix("A", rows6(&lin.a).into_iter()));
    text.push_str(&format_matrix("xi_xi", rows3(&lin.xi_xi).into_iter()));
    text.push_str(&format_matrix("xi_omega", rows3(&lin.xi_omega).into_iter()));
    text.push_str(&format_matrix("omega_xi", rows3(&lin.omega_xi).into_iter()));
    text.push_str(&format_matrix("omega_omega", rows3(&lin.omega_omega).into_iter()));
    let path = out_path(config, out, &format!("linearize_{kind}.txt"));
    write_atomic(&path, text.as_bytes())?;
    Ok(format!("matrix file: {}\n", path.display()))
}

fn eigen_report(kind: EquilibriumKind, es: &EigenStructure, residual: f64) -> String {
    let mut s = String::new();
    writeln!(s, "equilibrium: {kind}").unwrap();
    match es.classification {
        Some(c) => writeln!(s, "classification: {c}").unwrap(),
        None => writeln!(s, "classification: unknown").unwrap(),
    }
    writeln!(s, "max_residual: {residual:.3e}").unwrap();
    for (k, p) in es.pairs.iter().enumerate() {
        writeln!(
            s,
            "lambda{} = {:.10e} {:+.10e}i admissible={}",
            k + 1,
            p.value.re,
            p.value.im,
            p.admissible
        )
        .unwrap();
    }
    for (k, p) in es.pairs.iter().enumerate() {
        let parts: Vec<String> = p.vector.iter().map(|c| format!("{:.6e}{:+.6e}i", c.re, c.im)).collect();
        writeln!(s, "v{} = [{}]", k + 1, parts.join(", ")).unwrap();
    }
    s
}

fn eigen(config: &RunConfig, resolved: &Resolved, kind: EquilibriumKind, out: Option<PathBuf>) -> Result<String> {
    let (_, lin, es) = analyze_equilibrium(resolved, kind)?;
    let mut report = format!("config_sha256: {}\n", config.hash());
    report.push_str(&eigen_report(kind, &es, es.max_residual(&lin.a)));
    if let Some(path) = out {
        write_atomic(&path, report.as_bytes())?;
    }
    Ok(report)
}

fn estimate_freq(resolved: &Resolved, spin: Option<f64>, trace: Option<PathBuf>) -> Result<String> {
    let mut resolved = resolved.clone();
    if let Some(w) = spin {
        resolved.gains = crate::dynamics::GainSet::new(
            resolved.gains.lambda,
            resolved.gains.eta,
            resolved.gains.gamma,
            w,
        )?;
    }
    let omega_d = resolved.gains.desired_spin;
    let (_, _, es) = analyze_equilibrium(&resolved, EquilibriumKind::Desired)?;
    let k = slow_pair_index(&es)?;
    let mu = es.value(k).im;
    let f_n = nutation_frequency(omega_d, mu);
    let mut s = String::new();
    writeln!(s, "omega_d: {omega_d}").unwrap();
    writeln!(s, "mu1: {mu:.6}").unwrap();
    writeln!(s, "mu1_over_omega_d: {:.6}", mu / omega_d).unwrap();
    writeln!(s, "f_n_hz: {f_n:.4}").unwrap();
    if let Some(path) = trace {
        let table = read_table(&path)?;
        let peak = fft_peak(&table.column("nutation_rate")?, table.sample_rate()?)?;
        writeln!(s, "fft_peak_hz: {:.4}", peak.frequency).unwrap();
        writeln!(s, "fft_minus_estimate_hz: {:.4}", peak.frequency - f_n).unwrap();
    }
    Ok(s)
}

#[allow(clippy::too_many_arguments)]
fn run_flow(
    config: &RunConfig,
    resolved: &Resolved,
    kind: EquilibriumKind,
    direction: DirectionArg,
    seeds: Option<usize>,
    duration: Option<f64>,
    spin_vector: Option<SpinVectorArg>,
    out_dir: Option<PathBuf>,
) -> Result<String> {
    let mut spec = match kind {
        EquilibriumKind::Desired => resolved.desired_seeds.clone(),
        EquilibriumKind::Antipodal => resolved.saddle_seeds.clone(),
    };
    if let Some(n) = seeds {
        if n == 0 {
            return Err(Error::invalid("seeds", "must be at least 1"));
        }
        spec.thetas = crate::flow::evenly_spaced_angles(n);
    }
    if let Some(v) = spin_vector {
        spec.spin_vector = match v {
            SpinVectorArg::LiteralV3 => SpinVectorChoice::LiteralV3,
            SpinVectorArg::SpinMode => SpinVectorChoice::SpinMode,
        };
    }
    let direction = match direction {
        DirectionArg::Forward => Direction::Forward,
        DirectionArg::Backward => Direction::Backward,
    };
    let duration = duration.unwrap_or(match direction {
        Direction::Forward => resolved.flow.forward_duration,
        Direction::Backward => resolved.flow.backward_duration,
    });
    let reference = stationary_reference(resolved);
    let seeds = generate_seeds(&spec, &reference, &resolved.gains)?;
    let traces = run_flow_batch(&seeds, &reference, &resolved.gains, duration, direction, &resolved.integrator)?;

    let dir = out_dir.unwrap_or_else(|| config.output_dir());
    let hash = config.hash();
    let tables = seeds
        .iter()
        .zip(&traces)
        .map(|(seed, trace)| {
            Ok(flow_table(trace, &hash)?
                .with_meta("equilibrium", kind)
                .with_meta("theta", format!("{:.16e}", seed.theta)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut s = String::new();
    let threshold = resolved.flow.convergence_threshold;
    for (i, ((seed, trace), table)) in seeds.iter().zip(&traces).zip(&tables).enumerate() {
        let path = dir.join(format!("flow_{kind}_{direction}_{i:02}.csv"));
        write_table(table, &path)?;
        let line = if direction == Direction::Forward {
            let v = convergence_check(trace, EquilibriumKind::Desired, threshold)?;
            let w = convergence_check(trace, EquilibriumKind::Antipodal, threshold)?;
            format!(
                "converged_desired={} converged_antipodal={} final_dist_desired={:.3e} min_dist_antipodal={:.3e}",
                v.converged,
                w.converged,
                v.final_distance,
                min_distance(trace, EquilibriumKind::Antipodal).unwrap_or(f64::NAN)
            )
        } else {
            let last = trace.final_sample().and_then(|s| s.metrics);
            format!(
                "final_dist_antipodal={:.3e}",
                last.map_or(f64::NAN, |m| m.dist_antipodal)
            )
        };
        writeln!(
            s,
            "seed {i:02} theta={:.6} degenerate={} truncated={} {line} file={}",
            seed.theta,
            seed.degenerate,
            trace.is_truncated(),
            path.display()
        )
        .unwrap();
    }
    Ok(s)
}

fn fft(file: &Path, column: &str, band: Option<Vec<f64>>, t_min: Option<f64>) -> Result<String> {
    let mut table = read_table(file)?;
    if let Some(t0) = t_min {
        let ti = table.column_index("t").ok_or_else(|| Error::invalid("t_min", "trace has no `t` column"))?;
        table.rows.retain(|r| r[ti] >= t0);
    }
    let fs = table.sample_rate()?;
    let signal = table.column(column)?;
    let peak = match band.as_deref() {
        Some([lo, hi]) => fft_peak_in_band(&signal, fs, *lo, *hi)?,
        _ => fft_peak(&signal, fs)?,
    };
    Ok(format!(
        "column: {column}\nsamples: {}\nsample_rate_hz: {fs:.6}\npeak_hz: {:.4}\nmagnitude: {:.6e}\n",
        signal.len(),
        peak.frequency,
        peak.magnitude
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_cli_with(std::iter::once("pdav").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(&["frobnicate"]).0, 2);
        assert_eq!(run(&["eigen", "--bogus"]).0, 2);
        assert_eq!(run(&[]).0, 2);
        let (code, out, _) = run(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("estimate-freq"));
    }

    #[test]
    fn eigen_reports_the_spin_mode() {
        let (code, out, _) = run(&["eigen", "--equilibrium", "desired"]);
        assert_eq!(code, 0);
        assert!(out.contains("classification: stable-focus"));
        let l4 = out.lines().find(|l| l.starts_with("lambda4 = ")).unwrap();
        let re: f64 = l4.split_whitespace().nth(2).unwrap().parse().unwrap();
        assert!((re + 500.0).abs() < 1e-6, "{l4}");
        let (_, out, _) = run(&["eigen", "--equilibrium", "antipodal"]);
        assert!(out.contains("classification: saddle"));
    }

    #[test]
    fn estimate_freq_defaults() {
        let (code, out, _) = run(&["estimate-freq"]);
        assert_eq!(code, 0);
        let f: f64 = out
            .lines()
            .find_map(|l| l.strip_prefix("f_n_hz: "))
            .unwrap()
            .parse()
            .unwrap();
        assert!((f - 319.18).abs() < 0.5, "{f}");
    }

    #[test]
    fn missing_config_and_bad_trace_exit_1() {
        let (code, _, err) = run(&["--config", "/nonexistent/pdav.toml", "eigen"]);
        assert_eq!(code, 1);
        assert!(err.contains("/nonexistent/pdav.toml"));
        assert_eq!(run(&["fft", "/nonexistent/t.csv"]).0, 1);
    }

    #[test]
    fn linearize_writes_a_matrix_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.txt");
        let (code, _, err) = run(&["linearize", "--equilibrium", "antipodal", "--out", path.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
        let text = std::fs::read_to_string(&path).unwrap();
        for block in ["[A]", "[xi_xi]", "[xi_omega]", "[omega_xi]", "[omega_omega]"] {
            assert!(text.contains(block));
        }
        assert_eq!(text.lines().filter(|l| l.split(',').count() == 6).count(), 6);
    }
}
