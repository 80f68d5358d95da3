use std::path::Path;
use std::process::Command;

fn pdav(args: &[&str], out_dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pdav"))
        .args(args)
        .env("PDAV_OUT_DIR", out_dir)
        .output()
        .unwrap()
}

fn stdout(o: &std::process::Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key))
        .unwrap_or_else(|| panic!("no `{key}` in {text}"))
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn simulate_then_fft_and_cross_check() {
    let dir = tempfile::tempdir().unwrap();
    let sim = pdav(&["simulate"], dir.path());
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    let trace = dir.path().join("simulate.csv");
    assert!(trace.exists());
    assert!(field(&stdout(&sim), "max_psi_pct:") < 1e-3);

    let fft = pdav(&["fft", trace.to_str().unwrap(), "--column", "nutation_rate"], dir.path());
    assert!(fft.status.success());
    let fs = field(&stdout(&fft), "sample_rate_hz:");
    assert!((fs - 1e4).abs() < 1e-6);
    let peak = field(&stdout(&fft), "peak_hz:");
    assert!(peak > 0.0 && peak < 5e3);

    let est = pdav(&["estimate-freq", "--trace", trace.to_str().unwrap()], dir.path());
    assert!(est.status.success());
    let text = stdout(&est);
    assert!((field(&text, "f_n_hz:") - 319.18).abs() < 0.5);
    assert_eq!(field(&text, "fft_peak_hz:"), peak);
}

#[test]
fn identical_runs_write_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = pdav(&["flow", "--equilibrium", "antipodal", "--direction", "backward", "--seeds", "3"], d.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for i in 0..3 {
        let name = format!("flow_antipodal_backward_{i:02}.csv");
        let x = std::fs::read(a.path().join(&name)).unwrap();
        let y = std::fs::read(b.path().join(&name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
}

#[test]
fn flow_forward_from_desired_seeds_reports_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let o = pdav(
        &["flow", "--equilibrium", "desired", "--direction", "forward", "--seeds", "4", "--duration", "0.1"],
        dir.path(),
    );
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().all(|l| l.contains("converged_desired=true")), "{text}");
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 4);
}

#[test]
fn config_file_changes_the_hash_and_the_result() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[gains]\ndesired_spin = 800.0\n").unwrap();
    let base = pdav(&["estimate-freq"], dir.path());
    let alt = pdav(&["--config", cfg.to_str().unwrap(), "estimate-freq"], dir.path());
    assert!(alt.status.success());
    assert_eq!(field(&stdout(&alt), "omega_d:"), 800.0);
    assert_ne!(field(&stdout(&alt), "f_n_hz:"), field(&stdout(&base), "f_n_hz:"));
}

#[test]
fn errors_exit_nonzero_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[gains]\ngamma = -5.0\n").unwrap();
    let o = pdav(&["--config", bad.to_str().unwrap(), "simulate"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gains.gamma"));

    let o = pdav(&["simulate", "--h=-1"], dir.path());
    assert_eq!(o.status.code(), Some(1));

    let o = pdav(&["flow", "--equilibrium", "sideways", "--direction", "forward"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid value"));

    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec![std::ffi::OsString::from("bad.toml")]);
}
