//! Comma-separated trace files.
//!
//! Layout: one `#` metadata line, one header line, then one row per sample.
//! Floats are written with 17 significant digits so they read back bit-exactly.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::config::SCHEMA_VERSION;
use crate::dynamics::TrackingErrors;
use crate::error::{Error, Result};
use crate::integrator::{ControlledPlant, FlowTrace};
use crate::spectral::{euler313_extract, euler_rates, nutation_rate};

pub const FLOW_COLUMNS: [&str; 12] = [
    "t",
    "qx",
    "qy",
    "qz",
    "wx",
    "wy",
    "wz",
    "spin",
    "psi",
    "V",
    "dist_desired",
    "dist_antipodal",
];

/// Appended to [`FLOW_COLUMNS`] in tracking traces.
pub const TRACKING_COLUMNS: [&str; 7] = ["psi_pct", "ew3", "precession_rate", "nutation_rate", "ux", "uy", "uz"];

const UNITS: &str = "t:s,q:1,w:rad/s,spin:rad/s,psi:1,V:N2m2s2/kg2m4,dist:mixed,psi_pct:%,ew3:rad/s,rates:rad/s,u:Nm";

const MAGIC: &str = "pdav-trace";

/// A trace held as named columns of floats.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub schema_version: u32,
    pub kind: String,
    pub config_hash: String,
    /// Extra `key=value` metadata in file order.
    pub extra: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TraceTable {
    pub fn new(kind: &str, config_hash: &str, columns: &[&str]) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: kind.to_string(),
            config_hash: config_hash.to_string(),
            extra: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.push((key.to_string(), value.to_string()));
        self
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .column_index(name)
            .ok_or_else(|| Error::invalid("column", format!("no column `{name}`; have {}", self.columns.join(","))))?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Sampling rate from the `t` column, which must be uniformly spaced.
    pub fn sample_rate(&self) -> Result<f64> {
        let t = self.column("t")?;
        if t.len() < 2 {
            return Err(Error::invalid("t", "need at least two samples"));
        }
        let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
        let worst = t
            .windows(2)
            .map(|w| ((w[1] - w[0]) - dt).abs())
            .fold(0.0, f64::max);
        if !(dt.abs() > 0.0) || worst > 1e-6 * dt.abs() {
            return Err(Error::invalid("t", format!("samples are not uniformly spaced (spread {worst:.3e} s)")));
        }
        Ok(1.0 / dt.abs())
    }

    fn metadata_line(&self) -> String {
        let mut line = format!(
            "# {MAGIC} schema_version={} kind={} config_sha256={} units={UNITS}",
            self.schema_version, self.kind, self.config_hash
        );
        for (k, v) in &self.extra {
            write!(line, " {k}={v}").unwrap();
        }
        line
    }

    pub fn to_text(&self) -> String {
        let mut out = self.metadata_line();
        out.push('\n');
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            for (i, x) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{x:.16e}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let fail = |message: String| Error::TraceFormat {
            path: path.to_path_buf(),
            message,
        };
        let mut lines = text.lines().enumerate();
        let (_, meta) = lines.next().ok_or_else(|| fail("empty file".into()))?;
        let mut tokens = meta
            .strip_prefix("# ")
            .ok_or_else(|| fail("first line is not a `#` metadata line".into()))?
            .split(' ');
        if tokens.next() != Some(MAGIC) {
            return Err(fail(format!("metadata line does not start with `{MAGIC}`")));
        }
        let mut table = TraceTable::new("", "", &[]);
        let mut seen_version = false;
        for token in tokens {
            let (k, v) = token
                .split_once('=')
                .ok_or_else(|| fail(format!("malformed metadata token `{token}`")))?;
            match k {
                "schema_version" => {
                    table.schema_version = v.parse().map_err(|_| fail(format!("bad schema_version `{v}`")))?;
                    seen_version = true;
                }
                "kind" => table.kind = v.to_string(),
                "config_sha256" => table.config_hash = v.to_string(),
                "units" => {}
                _ => table.extra.push((k.to_string(), v.to_string())),
            }
        }
        if !seen_version || table.schema_version != SCHEMA_VERSION {
            return Err(fail(format!("unsupported schema version {}", table.schema_version)));
        }
        let (_, header) = lines.next().ok_or_else(|| fail("missing header line".into()))?;
        table.columns = header.split(',').map(str::to_string).collect();
        let expected = match table.kind.as_str() {
            "flow" => FLOW_COLUMNS.len(),
            "tracking" => FLOW_COLUMNS.len() + TRACKING_COLUMNS.len(),
            _ => table.columns.len(),
        };
        if table.columns.len() != expected {
            return Err(fail(format!(
                "{} columns for kind `{}`, expected {expected}",
                table.columns.len(),
                table.kind
            )));
        }
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| fail(format!("line {}: {e}", n + 1)))?;
            if row.len() != table.columns.len() {
                return Err(fail(format!(
                    "line {}: {} fields, expected {}",
                    n + 1,
                    row.len(),
                    table.columns.len()
                )));
            }
            table.rows.push(row);
        }
        Ok(table)
    }
}

fn flow_row(sample: &crate::integrator::FlowSample) -> Option<Vec<f64>> {
    let m = sample.metrics?;
    let q = sample.state.pointing();
    let w = sample.state.omega;
    Some(vec![
        sample.t,
        q.as_vec().x,
        q.as_vec().y,
        q.as_vec().z,
        w.x,
        w.y,
        w.z,
        sample.state.spin(),
        m.psi,
        m.lyapunov,
        m.dist_desired,
        m.dist_antipodal,
    ])
}

/// Flow trace with the standard columns. Samples must carry metrics.
pub fn flow_table(trace: &FlowTrace, config_hash: &str) -> Result<TraceTable> {
    let mut table = TraceTable::new("flow", config_hash, &FLOW_COLUMNS).with_meta("direction", trace.direction);
    if let Some(reason) = &trace.truncated {
        table = table.with_meta("truncated", reason.replace(' ', "_"));
    }
    table.rows = trace
        .samples
        .iter()
        .map(flow_row)
        .collect::<Option<_>>()
        .ok_or_else(|| Error::invalid("trace", "samples carry no reference metrics"))?;
    Ok(table)
}

/// Tracking trace: flow columns plus errors, Euler rates and control torque.
///
/// The precession rate is NaN where the 3-1-3 angles are singular; the
/// nutation rate stays defined there because it only needs the spin angle.
pub fn tracking_table(trace: &FlowTrace, plant: &ControlledPlant, config_hash: &str) -> Result<TraceTable> {
    let columns: Vec<&str> = FLOW_COLUMNS.iter().chain(TRACKING_COLUMNS.iter()).copied().collect();
    let mut table = TraceTable::new("tracking", config_hash, &columns).with_meta("direction", trace.direction);
    for sample in &trace.samples {
        let mut row = flow_row(sample).ok_or_else(|| Error::invalid("trace", "samples carry no reference metrics"))?;
        let reference = plant.reference.at(sample.t);
        let e = TrackingErrors::evaluate(&sample.state, &reference);
        let m = sample.state.attitude.matrix();
        let psi = m[(2, 0)].atan2(m[(2, 1)]);
        let precession = euler313_extract(&sample.state.attitude)
            .and_then(|a| euler_rates(&a, &sample.state.omega))
            .map_or(f64::NAN, |r| r.precession);
        let u = plant.torque(sample.t, &sample.state);
        row.extend([
            50.0 * e.psi,
            e.e_omega.z,
            precession,
            nutation_rate(psi, &sample.state.omega),
            u.x,
            u.y,
            u.z,
        ]);
        table.rows.push(row);
    }
    Ok(table)
}

/// Write atomically: the file appears complete or not at all.
pub fn write_table(table: &TraceTable, path: &Path) -> Result<()> {
    write_atomic(path, table.to_text().as_bytes())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_table(path: &Path) -> Result<TraceTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TraceTable::parse(&text, path)
}
