//! Job plumbing: JSON config in, deterministic JSON report and CSV
//! artifacts out, exit codes by error class.
//!
//! `report.json` is a pure function of the config; wall time goes to a
//! separate `timing.json` so reruns compare bitwise.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{LabError, Result};
use crate::exec::Exec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Futaki,
    Ehrhart,
    Cm,
    Lelong,
    Threshold,
    Alpha,
    Model,
    Ke,
    Soliton,
    Continuity,
    Flow,
    Wp,
    Foliation,
    Residual,
}

impl Command {
    pub const ALL: [Command; 14] = [
        Command::Futaki,
        Command::Ehrhart,
        Command::Cm,
        Command::Lelong,
        Command::Threshold,
        Command::Alpha,
        Command::Model,
        Command::Ke,
        Command::Soliton,
        Command::Continuity,
        Command::Flow,
        Command::Wp,
        Command::Foliation,
        Command::Residual,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Futaki => "futaki",
            Command::Ehrhart => "ehrhart",
            Command::Cm => "cm",
            Command::Lelong => "lelong",
            Command::Threshold => "threshold",
            Command::Alpha => "alpha",
            Command::Model => "model",
            Command::Ke => "ke",
            Command::Soliton => "soliton",
            Command::Continuity => "continuity",
            Command::Flow => "flow",
            Command::Wp => "wp",
            Command::Foliation => "foliation",
            Command::Residual => "residual",
        }
    }

    pub fn parse(s: &str) -> Option<Command> {
        Command::ALL.iter().copied().find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub command: Command,
    #[serde(default)]
    pub inputs: Value,
    /// Overridden by the command line when given there.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Recognized keys: `newton`, `obstruction`.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

/// Conventions every numeric payload is expressed in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub ddc: String,
    pub reduction: String,
    pub area: String,
    pub toric_degrees: String,
    pub futaki: String,
    pub weil_petersson: String,
}

pub fn conventions() -> Conventions {
    Conventions {
        ddc: "dd^c = (i/2π)∂∂̄; Lelong numbers and mass ratios use this normalization".into(),
        reduction: "ω = i∂∂̄φ(s), s = log|z|², f = φ''; cone angle 2πβ at z = 0 means f ~ e^{β₀ s}".into(),
        area: "area = 2π∫f ds; Ric(ω) = κω with κ = 2π(β₀+β_∞)/area".into(),
        toric_degrees: "L^n = n!·vol(P); (-K)·L^{n-1} = (n-1)!·(lattice boundary measure)".into(),
        futaki: "DF = 2(a₁b₀ - a₀b₁)/a₀ from h(k) = a₀kⁿ + a₁kⁿ⁻¹ + …, w(k) = b₀kⁿ⁺¹ + b₁kⁿ + …".into(),
        weil_petersson: "density is the coefficient of i ds∧ds̄; overall constant not normalized".into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub kind: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: Command,
    pub config_hash: String,
    pub seed: u64,
    pub conventions: Conventions,
    pub exit_code: i32,
    pub error: Option<ErrorInfo>,
    pub results: Value,
    /// CSV files written next to the report.
    pub artifacts: Vec<String>,
    /// Seconds; written to `timing.json`, never to `report.json`.
    #[serde(skip)]
    pub wall_time: f64,
}

pub fn exit_code(e: &LabError) -> i32 {
    match e {
        _ if e.is_non_convergence() => EXIT_NONCONVERGENCE,
        LabError::Io(_) | LabError::Internal(_) | LabError::FitInconsistent(_) => EXIT_INTERNAL,
        _ => EXIT_VALIDATION,
    }
}

/// Integral floats collapse to integers so `1` and `1.0` hash alike;
/// object keys are already sorted.
fn canonical(v: &Value) -> Value {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() && x.fract() == 0.0 && x.abs() < 9.0e15 => json!(x as i64),
            _ => v.clone(),
        },
        Value::Array(a) => Value::Array(a.iter().map(canonical).collect()),
        Value::Object(m) => Value::Object(m.iter().map(|(k, v)| (k.clone(), canonical(v))).collect()),
        _ => v.clone(),
    }
}

/// SHA-256 of the canonical JSON of the config without its output path.
pub fn config_hash(cfg: &JobConfig) -> String {
    let mut c = cfg.clone();
    c.output_dir = None;
    let v = canonical(&serde_json::to_value(&c).expect("config serializes"));
    hex::encode(Sha256::digest(v.to_string().as_bytes()))
}

pub(crate) struct Output {
    pub results: Value,
    pub csv: Vec<(String, String)>,
}

/// One-line machine-parsable reason.
pub fn error_line(e: &ErrorInfo) -> String {
    format!("error: {}: {}", e.kind, e.reason.replace('\n', " "))
}

/// Runs one job and writes its artifacts to `out` when given.
pub fn run(cfg: &JobConfig, out: Option<&Path>, exec: Exec) -> RunReport {
    let start = Instant::now();
    let computed = crate::jobs::dispatch::dispatch(cfg, exec);
    let (results, csv, error, code) = match computed {
        Ok(o) => (o.results, o.csv, None, EXIT_OK),
        Err(e) => (Value::Null, vec![], Some(ErrorInfo { kind: e.kind().into(), reason: e.to_string() }), exit_code(&e)),
    };
    let mut report = RunReport {
        command: cfg.command,
        config_hash: config_hash(cfg),
        seed: cfg.seed,
        conventions: conventions(),
        exit_code: code,
        error,
        results,
        artifacts: csv.iter().map(|(n, _)| n.clone()).collect(),
        wall_time: 0.0,
    };
    report.wall_time = start.elapsed().as_secs_f64();
    if let Some(dir) = out.or(cfg.output_dir.as_deref()) {
        if let Err(e) = write_artifacts(dir, &report, &csv) {
            report.exit_code = EXIT_INTERNAL;
            report.error = Some(ErrorInfo { kind: e.kind().into(), reason: e.to_string() });
        }
    }
    report
}

fn io(e: std::io::Error) -> LabError {
    LabError::Io(e.to_string())
}

fn write_artifacts(dir: &Path, report: &RunReport, csv: &[(String, String)]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io)?;
    let body = serde_json::to_string_pretty(report).map_err(|e| LabError::Internal(e.to_string()))?;
    std::fs::write(dir.join("report.json"), body + "\n").map_err(io)?;
    std::fs::write(dir.join("timing.json"), format!("{{\"wall_time_seconds\": {}}}\n", report.wall_time)).map_err(io)?;
    for (name, content) in csv {
        std::fs::write(dir.join(name), content).map_err(io)?;
    }
    Ok(())
}

/// Parses a config, mapping malformed JSON to a validation report.
pub fn parse_config(text: &str) -> std::result::Result<JobConfig, ErrorInfo> {
    serde_json::from_str(text).map_err(|e| ErrorInfo { kind: "invalid-config".into(), reason: e.to_string() })
}

/// Runs jobs on up to `parallelism` workers; job `i` writes under
/// `out/job-<i>`. Reports come back in input order.
pub fn sweep(configs: &[JobConfig], parallelism: usize, out: Option<&Path>) -> Result<Vec<RunReport>> {
    if parallelism == 0 {
        return Err(LabError::Invalid("parallelism must be positive".into()));
    }
    let dir = |i: usize| out.map(|o| o.join(format!("job-{i:03}")));
    // Jobs run their internals sequentially, so workers never share state.
    let one = |i: usize| run(&configs[i], dir(i).as_deref(), Exec::Sequential);
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .map_err(|e| LabError::Internal(e.to_string()))?;
        Ok(pool.install(|| Exec::Parallel.map_range(configs.len(), one)))
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok((0..configs.len()).map(one).collect())
    }
}

/// Maximum of the individual exit codes.
pub fn aggregate_exit(reports: &[RunReport]) -> i32 {
    reports.iter().map(|r| r.exit_code).max().unwrap_or(EXIT_OK)
}

mod dispatch;
