//! `kahler-lab <command> --config job.json [--out dir]`
//!
//! Prints the run report on stdout, a one-line error on stderr, and exits
//! with the report's exit code. `sweep` takes a JSON array of configs and
//! exits with the worst code among its jobs.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use kahler_lab::exec::Exec;
use kahler_lab::jobs::{self, Command, ErrorInfo, JobConfig, EXIT_INTERNAL, EXIT_OK, EXIT_VALIDATION};
use serde_json::Value;

#[derive(Parser, Debug)]
#[command(name = "kahler-lab", version, about = "Numerical Kähler geometry jobs")]
struct Cli {
    /// Job name (futaki, ehrhart, cm, lelong, threshold, alpha, model, ke,
    /// soliton, continuity, flow, wp, foliation, residual) or `sweep`.
    command: String,
    /// Job config; a JSON array of configs for `sweep`.
    #[arg(long)]
    config: PathBuf,
    /// Directory for report.json, timing.json and CSV artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for `sweep`; 1 runs a single job's internals sequentially.
    #[arg(long, default_value_t = 0)]
    parallel: usize,
}

fn fail(code: i32, kind: &str, reason: String) -> ExitCode {
    eprintln!("{}", jobs::error_line(&ErrorInfo { kind: kind.into(), reason }));
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_VALIDATION, "invalid-config", format!("{}: {e}", cli.config.display())),
    };
    if cli.command == "sweep" {
        return sweep(&cli, &text);
    }
    let Some(command) = Command::parse(&cli.command) else {
        return fail(EXIT_VALIDATION, "invalid-config", format!("unknown command {}", cli.command));
    };
    let cfg = match config_for(command, &text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", jobs::error_line(&e));
            return ExitCode::from(EXIT_VALIDATION as u8);
        }
    };
    let exec = if cli.parallel == 1 { Exec::Sequential } else { Exec::default() };
    let report = jobs::run(&cfg, cli.out.as_deref(), exec);
    emit(&report)
}

/// Fills in a missing `command` field; a conflicting one is a config error.
fn config_for(command: Command, text: &str) -> Result<JobConfig, ErrorInfo> {
    let bad = |reason: String| ErrorInfo { kind: "invalid-config".into(), reason };
    let mut v: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let obj = v.as_object_mut().ok_or_else(|| bad("config must be a JSON object".into()))?;
    match obj.get("command").and_then(Value::as_str) {
        Some(c) if c != command.name() => {
            return Err(bad(format!("config is for {c}, invoked as {}", command.name())));
        }
        _ => {
            obj.insert("command".into(), Value::String(command.name().into()));
        }
    }
    jobs::parse_config(&v.to_string())
}

fn emit(report: &jobs::RunReport) -> ExitCode {
    match serde_json::to_string_pretty(report) {
        Ok(s) => println!("{s}"),
        Err(e) => return fail(EXIT_INTERNAL, "internal", e.to_string()),
    }
    if let Some(e) = &report.error {
        eprintln!("{}", jobs::error_line(e));
    }
    ExitCode::from(report.exit_code as u8)
}

fn sweep(cli: &Cli, text: &str) -> ExitCode {
    let items: Vec<Value> = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => return fail(EXIT_VALIDATION, "invalid-config", format!("sweep expects a JSON array: {e}")),
    };
    let mut configs = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        match jobs::parse_config(&item.to_string()) {
            Ok(c) => configs.push(c),
            Err(e) => return fail(EXIT_VALIDATION, &e.kind, format!("job {i}: {}", e.reason)),
        }
    }
    let threads = if cli.parallel == 0 { std::thread::available_parallelism().map_or(1, |n| n.get()) } else { cli.parallel };
    let reports = match jobs::sweep(&configs, threads, cli.out.as_deref()) {
        Ok(r) => r,
        Err(e) => return fail(jobs::exit_code(&e), e.kind(), e.to_string()),
    };
    for (i, r) in reports.iter().enumerate() {
        let status = match &r.error {
            None => "ok".to_string(),
            Some(e) => jobs::error_line(e),
        };
        println!("job-{i:03} {} exit={} {status}", r.command.name(), r.exit_code);
    }
    let code = jobs::aggregate_exit(&reports);
    debug_assert!(code >= EXIT_OK);
    ExitCode::from(code as u8)
}
