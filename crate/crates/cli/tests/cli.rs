use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kahler-lab"))
}

fn run(command: &str, cfg: &Value, out: &Path, extra: &[&str]) -> Output {
    let path = out.with_extension("json");
    fs::write(&path, cfg.to_string()).unwrap();
    bin().arg(command).arg("--config").arg(&path).arg("--out").arg(out).args(extra).output().unwrap()
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn simplex_futaki() -> Value {
    json!({
        "command": "futaki",
        "inputs": {
            "polytope": {"vertices": [[0, 0], [1, 0], [0, 1]]},
            "weight": {"affine_pieces": [{"gradient": ["1", "0"], "offset": "0"}]}
        }
    })
}

#[test]
fn futaki_on_projective_plane_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f");
    let o = run("futaki", &simplex_futaki(), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["results"]["futaki"], "0");
    assert_eq!(r["exit_code"], 0);
    assert!(out.join("weight_trace.csv").exists());
    assert!(out.join("timing.json").exists());
}

#[test]
fn obstructed_cone_angles_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ke");
    let cfg = json!({"command": "ke", "inputs": {"beta0": 1.0, "beta_inf": 0.5}});
    let o = run("ke", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error: obstruction-suspected:"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
    assert_eq!(report(&out)["error"]["kind"], "obstruction-suspected");
}

#[test]
fn degenerate_polytope_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e");
    let cfg = json!({"command": "ehrhart", "inputs": {"polytope": {"vertices": [[0, 0], [1, 1], [2, 2]]}}});
    let o = run("ehrhart", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: degenerate-polytope:"));
}

#[test]
fn malformed_configs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m");
    let unknown_field = json!({"command": "cm", "inputs": {"preset": "p1xp1_trivial_family"}, "colour": 1});
    assert_eq!(run("cm", &unknown_field, &out, &[]).status.code(), Some(2));
    assert_eq!(run("ehrhart", &simplex_futaki(), &out, &[]).status.code(), Some(2));
    let bad_tol = json!({"command": "cm", "inputs": {"preset": "p1xp1_trivial_family"}, "tolerances": {"newton": 1e-9}});
    assert_eq!(run("cm", &bad_tol, &out, &[]).status.code(), Some(2));
}

#[test]
fn command_is_filled_from_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let cfg = json!({"inputs": {"preset": "p1xp1_trivial_family"}});
    let o = run("cm", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(&out)["results"]["cm_degree"], "0");
}

#[test]
fn reports_are_bitwise_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "command": "wp",
        "inputs": {"family": {
            "kind": "torus_family",
            "tau": {"preset": "affine", "tau0": [0.0, 1.5], "slope": [0.0, 1.0]},
            "base_grid": {"center": [0.0, 0.0], "spacing": 0.05, "half_count": 2},
            "fiber_resolution": 8
        }}
    });
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(run("wp", &cfg, &a, &[]).status.code(), Some(0));
    assert_eq!(run("wp", &cfg, &b, &["--parallel", "1"]).status.code(), Some(0));
    for f in ["report.json", "wp.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn sweep_matches_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let jobs = json!([
        simplex_futaki(),
        {"command": "ke", "inputs": {"beta0": 1.0, "beta_inf": 0.5}},
        {"command": "cm", "inputs": {"preset": "p1xp1_trivial_family"}},
        {"command": "threshold", "inputs": {"weight": {"poles": [{"center": [0.0, 0.0], "lambda": 0.5}]}, "domain": {"dim": 1, "radius": 1.0}}}
    ]);
    let one = dir.path().join("one");
    let four = dir.path().join("four");
    let o1 = run("sweep", &jobs, &one, &["--parallel", "1"]);
    let o4 = run("sweep", &jobs, &four, &["--parallel", "4"]);
    assert_eq!(o1.status.code(), Some(3));
    assert_eq!(o4.status.code(), Some(3));
    assert_eq!(o1.stdout, o4.stdout);
    for i in 0..4 {
        let f = format!("job-{i:03}/report.json");
        assert_eq!(fs::read(one.join(&f)).unwrap(), fs::read(four.join(&f)).unwrap(), "{f}");
    }
}
