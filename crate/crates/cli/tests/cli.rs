//! Behavior of the installed binary: flags, exit codes with reason
//! codes, artifact layout, and trace reuse across subcommands.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_btwave")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("test.conf");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL_RUN: &str = r#"
[domain]
dimension = 1
lengths = pi
modes = 8

[model]
quintic = false
damping = energy
projector = sharp:auto

[scheme]
dt = 0.01

[run]
t_final = 2.0
sample_stride = 5

[initial]
kind = modes
modes = 1:1.0:0.0

[output]
dir = out
"#;

#[test]
fn help_lists_all_subcommands() {
    let out = run(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in [
        "simulate",
        "sweep-m",
        "multiplier-test",
        "decay-study",
        "nakao",
        "oracle-check",
    ] {
        assert!(text.contains(sub), "--help misses {sub}");
    }
}

#[test]
fn missing_config_is_a_config_error() {
    let out = run(&["simulate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config-error"));
}

#[test]
fn unknown_key_reports_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL_RUN}\nnot_a_key = 1\n"));
    let out = run(&["--config", &cfg, "simulate"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("config-error") && err.contains("not_a_key"), "{err}");
}

#[test]
fn simulate_writes_trace_and_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL_RUN);
    let out_dir = dir.path().join("artifacts");
    let out = run(&[
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
        "simulate",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let trace = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(
        lines.next().unwrap(),
        "t,E,E1,ut_l2sq,diss_integral,l10,l12,sm_defect"
    );

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["initial_energy"], 0.5);
    assert!(summary["energy_monotone"].as_bool().unwrap());
    // Stable key order: config_hash is the first key in the file.
    let raw = fs::read_to_string(out_dir.join("summary.json")).unwrap();
    assert!(raw.trim_start().starts_with("{\n  \"config_hash\""));
}

#[test]
fn nakao_reuses_matching_trace_and_redoes_mismatched() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &SMALL_RUN.replace("t_final = 2.0", "t_final = 6.0"));
    let out_dir = dir.path().join("artifacts");
    let out = run(&[
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
        "simulate",
    ]);
    assert!(out.status.success());

    // Same config: the existing trace is reused.
    let out = run(&["--config", &cfg, "--out", out_dir.to_str().unwrap(), "nakao"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("reusing trace.csv"), "{err}");
    assert!(out_dir.join("nakao.json").exists());

    // A different config in the same directory: mismatch detected.
    let cfg2 = write_config(
        &dir.path().join("."),
        &SMALL_RUN.replace("t_final = 2.0", "t_final = 5.0"),
    );
    let out = run(&["--config", &cfg2, "--out", out_dir.to_str().unwrap(), "nakao"]);
    assert!(out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("different config"), "{err}");
}

#[test]
fn sweep_m_tabulates_levels_and_linear_band_limited_runs_coincide() {
    let dir = TempDir::new().unwrap();
    // Linear dynamics with band-limited data: every level above the band
    // produces the identical trajectory, so adjacent differences vanish.
    let cfg_text = format!(
        "{SMALL_RUN}\n[sweep]\nlevels = 2.5, 4.5, 6.5\n"
    );
    let cfg = write_config(dir.path(), &cfg_text);
    let out_dir = dir.path().join("artifacts");
    let out = run(&[
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
        "sweep-m",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("sweep.json")).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for row in &rows[..2] {
        let diff = row["diff_to_next"].as_f64().unwrap();
        assert!(diff <= 1e-12, "band-limited linear levels differ: {diff}");
    }
    assert!(rows[2]["diff_to_next"].is_null());
    assert!(out_dir.join("sweep.csv").exists());
}

#[test]
fn nakao_on_a_stationary_run_reports_degenerate() {
    // Zero data dissipates nothing: every unit window is degenerate.
    let dir = TempDir::new().unwrap();
    let cfg_text = SMALL_RUN
        .replace("modes = 1:1.0:0.0", "modes = 1:0.0:0.0")
        .replace("t_final = 2.0", "t_final = 5.0");
    let cfg = write_config(dir.path(), &cfg_text);
    let out_dir = dir.path().join("artifacts");
    let out = run(&[
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
        "nakao",
    ]);
    assert_eq!(out.status.code(), Some(7), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate"));
}

#[test]
fn oracle_rejects_large_domains() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL_RUN); // 8 modes > 4
    let out = run(&["--config", &cfg, "--quiet", "oracle-check"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at most 4 modes"));
}
