//! Deterministic persistence: trace CSV with a fixed header, summary
//! JSON with stable key order (struct field order), and the config hash
//! embedded in every artifact. Identical config + seed reproduce every
//! file byte for byte; floating-point reductions are sequential
//! everywhere, and numbers are printed in shortest round-trip form.

use anyhow::{Context, Result};
use btwave::diagnostics::EnergyTrace;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub const TRACE_HEADER: &str = "t,E,E1,ut_l2sq,diss_integral,l10,l12,sm_defect";

/// SHA-256 over the raw config text and the effective seed.
pub fn config_hash(raw_text: &str, seed: Option<u64>) -> String {
    let mut hasher = Sha256::new();
    hasher.update(raw_text.as_bytes());
    hasher.update(b"\nseed=");
    match seed {
        Some(s) => hasher.update(s.to_le_bytes()),
        None => hasher.update(b"none"),
    }
    hex::encode(hasher.finalize())
}

pub fn render_trace_csv(trace: &EnergyTrace, hash: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# config_hash={hash}");
    let _ = writeln!(out, "{TRACE_HEADER}");
    for i in 0..trace.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            trace.times()[i],
            trace.energy()[i],
            trace.higher_energy()[i],
            trace.ut_l2sq()[i],
            trace.diss_integral()[i],
            trace.l10()[i],
            trace.l12()[i],
            trace.sm_defect()[i],
        );
    }
    out
}

pub fn write_trace_csv(path: &Path, trace: &EnergyTrace, hash: &str) -> Result<()> {
    fs::write(path, render_trace_csv(trace, hash))
        .with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).context("serializing json")?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Rows of a small CSV table; the writer prepends the hash comment.
pub fn write_table_csv(path: &Path, hash: &str, header: &str, rows: &[String]) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "# config_hash={hash}");
    let _ = writeln!(out, "{header}");
    for row in rows {
        let _ = writeln!(out, "{row}");
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Checks that a previously written artifact carries the expected hash;
/// used before re-analyzing trace files.
pub fn verify_hash(path: &Path, expected: &str) -> Result<bool> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# config_hash="))
        .map(|h| h == expected)
        .unwrap_or(false))
}

/// Reads back a trace written by [`write_trace_csv`]. Round-trips exactly
/// because numbers are printed in shortest round-trip form.
pub fn parse_trace_csv(path: &Path) -> Result<EnergyTrace> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut trace = EnergyTrace::new();
    for line in text.lines() {
        if line.starts_with('#') || line == TRACE_HEADER {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.parse().with_context(|| format!("bad trace field {f:?}")))
            .collect::<Result<_>>()?;
        if fields.len() != 8 {
            anyhow::bail!("trace row has {} fields, expected 8", fields.len());
        }
        trace.push(
            fields[0], fields[1], fields[2], fields[3], fields[4], fields[5], fields[6], fields[7],
        );
    }
    Ok(trace)
}

/// Failure tagged with a machine-readable reason code; the process exit
/// status is derived from the code.
#[derive(Debug)]
pub struct Failure {
    pub code: &'static str,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self.code {
            "config-error" => 2,
            "io-error" => 3,
            "instability" | "non-finite" => 4,
            "bound-violation" => 5,
            "oracle-deviation" => 6,
            _ => 7,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {:#}", self.code, self.error)
    }
}

pub fn fail(code: &'static str, error: anyhow::Error) -> Failure {
    Failure { code, error }
}

/// Maps a simulator error to its reason code.
pub fn fail_from_core(error: btwave::Error) -> Failure {
    let code = match &error {
        btwave::Error::Instability { .. } => "instability",
        btwave::Error::NonFinite { .. } => "non-finite",
        btwave::Error::Degenerate(_) => "degenerate",
        _ => "config-error",
    };
    fail(code, error.into())
}

pub type RunResult<T> = std::result::Result<T, Failure>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_depends_on_text_and_seed() {
        let a = config_hash("x = 1", Some(7));
        let b = config_hash("x = 1", Some(8));
        let c = config_hash("x = 2", Some(7));
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, config_hash("x = 1", Some(7)));
    }

    #[test]
    fn trace_csv_has_fixed_header() {
        let trace = EnergyTrace::from_energy_samples(&[0.0, 1.0], &[2.0, 1.0]);
        let text = render_trace_csv(&trace, "abc");
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# config_hash=abc");
        assert_eq!(lines.next().unwrap(), TRACE_HEADER);
        assert_eq!(lines.next().unwrap(), "0,2,0,0,0,0,0,0");
    }

    #[test]
    fn trace_csv_round_trips_exactly() {
        let dir = std::env::temp_dir().join("btwave_trace_roundtrip");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("trace.csv");
        let mut trace = EnergyTrace::new();
        trace.push(0.0, 1.0 / 3.0, 0.1, 0.2, 0.0, 0.3, 0.4, -1e-17);
        trace.push(0.1, 0.3, 0.1, 0.2, 1e-5, 0.3, 0.4, 0.0);
        write_trace_csv(&path, &trace, "h").unwrap();
        assert!(verify_hash(&path, "h").unwrap());
        assert!(!verify_hash(&path, "other").unwrap());
        let back = parse_trace_csv(&path).unwrap();
        assert_eq!(back.energy(), trace.energy());
        assert_eq!(back.sm_defect(), trace.sm_defect());
        fs::remove_dir_all(&dir).unwrap();
    }
}
