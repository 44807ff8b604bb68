//! Machine-readable run reports. A run passes iff every check passes; the
//! JSON layout is stable (schema_version) and byte-deterministic for a
//! fixed config and seed, except for the wall-time field.

use crate::config::RunConfig;
use serde::Serialize;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    pub fn new(name: &str, residual: f64, tolerance: f64) -> Self {
        CheckResult {
            name: name.to_string(),
            residual,
            tolerance,
            pass: residual.is_finite() && residual <= tolerance,
            note: None,
        }
    }

    pub fn refused(name: &str, tolerance: f64, note: String) -> Self {
        CheckResult {
            name: name.to_string(),
            residual: f64::INFINITY,
            tolerance,
            pass: false,
            note: Some(note),
        }
    }

    pub fn with_note(mut self, note: String) -> Self {
        self.note = Some(note);
        self
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thread_cap: Option<usize>,
    pub config: RunConfig,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
    pub wall_time_ms: u128,
}

impl Report {
    pub fn new(command: &str, suite: Option<&str>, seed: u64, config: RunConfig) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            suite: suite.map(|s| s.to_string()),
            seed,
            thread_cap: thread_cap(),
            config,
            checks: Vec::new(),
            pass: true,
            wall_time_ms: 0,
        }
    }

    pub fn push(&mut self, check: CheckResult) {
        self.pass &= check.pass;
        self.checks.push(check);
    }

    pub fn extend(&mut self, checks: Vec<CheckResult>) {
        for c in checks {
            self.push(c);
        }
    }

    /// Writes the report atomically (temp file + rename) and echoes one
    /// line per check to stdout.
    pub fn finalize(mut self, started: std::time::Instant, path: &Path) -> std::io::Result<bool> {
        self.wall_time_ms = started.elapsed().as_millis();
        for c in &self.checks {
            let status = if c.pass { "pass" } else { "FAIL" };
            match &c.note {
                Some(n) => println!(
                    "[{status}] {}: residual {:.3e} (tolerance {:.3e}) - {n}",
                    c.name, c.residual, c.tolerance
                ),
                None => println!(
                    "[{status}] {}: residual {:.3e} (tolerance {:.3e})",
                    c.name, c.residual, c.tolerance
                ),
            }
        }
        let json = serde_json::to_string_pretty(&self).expect("report serialization");
        write_atomic(path, json.as_bytes())?;
        println!("report written to {}", path.display());
        Ok(self.pass)
    }
}

/// Parallelism cap from CURLFREE_THREADS; evaluation is currently
/// single-threaded, so any positive cap is honored trivially.
pub fn thread_cap() -> Option<usize> {
    std::env::var("CURLFREE_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}
