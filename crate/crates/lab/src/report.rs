//! Run reports and output files.
//!
//! The primary output carries only deterministic fields, so the same scenario
//! and seed give byte-identical files. Wall-clock time goes to a separate
//! `<out>.timing.json` (or stderr when writing to stdout).

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::LabError;

/// Output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    /// Structured report.
    #[default]
    Json,
    /// Table; the structured report goes to `<out>.report.json`.
    Csv,
}

/// A named pass/fail check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    /// What was checked.
    pub name: String,
    /// Outcome.
    pub passed: bool,
    /// Measured values.
    pub detail: String,
}

impl Check {
    /// Build a check.
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

/// Deterministic record of one command.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport<T: Serialize> {
    /// Command echo: verb and the options that affect results.
    pub command: Vec<String>,
    /// Tool version.
    pub version: &'static str,
    /// Seed used, if any randomness was involved.
    pub seed: Option<u64>,
    /// Command-specific results.
    pub outputs: T,
    /// Checks evaluated by the command.
    pub checks: Vec<Check>,
}

impl<T: Serialize> RunReport<T> {
    /// Wrap outputs.
    pub fn new(command: Vec<String>, seed: Option<u64>, outputs: T, checks: Vec<Check>) -> Self {
        RunReport { command, version: env!("CARGO_PKG_VERSION"), seed, outputs, checks }
    }

    /// Names of failed checks.
    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report values serialize");
        s.push('\n');
        s
    }
}

/// Timing written next to the primary output.
#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    /// Verb.
    pub command: String,
    /// Elapsed seconds.
    pub wall_clock_seconds: f64,
    /// Worker threads.
    pub workers: usize,
}

/// `path` with `suffix` appended to the file name.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(path: &Path, contents: &str) -> Result<(), LabError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| LabError::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))
}

/// Write the primary output (and sidecars) to `out` or stdout.
pub fn emit<T: Serialize>(
    report: &RunReport<T>,
    csv: Option<&str>,
    format: Format,
    out: Option<&Path>,
    timing: &Timing,
) -> Result<(), LabError> {
    let json = report.to_json();
    let primary = match (format, csv) {
        (Format::Csv, Some(table)) => table,
        _ => json.as_str(),
    };
    let timing_json = serde_json::to_string(timing).expect("timing serializes");
    match out {
        Some(path) => {
            write_file(path, primary)?;
            if format == Format::Csv && csv.is_some() {
                write_file(&sidecar(path, ".report.json"), &json)?;
            }
            write_file(&sidecar(path, ".timing.json"), &(timing_json + "\n"))?;
        }
        None => {
            std::io::stdout()
                .write_all(primary.as_bytes())
                .map_err(|e| LabError::Io(format!("stdout: {e}")))?;
            eprintln!("{timing_json}");
        }
    }
    Ok(())
}

/// CSV writer for rows of already formatted cells.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Shortest round-trip formatting; empty for missing values.
pub fn cell(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{v}"),
        Some(v) => format!("{v}"),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_names() {
        assert_eq!(sidecar(Path::new("out/a.csv"), ".report.json"), PathBuf::from("out/a.csv.report.json"));
    }

    #[test]
    fn csv_layout() {
        let t = csv_table(&["a", "b"], vec![vec!["1".into(), cell(None)], vec![cell(Some(0.5)), cell(Some(2.0))]]);
        assert_eq!(t, "a,b\n1,\n0.5,2\n");
    }

    #[test]
    fn failures_listed() {
        let r = RunReport::new(vec!["x".into()], None, 1, vec![Check::new("a", true, ""), Check::new("b", false, "")]);
        assert_eq!(r.failures(), vec!["b"]);
        assert!(r.to_json().ends_with("}\n"));
    }
}
