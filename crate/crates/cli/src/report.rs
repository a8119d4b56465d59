//! Aggregates `verdict.json` files from earlier runs into one summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::Experiment;
use crate::{io_error, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Untested,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Untested => "UNTESTED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimRow {
    pub experiment: Experiment,
    pub claim: String,
    pub status: Status,
    pub runs: usize,
    /// Labels of the failing checks.
    pub failing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub status: Status,
    pub claims: Vec<ClaimRow>,
    pub failing_claims: Vec<String>,
    /// Verdict files that could not be parsed.
    pub unreadable: Vec<String>,
}

#[derive(Deserialize)]
struct LooseVerdictFile {
    subcommand: Experiment,
    verdicts: Vec<LooseVerdict>,
}

#[derive(Deserialize)]
struct LooseVerdict {
    test: String,
    pass: bool,
}

fn collect(path: &Path, found: &mut Vec<PathBuf>) -> Result<(), CliError> {
    if path.is_file() {
        if path.file_name().is_some_and(|f| f == "verdict.json") {
            found.push(path.to_path_buf());
        }
        return Ok(());
    }
    if !path.is_dir() {
        return Ok(());
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| io_error(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for entry in entries {
        collect(&entry, found)?;
    }
    Ok(())
}

/// Summarizes every `verdict.json` found under `inputs`. Missing paths and
/// experiments without verdicts count as untested.
pub fn report(inputs: &[PathBuf]) -> Result<Report, CliError> {
    let mut files = Vec::new();
    for input in inputs {
        collect(input, &mut files)?;
    }
    let mut claims: Vec<ClaimRow> = Experiment::ALL
        .iter()
        .map(|&experiment| ClaimRow {
            experiment,
            claim: experiment.claim().to_string(),
            status: Status::Untested,
            runs: 0,
            failing: Vec::new(),
        })
        .collect();
    let mut unreadable = Vec::new();
    for file in &files {
        let text = fs::read_to_string(file).map_err(|e| io_error(file, e))?;
        let Ok(parsed) = serde_json::from_str::<LooseVerdictFile>(&text) else {
            unreadable.push(file.display().to_string());
            continue;
        };
        let row = claims
            .iter_mut()
            .find(|c| c.experiment == parsed.subcommand)
            .expect("every experiment has a row");
        row.runs += 1;
        row.failing
            .extend(parsed.verdicts.iter().filter(|v| !v.pass).map(|v| v.test.clone()));
        row.status = if row.failing.is_empty() {
            Status::Pass
        } else {
            Status::Fail
        };
    }
    let failing_claims: Vec<String> = claims
        .iter()
        .filter(|c| c.status == Status::Fail)
        .map(|c| c.claim.clone())
        .collect();
    let status = if !failing_claims.is_empty() {
        Status::Fail
    } else if claims.iter().any(|c| c.status == Status::Pass) {
        Status::Pass
    } else {
        Status::Untested
    };
    Ok(Report {
        status,
        claims,
        failing_claims,
        unreadable,
    })
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Fail => 1,
            Status::Pass | Status::Untested => 0,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let width = self.claims.iter().map(|c| c.experiment.slug().len()).max().unwrap_or(0);
        for c in &self.claims {
            let _ = write!(
                out,
                "{:<8} {:<width$}  {}",
                c.status.as_str(),
                c.experiment.slug(),
                c.claim
            );
            if !c.failing.is_empty() {
                let _ = write!(out, "  [failed: {}]", c.failing.join(", "));
            }
            out.push('\n');
        }
        for f in &self.unreadable {
            let _ = writeln!(out, "unreadable verdict file: {f}");
        }
        let _ = write!(out, "status: {}", self.status.as_str());
        if !self.failing_claims.is_empty() {
            let _ = write!(out, " ({})", self.failing_claims.join("; "));
        }
        out.push('\n');
        out
    }
}
