//! Batch runner behind the `permuton` binary: resolves configs into
//! manifests, runs experiments, writes run directories and aggregates
//! verdicts into reports.

pub mod config;
pub mod experiments;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use permuton_core::Verdict;
use serde::{Deserialize, Serialize};

pub use config::{Experiment, ExperimentManifest, RunConfig};
pub use report::{report, Report, Status};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<permuton_core::Error> for CliError {
    fn from(e: permuton_core::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

pub(crate) fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Contents of `verdict.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictFile {
    pub subcommand: Experiment,
    pub claim: String,
    pub pass: bool,
    pub verdicts: Vec<Verdict>,
}

#[derive(Debug)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub manifest: ExperimentManifest,
    pub verdict: VerdictFile,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.verdict.pass {
            0
        } else {
            1
        }
    }
}

/// Creates `root/<subcommand>/<timestamp>`, adding a suffix if a run in the
/// same millisecond already took the name.
pub fn fresh_run_dir(root: &Path, slug: &str) -> Result<PathBuf, CliError> {
    let parent = root.join(slug);
    fs::create_dir_all(&parent).map_err(|e| io_error(&parent, e))?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string();
    for k in 0.. {
        let name = if k == 0 { stamp.clone() } else { format!("{stamp}-{k}") };
        let dir = parent.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(io_error(&dir, e)),
        }
    }
    unreachable!()
}

/// Runs the manifest and writes `manifest.json`, the CSV tables and
/// `verdict.json` into `dir`.
pub fn run_into(mut manifest: ExperimentManifest, dir: &Path, workers: usize) -> Result<RunSummary, CliError> {
    let output = experiments::execute(&manifest, workers)?;
    let write = |name: &str, contents: &str| {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| io_error(&path, e))
    };
    manifest.outputs = output.files.iter().map(|(name, _)| name.clone()).collect();
    manifest.outputs.push("verdict.json".into());
    manifest.events = output.events;
    for (name, contents) in &output.files {
        write(name, contents)?;
    }
    let verdict = VerdictFile {
        subcommand: manifest.subcommand,
        claim: manifest.subcommand.claim().to_string(),
        pass: output.verdicts.iter().all(|v| v.pass),
        verdicts: output.verdicts,
    };
    write("verdict.json", &to_json(&verdict))?;
    write("manifest.json", &to_json(&manifest))?;
    Ok(RunSummary {
        dir: dir.to_path_buf(),
        manifest,
        verdict,
    })
}

/// Runs the manifest in a fresh timestamped directory under `root`.
pub fn run(manifest: ExperimentManifest, root: &Path, workers: usize) -> Result<RunSummary, CliError> {
    let dir = fresh_run_dir(root, manifest.subcommand.slug())?;
    run_into(manifest, &dir, workers)
}

pub fn read_manifest(path: &Path) -> Result<ExperimentManifest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    ExperimentManifest::from_json(&text)
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}
