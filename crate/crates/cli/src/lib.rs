//! Batch runner for the phonon beam-splitter simulations.
//!
//! A JSON config names a scenario and its grids; the runner evaluates every
//! sweep point and writes the results as CSV. Output depends only on the
//! config (and `master_seed` for the Monte-Carlo scenario), never on the
//! number of worker threads.

pub mod config;
pub mod output;
pub mod run;

use std::path::{Path, PathBuf};

pub use config::{RunConfig, ScenarioKind};
pub use output::{Cell, Table};
pub use run::{run_scenario, Artifact};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] phonon_bs_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 2 for bad configuration, 3 for a numerical failure, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(phonon_bs_core::Error::InvalidArgument(_)) => 2,
            _ => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Core(e) if e.is_numerical() => "numerical",
            CliError::Core(_) => "model",
            CliError::Io { .. } => "io",
        }
    }

    /// One-line JSON record for stderr.
    pub fn record(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        })
        .to_string()
    }
}

/// File for an artifact: the primary table goes to `base`, others to `<stem>_<suffix>.csv` beside it.
pub fn artifact_path(base: &Path, suffix: Option<&str>) -> PathBuf {
    match suffix {
        None => base.to_path_buf(),
        Some(s) => {
            let stem = base
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            base.with_file_name(format!("{stem}_{s}.csv"))
        }
    }
}

/// Runs `cfg` and writes its tables; returns the files written.
pub fn execute(cfg: &RunConfig, out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let base = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_path.clone())
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", cfg.scenario().name())));
    let mut written = Vec::new();
    for a in run_scenario(cfg)? {
        let path = artifact_path(&base, a.suffix);
        a.table.write(&path)?;
        written.push(path);
    }
    Ok(written)
}
