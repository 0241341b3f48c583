//! Command implementations behind the `bikeshare` binary.
//!
//! Each `cmd_*` function runs one subcommand against a resolved
//! [`PipelineConfig`] and returns what it produced; printing and exit codes
//! are left to the binary.

mod commands;
pub mod config;
pub mod map;

use std::fmt::Display;

use thiserror::Error;

pub use commands::{
    cmd_analyze, cmd_catalog, cmd_harvest, cmd_map, render_catalog, AnalysisOutcome, Diagnostics,
    FitSummary, HarvestOutcome, MapOutcome, RunManifest, ANALYSIS_FILES,
};
pub use config::{ConfigError, Overrides, PipelineConfig, HTTP_TIMEOUT_ENV};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("stage `{stage}` failed: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("all {} systems failed to harvest:\n  {}", .0.len(), .0.join("\n  "))]
    AllSystemsFailed(Vec<String>),
}

impl CliError {
    /// 2 for configuration and usage problems, 1 for pipeline failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Stage { .. } | CliError::AllSystemsFailed(_) => 1,
        }
    }

    pub fn stage(&self) -> Option<&'static str> {
        match self {
            CliError::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

pub(crate) fn stage<E: Display>(stage: &'static str) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Stage {
        stage,
        message: e.to_string(),
    }
}
