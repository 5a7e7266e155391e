//! Experiment harness: config files, the seeded sweep driver and CSV
//! output for the estimators in `sharedrep-core`.

pub mod config;
pub mod experiment;
pub mod output;

use std::path::PathBuf;

pub use config::{parse_config, ConfigError, Estimator, ExperimentConfig, SweepVar};
pub use experiment::{run_experiment, summarize, Metric, RunOptions, SummaryRow, TrialResult};
pub use output::{read_trials, write_results};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl HarnessError {
    /// 2 for configuration problems, 3 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 3,
        }
    }
}
