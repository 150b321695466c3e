//! Experiment harness for the `blindmimo_core` link model: TOML configs,
//! seeded parallel Monte Carlo drivers, and CSV/JSON output.
//!
//! Every Monte Carlo task draws from its own counter-based stream, keyed by
//! `(seed, sweep point, trial, purpose)`, and results are merged in task order,
//! so output does not depend on the number of workers.

pub mod config;
pub mod experiments;
pub mod output;

pub use config::ExperimentConfig;
pub use experiments::Runner;
pub use output::{Record, RecordSink};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Core(#[from] blindmimo_core::Error),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("too many tasks for the stream layout: {0}")]
    StreamSpace(usize),
}
