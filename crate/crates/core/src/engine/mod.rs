//! Leave-one-out protocol, the annotation loop, metrics and the resumable
//! experiment matrix.

mod config;
mod matrix;
mod metrics;
mod protocol;
mod report;

pub use config::{
    preset, task_defaults, CorporaSource, ExperimentConfig, ResolvedConfig, SpecSource, Targets,
    DEFAULT_DISCRIMINATOR_EPOCHS,
};
pub use matrix::{
    run_matrix, run_matrix_on, MatrixReport, ANNOTATIONS_FILE, PAD_FILE, RESULTS_FILE, RUNS_FILE, SUMMARY_FILE,
};
pub use metrics::{accuracy, auc, macro_f1};
pub use protocol::{leave_one_out, run_key, run_single, RunOutcome, TargetData};
pub use report::{report, ReportOptions, ReportOutput};

use crate::adapt::AdaptError;
use crate::corpus::CorpusError;
use crate::features::FeatureError;
use crate::neural::NeuralError;
use crate::strategies::StrategyError;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("config: {0}")]
    Config(String),
    #[error("leave-one-out needs at least 2 domains, got {0}")]
    TooFewDomains(usize),
    #[error("unknown target domain `{0}`")]
    UnknownTarget(String),
    #[error("annotation budget {budget} exceeds the source pool of {pool}")]
    BudgetExceedsPool { budget: usize, pool: usize },
    #[error("metric: {0}")]
    Metric(String),
    #[error("output: {0}")]
    Output(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Adapt(#[from] AdaptError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}
