use thiserror::Error;

use crate::adapt::AdaptError;
use crate::corpus::CorpusError;
use crate::engine::EngineError;
use crate::features::FeatureError;
use crate::neural::NeuralError;
use crate::strategies::StrategyError;

/// Crate-level error wrapping the per-module error types.
#[derive(Debug, Error)]
pub enum Error {
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
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
