//! Uniform error type for the pipeline; every stage maps to a distinct
//! nonzero exit code so shell callers can tell failures apart.

use rulemap_core::ea::EaError;
use rulemap_core::rules::RulesError;
use rulemap_core::transactions::LoadError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StageError {
    #[error("dataset error: {0}")]
    Dataset(#[from] LoadError),
    #[error("rule input error: {0}")]
    RuleInput(String),
    #[error("filtering error: {0}")]
    Filter(#[from] RulesError),
    #[error("graph error: {0}")]
    Graph(String),
    #[error("evolution error: {0}")]
    Evolve(#[from] EaError),
    #[error("render error: {0}")]
    Render(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("configuration error: {0}")]
    Config(String),
}

impl StageError {
    pub fn exit_code(&self) -> i32 {
        match self {
            StageError::Dataset(_) => 10,
            StageError::RuleInput(_) => 11,
            StageError::Filter(_) => 12,
            StageError::Graph(_) => 13,
            StageError::Evolve(_) => 14,
            StageError::Render(_) => 15,
            StageError::Io(_) => 16,
            StageError::Config(_) => 17,
        }
    }
}
