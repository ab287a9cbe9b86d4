//! Experiments over agent URIs and the discovery simulator.

pub mod bench;
pub mod corpus;
pub mod discovery;
mod exec;
pub mod expressiveness;
pub mod hops;
pub mod tables;
pub mod walkthrough;

use thiserror::Error;

pub use exec::Execution;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("bad corpus: {0}")]
    BadCorpus(String),
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("simulation failed: {0}")]
    Simulation(String),
    #[error("scenario assertion failed: {0}")]
    Scenario(String),
    #[error("{0}")]
    Io(String),
}

impl EvalError {
    pub fn name(&self) -> &'static str {
        match self {
            EvalError::EmptyCorpus => "EmptyCorpus",
            EvalError::BadCorpus(_) => "BadCorpus",
            EvalError::BadConfig(_) => "BadConfig",
            EvalError::Simulation(_) => "Simulation",
            EvalError::Scenario(_) => "Scenario",
            EvalError::Io(_) => "Io",
        }
    }
}
