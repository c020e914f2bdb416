use std::fmt;

use thiserror::Error;

/// Pipeline stage an error originated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Cascade,
    Neuron,
    Synapse,
    Metrics,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Cascade => "cascade",
            Stage::Neuron => "neuron",
            Stage::Synapse => "synapse",
            Stage::Metrics => "metrics",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("integration diverged at t = {time} s: {detail}")]
    Divergence { time: f64, detail: String },

    #[error("sequence alignment mismatch: {0}")]
    Alignment(String),

    #[error("input not sorted: {0}")]
    Ordering(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("sweep failed: {failed} of {total} trials failed (limit is 10%)")]
    SweepFailure { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn in_stage(self, stage: Stage) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for numerical blow-ups, including those wrapped with a stage tag.
    pub fn is_divergence(&self) -> bool {
        match self {
            Error::Divergence { .. } => true,
            Error::Stage { source, .. } => source.is_divergence(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
