use thiserror::Error;

use crate::scenario::ScenarioError;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Solver(#[from] mgsched_core::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

impl RunError {
    /// Stable name reported alongside the message.
    pub fn category(&self) -> &'static str {
        match self {
            RunError::Scenario(ScenarioError::Io { .. }) | RunError::Io(_) => "io",
            RunError::Scenario(ScenarioError::Parse { .. }) => "parse",
            RunError::Scenario(ScenarioError::Invalid { .. }) => "validation",
            RunError::Solver(_) => "solver",
            RunError::Csv(_) | RunError::Json(_) => "output",
            RunError::Usage(_) => "usage",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "usage" => 2,
            "parse" => 3,
            "validation" => 4,
            "solver" => 5,
            _ => 6,
        }
    }
}
