//! File-based pipeline stages behind the `hybridnorm` command.

pub mod config;
pub mod stages;

use serde::Serialize;

pub use config::Config;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Validation,
    Runtime,
}

/// A stage failure, reported as JSON on stderr.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub stage: String,
    pub kind: FailureKind,
    pub message: String,
}

impl Failure {
    pub fn validation(stage: &str, message: impl Into<String>) -> Self {
        Failure {
            stage: stage.to_string(),
            kind: FailureKind::Validation,
            message: message.into(),
        }
    }

    pub fn runtime(stage: &str, message: impl Into<String>) -> Self {
        Failure {
            stage: stage.to_string(),
            kind: FailureKind::Runtime,
            message: message.into(),
        }
    }

    pub fn core(stage: &str, e: hybridnorm::Error) -> Self {
        if e.is_validation() {
            Failure::validation(stage, e.to_string())
        } else {
            Failure::runtime(stage, e.to_string())
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            FailureKind::Validation => 2,
            FailureKind::Runtime => 3,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.stage, self.message)
    }
}

impl std::error::Error for Failure {}
