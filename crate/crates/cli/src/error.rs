use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

/// Failure classes, each with a fixed exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Solver,
    Input,
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Solver => 1,
            ErrorKind::Input => 2,
            ErrorKind::Io => 3,
        }
    }
}

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    /// Structured context, e.g. the assumption report when no theorem applies.
    pub details: Option<Value>,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Input,
            message: message.into(),
            details: None,
        }
    }

    pub fn solver(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Solver,
            message: message.into(),
            details: None,
        }
    }

    pub fn io(path: &Path, err: io::Error) -> Self {
        Self {
            kind: ErrorKind::Io,
            message: format!("{}: {err}", path.display()),
            details: None,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    pub fn to_json(&self) -> String {
        let mut body = json!({
            "kind": self.kind,
            "exit_code": self.exit_code(),
            "message": self.message,
        });
        if let Some(d) = &self.details {
            body["details"] = d.clone();
        }
        serde_json::to_string_pretty(&json!({ "error": body })).expect("error serializes")
    }
}

impl From<motorlab::Error> for CliError {
    fn from(e: motorlab::Error) -> Self {
        use motorlab::Error as E;
        let kind = match e {
            E::Input(_) | E::Unsupported(_) => ErrorKind::Input,
            E::Solver(_) | E::NonConvergence { .. } => ErrorKind::Solver,
        };
        Self {
            kind,
            message: e.to_string(),
            details: None,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
