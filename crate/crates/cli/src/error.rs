use std::fmt;

use serde_json::{json, Value};

/// Failures of a CLI invocation, each mapped to an exit status.
#[derive(Debug)]
pub enum CliError {
    Parse { message: String, line: Option<usize>, column: Option<usize> },
    Validation { key: String, message: String },
    Io { path: String, message: String },
    Numerical { context: String, source: fracnoether::Error },
    Acceptance { failed: Vec<u32> },
}

impl CliError {
    pub fn validation(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Validation { key: key.into(), message: message.into() }
    }

    pub fn io(path: impl AsRef<std::path::Path>, e: impl fmt::Display) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), message: e.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } | CliError::Io { .. } => 1,
            CliError::Numerical { .. } => 2,
            CliError::Acceptance { .. } => 3,
        }
    }

    /// The machine-readable record printed on stderr.
    pub fn record(&self) -> Value {
        let mut v = match self {
            CliError::Parse { line, column, .. } => json!({ "kind": "parse", "line": line, "column": column }),
            CliError::Validation { key, .. } => json!({ "kind": "validation", "key": key }),
            CliError::Io { path, .. } => json!({ "kind": "io", "path": path }),
            CliError::Numerical { context, .. } => json!({ "kind": "numerical", "context": context }),
            CliError::Acceptance { failed } => json!({ "kind": "acceptance", "failed": failed }),
        };
        v["message"] = Value::String(self.to_string());
        v["exit_code"] = json!(self.exit_code());
        json!({ "error": v })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse { message, line: Some(l), column: Some(c) } => write!(f, "parse error at line {l}, column {c}: {message}"),
            CliError::Parse { message, .. } => write!(f, "parse error: {message}"),
            CliError::Validation { key, message } => write!(f, "invalid value for \"{key}\": {message}"),
            CliError::Io { path, message } => write!(f, "{path}: {message}"),
            CliError::Numerical { context, source } => write!(f, "{context}: {source}"),
            CliError::Acceptance { failed } => write!(f, "acceptance criteria failed: {failed:?}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Attaches context to a library error.
pub trait Context<T> {
    fn context(self, what: &str) -> Result<T, CliError>;
}

impl<T> Context<T> for fracnoether::Result<T> {
    fn context(self, what: &str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Numerical { context: what.to_string(), source })
    }
}
