use std::path::PathBuf;

use serde::Serialize;

/// Everything a subcommand can fail with; each kind has its own exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    MissingInput(PathBuf),
    DigestMismatch { file: PathBuf, expected: String, found: String },
    Io(String),
    Numeric(String),
    Insufficient(String),
    Format(String),
    ChecksFailed(Vec<String>),
}

#[derive(Serialize)]
struct Reason<'a> {
    error: &'a str,
    code: i32,
    detail: String,
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::ChecksFailed(_) => "checks_failed",
            CliError::Config(_) => "config",
            CliError::MissingInput(_) => "missing_input",
            CliError::DigestMismatch { .. } => "digest_mismatch",
            CliError::Io(_) => "io",
            CliError::Numeric(_) => "numeric",
            CliError::Insufficient(_) => "insufficient_data",
            CliError::Format(_) => "malformed_input",
        }
    }

    /// Exit status; 2 is left to argument parsing.
    pub fn code(&self) -> i32 {
        match self {
            CliError::ChecksFailed(_) => 1,
            CliError::Config(_) => 3,
            CliError::MissingInput(_) => 4,
            CliError::DigestMismatch { .. } => 5,
            CliError::Io(_) => 6,
            CliError::Numeric(_) => 7,
            CliError::Insufficient(_) => 8,
            CliError::Format(_) => 9,
        }
    }

    pub fn detail(&self) -> String {
        match self {
            CliError::Config(s)
            | CliError::Io(s)
            | CliError::Numeric(s)
            | CliError::Insufficient(s)
            | CliError::Format(s) => s.clone(),
            CliError::MissingInput(p) => p.display().to_string(),
            CliError::DigestMismatch { file, expected, found } => {
                format!("{}: expected {expected}, found {found}", file.display())
            }
            CliError::ChecksFailed(names) => names.join(","),
        }
    }

    /// One JSON line for the error stream.
    pub fn reason_line(&self) -> String {
        serde_json::to_string(&Reason { error: self.kind(), code: self.code(), detail: self.detail() })
            .expect("reason serializes")
    }
}

impl From<jumplab::Error> for CliError {
    fn from(e: jumplab::Error) -> Self {
        use jumplab::Error as E;
        match e {
            E::Config(s) => CliError::Config(s),
            E::Insufficient(s) => CliError::Insufficient(s),
            E::Format(s) => CliError::Format(s),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
