use std::fmt;
use std::path::PathBuf;

/// Failure of a CLI command, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Missing(PathBuf),
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Missing(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Missing(p) => write!(f, "missing artifact: {}", p.display()),
            CliError::Other(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<fastgate::Error> for CliError {
    fn from(e: fastgate::Error) -> Self {
        use fastgate::Error as E;
        match e {
            E::NonFinite(_) => CliError::Numeric(e.to_string()),
            E::InvalidParams(_) | E::DimensionMismatch { .. } => CliError::Config(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(e.to_string())
    }
}
