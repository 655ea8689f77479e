use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("format: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Core(#[from] cpboot_core::Error),
    /// A bound or reference value failed its cross-check.
    #[error("oracle check failed: {0}")]
    Oracle(String),
}

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExitKind {
    Ok,
    Config,
    Solver,
    Oracle,
}

impl ExitKind {
    pub fn code(self) -> i32 {
        match self {
            ExitKind::Ok => 0,
            ExitKind::Config => 1,
            ExitKind::Solver => 2,
            ExitKind::Oracle => 3,
        }
    }
}

impl CliError {
    pub fn kind(&self) -> ExitKind {
        use cpboot_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Format(_) | CliError::Io(_) | CliError::Csv(_) => ExitKind::Config,
            CliError::Oracle(_) => ExitKind::Oracle,
            CliError::Core(e) => match e {
                E::InvalidParameter(_) | E::Parse { .. } | E::Unsupported(_) | E::Bracket { .. } => ExitKind::Config,
                E::Quadrature(_) => ExitKind::Oracle,
                _ => ExitKind::Solver,
            },
        }
    }
}

/// Machine-readable failure report.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub status: ExitKind,
    pub exit_code: i32,
    pub message: String,
}

impl From<&CliError> for ErrorReport {
    fn from(e: &CliError) -> Self {
        ErrorReport { status: e.kind(), exit_code: e.kind().code(), message: e.to_string() }
    }
}
