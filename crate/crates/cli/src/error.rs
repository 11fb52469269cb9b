use thiserror::Error;

/// Everything that can end a run, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Help or version text; not a failure.
    #[error("{0}")]
    Info(String),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] dualexp::Error),

    #[error("failed to write report: {0}")]
    Report(#[from] serde_json::Error),
}

impl CliError {
    /// 0 success, 1 usage, 2 I/O, 3 solver non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Info(_) => 0,
            CliError::Usage(_) => 1,
            CliError::Core(e) => core_exit_code(e),
            CliError::Report(_) => 2,
        }
    }
}

pub fn core_exit_code(e: &dualexp::Error) -> i32 {
    match e {
        dualexp::Error::Io { .. } | dualexp::Error::Format(_) => 2,
        dualexp::Error::InvalidArgument(_) => 1,
        dualexp::Error::NotConverged { .. } => 3,
    }
}
