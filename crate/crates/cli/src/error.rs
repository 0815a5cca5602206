use std::path::PathBuf;

use insulation::Error as SolverError;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    /// Some rows of a table failed; the rest were written.
    #[error("{0}")]
    Incomplete(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for anything the user can fix in the configuration or inputs,
    /// 2 when a solver gave up or produced an inconsistent result.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Incomplete(_) => 2,
            CliError::Solver(e) => match e {
                SolverError::NotConverged { .. }
                | SolverError::AllRestartsFailed(_)
                | SolverError::ProbeFailed { .. }
                | SolverError::NotMonotone { .. } => 2,
                _ => 1,
            },
        }
    }
}

pub(crate) fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
