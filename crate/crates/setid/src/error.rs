use std::path::PathBuf;

/// Errors from reading or writing files and from the numerical core.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// A malformed value or a missing column. `row` counts data rows from 1.
    #[error("parse error{}: column `{column}`: {message}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Parse { row: Option<usize>, column: String, message: String },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] setid_core::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn parse(row: Option<usize>, column: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Parse { row, column: column.into(), message: message.into() }
    }

    /// True for errors caused by malformed input files.
    pub fn is_parse(&self) -> bool {
        matches!(
            self,
            Self::Parse { .. } | Self::Json(_) | Self::Core(setid_core::Error::IntervalViolation { .. })
        )
    }

    /// True when the data define an empty set.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Self::Core(
                setid_core::Error::EmptyEmpiricalSet
                    | setid_core::Error::InfeasibleModel
                    | setid_core::Error::NoFeasibleSubproblem
            )
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
