use std::path::PathBuf;

use dpboot_core::Error as CoreError;

/// Exit status for malformed input or flags.
pub const EXIT_VALIDATION: u8 = 2;
/// Exit status when the numerics give up.
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {reason}", path.display())]
    Csv { path: PathBuf, reason: String },
    #[error("{}: file is empty", path.display())]
    EmptyFile { path: PathBuf },
    #[error("{}: header has no data rows", path.display())]
    NoRows { path: PathBuf },
    #[error("{}: row {row}, column {column}: cannot read {value:?} as a finite number", path.display())]
    NotNumeric {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },
    #[error("{}: row {row} has {found} fields but the header has {expected}", path.display())]
    Ragged {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{}: {reason}", path.display())]
    Schema { path: PathBuf, reason: String },
    /// A dataset invariant failed; rows are 1-based data rows.
    #[error("{}: {reason}", path.display())]
    Invalid { path: PathBuf, reason: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_VALIDATION,
        }
    }

    /// Attaches a file to a core validation error, rewriting 0-based row
    /// indices into 1-based data rows.
    pub fn in_file(path: impl Into<PathBuf>, err: CoreError) -> Self {
        let path = path.into();
        let reason = match &err {
            CoreError::InvalidClassLabel { row, label, classes } => {
                format!("row {}: label {label} is not a class index in 0..{classes}", row + 1)
            }
            CoreError::InvalidProbability { row, column, value } => {
                format!(
                    "row {}, column p{}: probability {value} outside [0, 1]",
                    row + 1,
                    column + 1
                )
            }
            CoreError::ProbabilityRowSum { row, sum } => {
                format!(
                    "row {}: probabilities sum to {sum}, more than 1e-3 away from 1",
                    row + 1
                )
            }
            CoreError::NonFinite { what, index } => format!("non-finite value in {what} at entry {}", index + 1),
            _ => return CliError::Core(err),
        };
        CliError::Invalid { path, reason }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
