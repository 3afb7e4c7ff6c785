use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

/// Exit code for bad input, flags or configuration.
pub const EXIT_INPUT: u8 = 2;
/// Exit code for numerical failures (singular designs and the like).
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] panel_mbb::Error),

    #[error("malformed CSV: {0}")]
    MalformedCsv(String),

    #[error("duplicate row for unit {unit}, time {time}")]
    DuplicateCell { unit: i64, time: i64 },

    #[error("unbalanced panel: {0}")]
    UnbalancedPanel(String),

    #[error("non-finite value in column {column} on line {line}")]
    NonFiniteValue { column: String, line: u64 },

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// Stable identifier printed as `error[Kind]`.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::MalformedCsv(_) => "MalformedCsv",
            CliError::DuplicateCell { .. } => "DuplicateCell",
            CliError::UnbalancedPanel(_) => "UnbalancedPanel",
            CliError::NonFiniteValue { .. } => "NonFiniteValue",
            CliError::Io { .. } => "Io",
            CliError::Config(_) => "Config",
            CliError::Usage(_) => "Usage",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}
