use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by estimation, resampling and inference routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unbalanced panel: {0}")]
    UnbalancedPanel(String),

    #[error("non-finite {field} value at unit {unit}, period {period}")]
    NonFiniteValue {
        field: &'static str,
        unit: usize,
        period: usize,
    },

    #[error("panel needs at least 2 periods per unit, got {m}")]
    TooFewPeriods { m: usize },

    #[error("panel needs at least one unit and one regressor")]
    EmptyPanel,

    #[error("singular design: reciprocal condition number {rcond:.3e} below tolerance {tolerance:.1e}")]
    SingularDesign { rcond: f64, tolerance: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("contrast vector must be nonzero")]
    ZeroContrast,

    #[error("block length {q} does not divide m = {m}; valid block lengths: {}", format_divisors(.divisors))]
    IndivisibleBlockLength { m: usize, q: usize, divisors: Vec<usize> },

    #[error("invalid block plan: {0}")]
    InvalidBlockPlan(String),

    #[error("{redraws} singular bootstrap redraws over {replicates} replicates exceeds the allowed rate")]
    ExcessiveSingularRedraws { redraws: usize, replicates: usize },

    #[error("matrix has eigenvalue {value:.3e}, not positive semi-definite")]
    NegativeVariance { value: f64 },

    #[error("bootstrap run is empty")]
    EmptyRun,

    #[error("studentized inference needs per-replicate standard errors")]
    MissingStudentization,

    #[error("standard error is zero or not positive")]
    ZeroVariance,

    #[error("level {0} must lie strictly between 0 and 1")]
    InvalidLevel(f64),

    #[error("autoregressive coefficient {beta} is not stationary (|beta| must be < 1)")]
    NonStationary { beta: f64 },

    #[error("unknown process specification: {0}")]
    UnknownSpec(String),

    #[error("at least 2 Monte Carlo replications are needed, got {reps}")]
    InsufficientReps { reps: usize },

    #[error("unknown output format: {0}")]
    UnknownFormat(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed table: {0}")]
    MalformedTable(String),
}

impl Error {
    /// Stable machine-readable identifier, one per variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnbalancedPanel(_) => "UnbalancedPanel",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::TooFewPeriods { .. } => "TooFewPeriods",
            Error::EmptyPanel => "EmptyPanel",
            Error::SingularDesign { .. } => "SingularDesign",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::ZeroContrast => "ZeroContrast",
            Error::IndivisibleBlockLength { .. } => "IndivisibleBlockLength",
            Error::InvalidBlockPlan(_) => "InvalidBlockPlan",
            Error::ExcessiveSingularRedraws { .. } => "ExcessiveSingularRedraws",
            Error::NegativeVariance { .. } => "NegativeVariance",
            Error::EmptyRun => "EmptyRun",
            Error::MissingStudentization => "MissingStudentization",
            Error::ZeroVariance => "ZeroVariance",
            Error::InvalidLevel(_) => "InvalidLevel",
            Error::NonStationary { .. } => "NonStationary",
            Error::UnknownSpec(_) => "UnknownSpec",
            Error::InsufficientReps { .. } => "InsufficientReps",
            Error::UnknownFormat(_) => "UnknownFormat",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::MalformedTable(_) => "MalformedTable",
        }
    }

    /// True for failures of the numerical procedure itself rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularDesign { .. }
                | Error::ExcessiveSingularRedraws { .. }
                | Error::NegativeVariance { .. }
                | Error::ZeroVariance
        )
    }
}

fn format_divisors(divisors: &[usize]) -> String {
    divisors.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
}
