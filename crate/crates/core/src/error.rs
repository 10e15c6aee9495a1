use thiserror::Error;

/// Errors raised by the IR, the backends and the inference layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unbound name `{name}` at {path}")]
    UnboundName { name: String, path: String },

    #[error("type mismatch at {path}: expected {expected}, found {found}")]
    TypeMismatch {
        path: String,
        expected: String,
        found: String,
    },

    #[error("dimension mismatch in {op}: {left} vs {right}")]
    DimensionMismatch {
        op: &'static str,
        left: usize,
        right: usize,
    },

    #[error("object `{object}` does not belong to the {backend} backend")]
    BackendMismatch { object: String, backend: &'static str },

    #[error("row {row} sums to {sum} (tolerance {tol:e})")]
    RowSumViolation { row: usize, sum: f64, tol: f64 },

    #[error("entry ({row}, {col}) = {value} is negative or not finite")]
    InvalidEntry { row: usize, col: usize, value: f64 },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("observation {index} has zero pushforward mass")]
    ZeroMassObservation { index: usize },

    #[error("support is empty: no entry exceeds {tol:e}")]
    EmptySupport { tol: f64 },

    #[error("backend cannot invert generator `{0}`")]
    UnsupportedInverse(String),

    #[error("degenerate prior: {0}")]
    DegeneratePrior(String),

    #[error("object too large: cardinality overflows")]
    ObjectTooLarge,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Stable snake_case name, used in machine-readable reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::UnboundName { .. } => "unbound_name",
            Error::TypeMismatch { .. } => "type_mismatch",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::BackendMismatch { .. } => "backend_mismatch",
            Error::RowSumViolation { .. } => "row_sum_violation",
            Error::InvalidEntry { .. } => "invalid_entry",
            Error::InvalidKernel(_) => "invalid_kernel",
            Error::ZeroMassObservation { .. } => "zero_mass_observation",
            Error::EmptySupport { .. } => "empty_support",
            Error::UnsupportedInverse(_) => "unsupported_inverse",
            Error::DegeneratePrior(_) => "degenerate_prior",
            Error::ObjectTooLarge => "object_too_large",
            Error::InvalidArgument(_) => "invalid_argument",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
