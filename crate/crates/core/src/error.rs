use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("relative density {density:.4} is not below 1; strut diameter is inconsistent with a lattice")]
    GeometryTooDense { density: f64 },

    #[error("mechanism detected: reduced stiffness pivot {pivot:e} at dof {dof} (under-constrained topology)")]
    Mechanism { dof: usize, pivot: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("matrix is not invertible: {0}")]
    NotInvertible(String),

    #[error("csv schema mismatch: missing columns {missing:?}, unexpected columns {extra:?}")]
    Schema { missing: Vec<String>, extra: Vec<String> },

    #[error("csv parse error at row {row}, column '{column}': {message}")]
    Parse { row: usize, column: String, message: String },

    #[error("unknown lattice label '{label}'; known labels: {known:?}")]
    UnknownLabel { label: String, known: Vec<String> },

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate target: {0}")]
    DegenerateTarget(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::GeometryTooDense { .. } => "geometry_too_dense",
            Error::Mechanism { .. } => "mechanism",
            Error::NumericalFailure(_) => "numerical_failure",
            Error::NotInvertible(_) => "not_invertible",
            Error::Schema { .. } => "schema",
            Error::Parse { .. } => "parse",
            Error::UnknownLabel { .. } => "unknown_label",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::DegenerateTarget(_) => "degenerate_target",
            Error::Degenerate(_) => "degenerate",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
