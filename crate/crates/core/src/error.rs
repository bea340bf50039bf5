use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("singular innovation covariance")]
    SingularInnovation,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate parameter: {0}")]
    DegenerateParameter(String),

    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    #[error("degenerate likelihood: {0}")]
    DegenerateLikelihood(String),

    #[error("degenerate filter: {0}")]
    DegenerateFilter(String),

    #[error("oracle instance exceeds enumeration caps: {0}")]
    CapsExceeded(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotPositiveDefinite(_) => "not_positive_definite",
            Error::SingularInnovation => "singular_innovation",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::DegenerateParameter(_) => "degenerate_parameter",
            Error::ModelMismatch(_) => "model_mismatch",
            Error::DegenerateLikelihood(_) => "degenerate_likelihood",
            Error::DegenerateFilter(_) => "degenerate_filter",
            Error::CapsExceeded(_) => "caps_exceeded",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::Parse(_) => "parse",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}
