use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the solver stack can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("eigendecomposition failed: {0}")]
    DecompositionFailure(String),

    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("shape mismatch: {0}")]
    ShapeError(String),

    #[error("singular KKT system (condition estimate {condition:.3e}): {context}")]
    SingularKkt { condition: f64, context: String },

    #[error("constraint error: {0}")]
    ConstraintError(String),

    #[error("line search failed: {0}")]
    LineSearchFailure(String),

    #[error("iteration cap reached: {0}")]
    IterCap(String),

    #[error("start point is not strictly feasible: {0}")]
    InfeasibleStart(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("unknown instance `{0}`")]
    NotFound(String),

    #[error("size guard: {0}")]
    SizeGuard(String),

    #[error("oracle inconclusive: {0}")]
    OracleInconclusive(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::DomainViolation(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeError(msg.into())
    }

    /// Prefix the message with the component that raised it.
    pub fn context(self, what: &str) -> Self {
        match self {
            Error::DomainViolation(m) => Error::DomainViolation(format!("{what}: {m}")),
            Error::ShapeError(m) => Error::ShapeError(format!("{what}: {m}")),
            Error::NumericalFailure(m) => Error::NumericalFailure(format!("{what}: {m}")),
            Error::LineSearchFailure(m) => Error::LineSearchFailure(format!("{what}: {m}")),
            Error::IterCap(m) => Error::IterCap(format!("{what}: {m}")),
            Error::SingularKkt { condition, context } => Error::SingularKkt {
                condition,
                context: format!("{what}: {context}"),
            },
            other => other,
        }
    }
}
