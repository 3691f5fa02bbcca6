use thiserror::Error;

/// Location-tagged failure while reading the network DSL.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: unknown directive `{name}`")]
    UnknownDirective { line: usize, name: String },
    #[error("line {line}: rate `{key}` must be positive, got {value}")]
    NonPositiveRate { line: usize, key: String, value: String },
    #[error("line {line}, column {column}: negative stoichiometric coefficient")]
    NegativeCoefficient { line: usize, column: usize },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
}

impl ParseError {
    pub fn line(&self) -> usize {
        match self {
            ParseError::Syntax { line, .. }
            | ParseError::UnknownDirective { line, .. }
            | ParseError::NonPositiveRate { line, .. }
            | ParseError::NegativeCoefficient { line, .. }
            | ParseError::Invalid { line, .. } => *line,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CrnError {
    #[error(transparent)]
    Parse(#[from] ParseError),

    /// Structurally invalid network or argument (bad index, wrong length, ...).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A floating-point computation left the representable range or lost
    /// too much precision to be trusted.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A state or matrix failed a balance / steady-state residual check.
    #[error("{what} rejected: residual {residual:e} exceeds tolerance {tolerance:e}")]
    Rejected {
        what: String,
        residual: f64,
        tolerance: f64,
    },

    /// Two independent routes to the same quantity disagreed.
    #[error("internal consistency violation: {0}")]
    Internal(String),
}

pub type Result<T, E = CrnError> = std::result::Result<T, E>;
