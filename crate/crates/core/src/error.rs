use thiserror::Error;

/// Errors raised by the library. Each variant corresponds to one failure class
/// that callers (notably the CLI) map to a distinct exit status.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("length error: inputs have {have} terms, need {need}")]
    Length { have: usize, need: usize },

    #[error("arithmetic overflow: {0}")]
    Overflow(String),

    #[error("enumeration budget exceeded: {0}")]
    Budget(String),

    #[error("divergence: {0}")]
    Divergence(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("empty arc: {0}")]
    EmptyArc(String),

    #[error("variance guard: {0}")]
    VarianceGuard(String),

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),
}

pub type Result<T> = std::result::Result<T, Error>;
