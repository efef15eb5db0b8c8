use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed header: missing column(s) {}", .missing.join(", "))]
    MissingColumns { missing: Vec<String> },

    #[error("csv error: {0}")]
    Csv(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("{relationship}: no surviving pairs ({survivors} left after zone exclusion, need {required})")]
    Starved {
        relationship: &'static str,
        survivors: usize,
        required: usize,
    },

    #[error("missing operand `{0}` for the selected rho strategy")]
    MissingOperand(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
