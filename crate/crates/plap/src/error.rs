use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped by how the CLI reports them: anything wrong with
/// user-supplied input (spec files, expressions, parameters) maps to exit
/// code 2, violated problem hypotheses to 3, and hard solver failures to 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh: {0}")]
    Mesh(String),

    #[error("parse error at offset {offset}: {msg}")]
    Parse { offset: usize, msg: String },

    #[error("evaluation error at offset {offset}: {msg}")]
    Eval { offset: usize, msg: String },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("spec: {0}")]
    Spec(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("solver: {0}")]
    Solver(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the CLI for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Mesh(_)
            | Error::Parse { .. }
            | Error::Eval { .. }
            | Error::Param(_)
            | Error::Spec(_) => 2,
            Error::Hypothesis(_) => 3,
            Error::Solver(_) | Error::Io(_) => 4,
        }
    }
}
