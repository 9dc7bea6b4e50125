use thiserror::Error;

/// Everything that can go wrong while building or evaluating a secrecy model.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of a mathematical function.
    #[error("{function}: argument {value} outside domain ({expected})")]
    Domain {
        function: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// A configuration value violated a constraint.
    #[error("invalid configuration `{key}`: {reason}")]
    Config { key: String, reason: String },

    /// An integrand produced a non-finite value at a quadrature node.
    #[error("integrand is not finite at node {node} (value {value})")]
    Evaluation { node: f64, value: f64 },

    /// A numerical procedure failed (factorization, overflow, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Parse(_) | Error::Domain { .. } => 2,
            Error::Evaluation { .. } | Error::Numerical(_) => 3,
            Error::Io(_) => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
