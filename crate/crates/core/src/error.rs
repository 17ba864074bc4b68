use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("label sequence of length {labels} cannot be aligned to {frames} frames")]
    InfeasiblePair { frames: usize, labels: usize },

    #[error("lattice has no path from the initial to the final state")]
    EmptyLattice,

    #[error("lattice has more than {cap} paths")]
    TooManyPaths { cap: usize },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("utterance ids do not match: {0}")]
    IdMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Stable machine-readable code for diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InfeasiblePair { .. } => "infeasible_pair",
            Error::EmptyLattice => "empty_lattice",
            Error::TooManyPaths { .. } => "too_many_paths",
            Error::DimMismatch { .. } => "dim_mismatch",
            Error::IdMismatch(_) => "id_mismatch",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
