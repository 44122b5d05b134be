use std::io;

use thiserror::Error;

/// Errors produced anywhere in the sketching and recovery pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("index out of range: {what} = {value}, limit {limit}")]
    Bounds {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid state: {0}")]
    State(&'static str),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("infeasible parameters: constraint `{constraint}` requires {detail}")]
    Infeasible {
        constraint: &'static str,
        detail: String,
    },

    #[error("incompatible sketches: {0}")]
    Compatibility(String),

    #[error("snapshot format error: {0}")]
    Format(String),

    #[error("data generation failed: {0}")]
    Generation(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_index(what: &'static str, value: usize, limit: usize) -> Result<()> {
    if value < limit {
        Ok(())
    } else {
        Err(Error::Bounds { what, value, limit })
    }
}
