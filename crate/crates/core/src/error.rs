//! Crate-wide error type.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid topology parameters: {0}")]
    InvalidTopologyParams(String),

    #[error("graph is not connected")]
    DisconnectedGraph,

    #[error("link probability {0} is outside (0, 1]")]
    InvalidProbability(f64),

    #[error("parse error: {0}")]
    ParseError(String),

    #[error("value out of range: {0}")]
    ValueOutOfRange(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("reward {0} is outside [0, 1]")]
    RewardOutOfRange(f64),

    #[error("active set is empty for agent {0}")]
    EmptyActiveSet(usize),

    #[error("burn-in has already stopped")]
    AlreadyStopped,

    #[error("burn-in has not stopped yet")]
    NotStopped,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
