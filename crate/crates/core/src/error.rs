//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors produced by cross interpolation, quadrature, and the baselines.
#[derive(Debug, Error)]
pub enum CrossError {
    /// A precondition on user-supplied input was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An intersection matrix became numerically singular. The interface is
    /// 1-based; 0 means the matrix did not belong to a tensor interface.
    #[error("numerically singular intersection matrix at interface {interface}")]
    DegenerateIntersection { interface: usize },

    /// A superblock was too large to materialize for the DMRG sweep.
    #[error(
        "superblock at interface {interface} holds {entries} entries, over the cap {cap}; \
         use the greedy strategy instead"
    )]
    SuperblockTooLarge {
        interface: usize,
        entries: usize,
        cap: usize,
    },

    /// A pivot exchange between workers failed or timed out.
    #[error("pivot exchange failed: {0}")]
    Exchange(String),

    /// A lattice rule file could not be parsed.
    #[error("lattice file: {0}")]
    LatticeFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CrossError>;

impl CrossError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CrossError::InvalidInput(msg.into())
    }
}
