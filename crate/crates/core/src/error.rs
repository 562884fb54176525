use thiserror::Error;

use crate::pmean::PMeanResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid norm: {0}")]
    InvalidNorm(String),

    #[error("directional derivative of the norm is undefined at the zero vector")]
    ZeroVector,

    #[error("invalid exponent p = {0}")]
    InvalidExponent(f64),

    #[error("measure space needs at least one atom")]
    NoAtoms,

    #[error("atom {index} has invalid weight {weight} (must be positive and finite)")]
    InvalidWeight { index: usize, weight: f64 },

    #[error("atom {index} has a non-finite coordinate")]
    NonFiniteValue { index: usize },

    #[error("tail threshold must be positive, got {0}")]
    InvalidEps(f64),

    #[error("atom {0} is not assigned to a valid center")]
    UnassignedAtom(usize),

    #[error("infinite-mass space requires a background center equal to zero")]
    BackgroundNotZero,

    #[error("reduction threshold must be positive, got {0}")]
    InvalidThreshold(f64),

    #[error("cell is empty")]
    EmptyCell,

    #[error("atom index {0} out of range")]
    AtomOutOfRange(usize),

    #[error("p-th mean solver did not converge (certificate {})", .0.eps_certificate)]
    NonConvergence(Box<PMeanResult>),

    #[error("centers {0} and {1} coincide")]
    DuplicateCenters(usize, usize),

    #[error("no centers given")]
    NoCenters,

    #[error("atom {0} in the reassignment zone is not on the boundary of the first cell")]
    NotTied(usize),

    #[error("every cell is constant on its atoms; no split improves the cost")]
    NoSplit,

    #[error("oracle instance too large: {assignments} assignments exceed the limit {limit}")]
    TooLarge { assignments: u128, limit: u128 },

    #[error("search box does not contain the coercivity ball of radius {radius}")]
    BoxTooSmall { radius: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
