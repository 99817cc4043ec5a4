use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown family `{name}`; available families: {}", available.join(", "))]
    UnknownFamily { name: String, available: Vec<String> },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid [{a}, {b}] is not strictly inside the domain of `{family}` ({domain})")]
    OutsideDomain {
        family: String,
        domain: String,
        a: f64,
        b: f64,
    },

    #[error("grid functions live on different grids")]
    MismatchedGrids,

    #[error("{what} must be positive on the interior, found {value} at x = {x}")]
    NonPositive { what: &'static str, x: f64, value: f64 },

    #[error("parameter error: {0}")]
    InvalidParameter(String),

    #[error("weight exponent {exponent} at x = {x} exceeds the overflow bound {bound}")]
    WeightOverflow { x: f64, exponent: f64, bound: f64 },

    #[error("requested {requested} levels but the grid supports at most {capacity}")]
    CapacityExceeded { requested: usize, capacity: usize },

    #[error("eigenindex {index} is out of range (available: {available})")]
    EigenindexOutOfRange { index: usize, available: usize },

    #[error("level {level} leaks through the {side} boundary (|psi| ratio {ratio:e})")]
    BoundaryLeakage {
        level: usize,
        side: &'static str,
        ratio: f64,
    },

    #[error("parameter step mismatch: F was built with alpha = {built}, but lambda - mu = {requested}")]
    AlphaMismatch { built: f64, requested: f64 },

    #[error("constant mismatch between constructions: {0}")]
    ConstantMismatch(String),

    #[error("integration blew up; last valid x = {last_x}")]
    IntegrationBlowUp { last_x: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
