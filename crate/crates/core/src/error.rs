use thiserror::Error;

/// Errors raised by the numerical engines and samplers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid triplet: {field}: {reason}")]
    InvalidTriplet { field: String, reason: String },

    #[error("triplet document parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("type point {0} is not in the type space of this triplet")]
    InvalidType(String),

    #[error("test function {0} cannot be evaluated on this type space")]
    UnsupportedTestFn(String),

    #[error("quadrature did not converge: estimate {estimate}, achieved error {error_estimate:e}")]
    Quadrature { estimate: f64, error_estimate: f64 },

    #[error("series truncation failed after {terms} terms: partial sum {partial_sum}, remainder bound {bound:e}")]
    SeriesTruncation {
        terms: usize,
        partial_sum: f64,
        bound: f64,
    },

    #[error("series diverges at s = {s} (outside the region of convergence)")]
    Divergent { s: f64 },

    #[error("root bracketing failed after {iterations} iterations; last bracket [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64, iterations: usize },

    #[error("regime mismatch: expected {expected}, got {actual}")]
    RegimeMismatch { expected: String, actual: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("insufficient sample: {got} observations, need at least {need}")]
    InsufficientSample { got: usize, need: usize },

    #[error("population cap of {cap} particles exceeded at generation {generation}")]
    PopulationCap { cap: usize, generation: usize },

    #[error("step cap of {cap} exceeded")]
    StepCap { cap: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
