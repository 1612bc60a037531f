use thiserror::Error;

/// Errors raised by the market model, information measures, solvers and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid payoff matrix: {0}")]
    InvalidPayoff(String),

    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    #[error("invalid covering set: {0}")]
    InvalidCovering(String),

    #[error("invalid portfolio: {0}")]
    InvalidPortfolio(String),

    #[error("wealth {wealth} in state {state} is not strictly positive")]
    NonPositiveWealth { state: usize, wealth: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("gradient has non-finite entries")]
    NonFiniteGradient,

    #[error("objective is not finite at the current point")]
    NonFiniteObjective,

    #[error("distributions have disjoint supports")]
    DisjointSupports,

    #[error("grid search limited to m <= {cap}, got m = {m}")]
    DimensionCap { m: usize, cap: usize },

    #[error("grid has {points} lattice points, above the limit of {limit}")]
    GridTooLarge { points: u128, limit: u128 },

    #[error("optimum lies on the simplex boundary (min weight {min_weight:e})")]
    BoundaryOptimum { min_weight: f64 },

    #[error("inner solve failed: {0}")]
    InnerSolveFailed(String),

    #[error("malformed instance file: {0}")]
    Parse(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
