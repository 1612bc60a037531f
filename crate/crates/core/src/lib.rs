//! CRRA portfolio selection through Rényi information projection.
//!
//! The certainty-equivalent growth rate of a CRRA investor splits, on a
//! symmetric covering of the payoff support, into a Rényi divergence between
//! the risk-tilted market law and the portfolio-induced wealth law, a Rényi
//! entropy and a portfolio-independent log-partition term. Maximizing expected
//! utility is therefore a Rényi projection whose order equals the investor's
//! relative risk aversion.
//!
//! * [`market`]: payoff matrix, market law, covering sets and induced measures.
//! * [`measures`]: divergences, entropies, CRRA utility and the decomposition.
//! * [`solvers`]: Info-Proj EG, Naive EG, the multiplicative fixed point and diagnostics.
//! * [`oracle`]: lattice search and certified reference optima.
//! * [`bench`]: seeded instances, the benchmark protocol and the identity battery.

pub mod bench;
pub mod error;
pub mod market;
pub mod measures;
mod numeric;
pub mod oracle;
pub mod solvers;

pub use error::{Error, Result};
pub use market::{MarketInstance, PayoffMatrix, Portfolio, ProbabilityVector, SymmetricCovering};
pub use measures::{CeDecomposition, RiskProfile};
pub use numeric::{max_abs_diff, norm2};
