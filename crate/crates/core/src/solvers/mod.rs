//! Iterative CRRA portfolio solvers.
//!
//! * Info-Proj EG alternates the closed-form auxiliary law with one accepted
//!   EG/Armijo step on the fixed-law logarithmic loss.
//! * Naive EG runs EG/Armijo directly on the CRRA-equivalent loss.
//! * The multiplicative fixed point (`cover`) applies the multiplicative update induced by the
//!   first-order optimality condition.
//!
//! Every run records one row per first-order iteration in a [`RunTrace`].

mod diagnostics;
mod eg;
mod methods;
mod objectives;

use std::fmt;
use std::str::FromStr;

pub use diagnostics::{
    alternating_map, foc_certificate, foc_residual, jacobian_probe, FocCertificate, ProbeReport,
};
pub use eg::{armijo_search, eg_step, ArmijoOutcome, SimplexObjective};
pub use methods::{
    cover_update, run_cover_fixed_point, run_info_proj_eg, run_method, run_naive_eg,
};
pub use objectives::{
    auxiliary_law, info_proj_objective, naive_objective, CrraObjective, LogWealthObjective,
};

use crate::error::{Error, Result};
use crate::market::Portfolio;
use crate::measures::RiskProfile;

/// Hyperparameters shared by the three methods.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub eta0: f64,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
    pub max_iters: usize,
    /// Stop once the CE growth rate moves by less than this between iterations.
    pub tol: f64,
    pub profile: RiskProfile,
    /// Optimal CE growth rate, when known; enables the error column.
    pub reference: Option<f64>,
    /// Stop once the error drops to this level (needs `reference`).
    pub error_target: Option<f64>,
}

impl SolverConfig {
    pub fn new(profile: RiskProfile) -> Self {
        Self {
            eta0: 1.0,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            max_backtracks: 50,
            max_iters: 1000,
            tol: 1e-12,
            profile,
            reference: None,
            error_target: None,
        }
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_reference(mut self, reference: f64, error_target: Option<f64>) -> Self {
        self.reference = Some(reference);
        self.error_target = error_target;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.eta0 > 0.0) || !self.eta0.is_finite() {
            return bad("eta0 must be positive");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c must lie in (0, 1)");
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad("backtrack_factor must lie in (0, 1)");
        }
        if self.max_backtracks == 0 {
            return bad("max_backtracks must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if !(self.tol >= 0.0) {
            return bad("tol must be nonnegative");
        }
        if self.error_target.is_some() && self.reference.is_none() {
            return bad("error_target requires a reference value");
        }
        Ok(())
    }
}

/// Solver selector, spelled as in the CSV `method` column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    InfoProjEg,
    NaiveEg,
    Cover,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::InfoProjEg, Method::NaiveEg, Method::Cover];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::InfoProjEg => "info_proj_eg",
            Method::NaiveEg => "naive_eg",
            Method::Cover => "cover",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "info_proj_eg" => Ok(Method::InfoProjEg),
            "naive_eg" => Ok(Method::NaiveEg),
            "cover" => Ok(Method::Cover),
            other => Err(Error::InvalidParameter(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    MaxIters,
    Stalled,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxIters => "max_iters",
            RunStatus::Stalled => "stalled",
        }
    }
}

/// Sufficient-decrease quantities of an accepted Armijo step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmijoRecord {
    /// Surrogate change `F(b⁺) − F(b)`.
    pub change: f64,
    /// `⟨∇F(b), b⁺ − b⟩`.
    pub directional: f64,
    pub armijo_c: f64,
}

impl ArmijoRecord {
    pub fn holds(&self) -> bool {
        self.change <= self.armijo_c * self.directional
    }
}

/// One accepted first-order iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based count of accepted first-order iterations.
    pub iter: usize,
    pub portfolio: Portfolio,
    /// CE growth rate at `portfolio`.
    pub objective: f64,
    /// Reference value minus `objective`, when a reference is configured.
    pub error: Option<f64>,
    /// Accepted EG stepsize; 1 for the multiplicative fixed-point update.
    pub accepted_eta: f64,
    /// `None` for the fixed-point update, which has no line search.
    pub armijo: Option<ArmijoRecord>,
    /// Nanoseconds since the run started.
    pub wall_ns: u128,
}

/// Convergence record of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub method: Method,
    pub rho: f64,
    pub initial: Portfolio,
    pub initial_objective: f64,
    pub records: Vec<IterationRecord>,
    pub status: RunStatus,
}

impl RunTrace {
    /// Last iterate, or the starting point for an empty trace.
    pub fn final_portfolio(&self) -> &Portfolio {
        self.records.last().map_or(&self.initial, |r| &r.portfolio)
    }

    pub fn final_objective(&self) -> f64 {
        self.records
            .last()
            .map_or(self.initial_objective, |r| r.objective)
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    /// Accepted iterations needed to bring the error to `target`; `Some(0)`
    /// when the starting point already qualifies and `None` if never reached.
    pub fn iterations_to_target(&self, reference: f64, target: f64) -> Option<usize> {
        if reference - self.initial_objective <= target {
            return Some(0);
        }
        self.records
            .iter()
            .find(|r| reference - r.objective <= target)
            .map(|r| r.iter)
    }
}
