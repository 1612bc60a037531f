//! Exponentiated-gradient step and Armijo backtracking along the EG path.

use crate::error::{Error, Result};
use crate::market::{dot, Portfolio};
use crate::solvers::SolverConfig;

/// A differentiable objective on the simplex.
pub trait SimplexObjective {
    /// `(F(b), ∇F(b))`.
    fn value_and_gradient(&self, b: &[f64]) -> Result<(f64, Vec<f64>)>;

    /// `F(b + delta) − F(b)`.
    ///
    /// Implementations should evaluate the change without forming the
    /// difference of two nearly equal values, so that the sufficient-decrease
    /// test stays meaningful close to a minimizer.
    fn change(&self, b: &[f64], delta: &[f64]) -> Result<f64> {
        let moved: Vec<f64> = b.iter().zip(delta).map(|(x, d)| x + d).collect();
        Ok(self.value_and_gradient(&moved)?.0 - self.value_and_gradient(b)?.0)
    }
}

impl<F> SimplexObjective for F
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn value_and_gradient(&self, b: &[f64]) -> Result<(f64, Vec<f64>)> {
        self(b)
    }
}

/// EG candidate together with the displacement `next − b`.
#[derive(Debug, Clone)]
pub(crate) struct EgCandidate {
    pub next: Vec<f64>,
    pub delta: Vec<f64>,
}

pub(crate) fn eg_candidate(b: &[f64], gradient: &[f64], eta: f64) -> Result<EgCandidate> {
    if gradient.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            found: gradient.len(),
        });
    }
    if gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient);
    }
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "stepsize must be nonnegative, got {eta}"
        )));
    }
    if eta == 0.0 {
        return Ok(EgCandidate {
            next: b.to_vec(),
            delta: vec![0.0; b.len()],
        });
    }

    // shift by the smallest active gradient so every exponent is ≤ 0
    let shift = b
        .iter()
        .zip(gradient)
        .filter(|(w, _)| **w > 0.0)
        .map(|(_, g)| *g)
        .fold(f64::INFINITY, f64::min);
    let exponents: Vec<f64> = gradient.iter().map(|g| -eta * (g - shift)).collect();

    let unnormalized: Vec<f64> = b.iter().zip(&exponents).map(|(w, a)| w * a.exp()).collect();
    let total: f64 = unnormalized.iter().sum();
    let next: Vec<f64> = unnormalized.iter().map(|v| v / total).collect();

    // next_i − b_i = b_i·expm1(a_i − log1p(Σ b_ℓ expm1(a_ℓ)))
    let excess: f64 = b.iter().zip(&exponents).map(|(w, a)| w * a.exp_m1()).sum();
    let log_norm = excess.ln_1p();
    let delta: Vec<f64> = b
        .iter()
        .zip(&exponents)
        .map(|(w, a)| w * (a - log_norm).exp_m1())
        .collect();
    Ok(EgCandidate { next, delta })
}

/// Multiplicative-weights step `b_i e^{−η g_i} / Σ_ℓ b_ℓ e^{−η g_ℓ}`.
pub fn eg_step(b: &Portfolio, gradient: &[f64], eta: f64) -> Result<Portfolio> {
    let candidate = eg_candidate(b.weights(), gradient, eta)?;
    Portfolio::new(candidate.next)
}

/// Result of one Armijo line search.
#[derive(Debug, Clone)]
pub struct ArmijoOutcome {
    /// Last stepsize tried; the accepted one when `accepted` is set.
    pub eta: f64,
    /// Accepted point, or the input point when the search failed.
    pub next: Portfolio,
    pub accepted: bool,
    /// `F(b)`.
    pub value: f64,
    /// `F(next) − F(b)` as evaluated for the acceptance test.
    pub change: f64,
    /// `⟨∇F(b), next − b⟩`.
    pub directional: f64,
    pub backtracks: usize,
}

impl ArmijoOutcome {
    /// Re-evaluates the sufficient-decrease inequality from the stored numbers.
    pub fn satisfies_armijo(&self, c: f64) -> bool {
        self.change <= c * self.directional
    }
}

/// Backtracking search along the EG path, starting at `config.eta0` and
/// shrinking by `config.backtrack_factor` until
/// `F(b⁺) ≤ F(b) + c·⟨∇F(b), b⁺ − b⟩`.
pub fn armijo_search<O>(
    objective: &O,
    b: &Portfolio,
    config: &SolverConfig,
) -> Result<ArmijoOutcome>
where
    O: SimplexObjective + ?Sized,
{
    let (value, gradient) = objective.value_and_gradient(b.weights())?;
    if !value.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let mut eta = config.eta0;
    let mut last = (f64::NAN, f64::NAN);
    for backtracks in 0..=config.max_backtracks {
        let candidate = eg_candidate(b.weights(), &gradient, eta)?;
        let directional = dot(&gradient, &candidate.delta);
        // a failing evaluation (wealth leaving the domain) counts as a rejection
        let change = objective
            .change(b.weights(), &candidate.delta)
            .unwrap_or(f64::INFINITY);
        last = (change, directional);
        if change.is_finite() && change <= config.armijo_c * directional {
            return Ok(ArmijoOutcome {
                eta,
                next: Portfolio::new(candidate.next)?,
                accepted: true,
                value,
                change,
                directional,
                backtracks,
            });
        }
        if backtracks < config.max_backtracks {
            eta *= config.backtrack_factor;
        }
    }
    Ok(ArmijoOutcome {
        eta,
        next: b.clone(),
        accepted: false,
        value,
        change: last.0,
        directional: last.1,
        backtracks: config.max_backtracks,
    })
}
