//! Optimality diagnostics: first-order-condition residuals and a numerical
//! probe of the local linear factor of the exact alternating map.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::market::{MarketInstance, Portfolio, ProbabilityVector};
use crate::measures::RiskProfile;
use crate::numeric::{max_abs_diff, norm2, pow_nonneg};
use crate::oracle::reference_optimum;
use crate::solvers::eg::{armijo_search, SimplexObjective};
use crate::solvers::objectives::{auxiliary_law, LogWealthObjective};
use crate::solvers::SolverConfig;

/// `E_p[⟨b,X⟩^{−ρ} X_i] / E_p[⟨b,X⟩^{1−ρ}]` for every asset.
///
/// This is also the gradient of the CE growth rate, and its `b`-weighted
/// mean is exactly one.
pub fn foc_residual(
    instance: &MarketInstance,
    b: &Portfolio,
    profile: &RiskProfile,
) -> Result<Vec<f64>> {
    let q = instance.wealth(b)?;
    let rho = profile.order();
    let p = instance.probs();
    let payoff = instance.payoff();
    let mut numer = vec![0.0; instance.m()];
    let mut denom = 0.0;
    for &j in instance.law().support() {
        let marginal = p[j] * pow_nonneg(q[j], -rho);
        denom += p[j] * pow_nonneg(q[j], 1.0 - rho);
        for (n, x) in numer.iter_mut().zip(payoff.row(j)) {
            *n += marginal * x;
        }
    }
    Ok(numer.into_iter().map(|n| n / denom).collect())
}

/// Summary of how far a portfolio is from the optimality conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocCertificate {
    /// `max |residual_i − 1|` over weights above the threshold.
    pub interior_deviation: f64,
    /// `max (residual_i − 1)` over weights at or below the threshold.
    pub boundary_excess: f64,
    /// `max_i residual_i − Σ b_i residual_i`; bounds the CE growth gap to the optimum.
    pub frank_wolfe_gap: f64,
    /// `Σ b_i max(0, 1 − residual_i)`, weight still held in assets that should be dropped.
    pub slack_mass: f64,
}

impl FocCertificate {
    pub fn holds(&self, tol: f64) -> bool {
        self.interior_deviation <= tol && self.boundary_excess <= tol
    }
}

pub fn foc_certificate(
    instance: &MarketInstance,
    b: &Portfolio,
    profile: &RiskProfile,
    threshold: f64,
) -> Result<FocCertificate> {
    let residual = foc_residual(instance, b, profile)?;
    let mut interior_deviation = 0.0f64;
    let mut boundary_excess = f64::NEG_INFINITY;
    let mut max_residual = f64::NEG_INFINITY;
    let mut mean = 0.0;
    let mut slack_mass = 0.0;
    for (&w, &r) in b.weights().iter().zip(&residual) {
        if w > threshold {
            interior_deviation = interior_deviation.max((r - 1.0).abs());
        } else {
            boundary_excess = boundary_excess.max(r - 1.0);
        }
        max_residual = max_residual.max(r);
        mean += w * r;
        slack_mass += w * (1.0 - r).max(0.0);
    }
    Ok(FocCertificate {
        interior_deviation,
        boundary_excess,
        frank_wolfe_gap: max_residual - mean,
        slack_mass,
    })
}

const INNER_TOL: f64 = 1e-12;
const INNER_MAX_ITERS: usize = 200_000;

/// Minimizes `f_r` over the simplex from `start` until every coordinate of
/// `−∇f_r` is within `INNER_TOL` of one (its `b`-weighted mean).
fn minimize_fixed_law(
    instance: &MarketInstance,
    r: &ProbabilityVector,
    start: &Portfolio,
) -> Result<Portfolio> {
    let objective = LogWealthObjective::new(instance.payoff(), r.as_slice())?;
    let config = SolverConfig::new(RiskProfile::log());
    let stationarity = |b: &Portfolio| -> Result<f64> {
        let (_, g) = objective.value_and_gradient(b.weights())?;
        Ok(g.iter().map(|gi| (-gi - 1.0).abs()).fold(0.0, f64::max))
    };
    let mut b = start.clone();
    for _ in 0..INNER_MAX_ITERS {
        let gap = stationarity(&b)?;
        if gap <= INNER_TOL {
            return Ok(b);
        }
        let out = armijo_search(&objective, &b, &config)?;
        if !out.accepted {
            return Err(Error::InnerSolveFailed(format!(
                "line search stalled with stationarity gap {gap:e}"
            )));
        }
        b = out.next;
    }
    Err(Error::InnerSolveFailed(format!(
        "no convergence in {INNER_MAX_ITERS} iterations"
    )))
}

/// Exact alternating map `T(b) = argmin_u f_{r(b)}(u)`.
pub fn alternating_map(
    instance: &MarketInstance,
    b: &Portfolio,
    profile: &RiskProfile,
) -> Result<Portfolio> {
    let r = auxiliary_law(instance, b, profile)?;
    minimize_fixed_law(instance, &r, b)
}

/// Empirical local linear factor of the alternating map.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    /// Mean of `ratios`.
    pub factor: f64,
    /// `‖T(b*+δ) − T(b*)‖ / ‖δ‖` for each perturbation.
    pub ratios: Vec<f64>,
    pub fixed_point: Portfolio,
}

const PROBE_DIRECTIONS: usize = 8;
const PROBE_SEED: u64 = 0x5eed_cafe;
const REFINE_STEPS: usize = 500;

/// Estimates the local factor of `T` at the interior optimum by random
/// tangent perturbations of norm `probe_radius`. Expected to be `|1 − ρ|`.
pub fn jacobian_probe(
    instance: &MarketInstance,
    profile: &RiskProfile,
    probe_radius: f64,
) -> Result<ProbeReport> {
    if !(profile.rho() > 0.0 && profile.rho() < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "probe supports rho in (0, 2), got {}",
            profile.rho()
        )));
    }
    if !(probe_radius > 0.0) || !probe_radius.is_finite() {
        return Err(Error::InvalidParameter(
            "probe radius must be positive".into(),
        ));
    }
    let threshold = (100.0 * probe_radius).max(1e-3);

    let reference = reference_optimum(instance, profile, 1e-11)?;
    let min_weight = reference.portfolio.min_weight();
    if min_weight <= threshold {
        return Err(Error::BoundaryOptimum { min_weight });
    }

    // settle onto the fixed point of T itself
    let mut fixed = reference.portfolio;
    for _ in 0..REFINE_STEPS {
        let next = alternating_map(instance, &fixed, profile)?;
        let moved = max_abs_diff(next.weights(), fixed.weights());
        fixed = next;
        if moved < 1e-14 {
            break;
        }
    }
    let image = alternating_map(instance, &fixed, profile)?;

    let m = instance.m();
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    let mut ratios = Vec::with_capacity(PROBE_DIRECTIONS);
    for _ in 0..PROBE_DIRECTIONS {
        let mut v: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mean = v.iter().sum::<f64>() / m as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        let scale = probe_radius / norm2(&v);
        v.iter_mut().for_each(|x| *x *= scale);
        let perturbed: Vec<f64> = fixed.weights().iter().zip(&v).map(|(w, d)| w + d).collect();
        let perturbed = Portfolio::new(perturbed)?;
        let mapped = alternating_map(instance, &perturbed, profile)?;
        let shift: Vec<f64> = mapped
            .weights()
            .iter()
            .zip(image.weights())
            .map(|(a, b)| a - b)
            .collect();
        ratios.push(norm2(&shift) / norm2(&v));
    }
    let factor = ratios.iter().sum::<f64>() / ratios.len() as f64;
    Ok(ProbeReport {
        factor,
        ratios,
        fixed_point: fixed,
    })
}
