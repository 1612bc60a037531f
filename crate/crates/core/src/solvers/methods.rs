use std::time::Instant;

use crate::error::{Error, Result};
use crate::market::{MarketInstance, Portfolio};
use crate::measures::{growth_from_wealth, RiskProfile};
use crate::numeric::pow_nonneg;
use crate::solvers::eg::armijo_search;
use crate::solvers::objectives::{auxiliary_from_wealth, CrraObjective, LogWealthObjective};
use crate::solvers::{ArmijoRecord, IterationRecord, Method, RunStatus, RunTrace, SolverConfig};

/// Outcome of one first-order iteration of any method.
struct Step {
    next: Portfolio,
    accepted: bool,
    eta: f64,
    armijo: Option<ArmijoRecord>,
}

fn require_positive(b0: &Portfolio) -> Result<()> {
    if b0.weights().iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidPortfolio(
            "starting portfolio must have strictly positive weights".into(),
        ));
    }
    Ok(())
}

fn drive(
    instance: &MarketInstance,
    b0: &Portfolio,
    config: &SolverConfig,
    method: Method,
    mut step: impl FnMut(&Portfolio, &[f64]) -> Result<Step>,
) -> Result<RunTrace> {
    config.validate()?;
    require_positive(b0)?;
    let profile = config.profile;
    let start = Instant::now();

    let mut b = b0.clone();
    let mut q = instance.wealth(&b)?;
    let initial_objective = growth_from_wealth(instance, &q, &profile);
    let mut objective = initial_objective;
    let mut records = Vec::new();
    let mut status = RunStatus::MaxIters;

    for iter in 1..=config.max_iters {
        let Step {
            next,
            accepted,
            eta,
            armijo,
        } = step(&b, &q)?;
        if !accepted {
            status = RunStatus::Stalled;
            break;
        }
        q = instance.wealth(&next)?;
        let value = growth_from_wealth(instance, &q, &profile);
        if !value.is_finite() {
            return Err(Error::NonFiniteObjective);
        }
        let error = config.reference.map(|r| r - value);
        records.push(IterationRecord {
            iter,
            portfolio: next.clone(),
            objective: value,
            error,
            accepted_eta: eta,
            armijo,
            wall_ns: start.elapsed().as_nanos(),
        });
        let improvement = (value - objective).abs();
        b = next;
        objective = value;
        if improvement < config.tol {
            status = RunStatus::Converged;
            break;
        }
        if let (Some(err), Some(target)) = (error, config.error_target) {
            if err <= target {
                status = RunStatus::Converged;
                break;
            }
        }
    }

    Ok(RunTrace {
        method,
        rho: profile.rho(),
        initial: b0.clone(),
        initial_objective,
        records,
        status,
    })
}

fn armijo_step(
    objective: &dyn crate::solvers::SimplexObjective,
    b: &Portfolio,
    config: &SolverConfig,
) -> Result<Step> {
    let out = armijo_search(objective, b, config)?;
    Ok(Step {
        accepted: out.accepted,
        eta: out.eta,
        armijo: out.accepted.then_some(ArmijoRecord {
            change: out.change,
            directional: out.directional,
            armijo_c: config.armijo_c,
        }),
        next: out.next,
    })
}

/// Info-Proj EG: refresh the auxiliary law, then take one accepted EG/Armijo
/// step on the fixed-law logarithmic loss.
pub fn run_info_proj_eg(
    instance: &MarketInstance,
    b0: &Portfolio,
    config: &SolverConfig,
) -> Result<RunTrace> {
    let profile = config.profile;
    drive(instance, b0, config, Method::InfoProjEg, |b, q| {
        let r = auxiliary_from_wealth(instance, q, &profile);
        let objective = LogWealthObjective::new(instance.payoff(), r.as_slice())?;
        armijo_step(&objective, b, config)
    })
}

/// Naive EG: EG/Armijo on the CRRA-equivalent loss.
pub fn run_naive_eg(
    instance: &MarketInstance,
    b0: &Portfolio,
    config: &SolverConfig,
) -> Result<RunTrace> {
    let objective = CrraObjective::new(instance, config.profile);
    drive(instance, b0, config, Method::NaiveEg, |b, _| {
        armijo_step(&objective, b, config)
    })
}

/// Multiplicative update
/// `b_i ← b_i Σ_j p_j X_ji q_j^{−ρ} / Σ_j p_j q_j^{1−ρ}`.
pub fn cover_update(
    instance: &MarketInstance,
    b: &Portfolio,
    profile: &RiskProfile,
) -> Result<Portfolio> {
    let q = instance.wealth(b)?;
    Portfolio::new(cover_from_wealth(instance, b, &q, profile))
}

fn cover_from_wealth(
    instance: &MarketInstance,
    b: &Portfolio,
    q: &[f64],
    profile: &RiskProfile,
) -> Vec<f64> {
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
    let raw: Vec<f64> = b
        .weights()
        .iter()
        .zip(&numer)
        .map(|(w, n)| w * n / denom)
        .collect();
    // the ratio sums to one analytically; renormalize away the rounding
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Repeated first-order-condition fixed-point updates.
pub fn run_cover_fixed_point(
    instance: &MarketInstance,
    b0: &Portfolio,
    config: &SolverConfig,
) -> Result<RunTrace> {
    let profile = config.profile;
    drive(instance, b0, config, Method::Cover, |b, q| {
        Ok(Step {
            next: Portfolio::new(cover_from_wealth(instance, b, q, &profile))?,
            accepted: true,
            eta: 1.0,
            armijo: None,
        })
    })
}

pub fn run_method(
    method: Method,
    instance: &MarketInstance,
    b0: &Portfolio,
    config: &SolverConfig,
) -> Result<RunTrace> {
    match method {
        Method::InfoProjEg => run_info_proj_eg(instance, b0, config),
        Method::NaiveEg => run_naive_eg(instance, b0, config),
        Method::Cover => run_cover_fixed_point(instance, b0, config),
    }
}
