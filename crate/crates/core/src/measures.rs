//! Information measures and CRRA quantities.
//!
//! All logarithms are natural. Divergences return `f64::INFINITY` when the
//! support condition of the requested order fails instead of raising an error.

use crate::error::{Error, Result};
use crate::market::{
    induced_measure, partition_function, tilt_measure, MarketInstance, Portfolio, ProbabilityVector,
};
use crate::numeric::pow_nonneg;

/// Orders within this distance of one use the logarithmic / KL branch.
pub const RHO_ONE_EPSILON: f64 = 1e-9;

/// Relative risk aversion of a CRRA investor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskProfile {
    rho: f64,
    is_log: bool,
}

impl RiskProfile {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "risk aversion must be positive and finite, got {rho}"
            )));
        }
        Ok(Self {
            rho,
            is_log: (rho - 1.0).abs() < RHO_ONE_EPSILON,
        })
    }

    pub fn log() -> Self {
        Self {
            rho: 1.0,
            is_log: true,
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn is_log(&self) -> bool {
        self.is_log
    }

    /// Effective Rényi order: exactly 1 on the logarithmic branch.
    pub fn order(&self) -> f64 {
        if self.is_log {
            1.0
        } else {
            self.rho
        }
    }
}

fn check_wealth_arg(w: f64) -> Result<()> {
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "wealth must be positive, got {w}"
        )));
    }
    Ok(())
}

fn check_order(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "order must be positive, got {alpha}"
        )));
    }
    Ok(())
}

fn check_alphabet(p: &ProbabilityVector, q: &ProbabilityVector) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    Ok(())
}

/// `w^{1−ρ}/(1−ρ)`, or `log w` on the logarithmic branch.
pub fn crra_utility(w: f64, profile: &RiskProfile) -> Result<f64> {
    check_wealth_arg(w)?;
    Ok(utility_unchecked(w, profile))
}

fn utility_unchecked(w: f64, profile: &RiskProfile) -> f64 {
    if profile.is_log {
        w.ln()
    } else {
        let e = 1.0 - profile.rho;
        pow_nonneg(w, e) / e
    }
}

/// Absolute and relative risk aversion `(ρ/w, ρ)`.
pub fn risk_coefficients(w: f64, profile: &RiskProfile) -> Result<(f64, f64)> {
    check_wealth_arg(w)?;
    let absolute = profile.rho / w;
    Ok((absolute, w * absolute))
}

/// `Σ p log(p/q)` with `0·log(0/·) = 0`.
pub fn kl_divergence(p: &ProbabilityVector, q: &ProbabilityVector) -> Result<f64> {
    check_alphabet(p, q)?;
    let mut total = 0.0;
    for (&pi, &qi) in p.as_slice().iter().zip(q.as_slice()) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += pi * (pi / qi).ln();
    }
    Ok(total)
}

/// Rényi divergence `D_α(p‖q)`; KL within [`RHO_ONE_EPSILON`] of `α = 1`.
pub fn renyi_divergence(p: &ProbabilityVector, q: &ProbabilityVector, alpha: f64) -> Result<f64> {
    check_order(alpha)?;
    check_alphabet(p, q)?;
    if (alpha - 1.0).abs() < RHO_ONE_EPSILON {
        return kl_divergence(p, q);
    }
    let mut sum = 0.0;
    for (&pi, &qi) in p.as_slice().iter().zip(q.as_slice()) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            if alpha > 1.0 {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        sum += pow_nonneg(pi, alpha) * pow_nonneg(qi, 1.0 - alpha);
    }
    if sum == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(sum.ln() / (alpha - 1.0))
}

/// Rényi entropy `H_α(p)`; Shannon entropy within [`RHO_ONE_EPSILON`] of one.
pub fn renyi_entropy(p: &ProbabilityVector, alpha: f64) -> Result<f64> {
    check_order(alpha)?;
    if (alpha - 1.0).abs() < RHO_ONE_EPSILON {
        return Ok(-p
            .as_slice()
            .iter()
            .filter(|v| **v > 0.0)
            .map(|v| v * v.ln())
            .sum::<f64>());
    }
    let sum: f64 = p.as_slice().iter().map(|&v| pow_nonneg(v, alpha)).sum();
    Ok(sum.ln() / (1.0 - alpha))
}

/// Certainty-equivalent growth rate `G_ρ(W)` under the market law.
pub fn ce_growth_rate(
    instance: &MarketInstance,
    b: &Portfolio,
    profile: &RiskProfile,
) -> Result<f64> {
    let q = instance.wealth(b)?;
    Ok(growth_from_wealth(instance, &q, profile))
}

pub(crate) fn growth_from_wealth(
    instance: &MarketInstance,
    q: &[f64],
    profile: &RiskProfile,
) -> f64 {
    let p = instance.probs();
    let support = instance.law().support();
    if profile.is_log {
        support.iter().map(|&j| p[j] * q[j].ln()).sum()
    } else {
        let e = 1.0 - profile.rho;
        let moment: f64 = support.iter().map(|&j| p[j] * pow_nonneg(q[j], e)).sum();
        moment.ln() / e
    }
}

/// Certainty-equivalent wealth `exp(G_ρ(W))`.
pub fn ce_wealth(instance: &MarketInstance, b: &Portfolio, profile: &RiskProfile) -> Result<f64> {
    Ok(ce_growth_rate(instance, b, profile)?.exp())
}

/// `E_p[u(⟨b, X⟩)]`.
pub fn expected_utility(
    instance: &MarketInstance,
    b: &Portfolio,
    profile: &RiskProfile,
) -> Result<f64> {
    let q = instance.wealth(b)?;
    let p = instance.probs();
    Ok(instance
        .law()
        .support()
        .iter()
        .map(|&j| p[j] * utility_unchecked(q[j], profile))
        .sum())
}

/// The three terms of the CE growth decomposition on the covering set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CeDecomposition {
    /// `D_ρ(p̃‖q̄_b)`, entering the total with a minus sign.
    pub divergence_term: f64,
    /// `H_ρ(p̃)`.
    pub entropy_term: f64,
    /// `log Z_q`.
    pub log_partition: f64,
    /// `−divergence_term − entropy_term + log_partition`.
    pub total: f64,
}

/// Risk-tilted law `p̃ = tilt(p, 1/ρ)` on the covering.
pub fn risk_tilted_law(
    instance: &MarketInstance,
    profile: &RiskProfile,
) -> Result<ProbabilityVector> {
    tilt_measure(instance.extended_law(), 1.0 / profile.order())
}

/// Splits `G_ρ(W)` into a divergence, an entropy and a log-partition term.
pub fn decompose_ce(
    instance: &MarketInstance,
    b: &Portfolio,
    profile: &RiskProfile,
) -> Result<CeDecomposition> {
    instance.wealth(b)?;
    let order = profile.order();
    let tilted = risk_tilted_law(instance, profile)?;
    let induced = induced_measure(instance.covering(), b)?;
    let divergence_term = renyi_divergence(&tilted, &induced, order)?;
    let entropy_term = renyi_entropy(&tilted, order)?;
    let log_partition = partition_function(instance.covering(), b).ln();
    Ok(CeDecomposition {
        divergence_term,
        entropy_term,
        log_partition,
        total: -divergence_term - entropy_term + log_partition,
    })
}

/// Portfolio-free upper bound on `E_p[u(W)]`.
pub fn utility_upper_bound(instance: &MarketInstance, profile: &RiskProfile) -> Result<f64> {
    let tilted = risk_tilted_law(instance, profile)?;
    let entropy = renyi_entropy(&tilted, profile.order())?;
    let uniform = Portfolio::uniform(instance.m())?;
    let log_partition = partition_function(instance.covering(), &uniform).ln();
    if profile.is_log {
        Ok(-entropy + log_partition)
    } else {
        let e = 1.0 - profile.rho;
        Ok((e * (-entropy + log_partition)).exp() / e)
    }
}

/// `α·KL(r‖p) + (1−α)·KL(r‖q)`.
pub fn variational_objective(
    r: &ProbabilityVector,
    p: &ProbabilityVector,
    q: &ProbabilityVector,
    alpha: f64,
) -> Result<f64> {
    Ok(alpha * kl_divergence(r, p)? + (1.0 - alpha) * kl_divergence(r, q)?)
}

/// Minimizer `r* ∝ p̃^ρ q̄^{1−ρ}` of the variational objective.
pub fn variational_minimizer(
    p_tilde: &ProbabilityVector,
    q_bar: &ProbabilityVector,
    profile: &RiskProfile,
) -> Result<ProbabilityVector> {
    if profile.is_log {
        return Err(Error::InvalidParameter(
            "variational minimizer is defined for rho != 1".into(),
        ));
    }
    check_alphabet(p_tilde, q_bar)?;
    let rho = profile.rho;
    let masses: Vec<f64> = p_tilde
        .as_slice()
        .iter()
        .zip(q_bar.as_slice())
        .map(|(&p, &q)| pow_nonneg(p, rho) * pow_nonneg(q, 1.0 - rho))
        .collect();
    if masses.iter().all(|v| *v == 0.0) {
        return Err(Error::DisjointSupports);
    }
    ProbabilityVector::from_masses(masses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::PayoffMatrix;

    fn pv(v: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new(v.to_vec()).unwrap()
    }

    fn rho(r: f64) -> RiskProfile {
        RiskProfile::new(r).unwrap()
    }

    fn two_state(wealth: [f64; 2]) -> MarketInstance {
        // single asset, so b = (1) and the wealth is the payoff itself
        let payoff = PayoffMatrix::from_rows(&[vec![wealth[0]], vec![wealth[1]]]).unwrap();
        MarketInstance::new(payoff, pv(&[0.5, 0.5])).unwrap()
    }

    #[test]
    fn utility_examples() {
        assert!((crra_utility(1.0, &rho(3.0)).unwrap() - (-0.5)).abs() < 1e-15);
        assert!((crra_utility(1.0, &rho(0.25)).unwrap() - 1.0 / 0.75).abs() < 1e-15);
        assert!((crra_utility(std::f64::consts::E, &rho(1.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!((crra_utility(4.0, &rho(0.5)).unwrap() - 4.0).abs() < 1e-14);
        assert!(crra_utility(0.0, &rho(0.5)).is_err());
        assert!(crra_utility(-1.0, &rho(1.0)).is_err());
    }

    #[test]
    fn risk_coefficient_examples() {
        assert_eq!(risk_coefficients(1.0, &rho(2.0)).unwrap(), (2.0, 2.0));
        assert_eq!(risk_coefficients(4.0, &rho(2.0)).unwrap(), (0.5, 2.0));
        let (a, r) = risk_coefficients(10.0, &rho(1.0)).unwrap();
        assert!((a - 0.1).abs() < 1e-15 && (r - 1.0).abs() < 1e-15);
        assert!(risk_coefficients(0.0, &rho(1.0)).is_err());
    }

    #[test]
    fn risk_profile_branches() {
        assert!(rho(1.0 + 5e-10).is_log());
        assert!(!rho(1.0 + 2e-9).is_log());
        assert!(RiskProfile::new(0.0).is_err());
        assert!(RiskProfile::new(f64::NAN).is_err());
    }

    #[test]
    fn kl_examples() {
        let p = pv(&[0.3, 0.7]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let d = kl_divergence(&pv(&[1.0, 0.0]), &pv(&[0.5, 0.5])).unwrap();
        assert!((d - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(
            kl_divergence(&pv(&[0.5, 0.5]), &pv(&[1.0, 0.0])).unwrap(),
            f64::INFINITY
        );
        assert!(kl_divergence(&pv(&[1.0]), &pv(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn renyi_divergence_examples() {
        let p = pv(&[0.2, 0.3, 0.5]);
        for a in [0.3, 0.5, 1.0, 2.0, 7.0] {
            assert!(renyi_divergence(&p, &p, a).unwrap().abs() < 1e-15);
        }
        let d = renyi_divergence(&pv(&[1.0, 0.0]), &pv(&[0.5, 0.5]), 0.5).unwrap();
        assert!((d - std::f64::consts::LN_2).abs() < 1e-14);

        // partial overlap is finite below order one and infinite above
        let a = pv(&[0.5, 0.5]);
        let b = pv(&[1.0, 0.0]);
        assert!(renyi_divergence(&a, &b, 0.5).unwrap().is_finite());
        assert_eq!(renyi_divergence(&a, &b, 2.0).unwrap(), f64::INFINITY);
        // disjoint supports are infinite at every order
        assert_eq!(
            renyi_divergence(&pv(&[0.0, 1.0]), &pv(&[1.0, 0.0]), 0.5).unwrap(),
            f64::INFINITY
        );
        assert!(renyi_divergence(&a, &a, 0.0).is_err());
        assert!(renyi_divergence(&a, &pv(&[1.0]), 0.5).is_err());
    }

    #[test]
    fn renyi_divergence_is_continuous_at_one() {
        let p = pv(&[0.1, 0.25, 0.3, 0.35]);
        let q = pv(&[0.4, 0.2, 0.15, 0.25]);
        let kl = kl_divergence(&p, &q).unwrap();
        for a in [1.0 - 1e-8, 1.0 + 1e-8] {
            assert!((renyi_divergence(&p, &q, a).unwrap() - kl).abs() <= 1e-6);
        }
    }

    #[test]
    fn renyi_entropy_examples() {
        let u = ProbabilityVector::uniform(6).unwrap();
        for a in [0.2, 1.0, 2.5] {
            assert!((renyi_entropy(&u, a).unwrap() - 6f64.ln()).abs() < 1e-14);
        }
        let point = pv(&[0.0, 1.0, 0.0]);
        for a in [0.2, 1.0, 2.5] {
            assert!(renyi_entropy(&point, a).unwrap().abs() < 1e-15);
        }
        let h = renyi_entropy(&pv(&[0.5, 0.25, 0.25]), 2.0).unwrap();
        assert!((h - (-(0.375f64).ln())).abs() < 1e-15);
        assert!((h - 0.980829).abs() < 1e-6);
    }

    #[test]
    fn growth_rate_examples() {
        let det = MarketInstance::new(
            PayoffMatrix::from_rows(&[vec![1.2, 0.8]]).unwrap(),
            pv(&[1.0]),
        )
        .unwrap();
        let b = Portfolio::new(vec![0.25, 0.75]).unwrap();
        for r in [0.3, 1.0, 1.7] {
            let g = ce_growth_rate(&det, &b, &rho(r)).unwrap();
            assert!((g - 0.9f64.ln()).abs() < 1e-14);
            assert!((ce_wealth(&det, &b, &rho(r)).unwrap() - 0.9).abs() < 1e-14);
        }

        let sym = two_state([2.0, 0.5]);
        let one = Portfolio::uniform(1).unwrap();
        assert!(ce_growth_rate(&sym, &one, &rho(1.0)).unwrap().abs() < 1e-15);
        assert!((ce_wealth(&sym, &one, &rho(1.0)).unwrap() - 1.0).abs() < 1e-15);
        let g = ce_growth_rate(&sym, &one, &rho(0.5)).unwrap();
        let expected = 2.0 * (0.5 * (2f64.sqrt() + 0.5f64.sqrt())).ln();
        assert!((g - expected).abs() < 1e-14);
        assert!((g - 0.117783).abs() < 1e-6);
        assert!((ce_wealth(&sym, &one, &rho(0.5)).unwrap() - 1.125).abs() < 1e-12);
    }

    #[test]
    fn ce_wealth_inverts_expected_utility() {
        let inst = two_state([2.0, 0.5]);
        let b = Portfolio::uniform(1).unwrap();
        for r in [0.25, 0.5, 1.0, 1.5, 3.0] {
            let profile = rho(r);
            let w = ce_wealth(&inst, &b, &profile).unwrap();
            let eu = expected_utility(&inst, &b, &profile).unwrap();
            let u = crra_utility(w, &profile).unwrap();
            assert!((u - eu).abs() <= 1e-9 * eu.abs().max(1.0));
        }
    }

    #[test]
    fn log_decomposition_uses_kl_and_shannon() {
        let payoff =
            PayoffMatrix::from_rows(&[vec![1.5, 0.5], vec![0.6, 1.1], vec![0.9, 1.3]]).unwrap();
        let inst = MarketInstance::new(payoff, pv(&[0.2, 0.5, 0.3])).unwrap();
        let b = Portfolio::new(vec![0.4, 0.6]).unwrap();
        let d = decompose_ce(&inst, &b, &rho(1.0)).unwrap();
        let q = induced_measure(inst.covering(), &b).unwrap();
        let kl = kl_divergence(inst.extended_law(), &q).unwrap();
        let h = renyi_entropy(inst.extended_law(), 1.0).unwrap();
        assert_eq!(d.divergence_term, kl);
        assert_eq!(d.entropy_term, h);
        assert!((d.total - ce_growth_rate(&inst, &b, &rho(1.0)).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn bound_is_tight_for_basis_covering() {
        use crate::market::SymmetricCovering;
        // identity payoff on the standard-basis covering: q̄_b = b, so b = p̃ closes the gap
        let p = pv(&[0.5, 0.3, 0.2]);
        let payoff = PayoffMatrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let covering = SymmetricCovering::from_points(payoff.to_rows(), vec![0, 1, 2]).unwrap();
        let inst = MarketInstance::with_covering(payoff, p.clone(), covering).unwrap();
        for r in [0.5, 1.0, 1.5, 1.9] {
            let profile = rho(r);
            let tilted = risk_tilted_law(&inst, &profile).unwrap();
            let b = Portfolio::new(tilted.into_inner()).unwrap();
            let eu = expected_utility(&inst, &b, &profile).unwrap();
            let bound = utility_upper_bound(&inst, &profile).unwrap();
            assert!((bound - eu).abs() <= 1e-9, "rho {r}: bound {bound} eu {eu}");
        }
    }

    #[test]
    fn minimizer_examples() {
        let p = pv(&[0.2, 0.3, 0.5]);
        let r = variational_minimizer(&p, &p, &rho(0.5)).unwrap();
        for (a, b) in r.as_slice().iter().zip(p.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(variational_minimizer(&p, &p, &rho(1.0)).is_err());
        assert!(matches!(
            variational_minimizer(&pv(&[1.0, 0.0]), &pv(&[0.0, 1.0]), &rho(0.5)),
            Err(Error::DisjointSupports)
        ));
    }
}
