//! Portfolio objectives: the fixed-law logarithmic loss used by the projection
//! method, the CRRA-equivalent loss used by the direct method, and the
//! closed-form auxiliary law that links them.

use crate::error::{Error, Result};
use crate::market::{MarketInstance, PayoffMatrix, Portfolio, ProbabilityVector};
use crate::measures::RiskProfile;
use crate::numeric::pow_nonneg;
use crate::solvers::eg::SimplexObjective;

/// `−Σ_j w_j log q_j(b)` for fixed state weights `w`.
#[derive(Debug, Clone, Copy)]
pub struct LogWealthObjective<'a> {
    payoff: &'a PayoffMatrix,
    weights: &'a [f64],
}

impl<'a> LogWealthObjective<'a> {
    pub fn new(payoff: &'a PayoffMatrix, weights: &'a [f64]) -> Result<Self> {
        if weights.len() != payoff.k() {
            return Err(Error::DimensionMismatch {
                expected: payoff.k(),
                found: weights.len(),
            });
        }
        Ok(Self { payoff, weights })
    }

    fn wealth(&self, b: &[f64]) -> Result<Vec<f64>> {
        let q = self.payoff.apply(b);
        for (j, (&w, &qj)) in self.weights.iter().zip(&q).enumerate() {
            if w > 0.0 && !(qj > 0.0) {
                return Err(Error::NonPositiveWealth {
                    state: j,
                    wealth: qj,
                });
            }
        }
        Ok(q)
    }
}

impl SimplexObjective for LogWealthObjective<'_> {
    fn value_and_gradient(&self, b: &[f64]) -> Result<(f64, Vec<f64>)> {
        let q = self.wealth(b)?;
        let mut value = 0.0;
        let mut gradient = vec![0.0; b.len()];
        for (j, (&w, &qj)) in self.weights.iter().zip(&q).enumerate() {
            if w == 0.0 {
                continue;
            }
            value -= w * qj.ln();
            let scale = w / qj;
            for (g, x) in gradient.iter_mut().zip(self.payoff.row(j)) {
                *g -= scale * x;
            }
        }
        Ok((value, gradient))
    }

    fn change(&self, b: &[f64], delta: &[f64]) -> Result<f64> {
        let q = self.wealth(b)?;
        let dq = self.payoff.apply(delta);
        let mut total = 0.0;
        for ((&w, &qj), &dqj) in self.weights.iter().zip(&q).zip(&dq) {
            if w == 0.0 {
                continue;
            }
            let ratio = dqj / qj;
            if !(ratio > -1.0) {
                return Ok(f64::INFINITY);
            }
            total -= w * ratio.ln_1p();
        }
        Ok(total)
    }
}

/// CRRA-equivalent loss: `∓Σ p_j q_j^{1−ρ}` off the log branch and
/// `−Σ p_j log q_j` on it. Minimizing it maximizes expected utility.
#[derive(Debug, Clone, Copy)]
pub struct CrraObjective<'a> {
    instance: &'a MarketInstance,
    profile: RiskProfile,
}

impl<'a> CrraObjective<'a> {
    pub fn new(instance: &'a MarketInstance, profile: RiskProfile) -> Self {
        Self { instance, profile }
    }

    fn log_form(&self) -> LogWealthObjective<'a> {
        LogWealthObjective {
            payoff: self.instance.payoff(),
            weights: self.instance.probs(),
        }
    }

    /// `−1` below unit risk aversion, `+1` above.
    fn sign(&self) -> f64 {
        if self.profile.rho() < 1.0 {
            -1.0
        } else {
            1.0
        }
    }
}

impl SimplexObjective for CrraObjective<'_> {
    fn value_and_gradient(&self, b: &[f64]) -> Result<(f64, Vec<f64>)> {
        if self.profile.is_log() {
            return self.log_form().value_and_gradient(b);
        }
        let payoff = self.instance.payoff();
        let q = payoff.apply(b);
        self.instance.check_wealth(&q)?;
        let p = self.instance.probs();
        let e = 1.0 - self.profile.rho();
        let sign = self.sign();
        let mut value = 0.0;
        let mut gradient = vec![0.0; b.len()];
        for &j in self.instance.law().support() {
            let powered = pow_nonneg(q[j], e);
            value += p[j] * powered;
            let scale = sign * e * p[j] * powered / q[j];
            for (g, x) in gradient.iter_mut().zip(payoff.row(j)) {
                *g += scale * x;
            }
        }
        Ok((sign * value, gradient))
    }

    fn change(&self, b: &[f64], delta: &[f64]) -> Result<f64> {
        if self.profile.is_log() {
            return self.log_form().change(b, delta);
        }
        let payoff = self.instance.payoff();
        let q = payoff.apply(b);
        self.instance.check_wealth(&q)?;
        let dq = payoff.apply(delta);
        let p = self.instance.probs();
        let e = 1.0 - self.profile.rho();
        let mut total = 0.0;
        for &j in self.instance.law().support() {
            let ratio = dq[j] / q[j];
            if !(ratio > -1.0) {
                return Ok(f64::INFINITY);
            }
            // q'^e − q^e = q^e·expm1(e·log1p(dq/q))
            total += p[j] * pow_nonneg(q[j], e) * (e * ratio.ln_1p()).exp_m1();
        }
        Ok(self.sign() * total)
    }
}

/// Value and gradient of the CRRA-equivalent loss.
pub fn naive_objective(
    instance: &MarketInstance,
    b: &Portfolio,
    profile: &RiskProfile,
) -> Result<(f64, Vec<f64>)> {
    instance.wealth(b)?;
    CrraObjective::new(instance, *profile).value_and_gradient(b.weights())
}

/// Value and gradient of `f_r(b) = −Σ_j r_j log q_j(b)`.
pub fn info_proj_objective(
    instance: &MarketInstance,
    b: &Portfolio,
    r: &ProbabilityVector,
) -> Result<(f64, Vec<f64>)> {
    LogWealthObjective::new(instance.payoff(), r.as_slice())?.value_and_gradient(b.weights())
}

/// Auxiliary law `r_j ∝ p_j q_j(b)^{1−ρ}`; exactly `p` on the log branch.
pub fn auxiliary_law(
    instance: &MarketInstance,
    b: &Portfolio,
    profile: &RiskProfile,
) -> Result<ProbabilityVector> {
    let q = instance.wealth(b)?;
    Ok(auxiliary_from_wealth(instance, &q, profile))
}

pub(crate) fn auxiliary_from_wealth(
    instance: &MarketInstance,
    q: &[f64],
    profile: &RiskProfile,
) -> ProbabilityVector {
    if profile.is_log() {
        return instance.law().probs().clone();
    }
    let e = 1.0 - profile.rho();
    let p = instance.probs();
    let masses: Vec<f64> = p
        .iter()
        .zip(q)
        .map(|(&pj, &qj)| {
            if pj == 0.0 {
                0.0
            } else {
                pj * pow_nonneg(qj, e)
            }
        })
        .collect();
    let total: f64 = masses.iter().sum();
    // every supported state has positive mass, so normalization is exact up to rounding
    ProbabilityVector::new(masses.into_iter().map(|v| v / total).collect())
        .expect("auxiliary law normalizes a positive mass vector")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::expected_utility;

    fn instance(rows: &[Vec<f64>], probs: &[f64]) -> MarketInstance {
        MarketInstance::new(
            PayoffMatrix::from_rows(rows).unwrap(),
            ProbabilityVector::new(probs.to_vec()).unwrap(),
        )
        .unwrap()
    }

    fn rho(r: f64) -> RiskProfile {
        RiskProfile::new(r).unwrap()
    }

    #[test]
    fn naive_log_on_deterministic_market() {
        let inst = instance(&[vec![1.5, 0.5]], &[1.0]);
        let b = Portfolio::new(vec![0.6, 0.4]).unwrap();
        let (value, _) = naive_objective(&inst, &b, &rho(1.0)).unwrap();
        assert!((value + 1.1f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn naive_sign_follows_regime() {
        let inst = instance(&[vec![1.5, 0.5], vec![0.7, 1.2]], &[0.3, 0.7]);
        let b = Portfolio::uniform(2).unwrap();
        assert!(naive_objective(&inst, &b, &rho(0.5)).unwrap().0 < 0.0);
        assert!(naive_objective(&inst, &b, &rho(1.5)).unwrap().0 > 0.0);
    }

    #[test]
    fn naive_argmin_matches_utility_argmax_on_grid() {
        let inst = instance(
            &[vec![1.6, 0.7], vec![0.6, 1.3], vec![1.1, 0.9]],
            &[0.35, 0.4, 0.25],
        );
        for r in [0.3, 1.0, 1.7] {
            let profile = rho(r);
            let mut best_f = (f64::INFINITY, 0);
            let mut best_u = (f64::NEG_INFINITY, 0);
            for n in 0..=1000 {
                let w = n as f64 / 1000.0;
                let b = Portfolio::new(vec![w, 1.0 - w]).unwrap();
                let f = naive_objective(&inst, &b, &profile).unwrap().0;
                let u = expected_utility(&inst, &b, &profile).unwrap();
                if f < best_f.0 {
                    best_f = (f, n);
                }
                if u > best_u.0 {
                    best_u = (u, n);
                }
            }
            assert_eq!(best_f.1, best_u.1, "rho {r}");
        }
    }

    #[test]
    fn info_proj_with_market_law_is_the_log_loss() {
        let inst = instance(&[vec![1.5, 0.5], vec![0.7, 1.2]], &[0.3, 0.7]);
        let b = Portfolio::new(vec![0.45, 0.55]).unwrap();
        let r = auxiliary_law(&inst, &b, &rho(1.0)).unwrap();
        assert_eq!(r.as_slice(), inst.probs());
        assert_eq!(
            info_proj_objective(&inst, &b, &r).unwrap(),
            naive_objective(&inst, &b, &rho(1.0)).unwrap()
        );
    }

    #[test]
    fn degenerate_weights_favor_the_best_asset_of_that_state() {
        let inst = instance(&[vec![1.5, 0.5, 0.9], vec![0.7, 1.2, 1.0]], &[0.3, 0.7]);
        let r = ProbabilityVector::new(vec![0.0, 1.0]).unwrap();
        let b = Portfolio::new(vec![0.2, 0.5, 0.3]).unwrap();
        let (value, _) = info_proj_objective(&inst, &b, &r).unwrap();
        let q1 = 0.2 * 0.7 + 0.5 * 1.2 + 0.3 * 1.0;
        assert!((value + f64::ln(q1)).abs() < 1e-15);
        let best = (0..3)
            .map(|i| {
                let v = Portfolio::vertex(3, i).unwrap();
                (info_proj_objective(&inst, &v, &r).unwrap().0, i)
            })
            .fold((f64::INFINITY, 9), |a, b| if b.0 < a.0 { b } else { a });
        assert_eq!(best.1, 1);
    }

    #[test]
    fn auxiliary_law_examples() {
        // single asset so that the wealth equals the payoff column
        let inst = instance(&[vec![2.0], vec![0.5]], &[0.5, 0.5]);
        let b = Portfolio::uniform(1).unwrap();
        let r = auxiliary_law(&inst, &b, &rho(2.0)).unwrap();
        assert!((r[0] - 0.2).abs() < 1e-15 && (r[1] - 0.8).abs() < 1e-15);

        let flat = instance(
            &[vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]],
            &[0.2, 0.3, 0.5],
        );
        let b = Portfolio::new(vec![0.3, 0.7]).unwrap();
        for r in [0.4, 1.0, 1.8] {
            let aux = auxiliary_law(&flat, &b, &rho(r)).unwrap();
            for (a, p) in aux.as_slice().iter().zip(flat.probs()) {
                assert!((a - p).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn change_agrees_with_value_difference() {
        let inst = instance(
            &[
                vec![1.6, 0.7, 1.0],
                vec![0.6, 1.3, 0.9],
                vec![1.1, 0.9, 1.2],
            ],
            &[0.35, 0.4, 0.25],
        );
        let b = [0.2, 0.5, 0.3];
        let delta = [0.01, -0.015, 0.005];
        let moved: Vec<f64> = b.iter().zip(&delta).map(|(x, d)| x + d).collect();
        for r in [0.5, 1.0, 1.5] {
            let obj = CrraObjective::new(&inst, rho(r));
            let direct =
                obj.value_and_gradient(&moved).unwrap().0 - obj.value_and_gradient(&b).unwrap().0;
            assert!((obj.change(&b, &delta).unwrap() - direct).abs() < 1e-14);
        }
        let w = [0.1, 0.6, 0.3];
        let log = LogWealthObjective::new(inst.payoff(), &w).unwrap();
        let direct =
            log.value_and_gradient(&moved).unwrap().0 - log.value_and_gradient(&b).unwrap().0;
        assert!((log.change(&b, &delta).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn nonpositive_wealth_is_rejected() {
        let inst = instance(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.5, 0.5]);
        let b = Portfolio::vertex(2, 0).unwrap();
        assert!(naive_objective(&inst, &b, &rho(0.5)).is_err());
        assert!(auxiliary_law(&inst, &b, &rho(0.5)).is_err());
        let r = ProbabilityVector::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            info_proj_objective(&inst, &b, &r),
            Err(Error::NonPositiveWealth { state: 1, .. })
        ));
    }
}
