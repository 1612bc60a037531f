//! Ground-truth generators: exhaustive simplex-lattice search for small asset
//! counts, and a tightly converged reference optimum certified by the
//! first-order conditions.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market::{MarketInstance, Portfolio};
use crate::measures::{ce_growth_rate, RiskProfile};
use crate::solvers::{armijo_search, foc_certificate, CrraObjective, FocCertificate, SolverConfig};

const MAX_LATTICE_POINTS: u128 = 10_000_000;

/// Simplex lattice `{c / n : c ∈ ℕ^m, Σ c = n}` with `n = 1/resolution`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub resolution: f64,
    pub max_dimension: usize,
}

impl GridSpec {
    pub fn new(resolution: f64) -> Result<Self> {
        if !(resolution > 0.0 && resolution <= 0.5) {
            return Err(Error::InvalidParameter(format!(
                "grid resolution must lie in (0, 0.5], got {resolution}"
            )));
        }
        let steps = (1.0 / resolution).round();
        if (steps * resolution - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "grid resolution {resolution} does not divide one"
            )));
        }
        Ok(Self {
            resolution,
            max_dimension: 4,
        })
    }

    pub fn steps(&self) -> usize {
        (1.0 / self.resolution).round() as usize
    }

    /// Number of lattice points for `m` assets.
    pub fn lattice_size(&self, m: usize) -> u128 {
        binomial((self.steps() + m - 1) as u128, (m - 1) as u128)
    }

    fn check(&self, m: usize) -> Result<()> {
        if m == 0 || m > self.max_dimension {
            return Err(Error::DimensionCap {
                m,
                cap: self.max_dimension,
            });
        }
        let points = self.lattice_size(m);
        if points > MAX_LATTICE_POINTS {
            return Err(Error::GridTooLarge {
                points,
                limit: MAX_LATTICE_POINTS,
            });
        }
        Ok(())
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Visits compositions of `total` into `parts.len()` cells in ascending
/// lexicographic order.
fn for_each_composition(
    total: usize,
    parts: &mut [usize],
    depth: usize,
    f: &mut impl FnMut(&[usize]),
) {
    if depth + 1 == parts.len() {
        parts[depth] = total;
        f(parts);
        return;
    }
    for c in 0..=total {
        parts[depth] = c;
        for_each_composition(total - c, parts, depth + 1, f);
    }
}

fn lattice_portfolio(counts: &[usize], steps: usize) -> Result<Portfolio> {
    Portfolio::new(counts.iter().map(|&c| c as f64 / steps as f64).collect())
}

/// Maximizes `score` over the lattice. Points where `score` yields `None`
/// (for example nonpositive wealth) are skipped. Ties go to the
/// lexicographically smallest weight vector.
pub fn grid_argmax<F>(m: usize, spec: &GridSpec, score: F) -> Result<(Portfolio, f64)>
where
    F: Fn(&Portfolio) -> Result<Option<f64>> + Sync,
{
    spec.check(m)?;
    let steps = spec.steps();
    let best_per_head: Vec<Option<(f64, Vec<usize>)>> = (0..=steps)
        .into_par_iter()
        .map(|head| -> Result<Option<(f64, Vec<usize>)>> {
            let mut parts = vec![0; m];
            parts[0] = head;
            let mut best: Option<(f64, Vec<usize>)> = None;
            let mut failure = None;
            let mut visit = |counts: &[usize]| {
                if failure.is_some() {
                    return;
                }
                let value = lattice_portfolio(counts, steps).and_then(|b| score(&b));
                match value {
                    Ok(Some(v)) if !v.is_nan() => {
                        if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                            best = Some((v, counts.to_vec()));
                        }
                    }
                    Ok(_) => {}
                    Err(e) => failure = Some(e),
                }
            };
            if m == 1 {
                if head == steps {
                    visit(&parts);
                }
            } else {
                for_each_composition(steps - head, &mut parts, 1, &mut visit);
            }
            match failure {
                Some(e) => Err(e),
                None => Ok(best),
            }
        })
        .collect::<Result<_>>()?;

    let mut best: Option<(f64, Vec<usize>)> = None;
    for (v, counts) in best_per_head.into_iter().flatten() {
        if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
            best = Some((v, counts));
        }
    }
    let (value, counts) =
        best.ok_or_else(|| Error::InvalidParameter("no feasible lattice point".into()))?;
    Ok((lattice_portfolio(&counts, steps)?, value))
}

fn feasible(result: Result<f64>) -> Result<Option<f64>> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(Error::NonPositiveWealth { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Lattice maximizer of the CE growth rate (equivalently of expected utility)
/// and its growth value.
pub fn grid_search_optimum(
    instance: &MarketInstance,
    profile: &RiskProfile,
    spec: &GridSpec,
) -> Result<(Portfolio, f64)> {
    grid_argmax(instance.m(), spec, |b| {
        feasible(ce_growth_rate(instance, b, profile))
    })
}

/// High-precision optimum used as ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceOptimum {
    pub portfolio: Portfolio,
    /// CE growth rate at `portfolio`.
    pub value: f64,
    pub certificate: FocCertificate,
    pub iterations: usize,
    pub converged: bool,
}

/// Weights at or below this level count as zero in the optimality certificate.
pub const ZERO_WEIGHT_THRESHOLD: f64 = 1e-8;
const REFERENCE_ITERS: usize = 100_000;
const MAX_REFERENCE_ETA: f64 = 1e8;

/// Runs Naive EG from the uniform portfolio until the first-order conditions
/// hold to `tol` and the weight left on dropped assets is negligible, or the
/// iteration budget runs out. Non-convergence is reported, not raised.
///
/// Unlike the benchmarked solvers, the stepsize is warm-started at twice the
/// last accepted value, which clears dropped assets geometrically fast.
pub fn reference_optimum(
    instance: &MarketInstance,
    profile: &RiskProfile,
    tol: f64,
) -> Result<ReferenceOptimum> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(
            "reference tolerance must be positive".into(),
        ));
    }
    let mut config = SolverConfig::new(*profile).with_max_iters(REFERENCE_ITERS);
    let objective = CrraObjective::new(instance, *profile);
    let done = |c: &FocCertificate| c.holds(tol) && c.slack_mass <= 1e-4 * tol;

    let mut b = Portfolio::uniform(instance.m())?;
    let mut certificate = foc_certificate(instance, &b, profile, ZERO_WEIGHT_THRESHOLD)?;
    let mut iterations = 0;
    while !done(&certificate) && iterations < config.max_iters {
        let out = armijo_search(&objective, &b, &config)?;
        if !out.accepted {
            break;
        }
        b = out.next;
        iterations += 1;
        config.eta0 = (2.0 * out.eta).min(MAX_REFERENCE_ETA);
        certificate = foc_certificate(instance, &b, profile, ZERO_WEIGHT_THRESHOLD)?;
    }
    Ok(ReferenceOptimum {
        value: ce_growth_rate(instance, &b, profile)?,
        converged: done(&certificate),
        portfolio: b,
        certificate,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{PayoffMatrix, ProbabilityVector};
    use crate::numeric::max_abs_diff;

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
    fn lattice_is_enumerated_in_order() {
        let spec = GridSpec::new(0.5).unwrap();
        let mut seen = Vec::new();
        let mut parts = vec![0; 3];
        for_each_composition(2, &mut parts, 0, &mut |c| seen.push(c.to_vec()));
        assert_eq!(seen.len() as u128, spec.lattice_size(3));
        assert_eq!(seen.first().unwrap(), &vec![0, 0, 2]);
        assert_eq!(seen.last().unwrap(), &vec![2, 0, 0]);
        assert!(seen.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn grid_spec_validation() {
        assert!(GridSpec::new(0.0).is_err());
        assert!(GridSpec::new(0.6).is_err());
        assert!(GridSpec::new(0.3).is_err());
        assert_eq!(GridSpec::new(0.01).unwrap().lattice_size(3), 5151);
        let inst = instance(&[vec![1.0; 5]], &[1.0]);
        assert!(matches!(
            grid_search_optimum(&inst, &rho(1.0), &GridSpec::new(0.1).unwrap()),
            Err(Error::DimensionCap { m: 5, cap: 4 })
        ));
        let wide = instance(&[vec![1.0; 4]], &[1.0]);
        assert!(matches!(
            grid_search_optimum(&wide, &rho(1.0), &GridSpec::new(1e-3).unwrap()),
            Err(Error::GridTooLarge { .. })
        ));
    }

    #[test]
    fn ties_break_lexicographically() {
        let (b, _) = grid_argmax(3, &GridSpec::new(0.25).unwrap(), |_| Ok(Some(1.0))).unwrap();
        assert_eq!(b.weights(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn log_optimal_proportional_betting() {
        let inst = instance(&[vec![2.0, 0.0], vec![0.0, 2.0]], &[0.6, 0.4]);
        let (b, _) = grid_search_optimum(&inst, &rho(1.0), &GridSpec::new(1e-3).unwrap()).unwrap();
        assert!(max_abs_diff(b.weights(), &[0.6, 0.4]) < 1e-9);
    }

    #[test]
    fn risk_averse_betting_follows_the_tilt() {
        let inst = instance(&[vec![2.0, 0.0], vec![0.0, 2.0]], &[0.8, 0.2]);
        let (b, _) = grid_search_optimum(&inst, &rho(2.0), &GridSpec::new(1e-3).unwrap()).unwrap();
        assert!(max_abs_diff(b.weights(), &[2.0 / 3.0, 1.0 / 3.0]) <= 1e-3);
    }

    #[test]
    fn dominated_asset_is_dropped() {
        let inst = instance(&[vec![1.3, 1.3], vec![0.9, 0.7]], &[0.5, 0.5]);
        for r in [0.5, 1.0, 1.5] {
            let (b, _) =
                grid_search_optimum(&inst, &rho(r), &GridSpec::new(0.01).unwrap()).unwrap();
            assert_eq!(b.weights(), &[1.0, 0.0]);
        }
    }

    #[test]
    fn symmetric_reference_is_uniform() {
        let inst = instance(
            &[
                vec![1.5, 0.8, 0.8],
                vec![0.8, 1.5, 0.8],
                vec![0.8, 0.8, 1.5],
            ],
            &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        );
        for r in [0.5, 1.0, 1.5] {
            let reference = reference_optimum(&inst, &rho(r), 1e-10).unwrap();
            assert!(reference.converged);
            assert!(max_abs_diff(reference.portfolio.weights(), &[1.0 / 3.0; 3]) < 1e-9);
        }
    }

    #[test]
    fn reference_dominates_the_grid() {
        let inst = instance(
            &[
                vec![1.6, 0.7, 1.0],
                vec![0.6, 1.3, 0.9],
                vec![1.1, 0.9, 1.2],
                vec![0.8, 1.1, 0.7],
            ],
            &[0.3, 0.3, 0.2, 0.2],
        );
        let spec = GridSpec::new(1e-2).unwrap();
        for r in [0.5, 1.0, 1.5] {
            let reference = reference_optimum(&inst, &rho(r), 1e-10).unwrap();
            let (grid_b, grid_value) = grid_search_optimum(&inst, &rho(r), &spec).unwrap();
            assert!(reference.converged);
            assert!(reference.value >= grid_value - 1e-12);
            assert!(max_abs_diff(reference.portfolio.weights(), grid_b.weights()) <= 1e-2);
        }
    }
}
