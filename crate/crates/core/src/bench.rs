//! Seeded instance generation, the solver-comparison benchmark with CSV
//! output, and the identity-verification battery.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, Uniform};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market::{
    partition_function, MarketInstance, PayoffMatrix, Portfolio, ProbabilityVector,
    SymmetricCovering,
};
use crate::measures::{
    ce_growth_rate, decompose_ce, expected_utility, renyi_divergence, utility_upper_bound,
    variational_minimizer, variational_objective, RiskProfile,
};
use crate::oracle::{grid_argmax, reference_optimum, GridSpec, ReferenceOptimum};
use crate::solvers::{jacobian_probe, run_method, Method, RunTrace, SolverConfig};

/// Shape parameter of the symmetric Dirichlet law of the state probabilities.
pub const DIRICHLET_CONCENTRATION: f64 = 10.0;
/// Payoff entries are drawn uniformly from this range.
pub const PAYOFF_RANGE: (f64, f64) = (0.5, 1.5);
/// Header of every trace file.
pub const CSV_HEADER: &str = "method,rho,iter,objective,error,accepted_eta,wall_ns";
/// Certificate tolerance of the reference optimum used by the benchmark.
pub const REFERENCE_TOL: f64 = 1e-10;

fn dirichlet(rng: &mut ChaCha8Rng, k: usize, concentration: f64) -> Result<ProbabilityVector> {
    let gamma = Gamma::new(concentration, 1.0)
        .map_err(|e| Error::InvalidParameter(format!("gamma law: {e}")))?;
    let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    ProbabilityVector::from_masses(draws)
}

/// Random `k × m` market: probabilities from `Dir(10·1_k)`, payoffs i.i.d.
/// uniform on `[0.5, 1.5]`. The same `(k, m, seed)` always yields the same instance.
pub fn generate_instance(k: usize, m: usize, seed: u64) -> Result<MarketInstance> {
    if k == 0 || m == 0 {
        return Err(Error::InvalidParameter(format!(
            "k and m must be positive, got {k}x{m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probs = dirichlet(&mut rng, k, DIRICHLET_CONCENTRATION)?;
    let uniform = Uniform::new_inclusive(PAYOFF_RANGE.0, PAYOFF_RANGE.1)
        .map_err(|e| Error::InvalidParameter(format!("uniform law: {e}")))?;
    let entries: Vec<f64> = (0..k * m).map(|_| uniform.sample(&mut rng)).collect();
    MarketInstance::new(PayoffMatrix::from_flat(entries, k, m)?, probs)
}

/// Market with `m + 3` states in which every asset has its own favourable
/// state, which keeps the optimum in the relative interior for moderate
/// risk aversion. Callers should still confirm interiority.
pub fn generate_interior_instance(m: usize, seed: u64) -> Result<MarketInstance> {
    if m < 2 {
        return Err(Error::InvalidParameter(
            "interior instances need m >= 2".into(),
        ));
    }
    let k = m + 3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probs = dirichlet(&mut rng, k, DIRICHLET_CONCENTRATION)?;
    let mut entries = Vec::with_capacity(k * m);
    for j in 0..k {
        for i in 0..m {
            let v = if j < m && i == j {
                1.6 + 0.3 * rng.random::<f64>()
            } else if j < m {
                0.6 + 0.2 * rng.random::<f64>()
            } else {
                0.9 + 0.2 * rng.random::<f64>()
            };
            entries.push(v);
        }
    }
    MarketInstance::new(PayoffMatrix::from_flat(entries, k, m)?, probs)
}

/// Uniformly random point of the simplex (flat Dirichlet).
pub fn random_portfolio(rng: &mut impl Rng, m: usize) -> Result<Portfolio> {
    let draws: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    Portfolio::new(draws.into_iter().map(|v: f64| v / total).collect())
}

/// Parameters of the benchmark protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub k: usize,
    pub m: usize,
    pub seed: u64,
    pub rho_list: Vec<f64>,
    pub methods: Vec<Method>,
    pub max_iters: usize,
    pub tol: f64,
    pub error_target: f64,
    pub output_path: PathBuf,
}

impl BenchConfig {
    pub fn new(output_path: impl Into<PathBuf>) -> Self {
        Self {
            k: 100,
            m: 50,
            seed: 0,
            rho_list: vec![0.5, 1.0, 1.5],
            methods: Method::ALL.to_vec(),
            max_iters: 5000,
            tol: 1e-12,
            error_target: 1e-6,
            output_path: output_path.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.m == 0 {
            return Err(Error::InvalidParameter("k and m must be positive".into()));
        }
        if let Some(rho) = self.rho_list.iter().find(|r| !(**r > 0.0 && **r < 2.0)) {
            return Err(Error::InvalidParameter(format!(
                "benchmark supports rho in (0, 2), got {rho}"
            )));
        }
        if self.rho_list.is_empty() || self.methods.is_empty() {
            return Err(Error::InvalidParameter(
                "need at least one rho and one method".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be positive".into()));
        }
        if !(self.error_target > 0.0) {
            return Err(Error::InvalidParameter(
                "error target must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One solver run inside a comparison.
#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub method: Method,
    pub trace: RunTrace,
    pub iterations_to_target: Option<usize>,
    pub final_error: f64,
}

/// All methods on one instance at one risk aversion.
#[derive(Debug, Clone)]
pub struct RhoComparison {
    pub rho: f64,
    pub reference: ReferenceOptimum,
    pub outcomes: Vec<MethodOutcome>,
}

impl RhoComparison {
    pub fn outcome(&self, method: Method) -> Option<&MethodOutcome> {
        self.outcomes.iter().find(|o| o.method == method)
    }

    /// Smallest error over every recorded iterate of every method.
    pub fn min_error(&self) -> f64 {
        self.outcomes
            .iter()
            .flat_map(|o| {
                o.trace
                    .records
                    .iter()
                    .map(|r| self.reference.value - r.objective)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Runs every method from the uniform portfolio against a certified reference.
pub fn compare_methods(
    instance: &MarketInstance,
    rho: f64,
    methods: &[Method],
    max_iters: usize,
    tol: f64,
    error_target: f64,
) -> Result<RhoComparison> {
    let profile = RiskProfile::new(rho)?;
    let reference = reference_optimum(instance, &profile, REFERENCE_TOL)?;
    let config = SolverConfig::new(profile)
        .with_max_iters(max_iters)
        .with_tol(tol)
        .with_reference(reference.value, None);
    let b0 = Portfolio::uniform(instance.m())?;
    let outcomes = methods
        .par_iter()
        .map(|&method| {
            let trace = run_method(method, instance, &b0, &config)?;
            Ok(MethodOutcome {
                method,
                iterations_to_target: trace.iterations_to_target(reference.value, error_target),
                final_error: reference.value - trace.final_objective(),
                trace,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RhoComparison {
        rho,
        reference,
        outcomes,
    })
}

/// Files and results of one benchmark invocation.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub comparisons: Vec<RhoComparison>,
    pub trace_files: Vec<PathBuf>,
    pub summary_file: PathBuf,
}

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Writes trace rows in the fixed seven-column schema.
pub fn write_trace_csv<W: Write>(mut out: W, traces: &[&RunTrace], reference: f64) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for trace in traces {
        for r in &trace.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                trace.method,
                fmt_f64(trace.rho),
                r.iter,
                fmt_f64(r.objective),
                fmt_f64(reference - r.objective),
                fmt_f64(r.accepted_eta),
                r.wall_ns
            )?;
        }
    }
    Ok(())
}

pub fn trace_file_name(rho: f64) -> String {
    format!("trace_rho_{}.csv", fmt_f64(rho))
}

fn summary_csv(config: &BenchConfig, comparisons: &[RhoComparison]) -> String {
    let mut s = String::from(
        "method,rho,seed,iterations_to_target,error_target,final_error,status,reference_value,reference_converged\n",
    );
    for c in comparisons {
        for o in &c.outcomes {
            let iters = o.iterations_to_target.map_or(-1, |n| n as i64);
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                o.method,
                fmt_f64(c.rho),
                config.seed,
                iters,
                fmt_f64(config.error_target),
                fmt_f64(o.final_error),
                o.trace.status.as_str(),
                fmt_f64(c.reference.value),
                c.reference.converged
            );
        }
    }
    s
}

/// Generates the seeded instance, runs every (ρ, method) pair and writes one
/// trace CSV per ρ plus `summary.csv` into `config.output_path`.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    fs::create_dir_all(&config.output_path)?;
    let instance = generate_instance(config.k, config.m, config.seed)?;
    let comparisons = config
        .rho_list
        .par_iter()
        .map(|&rho| {
            compare_methods(
                &instance,
                rho,
                &config.methods,
                config.max_iters,
                config.tol,
                config.error_target,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut trace_files = Vec::new();
    for c in &comparisons {
        let path = config.output_path.join(trace_file_name(c.rho));
        let traces: Vec<&RunTrace> = c.outcomes.iter().map(|o| &o.trace).collect();
        let file = BufWriter::new(fs::File::create(&path)?);
        write_trace_csv(file, &traces, c.reference.value)?;
        trace_files.push(path);
    }
    let summary_file = config.output_path.join("summary.csv");
    fs::write(&summary_file, summary_csv(config, &comparisons))?;
    Ok(BenchReport {
        comparisons,
        trace_files,
        summary_file,
    })
}

/// Writes a small matplotlib script that plots every trace CSV in `dir`.
pub fn write_plot_script(dir: &Path) -> Result<PathBuf> {
    let path = dir.join("plot_traces.py");
    fs::write(
        &path,
        r#"import glob, sys
import pandas as pd
import matplotlib.pyplot as plt

root = sys.argv[1] if len(sys.argv) > 1 else "."
files = sorted(glob.glob(f"{root}/trace_rho_*.csv"))
fig, axes = plt.subplots(1, len(files), figsize=(5 * len(files), 4), squeeze=False)
for ax, path in zip(axes[0], files):
    df = pd.read_csv(path)
    for method, rows in df.groupby("method"):
        ax.semilogy(rows["iter"], rows["error"].clip(lower=1e-16), label=method)
    ax.set_title(f"rho = {df['rho'].iloc[0]}")
    ax.set_xlabel("accepted first-order iterations")
    ax.set_ylabel("optimization error")
    ax.legend()
fig.tight_layout()
fig.savefig(f"{root}/traces.png", dpi=150)
"#,
    )?;
    Ok(path)
}

/// Parameters of the identity battery.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub instances: usize,
    pub seed: u64,
    pub rhos: Vec<f64>,
    /// Breaks the coordinate sums of the covering to exercise the failure path.
    pub corrupt_covering: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            instances: 20,
            seed: 7,
            rhos: vec![0.25, 0.5, 1.0, 1.5, 1.9],
            corrupt_covering: false,
        }
    }
}

/// Outcome of one identity check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    /// Risk aversion the check ran at; `None` for order-free checks.
    pub rho: Option<f64>,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &'static str, rho: Option<f64>, measured: f64, tolerance: f64) {
        self.checks.push(CheckResult {
            name,
            rho,
            measured,
            tolerance,
            passed: measured <= tolerance,
        });
    }

    /// One line per check.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let rho = c.rho.map_or("-".to_string(), |r| r.to_string());
            let _ = writeln!(
                s,
                "[{}] {:<24} rho={:<5} measured={:.3e} tol={:.1e}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                rho,
                c.measured,
                c.tolerance
            );
        }
        s
    }
}

/// Relative spread `(max − min)/max` of the partition function over random portfolios.
pub fn partition_spread(
    covering: &SymmetricCovering,
    rng: &mut impl Rng,
    portfolios: usize,
) -> Result<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for _ in 0..portfolios {
        let b = random_portfolio(rng, covering.dimension())?;
        let z = partition_function(covering, &b);
        lo = lo.min(z);
        hi = hi.max(z);
    }
    Ok((hi - lo) / hi)
}

fn corrupted(covering: &SymmetricCovering) -> Result<SymmetricCovering> {
    let mut points = covering.points().to_vec();
    let last = points.len() - 1;
    points[last][0] += 0.25;
    SymmetricCovering::from_points_unchecked(points, covering.origin_index().to_vec())
}

/// Runs the identity battery on seeded random instances.
pub fn verify_suite(config: &VerifyConfig) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut report = VerifyReport::default();
    let profiles: Vec<RiskProfile> = config
        .rhos
        .iter()
        .map(|&r| RiskProfile::new(r))
        .collect::<Result<_>>()?;

    let instances: Vec<MarketInstance> = (0..config.instances)
        .map(|_| {
            let k = rng.random_range(1..=20);
            let m = rng.random_range(1..=10);
            generate_instance(k, m, rng.random())
        })
        .collect::<Result<_>>()?;

    // partition function invariance
    let mut spread = 0.0f64;
    for inst in &instances {
        let covering = if config.corrupt_covering {
            corrupted(inst.covering())?
        } else {
            inst.covering().clone()
        };
        spread = spread.max(partition_spread(&covering, &mut rng, 100)?);
    }
    report.push("partition_invariance", None, spread, 1e-12);

    for profile in &profiles {
        let rho = Some(profile.rho());
        let mut decomposition_gap = 0.0f64;
        let mut bound_violation = f64::NEG_INFINITY;
        for inst in &instances {
            let bound = utility_upper_bound(inst, profile)?;
            for _ in 0..20 {
                let b = random_portfolio(&mut rng, inst.m())?;
                let total = decompose_ce(inst, &b, profile)?.total;
                let direct = ce_growth_rate(inst, &b, profile)?;
                decomposition_gap = decomposition_gap.max((total - direct).abs());
                bound_violation = bound_violation.max(expected_utility(inst, &b, profile)? - bound);
            }
        }
        report.push("ce_decomposition", rho, decomposition_gap, 1e-9);
        report.push("utility_upper_bound", rho, bound_violation, 1e-10);

        if !profile.is_log() {
            let (closed_form_gap, grid_excess) = variational_checks(&mut rng, profile)?;
            report.push("variational_closed_form", rho, closed_form_gap, 1e-9);
            report.push("variational_grid", rho, grid_excess, 1e-9);
        }

        let mut mismatches = 0usize;
        let spec = GridSpec::new(1e-2)?;
        for _ in 0..config.instances.min(5) {
            let k = rng.random_range(2..=8);
            let inst = generate_instance(k, 3, rng.random())?;
            if !projection_argmax_matches(&inst, profile, &spec)? {
                mismatches += 1;
            }
        }
        report.push("projection_equivalence", rho, mismatches as f64, 0.0);

        if profile.rho() < 2.0 {
            let inst = interior_probe_instance(3, rng.random(), profile)?;
            let probe = jacobian_probe(&inst, profile, 1e-5)?;
            let expected = (1.0 - profile.order()).abs();
            report.push(
                "alternating_map_factor",
                rho,
                (probe.factor - expected).abs(),
                0.05,
            );
        }
    }
    Ok(report)
}

/// Closed-form gap and best grid improvement over the variational minimizer.
fn variational_checks(rng: &mut ChaCha8Rng, profile: &RiskProfile) -> Result<(f64, f64)> {
    let alpha = profile.rho();
    let spec = GridSpec::new(1e-2)?;
    let mut closed_form_gap = 0.0f64;
    let mut grid_excess = f64::NEG_INFINITY;
    for _ in 0..3 {
        let p = ProbabilityVector::new(random_portfolio(rng, 3)?.weights().to_vec())?;
        let q = ProbabilityVector::new(random_portfolio(rng, 3)?.weights().to_vec())?;
        let r_star = variational_minimizer(&p, &q, profile)?;
        let at_star = variational_objective(&r_star, &p, &q, alpha)?;
        let target = (1.0 - alpha) * renyi_divergence(&p, &q, alpha)?;
        closed_form_gap = closed_form_gap.max((at_star - target).abs());
        let (_, best) = grid_argmax(3, &spec, |r| {
            let r = ProbabilityVector::new(r.weights().to_vec())?;
            Ok(Some(-variational_objective(&r, &p, &q, alpha)?))
        })?;
        grid_excess = grid_excess.max(at_star - (-best));
    }
    Ok((closed_form_gap, grid_excess))
}

/// Whether the lattice maximizer of expected utility is the lattice minimizer
/// of the Rényi projection objective.
pub fn projection_argmax_matches(
    instance: &MarketInstance,
    profile: &RiskProfile,
    spec: &GridSpec,
) -> Result<bool> {
    let feasible = |v: Result<f64>| match v {
        Ok(v) => Ok(Some(v)),
        Err(Error::NonPositiveWealth { .. }) => Ok(None),
        Err(e) => Err(e),
    };
    let (by_utility, _) = grid_argmax(instance.m(), spec, |b| {
        feasible(expected_utility(instance, b, profile))
    })?;
    let (by_divergence, _) = grid_argmax(instance.m(), spec, |b| {
        feasible(decompose_ce(instance, b, profile).map(|d| -d.divergence_term))
    })?;
    Ok(by_utility == by_divergence)
}

/// First interior instance at or after `seed` whose optimum keeps every
/// weight above 0.05.
pub fn interior_probe_instance(
    m: usize,
    seed: u64,
    profile: &RiskProfile,
) -> Result<MarketInstance> {
    for offset in 0..1000u64 {
        let inst = generate_interior_instance(m, seed.wrapping_add(offset))?;
        let reference = reference_optimum(&inst, profile, 1e-11)?;
        if reference.converged && reference.portfolio.min_weight() > 0.05 {
            return Ok(inst);
        }
    }
    Err(Error::BoundaryOptimum { min_weight: 0.0 })
}
