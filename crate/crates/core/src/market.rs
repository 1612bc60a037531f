//! Market model: payoff matrix, market law, symmetric covering sets and the
//! tilted / portfolio-induced measures that live on the covering.
//!
//! States are the rows of the payoff matrix and assets its columns. The
//! covering set extends the payoff support so that every asset coordinate has
//! the same total, which makes the wealth partition function independent of
//! the portfolio.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::pow_nonneg;

/// Absolute tolerance for simplex and normalization checks.
pub const SIMPLEX_TOL: f64 = 1e-12;
/// Relative tolerance for the coordinate-sum check of a covering set.
pub const COVERING_REL_TOL: f64 = 1e-10;

/// Normalized nonnegative weights over a finite alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty alphabet".into()));
        }
        if let Some((i, &v)) = probs
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidDistribution(format!(
                "entry {i} is {v}, must be finite and nonnegative"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {total}, not 1"
            )));
        }
        Ok(Self(probs))
    }

    /// Normalizes nonnegative masses. Fails when the total mass is zero.
    pub fn from_masses(masses: Vec<f64>) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "total mass {total} cannot be normalized"
            )));
        }
        Self::new(masses.into_iter().map(|v| v / total).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDistribution("empty alphabet".into()));
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Indices carrying strictly positive mass.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for ProbabilityVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Nonnegative `k × m` matrix, rows are market states and columns are assets.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMatrix {
    entries: Vec<f64>,
    k: usize,
    m: usize,
}

impl PayoffMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::InvalidPayoff("no states".into()));
        }
        let m = rows[0].len();
        if let Some((j, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
            return Err(Error::InvalidPayoff(format!(
                "row {j} has {} entries, expected {m}",
                row.len()
            )));
        }
        Self::from_flat(rows.concat(), k, m)
    }

    /// Builds from row-major entries.
    pub fn from_flat(entries: Vec<f64>, k: usize, m: usize) -> Result<Self> {
        if k == 0 || m == 0 {
            return Err(Error::InvalidPayoff(format!("shape {k}x{m} is empty")));
        }
        if entries.len() != k * m {
            return Err(Error::DimensionMismatch {
                expected: k * m,
                found: entries.len(),
            });
        }
        if let Some(idx) = entries.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidPayoff(format!(
                "entry ({}, {}) is {}, must be finite and nonnegative",
                idx / m,
                idx % m,
                entries[idx]
            )));
        }
        let matrix = Self { entries, k, m };
        if let Some(j) = (0..k).find(|&j| matrix.row(j).iter().all(|v| *v == 0.0)) {
            return Err(Error::InvalidPayoff(format!(
                "row {j} has no strictly positive entry"
            )));
        }
        Ok(matrix)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.entries[j * self.m..(j + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks_exact(self.m)
    }

    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.entries[j * self.m + i]
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }

    /// `M b`, the wealth realized in every state.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.rows().map(|row| dot(row, v)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }
}

/// Market law over the `k` states together with its support.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketLaw {
    probs: ProbabilityVector,
    support: Vec<usize>,
}

impl MarketLaw {
    pub fn new(probs: ProbabilityVector) -> Self {
        let support = probs.support();
        Self { probs, support }
    }

    pub fn probs(&self) -> &ProbabilityVector {
        &self.probs
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }
}

/// Finite point set whose coordinate-wise sum is `gamma · 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricCovering {
    points: Vec<Vec<f64>>,
    a_max: f64,
    gamma: f64,
    origin_index: Vec<usize>,
}

impl SymmetricCovering {
    /// Accepts an arbitrary covering after checking the coordinate-sum
    /// invariant. `origin_index[j]` is the position of original state `j`.
    pub fn from_points(points: Vec<Vec<f64>>, origin_index: Vec<usize>) -> Result<Self> {
        let covering = Self::from_points_unchecked(points, origin_index)?;
        covering.check_balance()?;
        Ok(covering)
    }

    /// Builds a covering without the coordinate-sum check. Used to set up
    /// negative controls; `gamma` is taken as the mean coordinate sum.
    pub fn from_points_unchecked(points: Vec<Vec<f64>>, origin_index: Vec<usize>) -> Result<Self> {
        let m = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidCovering("no points".into()))?;
        if m == 0 || points.iter().any(|p| p.len() != m) {
            return Err(Error::InvalidCovering(
                "points have inconsistent dimension".into(),
            ));
        }
        if points.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidCovering("points must be nonnegative".into()));
        }
        if let Some(&bad) = origin_index.iter().find(|&&i| i >= points.len()) {
            return Err(Error::InvalidCovering(format!(
                "origin index {bad} out of range"
            )));
        }
        let sums = column_sums(&points);
        let gamma = sums.iter().sum::<f64>() / m as f64;
        if !(gamma > 0.0) {
            return Err(Error::InvalidCovering("all points are zero".into()));
        }
        let a_max = points.iter().flatten().copied().fold(0.0, f64::max);
        Ok(Self {
            points,
            a_max,
            gamma,
            origin_index,
        })
    }

    /// Verifies that every coordinate sum equals `gamma` to the relative tolerance.
    pub fn check_balance(&self) -> Result<()> {
        let sums = column_sums(&self.points);
        for (i, s) in sums.iter().enumerate() {
            if (s - self.gamma).abs() > COVERING_REL_TOL * self.gamma {
                return Err(Error::InvalidCovering(format!(
                    "coordinate {i} sums to {s}, expected gamma = {}",
                    self.gamma
                )));
            }
        }
        Ok(())
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.points[0].len()
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn origin_index(&self) -> &[usize] {
        &self.origin_index
    }

    pub fn column_sums(&self) -> Vec<f64> {
        column_sums(&self.points)
    }
}

fn column_sums(points: &[Vec<f64>]) -> Vec<f64> {
    let m = points.first().map_or(0, Vec::len);
    let mut sums = vec![0.0; m];
    for p in points {
        for (s, v) in sums.iter_mut().zip(p) {
            *s += v;
        }
    }
    sums
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Reflection covering `X ∪ {a_max·1 − x : x ∈ X}`.
///
/// Repeated payoff rows share one point. A reflected point that coincides
/// with an original point (including a self-reflected one) is stored once,
/// so the stored set is closed under the reflection and each coordinate sums
/// to `a_max · |X□| / 2`.
pub fn build_reflection_covering(payoff: &PayoffMatrix) -> Result<SymmetricCovering> {
    let a_max = payoff.max_entry();
    if !(a_max > 0.0) {
        return Err(Error::InvalidPayoff("all-zero payoff matrix".into()));
    }

    let mut points: Vec<Vec<f64>> = Vec::with_capacity(2 * payoff.k());
    let mut origin_index = Vec::with_capacity(payoff.k());
    for row in payoff.rows() {
        match points.iter().position(|p| p.as_slice() == row) {
            Some(pos) => origin_index.push(pos),
            None => {
                origin_index.push(points.len());
                points.push(row.to_vec());
            }
        }
    }

    let originals = points.len();
    let mut paired = vec![false; originals];
    for i in 0..originals {
        if paired[i] {
            continue;
        }
        paired[i] = true;
        let reflected: Vec<f64> = points[i].iter().map(|v| a_max - v).collect();
        if reflected == points[i] {
            continue;
        }
        if let Some(j) = (i + 1..originals).find(|&j| !paired[j] && points[j] == reflected) {
            paired[j] = true;
            continue;
        }
        points.push(reflected);
    }

    let gamma = a_max * points.len() as f64 / 2.0;
    let covering = SymmetricCovering {
        points,
        a_max,
        gamma,
        origin_index,
    };
    covering.check_balance()?;
    Ok(covering)
}

/// Point on the asset simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    weights: Vec<f64>,
}

impl Portfolio {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidPortfolio("no assets".into()));
        }
        if let Some((i, v)) = weights
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidPortfolio(format!(
                "weight {i} is {v}, must be finite and nonnegative"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidPortfolio(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(Self { weights })
    }

    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidPortfolio("no assets".into()));
        }
        Ok(Self {
            weights: vec![1.0 / m as f64; m],
        })
    }

    pub fn vertex(m: usize, i: usize) -> Result<Self> {
        if i >= m {
            return Err(Error::InvalidPortfolio(format!(
                "vertex {i} out of range for m = {m}"
            )));
        }
        let mut weights = vec![0.0; m];
        weights[i] = 1.0;
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Payoff matrix, market law and the covering derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketInstance {
    payoff: PayoffMatrix,
    law: MarketLaw,
    covering: SymmetricCovering,
    extended_law: ProbabilityVector,
}

impl MarketInstance {
    /// Instance on the reflection covering.
    pub fn new(payoff: PayoffMatrix, probs: ProbabilityVector) -> Result<Self> {
        let covering = build_reflection_covering(&payoff)?;
        Self::with_covering(payoff, probs, covering)
    }

    /// Instance on a caller-supplied covering. The covering must contain every
    /// payoff row at the position given by its origin index.
    pub fn with_covering(
        payoff: PayoffMatrix,
        probs: ProbabilityVector,
        covering: SymmetricCovering,
    ) -> Result<Self> {
        if probs.len() != payoff.k() {
            return Err(Error::DimensionMismatch {
                expected: payoff.k(),
                found: probs.len(),
            });
        }
        if covering.dimension() != payoff.m() {
            return Err(Error::DimensionMismatch {
                expected: payoff.m(),
                found: covering.dimension(),
            });
        }
        if covering.origin_index().len() != payoff.k() {
            return Err(Error::InvalidCovering(format!(
                "origin index covers {} states, expected {}",
                covering.origin_index().len(),
                payoff.k()
            )));
        }
        for (j, &pos) in covering.origin_index().iter().enumerate() {
            if covering.points()[pos].as_slice() != payoff.row(j) {
                return Err(Error::InvalidCovering(format!(
                    "state {j} does not appear at covering position {pos}"
                )));
            }
        }
        let mut extended = vec![0.0; covering.len()];
        for (j, &pos) in covering.origin_index().iter().enumerate() {
            extended[pos] += probs[j];
        }
        let extended_law = ProbabilityVector::new(extended)?;
        Ok(Self {
            payoff,
            law: MarketLaw::new(probs),
            covering,
            extended_law,
        })
    }

    pub fn payoff(&self) -> &PayoffMatrix {
        &self.payoff
    }

    pub fn law(&self) -> &MarketLaw {
        &self.law
    }

    pub fn probs(&self) -> &[f64] {
        self.law.probs.as_slice()
    }

    pub fn covering(&self) -> &SymmetricCovering {
        &self.covering
    }

    pub fn extended_law(&self) -> &ProbabilityVector {
        &self.extended_law
    }

    pub fn k(&self) -> usize {
        self.payoff.k()
    }

    pub fn m(&self) -> usize {
        self.payoff.m()
    }

    /// Wealth `⟨b, x_j⟩` in every state. Fails if any supported state has
    /// nonpositive wealth.
    pub fn wealth(&self, b: &Portfolio) -> Result<Vec<f64>> {
        self.check_dimension(b)?;
        let q = self.payoff.apply(b.weights());
        self.check_wealth(&q)?;
        Ok(q)
    }

    pub(crate) fn check_wealth(&self, q: &[f64]) -> Result<()> {
        for &j in self.law.support() {
            if !(q[j] > 0.0) {
                return Err(Error::NonPositiveWealth {
                    state: j,
                    wealth: q[j],
                });
            }
        }
        Ok(())
    }

    pub(crate) fn check_dimension(&self, b: &Portfolio) -> Result<()> {
        if b.len() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                found: b.len(),
            });
        }
        Ok(())
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            k: self.k(),
            m: self.m(),
            payoff: self.payoff.to_rows(),
            probs: self.probs().to_vec(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        file.into_instance()
    }
}

/// On-disk instance: `{"k":int,"m":int,"payoff":[[...]],"probs":[...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub k: usize,
    pub m: usize,
    pub payoff: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
}

impl InstanceFile {
    /// Validates the record and reports the first violated invariant.
    pub fn into_instance(self) -> Result<MarketInstance> {
        if self.k == 0 || self.m == 0 {
            return Err(Error::InvalidPayoff(format!(
                "shape {}x{} is empty",
                self.k, self.m
            )));
        }
        if self.payoff.len() != self.k {
            return Err(Error::InvalidPayoff(format!(
                "k = {} but payoff has {} rows",
                self.k,
                self.payoff.len()
            )));
        }
        if let Some((j, row)) = self
            .payoff
            .iter()
            .enumerate()
            .find(|(_, r)| r.len() != self.m)
        {
            return Err(Error::InvalidPayoff(format!(
                "m = {} but payoff row {j} has {} entries",
                self.m,
                row.len()
            )));
        }
        if self.probs.len() != self.k {
            return Err(Error::InvalidDistribution(format!(
                "k = {} but probs has {} entries",
                self.k,
                self.probs.len()
            )));
        }
        let payoff = PayoffMatrix::from_rows(&self.payoff)?;
        let probs = ProbabilityVector::new(self.probs)?;
        MarketInstance::new(payoff, probs)
    }
}

/// `Z_q = Σ_{x ∈ X□} ⟨b, x⟩`, which equals `gamma` for every portfolio.
pub fn partition_function(covering: &SymmetricCovering, b: &Portfolio) -> f64 {
    covering.points().iter().map(|x| dot(b.weights(), x)).sum()
}

/// Tilted measure `p^β / Σ p^β`; zero entries stay zero.
pub fn tilt_measure(p: &ProbabilityVector, beta: f64) -> Result<ProbabilityVector> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "tilt order must be positive, got {beta}"
        )));
    }
    if beta == 1.0 {
        return Ok(p.clone());
    }
    let powered: Vec<f64> = p.as_slice().iter().map(|&v| pow_nonneg(v, beta)).collect();
    ProbabilityVector::from_masses(powered)
}

/// Normalized wealth `⟨b, x⟩ / Z_q` over the covering points.
pub fn induced_measure(covering: &SymmetricCovering, b: &Portfolio) -> Result<ProbabilityVector> {
    if b.len() != covering.dimension() {
        return Err(Error::DimensionMismatch {
            expected: covering.dimension(),
            found: b.len(),
        });
    }
    let wealth: Vec<f64> = covering
        .points()
        .iter()
        .map(|x| dot(b.weights(), x))
        .collect();
    ProbabilityVector::from_masses(wealth)
}
