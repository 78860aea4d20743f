//! Timeout-exceedance estimation and cost-optimal timeout search.
//!
//! The cost of a timeout `t` is the truncated mean execution time plus `m`
//! reruns, charged at that same truncated mean, for every timed-out run, plus
//! an optional breakage term for runs that hang until the timeout:
//!
//! ```text
//! C(t) = T_t + m * p(t) * T_t + P_b * t * (m + 1)
//! ```
//!
//! `p(t)` comes either from the empirical distribution or from a
//! finite-sample analog of Cantelli's one-sided inequality built on the
//! sample mean and the scaled deviation `q_n`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{stats_of, ExecutionDataset, SampleStats, TestSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbabilityMethod {
    TolhurstBound,
    EmpiricalEcdf,
}

impl ProbabilityMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ProbabilityMethod::TolhurstBound => "tolhurst_bound",
            ProbabilityMethod::EmpiricalEcdf => "empirical_ecdf",
        }
    }
}

impl fmt::Display for ProbabilityMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProbabilityMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tolhurst" | "tolhurst_bound" => Ok(ProbabilityMethod::TolhurstBound),
            "empirical" | "empirical_ecdf" => Ok(ProbabilityMethod::EmpiricalEcdf),
            other => Err(format!("unknown probability method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizationConfig {
    /// Reruns triggered by a failing execution.
    pub m: u32,
    /// Probability that a run hangs until the timeout.
    pub breakage_probability: f64,
    pub probability_method: ProbabilityMethod,
    /// Seconds per grid step; timeouts are whole multiples of this.
    pub grid_unit: f64,
    /// Below this many observations the fallback timeout is used.
    pub min_samples: usize,
    /// Fallback timeout in grid units.
    pub fallback_timeout: u32,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        OptimizationConfig {
            m: 3,
            breakage_probability: 0.0,
            probability_method: ProbabilityMethod::TolhurstBound,
            grid_unit: 60.0,
            min_samples: 30,
            fallback_timeout: 120,
        }
    }
}

impl OptimizationConfig {
    pub fn with_method(mut self, method: ProbabilityMethod) -> Self {
        self.probability_method = method;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.breakage_probability) {
            return Err(Error::InvalidArgument(format!(
                "breakage probability {} outside [0, 1]",
                self.breakage_probability
            )));
        }
        if !(self.grid_unit.is_finite() && self.grid_unit > 0.0) {
            return Err(Error::InvalidArgument("grid unit must be positive".into()));
        }
        if self.min_samples < 2 {
            return Err(Error::InvalidArgument("min_samples must be at least 2".into()));
        }
        if self.fallback_timeout < 1 {
            return Err(Error::InvalidArgument("fallback timeout must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub test_id: String,
    /// Cost-optimal timeout in grid units.
    pub optimal_timeout: u32,
    /// Expected cost in seconds; absent for a fallback on a sample too small
    /// to evaluate.
    pub expected_cost_at_optimum: Option<f64>,
    pub timeout_probability_at_optimum: Option<f64>,
    /// Inclusive grid range searched, in grid units.
    pub search_range: (u32, u32),
    pub method_used: ProbabilityMethod,
    pub fallback_applied: bool,
    pub grid_unit: f64,
}

impl OptimizationResult {
    pub fn optimal_timeout_seconds(&self) -> f64 {
        f64::from(self.optimal_timeout) * self.grid_unit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostPoint {
    /// Timeout in grid units.
    pub timeout: u32,
    /// Average cost in seconds.
    pub average_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostCurve {
    pub points: Vec<CostPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub curve: CostCurve,
    /// Global minimum on the grid (smallest timeout on ties).
    pub argmin: u32,
    pub min_cost: f64,
    /// Interior grid points lower than the left neighbour and not higher
    /// than the right one.
    pub local_minima: Vec<u32>,
}

/// Upper bound on `P(T >= t)` from the sample-analog Cantelli inequality.
///
/// Only meaningful for `lambda = (t - mean) / q_n > 1`; anywhere else the
/// bound is the trivial 1.
pub fn tolhurst_bound(stats: &SampleStats, t: f64) -> Result<f64> {
    if stats.n < 2 {
        return Err(Error::InsufficientSample(stats.n));
    }
    let excess = t - stats.mean;
    if stats.q_n == 0.0 {
        return Ok(if excess > 0.0 { 0.0 } else { 1.0 });
    }
    if excess <= stats.q_n {
        return Ok(1.0);
    }
    let n = stats.n as f64;
    let lambda_sq = (excess / stats.q_n).powi(2);
    let k_sq = n * lambda_sq / (n - 1.0 + lambda_sq);
    let ratio = (n + 1.0) / (k_sq + 1.0);
    // Guard against an exact integer ratio rounding down a whole step.
    let floored = (ratio * (1.0 + 4.0 * f64::EPSILON)).floor();
    Ok((floored / (n + 1.0)).clamp(0.0, 1.0))
}

/// Fraction of durations strictly greater than `t`.
pub fn empirical_exceedance(sample: &TestSample, t: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let over = sample.durations.iter().filter(|&&d| d > t).count();
    Ok(over as f64 / sample.len() as f64)
}

/// Mean of `min(duration, t)`: a run cut off at `t` costs exactly `t`.
pub fn truncated_mean(sample: &TestSample, t: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(sample.durations.iter().map(|&d| d.min(t)).sum::<f64>() / sample.len() as f64)
}

/// `C = T_t + m * p * T_t + P_b * t * (m + 1)`.
pub fn cost_from_parts(truncated_mean: f64, p_timeout: f64, t: f64, m: u32, breakage: f64) -> f64 {
    let m = f64::from(m);
    truncated_mean + m * p_timeout * truncated_mean + breakage * t * (m + 1.0)
}

/// Expected cost per execution of timeout `t` (seconds).
pub fn expected_cost(sample: &TestSample, t: f64, config: &OptimizationConfig) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("timeout must be positive, got {t}")));
    }
    let prepared = PreparedSample::new(&sample.durations)?;
    prepared.cost(t, config)
}

/// Sorted durations with prefix sums, for O(log n) truncated means.
pub(crate) struct PreparedSample {
    sorted: Vec<f64>,
    prefix: Vec<f64>,
    pub(crate) stats: SampleStats,
}

impl PreparedSample {
    pub(crate) fn new(durations: &[f64]) -> Result<Self> {
        let stats = stats_of(durations)?;
        let mut sorted = durations.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(sorted.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for d in &sorted {
            acc += d;
            prefix.push(acc);
        }
        Ok(PreparedSample {
            sorted,
            prefix,
            stats,
        })
    }

    fn n(&self) -> f64 {
        self.sorted.len() as f64
    }

    /// Number of durations `<= t`.
    fn at_most(&self, t: f64) -> usize {
        self.sorted.partition_point(|&d| d <= t)
    }

    pub(crate) fn exceed_count(&self, t: f64) -> usize {
        self.sorted.len() - self.at_most(t)
    }

    pub(crate) fn empirical_exceedance(&self, t: f64) -> f64 {
        self.exceed_count(t) as f64 / self.n()
    }

    pub(crate) fn truncated_mean(&self, t: f64) -> f64 {
        let below = self.at_most(t);
        (self.prefix[below] + (self.sorted.len() - below) as f64 * t) / self.n()
    }

    pub(crate) fn probability(&self, t: f64, method: ProbabilityMethod) -> Result<f64> {
        match method {
            ProbabilityMethod::EmpiricalEcdf => Ok(self.empirical_exceedance(t)),
            ProbabilityMethod::TolhurstBound => tolhurst_bound(&self.stats, t),
        }
    }

    pub(crate) fn cost(&self, t: f64, config: &OptimizationConfig) -> Result<f64> {
        let p = self.probability(t, config.probability_method)?;
        Ok(cost_from_parts(
            self.truncated_mean(t),
            p,
            t,
            config.m,
            config.breakage_probability,
        ))
    }
}

/// Inclusive grid range `[ceil(mean), ceil(2 * max)]` in grid units, never
/// below 1.
pub fn search_range(stats: &SampleStats, grid_unit: f64) -> (u32, u32) {
    let lower = ((stats.mean / grid_unit).ceil() as u32).max(1);
    let upper = ((2.0 * stats.max / grid_unit).ceil() as u32).max(lower);
    (lower, upper)
}

/// Exhaustive grid search for the cost-optimal timeout of one test.
pub fn optimize_timeout(sample: &TestSample, config: &OptimizationConfig) -> Result<OptimizationResult> {
    config.validate()?;
    if sample.len() < config.min_samples {
        return Ok(fallback(sample, config));
    }
    let prepared = PreparedSample::new(&sample.durations)?;
    let (lower, upper) = search_range(&prepared.stats, config.grid_unit);

    let mut best: Option<(u32, f64, f64)> = None;
    for t in lower..=upper {
        let seconds = f64::from(t) * config.grid_unit;
        let p = prepared.probability(seconds, config.probability_method)?;
        let cost = cost_from_parts(
            prepared.truncated_mean(seconds),
            p,
            seconds,
            config.m,
            config.breakage_probability,
        );
        // Strict comparison keeps the smallest timeout on ties.
        if best.is_none_or(|(_, c, _)| cost < c) {
            best = Some((t, cost, p));
        }
    }
    let (t, cost, p) = best.expect("search range is never empty");
    Ok(OptimizationResult {
        test_id: sample.test_id.clone(),
        optimal_timeout: t,
        expected_cost_at_optimum: Some(cost),
        timeout_probability_at_optimum: Some(p),
        search_range: (lower, upper),
        method_used: config.probability_method,
        fallback_applied: false,
        grid_unit: config.grid_unit,
    })
}

fn fallback(sample: &TestSample, config: &OptimizationConfig) -> OptimizationResult {
    let t = config.fallback_timeout;
    let seconds = f64::from(t) * config.grid_unit;
    let evaluated = PreparedSample::new(&sample.durations).ok().and_then(|p| {
        let prob = p.probability(seconds, config.probability_method).ok()?;
        let cost = cost_from_parts(
            p.truncated_mean(seconds),
            prob,
            seconds,
            config.m,
            config.breakage_probability,
        );
        Some((cost, prob))
    });
    OptimizationResult {
        test_id: sample.test_id.clone(),
        optimal_timeout: t,
        expected_cost_at_optimum: evaluated.map(|e| e.0),
        timeout_probability_at_optimum: evaluated.map(|e| e.1),
        search_range: (t, t),
        method_used: config.probability_method,
        fallback_applied: true,
        grid_unit: config.grid_unit,
    }
}

/// Optimizes every test of a dataset (revisions pooled), sorted by test id.
pub fn optimize_all(dataset: &ExecutionDataset, config: &OptimizationConfig) -> Result<Vec<OptimizationResult>> {
    dataset
        .pooled_by_test()
        .iter()
        .map(|s| optimize_timeout(s, config))
        .collect()
}

/// Average cost over all tests of one global timeout per grid point in
/// `[lo, hi]`, with empirical timeout probabilities.
pub fn static_sweep(
    dataset: &ExecutionDataset,
    lo: u32,
    hi: u32,
    config: &OptimizationConfig,
) -> Result<SweepResult> {
    static_sweep_samples(&dataset.pooled_by_test(), lo, hi, config)
}

pub fn static_sweep_samples(
    samples: &[TestSample],
    lo: u32,
    hi: u32,
    config: &OptimizationConfig,
) -> Result<SweepResult> {
    if lo >= hi {
        return Err(Error::InvalidArgument(format!("sweep range [{lo}, {hi}] is empty")));
    }
    config.validate()?;
    let prepared: Vec<PreparedSample> = samples
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| PreparedSample::new(&s.durations))
        .collect::<Result<_>>()?;
    if prepared.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let empirical = config.with_method(ProbabilityMethod::EmpiricalEcdf);

    let mut points = Vec::with_capacity((hi - lo + 1) as usize);
    for t in lo..=hi {
        let seconds = f64::from(t) * config.grid_unit;
        let mut total = 0.0;
        for p in &prepared {
            total += p.cost(seconds, &empirical)?;
        }
        points.push(CostPoint {
            timeout: t,
            average_cost: total / prepared.len() as f64,
        });
    }

    let (argmin, min_cost) = points
        .iter()
        .fold((points[0].timeout, points[0].average_cost), |best, p| {
            if p.average_cost < best.1 {
                (p.timeout, p.average_cost)
            } else {
                best
            }
        });
    let local_minima = points
        .windows(3)
        .filter(|w| w[1].average_cost < w[0].average_cost && w[1].average_cost <= w[2].average_cost)
        .map(|w| w[1].timeout)
        .collect();
    Ok(SweepResult {
        curve: CostCurve { points },
        argmin,
        min_cost,
        local_minima,
    })
}
