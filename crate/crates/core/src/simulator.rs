//! Synthetic workloads with known ground truth, and a rerun-policy simulator.
//!
//! Each generated test draws durations from a scaled base distribution,
//! occasionally multiplied by an outlier factor. A small fraction of runs
//! hang: they are recorded as interrupted timeouts at the collection cap,
//! which is `collection_timeout_factor` times the test's original timeout.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::evaluation::{PolicyValues, TimeoutPolicy};
use crate::model::{ExecutionDataset, ExecutionRecord, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BaseDistribution {
    /// `ln T ~ N(ln median, sigma^2)`.
    Lognormal { median_seconds: f64, sigma: f64 },
    Exponential { mean_seconds: f64 },
    Constant { seconds: f64 },
}

impl BaseDistribution {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            BaseDistribution::Lognormal { median_seconds, sigma } => {
                median_seconds > 0.0 && median_seconds.is_finite() && sigma > 0.0 && sigma.is_finite()
            }
            BaseDistribution::Exponential { mean_seconds } => mean_seconds > 0.0 && mean_seconds.is_finite(),
            BaseDistribution::Constant { seconds } => seconds >= 0.0 && seconds.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("invalid distribution parameters {self:?}")))
        }
    }

    /// Multiplies the scale parameter by `factor`.
    pub fn scaled(&self, factor: f64) -> BaseDistribution {
        match *self {
            BaseDistribution::Lognormal { median_seconds, sigma } => BaseDistribution::Lognormal {
                median_seconds: median_seconds * factor,
                sigma,
            },
            BaseDistribution::Exponential { mean_seconds } => BaseDistribution::Exponential {
                mean_seconds: mean_seconds * factor,
            },
            BaseDistribution::Constant { seconds } => BaseDistribution::Constant {
                seconds: seconds * factor,
            },
        }
    }

    /// `P(T > t)`.
    pub fn survival(&self, t: f64) -> f64 {
        match *self {
            BaseDistribution::Lognormal { median_seconds, sigma } => {
                if t <= 0.0 {
                    1.0
                } else {
                    let z = (t.ln() - median_seconds.ln()) / sigma;
                    standard_normal().sf(z)
                }
            }
            BaseDistribution::Exponential { mean_seconds } => {
                if t <= 0.0 {
                    1.0
                } else {
                    (-t / mean_seconds).exp()
                }
            }
            BaseDistribution::Constant { seconds } => {
                if t < seconds {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Inverse CDF; infinite at `p = 1` for unbounded distributions.
    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            BaseDistribution::Lognormal { median_seconds, sigma } => {
                if p >= 1.0 {
                    f64::INFINITY
                } else if p <= 0.0 {
                    0.0
                } else {
                    median_seconds * (sigma * standard_normal().inverse_cdf(p)).exp()
                }
            }
            BaseDistribution::Exponential { mean_seconds } => {
                if p >= 1.0 {
                    f64::INFINITY
                } else {
                    -mean_seconds * (1.0 - p).ln()
                }
            }
            BaseDistribution::Constant { seconds } => seconds,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            BaseDistribution::Lognormal { median_seconds, sigma } => median_seconds * (sigma * sigma / 2.0).exp(),
            BaseDistribution::Exponential { mean_seconds } => mean_seconds,
            BaseDistribution::Constant { seconds } => seconds,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            BaseDistribution::Lognormal { median_seconds, sigma } => LogNormal::new(median_seconds.ln(), sigma)
                .expect("validated")
                .sample(rng),
            BaseDistribution::Exponential { mean_seconds } => {
                Exp::new(1.0 / mean_seconds).expect("validated").sample(rng)
            }
            BaseDistribution::Constant { seconds } => seconds,
        }
    }
}

fn standard_normal() -> Normal {
    Normal::standard()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub test_count: usize,
    pub executions_per_test: usize,
    pub base_distribution: BaseDistribution,
    /// Per-test scale factors are drawn log-uniformly from this range.
    pub test_scale_range: (f64, f64),
    pub outlier_probability: f64,
    pub outlier_factor_range: (f64, f64),
    pub hang_probability: f64,
    /// Quantile of each test's base distribution used as its original timeout.
    pub original_timeout_percentile: f64,
    /// Runs longer than this multiple of the original timeout are cut off.
    pub collection_timeout_factor: f64,
    /// Seconds per grid unit for timeout values.
    pub grid_unit: f64,
    pub revision_id: String,
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            test_count: 50,
            executions_per_test: 500,
            base_distribution: BaseDistribution::Lognormal {
                median_seconds: 600.0,
                sigma: 0.5,
            },
            test_scale_range: (1.0, 1.0),
            outlier_probability: 0.0,
            outlier_factor_range: (1.0, 1.0),
            hang_probability: 0.0,
            original_timeout_percentile: 0.85,
            collection_timeout_factor: 10.0,
            grid_unit: 60.0,
            revision_id: "sim".into(),
            seed: 0,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: &str| Err(Error::InvalidSpec(msg.to_string()));
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.executions_per_test < 1 {
            return invalid("executions_per_test must be at least 1");
        }
        if !prob(self.outlier_probability) || !prob(self.hang_probability) {
            return invalid("probabilities must lie in [0, 1]");
        }
        if !(self.original_timeout_percentile > 0.0 && self.original_timeout_percentile <= 1.0) {
            return invalid("original_timeout_percentile must lie in (0, 1]");
        }
        let (lo, hi) = self.test_scale_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return invalid("test_scale_range must be positive and ordered");
        }
        let (lo, hi) = self.outlier_factor_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return invalid("outlier_factor_range must be positive and ordered");
        }
        if !(self.collection_timeout_factor >= 1.0 && self.collection_timeout_factor.is_finite()) {
            return invalid("collection_timeout_factor must be at least 1");
        }
        if !(self.grid_unit > 0.0 && self.grid_unit.is_finite()) {
            return invalid("grid_unit must be positive");
        }
        self.base_distribution.validate()
    }
}

/// True parameters of one generated test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestTruth {
    pub test_id: String,
    pub distribution: BaseDistribution,
    pub outlier_probability: f64,
    pub outlier_factor_range: (f64, f64),
    pub hang_probability: f64,
    /// Original timeout in grid units.
    pub original_timeout: u32,
    /// Collection cap in seconds.
    pub collection_cap: f64,
}

impl TestTruth {
    /// `P(T > t)` for the would-be duration `T`, hangs included.
    pub fn exceedance(&self, t: f64) -> f64 {
        let base = self.distribution.survival(t);
        let outlier = if self.outlier_probability > 0.0 {
            mean_over_factor(self.outlier_factor_range, |f| self.distribution.survival(t / f))
        } else {
            0.0
        };
        let finishing = (1.0 - self.outlier_probability) * base + self.outlier_probability * outlier;
        self.hang_probability + (1.0 - self.hang_probability) * finishing
    }
}

/// Average of `g(f)` for `f` uniform on `[lo, hi]`, by composite Simpson.
fn mean_over_factor(range: (f64, f64), g: impl Fn(f64) -> f64) -> f64 {
    let (lo, hi) = range;
    if hi - lo <= f64::EPSILON * hi {
        return g(lo);
    }
    const STEPS: usize = 256;
    let h = (hi - lo) / STEPS as f64;
    let mut acc = g(lo) + g(hi);
    for i in 1..STEPS {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * g(lo + i as f64 * h);
    }
    acc * h / 3.0 / (hi - lo)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub tests: BTreeMap<String, TestTruth>,
}

#[derive(Debug, Clone)]
pub struct Workload {
    pub dataset: ExecutionDataset,
    pub original_policy: TimeoutPolicy,
    pub truth: GroundTruth,
}

fn epoch() -> DateTime<Utc> {
    // 2023-05-01T00:00:00Z
    DateTime::<Utc>::from_timestamp(1_682_899_200, 0).expect("valid timestamp")
}

pub fn generate_workload(spec: &WorkloadSpec) -> Result<Workload> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let width = spec.test_count.saturating_sub(1).to_string().len().max(4);
    let mut records = Vec::with_capacity(spec.test_count * spec.executions_per_test);
    let mut truths = BTreeMap::new();
    let mut originals = BTreeMap::new();

    for i in 0..spec.test_count {
        let test_id = format!("test-{i:0width$}");
        let (lo, hi) = spec.test_scale_range;
        let scale = if hi > lo {
            (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
        } else {
            lo
        };
        let distribution = spec.base_distribution.scaled(scale);

        let mut durations = Vec::with_capacity(spec.executions_per_test);
        let mut hangs = Vec::with_capacity(spec.executions_per_test);
        for _ in 0..spec.executions_per_test {
            let hang = rng.random::<f64>() < spec.hang_probability;
            let mut d = distribution.sample(&mut rng);
            if rng.random::<f64>() < spec.outlier_probability {
                let (flo, fhi) = spec.outlier_factor_range;
                d *= flo + rng.random::<f64>() * (fhi - flo);
            }
            durations.push(d);
            hangs.push(hang);
        }

        let quantile = distribution.quantile(spec.original_timeout_percentile);
        let threshold = if quantile.is_finite() {
            quantile
        } else {
            // p = 1 on an unbounded distribution: cover every finishing run.
            durations
                .iter()
                .zip(&hangs)
                .filter(|(_, &h)| !h)
                .map(|(&d, _)| d)
                .fold(0.0, f64::max)
        };
        let original = ((threshold / spec.grid_unit).ceil() as u32).max(1);
        let original_seconds = f64::from(original) * spec.grid_unit;
        let cap = spec.collection_timeout_factor * original_seconds;

        for (run, (&d, &hang)) in durations.iter().zip(&hangs).enumerate() {
            let (duration, verdict, interrupted) = if hang || d > cap {
                (cap, Verdict::Timeout, true)
            } else if d > original_seconds {
                (d, Verdict::Timeout, false)
            } else {
                (d, Verdict::Pass, false)
            };
            records.push(ExecutionRecord {
                test_id: test_id.clone(),
                revision_id: spec.revision_id.clone(),
                started_at: epoch()
                    + chrono::Duration::seconds((run * spec.test_count + i) as i64),
                duration,
                verdict,
                interrupted,
            });
        }

        originals.insert(test_id.clone(), original);
        truths.insert(
            test_id.clone(),
            TestTruth {
                test_id,
                distribution,
                outlier_probability: spec.outlier_probability,
                outlier_factor_range: spec.outlier_factor_range,
                hang_probability: spec.hang_probability,
                original_timeout: original,
                collection_cap: cap,
            },
        );
    }

    Ok(Workload {
        dataset: ExecutionDataset::from_records(records),
        original_policy: TimeoutPolicy::original(originals),
        truth: GroundTruth { tests: truths },
    })
}

/// How reruns after a timeout are charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RerunAccounting {
    /// Reruns stop at the first success.
    StopOnSuccess,
    /// Every timeout triggers all `m` reruns. This is the accounting the
    /// closed-form cost model assumes.
    FullChain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSimulation {
    pub test_id: String,
    pub initial_runs: usize,
    pub timeout_events: usize,
    pub rerun_count: usize,
    pub total_machine_seconds: f64,
    pub final_passes: usize,
    pub final_timeouts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub m: u32,
    pub accounting: RerunAccounting,
    pub seed: u64,
    pub tests: Vec<TestSimulation>,
    pub initial_runs: usize,
    pub timeout_events: usize,
    pub rerun_count: usize,
    pub total_machine_seconds: f64,
    pub mean_cost_per_initial_run: f64,
}

fn stream_seed(seed: u64, test_id: &str) -> u64 {
    test_id
        .bytes()
        .fold(seed ^ 0x9e37_79b9_7f4a_7c15, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Replays every recorded run under `policy`. A run longer than its timeout
/// costs the timeout and triggers up to `m` reruns, resampled with
/// replacement from the same test's durations.
pub fn simulate_rerun_policy(
    dataset: &ExecutionDataset,
    policy: &TimeoutPolicy,
    m: u32,
    grid_unit: f64,
    accounting: RerunAccounting,
    seed: u64,
) -> Result<SimulationReport> {
    if !(grid_unit > 0.0) {
        return Err(Error::InvalidArgument("grid unit must be positive".into()));
    }
    policy.validate()?;
    let mut report = SimulationReport {
        m,
        accounting,
        seed,
        tests: Vec::new(),
        initial_runs: 0,
        timeout_events: 0,
        rerun_count: 0,
        total_machine_seconds: 0.0,
        mean_cost_per_initial_run: 0.0,
    };

    for sample in dataset.pooled_by_test() {
        let value = match &policy.values {
            PolicyValues::PerTest(map) => *map.get(&sample.test_id).ok_or_else(|| Error::MissingPolicyValue {
                policy: policy.name.clone(),
                test_id: sample.test_id.clone(),
            })?,
            PolicyValues::Global(v) => *v,
            PolicyValues::Fitted => {
                return Err(Error::InvalidArgument(
                    "simulation needs concrete timeout values, not a fitted policy".into(),
                ))
            }
        };
        let t = f64::from(value) * grid_unit;
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, &sample.test_id));
        let mut sim = TestSimulation {
            test_id: sample.test_id.clone(),
            initial_runs: sample.len(),
            timeout_events: 0,
            rerun_count: 0,
            total_machine_seconds: 0.0,
            final_passes: 0,
            final_timeouts: 0,
        };
        for &d in &sample.durations {
            if d <= t {
                sim.total_machine_seconds += d;
                sim.final_passes += 1;
                continue;
            }
            sim.total_machine_seconds += t;
            sim.timeout_events += 1;
            let mut passed = false;
            for _ in 0..m {
                let rerun = sample.durations[rng.random_range(0..sample.len())];
                sim.rerun_count += 1;
                sim.total_machine_seconds += rerun.min(t);
                if rerun <= t {
                    passed = true;
                    if accounting == RerunAccounting::StopOnSuccess {
                        break;
                    }
                }
            }
            if passed {
                sim.final_passes += 1;
            } else {
                sim.final_timeouts += 1;
            }
        }
        report.initial_runs += sim.initial_runs;
        report.timeout_events += sim.timeout_events;
        report.rerun_count += sim.rerun_count;
        report.total_machine_seconds += sim.total_machine_seconds;
        report.tests.push(sim);
    }
    if report.initial_runs > 0 {
        report.mean_cost_per_initial_run = report.total_machine_seconds / report.initial_runs as f64;
    }
    Ok(report)
}
