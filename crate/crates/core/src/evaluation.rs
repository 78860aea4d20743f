//! k-fold cross-validation of timeout policies.
//!
//! Folds are stratified per test: each test's executions are shuffled with a
//! seeded generator and dealt round-robin, so every test contributes to every
//! fold and per-test fold sizes differ by at most one. Revisions are pooled
//! per test.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flakiness::quantile_sorted;
use crate::model::{ExecutionDataset, TestSample};
use crate::optimizer::{optimize_timeout, OptimizationConfig, PreparedSample, ProbabilityMethod};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    /// Fold index of every execution, by test id and execution position.
    pub assignment: BTreeMap<String, Vec<usize>>,
    /// Tests with fewer than `k` executions.
    pub excluded: Vec<String>,
    pub warnings: Vec<String>,
}

impl FoldAssignment {
    /// Positions of a test's executions that fall in `fold`.
    pub fn indices(&self, test_id: &str, fold: usize) -> Vec<usize> {
        self.assignment
            .get(test_id)
            .map(|folds| {
                folds
                    .iter()
                    .enumerate()
                    .filter(|(_, &f)| f == fold)
                    .map(|(i, _)| i)
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Positions outside `fold`.
    pub fn complement(&self, test_id: &str, fold: usize) -> Vec<usize> {
        self.assignment
            .get(test_id)
            .map(|folds| {
                folds
                    .iter()
                    .enumerate()
                    .filter(|(_, &f)| f != fold)
                    .map(|(i, _)| i)
                    .collect()
            })
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Original,
    Optimized,
    Static,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyValues {
    /// Timeout per test id, in grid units.
    PerTest(BTreeMap<String, u32>),
    /// One timeout for every test, in grid units.
    Global(u32),
    /// Fitted from training data with `optimize_timeout`.
    Fitted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeoutPolicy {
    pub name: String,
    pub kind: PolicyKind,
    pub values: PolicyValues,
}

impl TimeoutPolicy {
    pub fn original(values: BTreeMap<String, u32>) -> Self {
        TimeoutPolicy {
            name: "original".into(),
            kind: PolicyKind::Original,
            values: PolicyValues::PerTest(values),
        }
    }

    pub fn static_global(value: u32) -> Self {
        TimeoutPolicy {
            name: format!("static-{value}"),
            kind: PolicyKind::Static,
            values: PolicyValues::Global(value),
        }
    }

    pub fn optimized() -> Self {
        TimeoutPolicy {
            name: "optimized".into(),
            kind: PolicyKind::Optimized,
            values: PolicyValues::Fitted,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = match &self.values {
            PolicyValues::PerTest(map) => map.iter().find(|(_, &v)| v < 1).map(|(k, _)| k.clone()),
            PolicyValues::Global(v) => (*v < 1).then(|| "<global>".to_string()),
            PolicyValues::Fitted => None,
        };
        match bad {
            Some(test) => Err(Error::InvalidArgument(format!(
                "policy {:?} has a non-positive timeout for {test}",
                self.name
            ))),
            None => Ok(()),
        }
    }

    /// Fixed timeout for a test; `None` for fitted policies.
    fn fixed_value(&self, test_id: &str) -> Result<Option<u32>> {
        match &self.values {
            PolicyValues::PerTest(map) => map
                .get(test_id)
                .copied()
                .map(Some)
                .ok_or_else(|| Error::MissingPolicyValue {
                    policy: self.name.clone(),
                    test_id: test_id.to_string(),
                }),
            PolicyValues::Global(v) => Ok(Some(*v)),
            PolicyValues::Fitted => Ok(None),
        }
    }
}

impl fmt::Display for TimeoutPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFoldStats {
    pub policy: String,
    pub flaky_timeout_count: usize,
    /// Mean over tests of the expected cost per execution, seconds.
    pub average_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub executions: usize,
    pub policies: Vec<PolicyFoldStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub policy: String,
    pub baseline: String,
    /// Mean over folds of `1 - timeouts(policy) / timeouts(baseline)`.
    pub timeout_reduction: Option<f64>,
    /// Mean over folds of `1 - cost(policy) / cost(baseline)`.
    pub cost_reduction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldReport>,
    pub reductions: Vec<Reduction>,
    pub excluded_tests: Vec<String>,
    pub warnings: Vec<String>,
}

impl CvReport {
    pub fn stats(&self, fold: usize, policy: &str) -> Option<&PolicyFoldStats> {
        self.folds
            .get(fold)?
            .policies
            .iter()
            .find(|p| p.policy == policy)
    }

    pub fn reduction(&self, policy: &str, baseline: &str) -> Option<&Reduction> {
        self.reductions
            .iter()
            .find(|r| r.policy == policy && r.baseline == baseline)
    }

    /// Plain-text table, one row per fold and policy.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<6} {:<20} {:>10} {:>16}\n",
            "fold", "policy", "timeouts", "avg_cost_s"
        );
        for fold in &self.folds {
            for p in &fold.policies {
                out.push_str(&format!(
                    "{:<6} {:<20} {:>10} {:>16.3}\n",
                    fold.fold, p.policy, p.flaky_timeout_count, p.average_cost
                ));
            }
        }
        out.push('\n');
        out.push_str(&format!(
            "{:<20} {:<20} {:>18} {:>16}\n",
            "policy", "baseline", "timeout_reduction", "cost_reduction"
        ));
        for r in self.reductions.iter().filter(|r| r.policy != r.baseline) {
            let fmt_opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
            out.push_str(&format!(
                "{:<20} {:<20} {:>18} {:>16}\n",
                r.policy,
                r.baseline,
                fmt_opt(r.timeout_reduction),
                fmt_opt(r.cost_reduction)
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTotals {
    pub policy: String,
    pub timeout_count: usize,
    pub average_cost: f64,
    /// Median timeout over the dataset's tests, grid units.
    pub median_timeout: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDelta {
    pub policy: String,
    pub baseline: String,
    pub timeout_count_delta: i64,
    pub average_cost_ratio: Option<f64>,
    pub median_timeout_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyComparison {
    pub totals: Vec<PolicyTotals>,
    /// Every further policy against the first one.
    pub deltas: Vec<PolicyDelta>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn make_folds(dataset: &ExecutionDataset, k: usize, seed: u64) -> Result<FoldAssignment> {
    make_folds_for(&dataset.pooled_by_test(), k, seed)
}

pub(crate) fn make_folds_for(samples: &[TestSample], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    let mut folds = FoldAssignment {
        k,
        seed,
        assignment: BTreeMap::new(),
        excluded: Vec::new(),
        warnings: Vec::new(),
    };
    for s in samples {
        if s.len() < k {
            folds.excluded.push(s.test_id.clone());
            folds.warnings.push(format!(
                "test {} has {} executions, fewer than k = {k}; excluded",
                s.test_id,
                s.len()
            ));
            continue;
        }
        // Each test gets its own stream, so adding a test never reshuffles another.
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(s.test_id.as_bytes()));
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.shuffle(&mut rng);
        let mut assignment = vec![0; s.len()];
        for (position, &execution) in order.iter().enumerate() {
            assignment[execution] = position % k;
        }
        folds.assignment.insert(s.test_id.clone(), assignment);
    }
    Ok(folds)
}

/// Number of durations strictly greater than `t` seconds.
pub fn count_timeouts(sample: &TestSample, t: f64) -> usize {
    sample.durations.iter().filter(|&&d| d > t).count()
}

/// Cost per execution with empirical probabilities and no breakage term.
fn evaluation_cost(sample: &PreparedSample, t: f64, m: u32) -> f64 {
    let config = OptimizationConfig {
        m,
        breakage_probability: 0.0,
        probability_method: ProbabilityMethod::EmpiricalEcdf,
        ..OptimizationConfig::default()
    };
    sample.cost(t, &config).expect("empirical cost cannot fail")
}

fn check_coverage(policies: &[TimeoutPolicy], samples: &[TestSample]) -> Result<()> {
    for p in policies {
        p.validate()?;
        for s in samples {
            p.fixed_value(&s.test_id)?;
        }
    }
    Ok(())
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

fn reduction_ratio(policy: f64, baseline: f64) -> Option<f64> {
    if baseline > 0.0 {
        Some(1.0 - policy / baseline)
    } else if policy == 0.0 {
        Some(0.0)
    } else {
        None
    }
}

/// Fits fitted policies on k - 1 folds and evaluates every policy on the
/// held-out fold, for each of the k folds.
pub fn cross_validate(
    dataset: &ExecutionDataset,
    policies: &[TimeoutPolicy],
    config: &OptimizationConfig,
    k: usize,
    seed: u64,
) -> Result<CvReport> {
    config.validate()?;
    if policies.is_empty() {
        return Err(Error::InvalidArgument("no policies to compare".into()));
    }
    let samples = dataset.pooled_by_test();
    let folds = make_folds_for(&samples, k, seed)?;
    let kept: Vec<&TestSample> = samples
        .iter()
        .filter(|s| folds.assignment.contains_key(&s.test_id))
        .collect();
    check_coverage(policies, &samples)?;
    let needs_fit = policies.iter().any(|p| p.values == PolicyValues::Fitted);

    let mut reports = Vec::with_capacity(k);
    for fold in 0..k {
        let mut counts = vec![0usize; policies.len()];
        let mut costs = vec![0.0f64; policies.len()];
        let mut executions = 0;
        for s in &kept {
            let held_out = s.select(&folds.indices(&s.test_id, fold));
            executions += held_out.len();
            let prepared = PreparedSample::new(&held_out.durations)?;
            let fitted = if needs_fit {
                let train = s.select(&folds.complement(&s.test_id, fold));
                Some(optimize_timeout(&train, config)?.optimal_timeout)
            } else {
                None
            };
            for (i, p) in policies.iter().enumerate() {
                let value = match p.fixed_value(&s.test_id)? {
                    Some(v) => v,
                    None => fitted.expect("fitted when needed"),
                };
                let t = f64::from(value) * config.grid_unit;
                counts[i] += prepared.exceed_count(t);
                costs[i] += evaluation_cost(&prepared, t, config.m);
            }
        }
        let tests = kept.len().max(1) as f64;
        reports.push(FoldReport {
            fold,
            executions,
            policies: policies
                .iter()
                .enumerate()
                .map(|(i, p)| PolicyFoldStats {
                    policy: p.name.clone(),
                    flaky_timeout_count: counts[i],
                    average_cost: costs[i] / tests,
                })
                .collect(),
        });
    }

    let mut reductions = Vec::new();
    for (i, p) in policies.iter().enumerate() {
        for (j, b) in policies.iter().enumerate() {
            let timeout_reduction = mean_defined(reports.iter().map(|f| {
                reduction_ratio(
                    f.policies[i].flaky_timeout_count as f64,
                    f.policies[j].flaky_timeout_count as f64,
                )
            }));
            let cost_reduction = mean_defined(
                reports
                    .iter()
                    .map(|f| reduction_ratio(f.policies[i].average_cost, f.policies[j].average_cost)),
            );
            reductions.push(Reduction {
                policy: p.name.clone(),
                baseline: b.name.clone(),
                timeout_reduction,
                cost_reduction,
            });
        }
    }

    Ok(CvReport {
        k,
        seed,
        folds: reports,
        reductions,
        excluded_tests: folds.excluded,
        warnings: folds.warnings,
    })
}

/// Whole-dataset totals per policy. Fitted policies are fitted on all data.
pub fn compare_policies(
    dataset: &ExecutionDataset,
    policies: &[TimeoutPolicy],
    config: &OptimizationConfig,
) -> Result<PolicyComparison> {
    config.validate()?;
    let samples = dataset.pooled_by_test();
    check_coverage(policies, &samples)?;
    let prepared: Vec<PreparedSample> = samples
        .iter()
        .map(|s| PreparedSample::new(&s.durations))
        .collect::<Result<_>>()?;

    let mut totals = Vec::with_capacity(policies.len());
    for p in policies {
        let mut values = Vec::with_capacity(samples.len());
        let mut timeouts = 0;
        let mut cost = 0.0;
        for (s, prep) in samples.iter().zip(&prepared) {
            let value = match p.fixed_value(&s.test_id)? {
                Some(v) => v,
                None => optimize_timeout(s, config)?.optimal_timeout,
            };
            let t = f64::from(value) * config.grid_unit;
            timeouts += prep.exceed_count(t);
            cost += evaluation_cost(prep, t, config.m);
            values.push(f64::from(value));
        }
        values.sort_by(f64::total_cmp);
        totals.push(PolicyTotals {
            policy: p.name.clone(),
            timeout_count: timeouts,
            average_cost: if samples.is_empty() { 0.0 } else { cost / samples.len() as f64 },
            median_timeout: if values.is_empty() { 0.0 } else { quantile_sorted(&values, 0.5) },
        });
    }

    let ratio = |a: f64, b: f64| (b > 0.0).then(|| a / b);
    let deltas = totals
        .iter()
        .skip(1)
        .map(|t| {
            let base = &totals[0];
            PolicyDelta {
                policy: t.policy.clone(),
                baseline: base.policy.clone(),
                timeout_count_delta: t.timeout_count as i64 - base.timeout_count as i64,
                average_cost_ratio: ratio(t.average_cost, base.average_cost),
                median_timeout_ratio: ratio(t.median_timeout, base.median_timeout),
            }
        })
        .collect();
    Ok(PolicyComparison { totals, deltas })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: &str, n: usize) -> TestSample {
        TestSample::from_durations(id, (0..n).map(|i| 10.0 + i as f64).collect())
    }

    fn fold_sizes(f: &FoldAssignment, id: &str) -> Vec<usize> {
        (0..f.k).map(|i| f.indices(id, i).len()).collect()
    }

    #[test]
    fn ten_executions_five_folds() {
        let f = make_folds_for(&[sample("a", 10)], 5, 1).unwrap();
        assert_eq!(fold_sizes(&f, "a"), vec![2; 5]);
    }

    #[test]
    fn seven_executions_five_folds() {
        let f = make_folds_for(&[sample("a", 7)], 5, 1).unwrap();
        assert_eq!(fold_sizes(&f, "a"), vec![2, 2, 1, 1, 1]);
    }

    #[test]
    fn folds_are_deterministic() {
        let s = [sample("a", 37), sample("b", 12)];
        assert_eq!(make_folds_for(&s, 5, 9).unwrap(), make_folds_for(&s, 5, 9).unwrap());
        assert_ne!(make_folds_for(&s, 5, 9).unwrap(), make_folds_for(&s, 5, 10).unwrap());
    }

    #[test]
    fn small_tests_excluded_and_bad_k() {
        let f = make_folds_for(&[sample("a", 3), sample("b", 9)], 5, 0).unwrap();
        assert_eq!(f.excluded, vec!["a".to_string()]);
        assert_eq!(f.warnings.len(), 1);
        assert!(make_folds_for(&[sample("a", 3)], 1, 0).is_err());
    }

    #[test]
    fn timeout_counting() {
        assert_eq!(count_timeouts(&TestSample::from_durations("a", vec![]), 1.0), 0);
        let s = TestSample::from_durations("a", vec![3000.0, 4200.0, 7800.0]);
        assert_eq!(count_timeouts(&s, 7200.0), 1);
        assert_eq!(count_timeouts(&s, 7800.0), 0);
    }

    #[test]
    fn missing_policy_value_names_test() {
        let ds = ExecutionDataset::from_samples(&[sample("a", 10), sample("b", 10)]);
        let policy = TimeoutPolicy::original(BTreeMap::from([("a".to_string(), 1)]));
        let err = cross_validate(&ds, &[policy], &OptimizationConfig::default(), 5, 0).unwrap_err();
        assert!(err.to_string().contains("\"b\""), "{err}");
    }

    #[test]
    fn single_and_identical_policy_comparisons() {
        let ds = ExecutionDataset::from_samples(&[sample("a", 10), sample("b", 10)]);
        let cfg = OptimizationConfig::default();
        let one = compare_policies(&ds, &[TimeoutPolicy::static_global(1)], &cfg).unwrap();
        assert_eq!(one.totals.len(), 1);
        assert!(one.deltas.is_empty());

        let p = TimeoutPolicy::static_global(1);
        let two = compare_policies(&ds, &[p.clone(), p.named("again")], &cfg).unwrap();
        assert_eq!(two.totals[0].timeout_count, two.totals[1].timeout_count);
        assert_eq!(two.totals[0].average_cost, two.totals[1].average_cost);
        assert_eq!(two.totals[0].median_timeout, two.totals[1].median_timeout);
        assert_eq!(two.deltas[0].timeout_count_delta, 0);
    }

    #[test]
    fn count_is_n_times_exceedance() {
        let s = sample("a", 33);
        for t in [0.0, 12.5, 20.0, 42.0, 100.0] {
            let p = crate::optimizer::empirical_exceedance(&s, t).unwrap();
            let scaled = p * s.len() as f64;
            assert!((scaled - count_timeouts(&s, t) as f64).abs() < 1e-9);
        }
    }
}
