//! Descriptive flakiness statistics: per-revision flakiness rates and
//! failure-rate bins, their evolution over repetitions, the share of flaky
//! failures caused by timeouts, and timeout-change history statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TimeoutChangeRecord;
use crate::model::{failure_count, is_flaky, ExecutionDataset, TestSample, Verdict};

/// Number of failure-rate bins: (0,.2], (.2,.4], (.4,.6], (.6,.8], (.8,1).
pub const BIN_COUNT: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlakinessReport {
    pub revision_id: String,
    /// Largest number of executions of any test on the revision.
    pub repetition_count: usize,
    pub unique_tests: usize,
    pub flaky_tests: usize,
    pub flakiness_rate: f64,
    pub bin_counts: [usize; BIN_COUNT],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionPoint {
    pub repetitions_used: usize,
    pub flakiness_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionSeries {
    pub revision_id: String,
    pub points: Vec<EvolutionPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeoutShare {
    pub share: f64,
    pub flaky_failures: usize,
    pub timeout_failures: usize,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlakinessComparison {
    pub a: FlakinessReport,
    pub b: FlakinessReport,
    /// `b.flakiness_rate - a.flakiness_rate`.
    pub rate_delta: f64,
    /// `(a - b) / a`; zero when both rates are zero, absent when only `a` is.
    pub relative_reduction: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeoutChangeStats {
    pub tests_with_changes: usize,
    pub changes_per_test_median: f64,
    pub increase_count: usize,
    pub decrease_count: usize,
    pub increase_ratios: Option<Quartiles>,
    pub decrease_ratios: Option<Quartiles>,
}

/// Bin index of a failure rate `failures / n` with 0 < failures < n.
///
/// Intervals are left-open and right-closed, so a rate of exactly 0.2 lands
/// in bin 0. Integer arithmetic keeps the edges exact.
fn bin_index(failures: usize, n: usize) -> usize {
    debug_assert!(failures > 0 && failures < n);
    (BIN_COUNT * failures).div_ceil(n) - 1
}

fn report_for<'a>(
    revision_id: &str,
    samples: impl Iterator<Item = &'a TestSample>,
) -> FlakinessReport {
    let mut report = FlakinessReport {
        revision_id: revision_id.to_string(),
        repetition_count: 0,
        unique_tests: 0,
        flaky_tests: 0,
        flakiness_rate: 0.0,
        bin_counts: [0; BIN_COUNT],
    };
    for s in samples.filter(|s| !s.is_empty()) {
        report.unique_tests += 1;
        report.repetition_count = report.repetition_count.max(s.len());
        let failures = failure_count(&s.verdicts);
        if failures > 0 && failures < s.len() {
            report.flaky_tests += 1;
            report.bin_counts[bin_index(failures, s.len())] += 1;
        }
    }
    if report.unique_tests > 0 {
        report.flakiness_rate = report.flaky_tests as f64 / report.unique_tests as f64;
    }
    report
}

pub fn flakiness_report(dataset: &ExecutionDataset, revision_id: &str) -> Result<FlakinessReport> {
    if !dataset.has_revision(revision_id) {
        return Err(Error::UnknownRevision(revision_id.to_string()));
    }
    Ok(report_for(revision_id, dataset.revision_samples(revision_id)))
}

/// Flakiness rate after the first `step`, `2 * step`, ... executions of each
/// test. The last point always covers every execution.
pub fn flakiness_evolution(
    dataset: &ExecutionDataset,
    revision_id: &str,
    step: usize,
) -> Result<EvolutionSeries> {
    if step < 1 {
        return Err(Error::InvalidArgument("step must be at least 1".into()));
    }
    if !dataset.has_revision(revision_id) {
        return Err(Error::UnknownRevision(revision_id.to_string()));
    }
    let samples: Vec<&TestSample> = dataset.revision_samples(revision_id).collect();
    let max_n = samples.iter().map(|s| s.len()).max().unwrap_or(0);

    let mut cutoffs: Vec<usize> = (1..).map(|i| i * step).take_while(|&k| k <= max_n).collect();
    if cutoffs.last() != Some(&max_n) && max_n > 0 {
        cutoffs.push(max_n);
    }

    let points = cutoffs
        .into_iter()
        .map(|k| {
            let mut tests = 0;
            let mut flaky = 0;
            for s in &samples {
                let prefix = &s.verdicts[..k.min(s.len())];
                if prefix.is_empty() {
                    continue;
                }
                tests += 1;
                let failures = failure_count(prefix);
                if failures > 0 && failures < prefix.len() {
                    flaky += 1;
                }
            }
            EvolutionPoint {
                repetitions_used: k,
                flakiness_rate: if tests == 0 { 0.0 } else { flaky as f64 / tests as f64 },
            }
        })
        .collect();
    Ok(EvolutionSeries {
        revision_id: revision_id.to_string(),
        points,
    })
}

/// Among failing executions of flaky (test, revision) pairs, the fraction
/// that timed out.
pub fn timeout_failure_share(dataset: &ExecutionDataset) -> TimeoutShare {
    let mut flaky_failures = 0;
    let mut timeout_failures = 0;
    for s in dataset.samples() {
        if !matches!(is_flaky(&s.verdicts), Ok(true)) {
            continue;
        }
        for v in &s.verdicts {
            match v {
                Verdict::Pass => {}
                Verdict::Fail => flaky_failures += 1,
                Verdict::Timeout => {
                    flaky_failures += 1;
                    timeout_failures += 1;
                }
            }
        }
    }
    if flaky_failures == 0 {
        return TimeoutShare {
            share: 0.0,
            flaky_failures,
            timeout_failures,
            warning: Some("no flaky failures in dataset; timeout share defined as 0".into()),
        };
    }
    TimeoutShare {
        share: timeout_failures as f64 / flaky_failures as f64,
        flaky_failures,
        timeout_failures,
        warning: None,
    }
}

pub fn compare_flakiness(
    dataset_a: &ExecutionDataset,
    dataset_b: &ExecutionDataset,
    revision_a: &str,
    revision_b: &str,
) -> Result<FlakinessComparison> {
    let a = flakiness_report(dataset_a, revision_a)?;
    let b = flakiness_report(dataset_b, revision_b)?;
    let mut warnings = Vec::new();
    if a.repetition_count != b.repetition_count {
        warnings.push(format!(
            "repetition counts differ ({} vs {}); flakiness rates are not comparable",
            a.repetition_count, b.repetition_count
        ));
    }
    let relative_reduction = if a.flakiness_rate > 0.0 {
        Some((a.flakiness_rate - b.flakiness_rate) / a.flakiness_rate)
    } else if b.flakiness_rate == 0.0 {
        Some(0.0)
    } else {
        None
    };
    Ok(FlakinessComparison {
        rate_delta: b.flakiness_rate - a.flakiness_rate,
        relative_reduction,
        a,
        b,
        warnings,
    })
}

/// Quantile by linear interpolation between closest ranks of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(Quartiles {
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
    })
}

pub fn timeout_change_stats(changes: &[TimeoutChangeRecord]) -> TimeoutChangeStats {
    let mut per_test: BTreeMap<&str, usize> = BTreeMap::new();
    let mut increases = Vec::new();
    let mut decreases = Vec::new();
    for c in changes {
        let Some(old) = c.old_value else { continue };
        *per_test.entry(&c.test_id).or_default() += 1;
        let ratio = f64::from(c.new_value) / f64::from(old);
        if ratio > 1.0 {
            increases.push(ratio);
        } else if ratio < 1.0 {
            decreases.push(ratio);
        }
    }
    let counts: Vec<f64> = per_test.values().map(|&c| c as f64).collect();
    TimeoutChangeStats {
        tests_with_changes: per_test.len(),
        changes_per_test_median: quartiles(&counts).map_or(0.0, |q| q.median),
        increase_count: increases.len(),
        decrease_count: decreases.len(),
        increase_ratios: quartiles(&increases),
        decrease_ratios: quartiles(&decreases),
    }
}
