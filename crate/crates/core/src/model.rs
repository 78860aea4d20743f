//! Domain types shared by every other module: execution records, per-test
//! samples, sample statistics and the verdict predicates.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome of a single test execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Timeout,
}

impl Verdict {
    /// Failure indicator: every non-pass outcome counts as a failure.
    pub fn is_failure(self) -> bool {
        !matches!(self, Verdict::Pass)
    }

    pub fn parse(s: &str) -> Option<Verdict> {
        match s {
            "pass" => Some(Verdict::Pass),
            "fail" => Some(Verdict::Fail),
            "timeout" => Some(Verdict::Timeout),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Timeout => "timeout",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One test execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub test_id: String,
    pub revision_id: String,
    pub started_at: DateTime<Utc>,
    /// Wall-clock duration in seconds, never negative.
    pub duration: f64,
    pub verdict: Verdict,
    /// Whether the framework actually killed the run.
    pub interrupted: bool,
}

impl ExecutionRecord {
    /// A timed-out run that was killed: its duration is a lower bound only.
    pub fn is_censored(&self) -> bool {
        self.verdict == Verdict::Timeout && self.interrupted
    }
}

/// Identity of a sample: one test on one revision.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SampleKey {
    pub test_id: String,
    pub revision_id: String,
}

impl SampleKey {
    pub fn new(test_id: impl Into<String>, revision_id: impl Into<String>) -> Self {
        SampleKey {
            test_id: test_id.into(),
            revision_id: revision_id.into(),
        }
    }
}

/// All executions of one test on one revision, ordered by start time
/// (ties keep input order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSample {
    pub test_id: String,
    pub revision_id: String,
    pub durations: Vec<f64>,
    pub verdicts: Vec<Verdict>,
    pub censored_count: usize,
}

impl TestSample {
    /// Builds a sample of passing, uncensored runs. Mostly useful for
    /// optimization, where only durations matter.
    pub fn from_durations(test_id: impl Into<String>, durations: Vec<f64>) -> Self {
        let verdicts = vec![Verdict::Pass; durations.len()];
        TestSample {
            test_id: test_id.into(),
            revision_id: String::new(),
            durations,
            verdicts,
            censored_count: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }

    pub fn key(&self) -> SampleKey {
        SampleKey::new(self.test_id.clone(), self.revision_id.clone())
    }

    /// Sub-sample restricted to the given execution indices, in the order given.
    pub fn select(&self, indices: &[usize]) -> TestSample {
        TestSample {
            test_id: self.test_id.clone(),
            revision_id: self.revision_id.clone(),
            durations: indices.iter().map(|&i| self.durations[i]).collect(),
            verdicts: indices.iter().map(|&i| self.verdicts[i]).collect(),
            // Censoring flags are not tracked per execution here.
            censored_count: 0,
        }
    }

    /// The first `k` executions.
    pub fn prefix(&self, k: usize) -> TestSample {
        let k = k.min(self.len());
        TestSample {
            test_id: self.test_id.clone(),
            revision_id: self.revision_id.clone(),
            durations: self.durations[..k].to_vec(),
            verdicts: self.verdicts[..k].to_vec(),
            censored_count: 0,
        }
    }
}

/// Summary statistics feeding the concentration bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance (divisor n - 1); zero for n = 1.
    pub variance: f64,
    /// Scaled deviation with q_n^2 = ((n + 1) / n) * variance.
    pub q_n: f64,
    pub max: f64,
    pub min: f64,
}

impl SampleStats {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Computes [`SampleStats`] over the durations of a sample.
pub fn sample_stats(sample: &TestSample) -> Result<SampleStats> {
    stats_of(&sample.durations)
}

pub(crate) fn stats_of(durations: &[f64]) -> Result<SampleStats> {
    let n = durations.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let nf = n as f64;
    let mean = durations.iter().sum::<f64>() / nf;
    let variance = if n == 1 {
        0.0
    } else {
        durations.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0)
    };
    let q_n = ((nf + 1.0) / nf * variance).sqrt();
    let (min, max) = durations
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| {
            (lo.min(d), hi.max(d))
        });
    // Rounding in the mean can push it a hair outside [min, max].
    let mean = mean.clamp(min, max);
    Ok(SampleStats {
        n,
        mean,
        variance,
        q_n,
        max,
        min,
    })
}

/// A test is flaky on a revision iff it both passed and failed at least once.
pub fn is_flaky(verdicts: &[Verdict]) -> Result<bool> {
    if verdicts.is_empty() {
        return Err(Error::EmptyVerdicts);
    }
    let failures = failure_count(verdicts);
    Ok(failures > 0 && failures < verdicts.len())
}

/// Fraction of non-pass verdicts.
pub fn failure_rate(verdicts: &[Verdict]) -> Result<f64> {
    if verdicts.is_empty() {
        return Err(Error::EmptyVerdicts);
    }
    Ok(failure_count(verdicts) as f64 / verdicts.len() as f64)
}

pub(crate) fn failure_count(verdicts: &[Verdict]) -> usize {
    verdicts.iter().filter(|v| v.is_failure()).count()
}

/// Revision assigned to samples built without one.
pub const DEFAULT_REVISION: &str = "default";

/// A collection of execution records indexed by (test, revision).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExecutionDataset {
    records: Vec<ExecutionRecord>,
    samples: BTreeMap<SampleKey, TestSample>,
}

impl ExecutionDataset {
    pub fn from_records(records: Vec<ExecutionRecord>) -> Self {
        let mut order: Vec<usize> = (0..records.len()).collect();
        // Stable: equal timestamps keep input order.
        order.sort_by_key(|&i| records[i].started_at);

        let mut samples: BTreeMap<SampleKey, TestSample> = BTreeMap::new();
        for i in order {
            let r = &records[i];
            let sample = samples
                .entry(SampleKey::new(r.test_id.clone(), r.revision_id.clone()))
                .or_insert_with(|| TestSample {
                    test_id: r.test_id.clone(),
                    revision_id: r.revision_id.clone(),
                    durations: Vec::new(),
                    verdicts: Vec::new(),
                    censored_count: 0,
                });
            sample.durations.push(r.duration);
            sample.verdicts.push(r.verdict);
            if r.is_censored() {
                sample.censored_count += 1;
            }
        }
        ExecutionDataset { records, samples }
    }

    /// Builds a dataset from in-memory samples. Start times are synthesized
    /// one second apart in sample order, so execution order is preserved.
    /// Samples without a revision id are placed on [`DEFAULT_REVISION`].
    pub fn from_samples(samples: &[TestSample]) -> Self {
        let t0 = DateTime::<Utc>::from_timestamp(0, 0).expect("epoch");
        let mut records = Vec::new();
        let mut tick = 0i64;
        for s in samples {
            for (&duration, &verdict) in s.durations.iter().zip(&s.verdicts) {
                records.push(ExecutionRecord {
                    test_id: s.test_id.clone(),
                    revision_id: if s.revision_id.is_empty() {
                        DEFAULT_REVISION.to_string()
                    } else {
                        s.revision_id.clone()
                    },
                    started_at: t0 + chrono::Duration::seconds(tick),
                    duration,
                    verdict,
                    interrupted: false,
                });
                tick += 1;
            }
        }
        ExecutionDataset::from_records(records)
    }

    pub fn records(&self) -> &[ExecutionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = &TestSample> {
        self.samples.values()
    }

    pub fn sample(&self, test_id: &str, revision_id: &str) -> Option<&TestSample> {
        self.samples.get(&SampleKey::new(test_id, revision_id))
    }

    /// Samples of one revision, ordered by test id.
    pub fn revision_samples<'a>(
        &'a self,
        revision_id: &'a str,
    ) -> impl Iterator<Item = &'a TestSample> + 'a {
        self.samples
            .values()
            .filter(move |s| s.revision_id == revision_id)
    }

    pub fn has_revision(&self, revision_id: &str) -> bool {
        self.revision_samples(revision_id).next().is_some()
    }

    pub fn revisions(&self) -> Vec<String> {
        let mut revs: Vec<String> = self.samples.keys().map(|k| k.revision_id.clone()).collect();
        revs.sort();
        revs.dedup();
        revs
    }

    pub fn test_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.samples.keys().map(|k| k.test_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// One sample per test with all revisions pooled (revision order, then
    /// start time within each revision). The pooled revision id is `"*"`.
    pub fn pooled_by_test(&self) -> Vec<TestSample> {
        let mut pooled: BTreeMap<&str, TestSample> = BTreeMap::new();
        for s in self.samples.values() {
            let entry = pooled.entry(&s.test_id).or_insert_with(|| TestSample {
                test_id: s.test_id.clone(),
                revision_id: "*".to_string(),
                durations: Vec::new(),
                verdicts: Vec::new(),
                censored_count: 0,
            });
            entry.durations.extend_from_slice(&s.durations);
            entry.verdicts.extend_from_slice(&s.verdicts);
            entry.censored_count += s.censored_count;
        }
        pooled.into_values().collect()
    }
}
