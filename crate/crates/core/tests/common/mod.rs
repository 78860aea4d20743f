//! Constructed fixtures shared by the integration suites.
#![allow(dead_code)]

use std::path::Path;

use chrono::{DateTime, Utc};
use flaky_timeouts::ingest::write_executions_jsonl;
use flaky_timeouts::{ExecutionDataset, ExecutionRecord, TestSample, Verdict};

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// A 536-run sample shaped like the worked timeout example: 85% of runs
/// finish within 3 minutes, 96% within 6, the slowest at about 30.8 minutes.
///
/// Frozen properties (checked numerically when the fixture was built):
/// truncated mean 1.55 min at t = 3 and 1.77 min at t = 6, raw mean 2.12 min,
/// empirical cost argmin 6 on the grid [3, 62].
pub fn worked_example_sample() -> TestSample {
    let mut durations = linspace(20.0, 135.48, 456);
    durations.extend(linspace(181.0, 200.0, 40));
    durations.extend(linspace(302.6, 360.0, 19));
    durations.extend(linspace(400.0, 1296.6, 20));
    durations.push(1850.0);
    TestSample::from_durations("worked-example", durations)
}

/// A fleet whose static-timeout cost curve bottoms out at 115 minutes:
/// one test needs just under 115 minutes, one hangs in 10% of its runs
/// (cost grows with the timeout), and two short tests add a flat offset.
pub fn sweep_fleet() -> Vec<TestSample> {
    let minutes = |xs: Vec<f64>| xs.into_iter().map(|m| m * 60.0).collect::<Vec<_>>();
    let mut hanging = vec![10.0; 90];
    hanging.extend(vec![1000.0; 10]);
    vec![
        TestSample::from_durations("slow-build", minutes(linspace(112.0, 114.5, 20))),
        TestSample::from_durations("sometimes-hangs", minutes(hanging)),
        TestSample::from_durations("quick-a", minutes(linspace(2.0, 9.0, 30))),
        TestSample::from_durations("quick-b", minutes(linspace(20.0, 40.0, 30))),
    ]
}

pub fn t0() -> DateTime<Utc> {
    DateTime::<Utc>::from_timestamp(1_682_899_200, 0).unwrap()
}

/// Records for `(test, revision, verdicts)` triples, one second apart.
pub fn records(tests: &[(String, String, Vec<Verdict>)]) -> Vec<ExecutionRecord> {
    let mut out = Vec::new();
    let mut tick = 0;
    for (test, rev, verdicts) in tests {
        for v in verdicts {
            out.push(ExecutionRecord {
                test_id: test.clone(),
                revision_id: rev.clone(),
                started_at: t0() + chrono::Duration::seconds(tick),
                duration: 60.0,
                verdict: *v,
                interrupted: false,
            });
            tick += 1;
        }
    }
    out
}

/// `n` runs of which the first `fails` fail with `verdict`.
pub fn runs(fails: usize, n: usize, verdict: Verdict) -> Vec<Verdict> {
    (0..n).map(|i| if i < fails { verdict } else { Verdict::Pass }).collect()
}

/// A revision with `tests` tests, `flaky` of them flaky, `reps` runs each.
pub fn revision_with_flaky(rev: &str, tests: usize, flaky: usize, reps: usize) -> ExecutionDataset {
    let rows: Vec<_> = (0..tests)
        .map(|i| {
            let fails = if i < flaky { 1 + i % (reps - 1) } else { 0 };
            (format!("t{i:04}"), rev.to_string(), runs(fails, reps, Verdict::Fail))
        })
        .collect();
    ExecutionDataset::from_records(records(&rows))
}

pub fn write_jsonl(dataset: &ExecutionDataset, path: &Path) {
    let mut buf = Vec::new();
    write_executions_jsonl(dataset.records(), &mut buf).unwrap();
    std::fs::write(path, buf).unwrap();
}
