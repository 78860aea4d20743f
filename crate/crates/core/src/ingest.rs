//! Loading and validation of execution datasets and timeout-change histories.
//!
//! Execution rows use the fields `test_id`, `revision_id`, `started_at`
//! (ISO-8601, UTC), `duration_seconds`, `verdict` (`pass`, `fail` or
//! `timeout`) and an optional boolean `interrupted`. CSV files use the same
//! names as header columns. Bad rows are rejected and counted; only an
//! unreadable file or a CSV header missing a required column is fatal.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{ExecutionDataset, ExecutionRecord, Verdict};

/// Censored-fraction warning threshold used when none is configured.
pub const DEFAULT_CENSORED_THRESHOLD: f64 = 0.05;

const EXECUTION_COLUMNS: [&str; 5] = [
    "test_id",
    "revision_id",
    "started_at",
    "duration_seconds",
    "verdict",
];
const CHANGE_COLUMNS: [&str; 3] = ["test_id", "changed_at", "new_value"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Jsonl,
    Csv,
}

impl InputFormat {
    /// Guesses the format from a file extension; anything but `.csv` is JSONL.
    pub fn from_path(path: &Path) -> InputFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => InputFormat::Csv,
            _ => InputFormat::Jsonl,
        }
    }
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(InputFormat::Jsonl),
            "csv" => Ok(InputFormat::Csv),
            other => Err(format!("unknown input format {other:?}")),
        }
    }
}

/// Row accounting for one loaded file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub accepted: usize,
    pub rejected: usize,
    pub reasons: BTreeMap<String, usize>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    fn reject(&mut self, reason: &str) {
        self.rejected += 1;
        *self.reasons.entry(reason.to_string()).or_default() += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub test_count: usize,
    pub execution_count: usize,
    pub revision_count: usize,
    pub censored_fraction: f64,
}

/// One timeout configuration change. Values are whole minutes; a missing
/// `old_value` marks the creation of the timeout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeoutChangeRecord {
    pub test_id: String,
    pub changed_at: DateTime<Utc>,
    pub old_value: Option<u32>,
    pub new_value: u32,
}

/// Options for [`load_executions_with`].
#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub censored_threshold: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            censored_threshold: DEFAULT_CENSORED_THRESHOLD,
        }
    }
}

pub fn load_executions(
    path: &Path,
    format: InputFormat,
) -> Result<(ExecutionDataset, ValidationReport)> {
    load_executions_with(path, format, LoadOptions::default())
}

pub fn load_executions_with(
    path: &Path,
    format: InputFormat,
    options: LoadOptions,
) -> Result<(ExecutionDataset, ValidationReport)> {
    let mut report = ValidationReport::default();
    let rows = read_rows(path, format, &EXECUTION_COLUMNS)?;
    let mut records = Vec::with_capacity(rows.len());
    for row in rows {
        match row.and_then(|fields| parse_execution(&fields)) {
            Ok(rec) => {
                report.accepted += 1;
                records.push(rec);
            }
            Err(reason) => report.reject(reason),
        }
    }
    let dataset = ExecutionDataset::from_records(records);
    for sample in dataset.samples() {
        let fraction = sample.censored_count as f64 / sample.len() as f64;
        if fraction > options.censored_threshold {
            report.warnings.push(format!(
                "test {} on revision {}: censored fraction {:.2} exceeds {:.2}",
                sample.test_id, sample.revision_id, fraction, options.censored_threshold
            ));
        }
    }
    Ok((dataset, report))
}

pub fn load_timeout_changes(
    path: &Path,
    format: InputFormat,
) -> Result<(Vec<TimeoutChangeRecord>, ValidationReport)> {
    let mut report = ValidationReport::default();
    let mut changes = Vec::new();
    for row in read_rows(path, format, &CHANGE_COLUMNS)? {
        match row.and_then(|fields| parse_change(&fields)) {
            Ok(c) => {
                report.accepted += 1;
                changes.push(c);
            }
            Err(reason) => report.reject(reason),
        }
    }
    changes.sort_by(|a, b| {
        (a.test_id.as_str(), a.changed_at).cmp(&(b.test_id.as_str(), b.changed_at))
    });
    Ok((changes, report))
}

pub fn summarize(dataset: &ExecutionDataset) -> DatasetSummary {
    let mut tests = HashSet::new();
    let mut revisions = HashSet::new();
    let mut executions = 0;
    let mut censored = 0;
    for s in dataset.samples() {
        tests.insert(s.test_id.as_str());
        revisions.insert(s.revision_id.as_str());
        executions += s.len();
        censored += s.censored_count;
    }
    DatasetSummary {
        test_count: tests.len(),
        execution_count: executions,
        revision_count: revisions.len(),
        censored_fraction: if executions == 0 {
            0.0
        } else {
            censored as f64 / executions as f64
        },
    }
}

/// Writes records in the JSONL execution format, one object per line.
pub fn write_executions_jsonl<W: Write>(records: &[ExecutionRecord], mut out: W) -> Result<()> {
    for r in records {
        let row = serde_json::json!({
            "test_id": r.test_id,
            "revision_id": r.revision_id,
            "started_at": format_timestamp(&r.started_at),
            "duration_seconds": r.duration,
            "verdict": r.verdict.as_str(),
            "interrupted": r.interrupted,
        });
        serde_json::to_writer(&mut out, &row)?;
        out.write_all(b"\n").map_err(|source| Error::Io {
            path: "<output>".into(),
            source,
        })?;
    }
    Ok(())
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// A row as loosely-typed fields; `Err` carries a rejection reason.
type Row = std::result::Result<BTreeMap<String, Value>, &'static str>;

fn read_rows(path: &Path, format: InputFormat, required: &[&str]) -> Result<Vec<Row>> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    match format {
        InputFormat::Jsonl => {
            let mut rows = Vec::new();
            for line in BufReader::new(file).lines() {
                let line = line.map_err(io_err)?;
                if line.trim().is_empty() {
                    continue;
                }
                rows.push(match serde_json::from_str::<Value>(&line) {
                    Ok(Value::Object(map)) => Ok(map.into_iter().collect()),
                    _ => Err("malformed row"),
                });
            }
            Ok(rows)
        }
        InputFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
            let headers = reader.headers()?.clone();
            for col in required {
                if !headers.iter().any(|h| h.trim() == *col) {
                    return Err(Error::MalformedHeader {
                        path: path.to_path_buf(),
                        reason: format!("missing column {col:?}"),
                    });
                }
            }
            let mut rows = Vec::new();
            for record in reader.records() {
                let record = match record {
                    Ok(r) if r.len() == headers.len() => r,
                    Ok(_) | Err(_) => {
                        rows.push(Err("malformed row"));
                        continue;
                    }
                };
                let fields = headers
                    .iter()
                    .zip(record.iter())
                    .filter(|(_, v)| !v.trim().is_empty())
                    .map(|(h, v)| (h.trim().to_string(), Value::String(v.trim().to_string())))
                    .collect();
                rows.push(Ok(fields));
            }
            Ok(rows)
        }
    }
}

fn text_field(fields: &BTreeMap<String, Value>, name: &str) -> Option<String> {
    match fields.get(name)? {
        Value::String(s) if !s.is_empty() => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn number_field(fields: &BTreeMap<String, Value>, name: &str) -> Option<std::result::Result<f64, ()>> {
    match fields.get(name)? {
        Value::Null => None,
        Value::Number(n) => Some(n.as_f64().ok_or(())),
        Value::String(s) => Some(s.parse::<f64>().map_err(|_| ())),
        _ => Some(Err(())),
    }
}

fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S")
        .ok()
        .map(|n| n.and_utc())
}

fn parse_execution(fields: &BTreeMap<String, Value>) -> std::result::Result<ExecutionRecord, &'static str> {
    let test_id = text_field(fields, "test_id").ok_or("missing id")?;
    let revision_id = text_field(fields, "revision_id").ok_or("missing id")?;
    let started_at = text_field(fields, "started_at")
        .as_deref()
        .and_then(parse_timestamp)
        .ok_or("invalid timestamp")?;
    let duration = match number_field(fields, "duration_seconds") {
        Some(Ok(d)) if d.is_finite() => d,
        _ => return Err("invalid duration"),
    };
    if duration < 0.0 {
        return Err("negative duration");
    }
    let verdict = text_field(fields, "verdict")
        .as_deref()
        .and_then(Verdict::parse)
        .ok_or("unknown verdict")?;
    let interrupted = match fields.get("interrupted") {
        None | Some(Value::Null) => false,
        Some(Value::Bool(b)) => *b,
        Some(Value::String(s)) => match s.to_ascii_lowercase().as_str() {
            "true" | "1" => true,
            "false" | "0" => false,
            _ => return Err("malformed row"),
        },
        Some(_) => return Err("malformed row"),
    };
    Ok(ExecutionRecord {
        test_id,
        revision_id,
        started_at,
        duration,
        verdict,
        interrupted,
    })
}

fn minutes_value(v: f64) -> std::result::Result<u32, &'static str> {
    if v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err("non-integer value");
    }
    if v < 1.0 {
        return Err("non-positive value");
    }
    Ok(v as u32)
}

fn parse_change(fields: &BTreeMap<String, Value>) -> std::result::Result<TimeoutChangeRecord, &'static str> {
    let test_id = text_field(fields, "test_id").ok_or("missing id")?;
    let changed_at = text_field(fields, "changed_at")
        .as_deref()
        .and_then(parse_timestamp)
        .ok_or("invalid timestamp")?;
    let new_value = match number_field(fields, "new_value") {
        Some(Ok(v)) => minutes_value(v)?,
        _ => return Err("missing value"),
    };
    let old_value = match number_field(fields, "old_value") {
        None => None,
        Some(Ok(v)) => Some(minutes_value(v)?),
        Some(Err(())) => return Err("malformed row"),
    };
    Ok(TimeoutChangeRecord {
        test_id,
        changed_at,
        old_value,
        new_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file_with(contents: &str, suffix: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    const ROW: &str = r#"{"test_id":"A","revision_id":"r1","started_at":"2023-05-01T10:00:00Z","duration_seconds":12.5,"verdict":"pass"}"#;

    #[test]
    fn three_valid_jsonl_rows() {
        let f = file_with(&format!("{ROW}\n{ROW}\n{ROW}\n"), ".jsonl");
        let (ds, report) = load_executions(f.path(), InputFormat::Jsonl).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(report.accepted, 3);
        assert_eq!(report.rejected, 0);
    }

    #[test]
    fn negative_duration_rejected() {
        let bad = ROW.replace("12.5", "-4");
        let f = file_with(&format!("{ROW}\n{bad}\n"), ".jsonl");
        let (ds, report) = load_executions(f.path(), InputFormat::Jsonl).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(report.rejected, 1);
        assert_eq!(report.reasons["negative duration"], 1);
    }

    #[test]
    fn other_rejections_are_counted_not_fatal() {
        let rows = [
            ROW.replace("\"pass\"", "\"skipped\""),
            ROW.replace("\"A\"", "\"\""),
            "{not json".to_string(),
            ROW.to_string(),
        ];
        let f = file_with(&rows.join("\n"), ".jsonl");
        let (_, report) = load_executions(f.path(), InputFormat::Jsonl).unwrap();
        assert_eq!(report.accepted + report.rejected, 4);
        assert_eq!(report.reasons["unknown verdict"], 1);
        assert_eq!(report.reasons["missing id"], 1);
        assert_eq!(report.reasons["malformed row"], 1);
    }

    #[test]
    fn censored_fraction_warning() {
        let mut lines = Vec::new();
        for i in 0..10 {
            let verdict = if i < 6 { "timeout" } else { "pass" };
            lines.push(format!(
                r#"{{"test_id":"A","revision_id":"r1","started_at":"2023-05-01T10:00:0{i}Z","duration_seconds":60,"verdict":"{verdict}","interrupted":{}}}"#,
                i < 6
            ));
        }
        let f = file_with(&lines.join("\n"), ".jsonl");
        let (ds, report) = load_executions(f.path(), InputFormat::Jsonl).unwrap();
        assert_eq!(ds.sample("A", "r1").unwrap().censored_count, 6);
        assert_eq!(report.warnings.len(), 1);
        assert!(report.warnings[0].contains("censored fraction 0.60 exceeds 0.05"));
    }

    #[test]
    fn csv_matches_jsonl() {
        let csv = "test_id,revision_id,started_at,duration_seconds,verdict,interrupted\n\
                   A,r1,2023-05-01T10:00:00Z,12.5,pass,\n\
                   A,r1,2023-05-01T10:01:00Z,30,timeout,true\n\
                   B,r1,2023-05-01T10:02:00Z,-1,pass,false\n";
        let f = file_with(csv, ".csv");
        let (ds, report) = load_executions(f.path(), InputFormat::Csv).unwrap();
        assert_eq!(report.accepted, 2);
        assert_eq!(report.reasons["negative duration"], 1);
        assert!(ds.records()[1].interrupted);
        assert!(!ds.records()[0].interrupted);
    }

    #[test]
    fn csv_missing_column_is_fatal() {
        let f = file_with("test_id,revision_id,verdict\nA,r,pass\n", ".csv");
        let err = load_executions(f.path(), InputFormat::Csv).unwrap_err();
        assert!(matches!(err, Error::MalformedHeader { .. }));
    }

    #[test]
    fn missing_file_is_fatal() {
        let err = load_executions(Path::new("/nonexistent/x.jsonl"), InputFormat::Jsonl).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn loading_is_idempotent() {
        let f = file_with(&format!("{ROW}\n{}\n", ROW.replace("12.5", "3")), ".jsonl");
        let a = load_executions(f.path(), InputFormat::Jsonl).unwrap();
        let b = load_executions(f.path(), InputFormat::Jsonl).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn timeout_changes_sorted_and_validated() {
        let csv = "test_id,changed_at,old_value,new_value\n\
                   A,2020-02-01T00:00:00Z,15,25\n\
                   B,2019-01-01T00:00:00Z,,10\n\
                   A,2019-01-01T00:00:00Z,,15\n\
                   A,2021-01-01T00:00:00Z,25,0\n";
        let f = file_with(csv, ".csv");
        let (changes, report) = load_timeout_changes(f.path(), InputFormat::Csv).unwrap();
        assert_eq!(report.rejected, 1);
        assert_eq!(report.reasons["non-positive value"], 1);
        let ids: Vec<_> = changes.iter().map(|c| (c.test_id.as_str(), c.old_value, c.new_value)).collect();
        assert_eq!(ids, vec![("A", None, 15), ("A", Some(15), 25), ("B", None, 10)]);
    }

    #[test]
    fn timeout_changes_jsonl() {
        let rows = "{\"test_id\":\"A\",\"changed_at\":\"2019-01-01T00:00:00Z\",\"old_value\":null,\"new_value\":15}\n\
                    {\"test_id\":\"A\",\"changed_at\":\"2019-02-01T00:00:00Z\",\"old_value\":15,\"new_value\":25}\n";
        let f = file_with(rows, ".jsonl");
        let (changes, _) = load_timeout_changes(f.path(), InputFormat::Jsonl).unwrap();
        assert_eq!(changes.len(), 2);
        assert_eq!(changes[0].old_value, None);
        assert_eq!(changes[1].old_value, Some(15));
    }

    #[test]
    fn summaries() {
        assert_eq!(
            summarize(&ExecutionDataset::default()),
            DatasetSummary {
                test_count: 0,
                execution_count: 0,
                revision_count: 0,
                censored_fraction: 0.0
            }
        );
        let t0 = DateTime::<Utc>::from_timestamp(0, 0).unwrap();
        let mut records = Vec::new();
        for test in ["a", "b"] {
            for rev in ["r1", "r2"] {
                for _ in 0..5 {
                    records.push(ExecutionRecord {
                        test_id: test.into(),
                        revision_id: rev.into(),
                        started_at: t0,
                        duration: 1.0,
                        verdict: Verdict::Pass,
                        interrupted: false,
                    });
                }
            }
        }
        let s = summarize(&ExecutionDataset::from_records(records));
        assert_eq!((s.test_count, s.execution_count, s.revision_count), (2, 20, 2));
    }

    #[test]
    fn written_jsonl_reloads() {
        let t0 = DateTime::<Utc>::from_timestamp(1_683_000_000, 0).unwrap();
        let records = vec![ExecutionRecord {
            test_id: "A".into(),
            revision_id: "r".into(),
            started_at: t0,
            duration: 42.25,
            verdict: Verdict::Timeout,
            interrupted: true,
        }];
        let mut buf = Vec::new();
        write_executions_jsonl(&records, &mut buf).unwrap();
        let f = file_with(std::str::from_utf8(&buf).unwrap(), ".jsonl");
        let (ds, _) = load_executions(f.path(), InputFormat::Jsonl).unwrap();
        assert_eq!(ds.records(), &records[..]);
    }
}
