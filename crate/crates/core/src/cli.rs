//! Command-line front end. Every subcommand loads its inputs, calls the
//! library operation and renders the result; no analysis happens here.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Error;
use crate::evaluation::{compare_policies, cross_validate, TimeoutPolicy};
use crate::flakiness::{
    compare_flakiness, flakiness_evolution, flakiness_report, timeout_change_stats,
    timeout_failure_share,
};
use crate::ingest::{self, load_executions, load_timeout_changes, summarize, InputFormat};
use crate::model::ExecutionDataset;
use crate::optimizer::{optimize_all, static_sweep, OptimizationConfig, OptimizationResult, ProbabilityMethod};
use crate::simulator::{generate_workload, simulate_rerun_policy, BaseDistribution, RerunAccounting, WorkloadSpec};

#[derive(Debug, Parser)]
#[command(name = "flaky-timeouts", version, about = "Flakiness analytics and cost-optimal test timeouts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dataset size and censoring overview.
    Summarize {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Flakiness rate, failure-rate bins, evolution and timeout share for one revision.
    Flakiness {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        revision: String,
        /// Repetitions added per evolution point.
        #[arg(long, default_value_t = 10)]
        step: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Compare flakiness of two revisions, possibly from two datasets.
    Compare {
        #[arg(long)]
        input_a: PathBuf,
        #[arg(long)]
        input_b: PathBuf,
        #[arg(long)]
        revision_a: String,
        #[arg(long)]
        revision_b: String,
        #[arg(long, value_enum)]
        input_format: Option<FormatArg>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Statistics over timeout-value change records.
    TimeoutHistory {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Cost-optimal timeout per test.
    Optimize {
        #[command(flatten)]
        input: InputArgs,
        /// Only use executions of this revision (default: all revisions pooled).
        #[arg(long)]
        revision: Option<String>,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Average cost of one global timeout over a range of values.
    Sweep {
        #[command(flatten)]
        input: InputArgs,
        /// Lowest timeout, minutes.
        #[arg(long)]
        lo: u32,
        /// Highest timeout, minutes.
        #[arg(long)]
        hi: u32,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// k-fold cross-validation of optimized vs original and static timeouts.
    Evaluate {
        #[command(flatten)]
        input: InputArgs,
        /// CSV of original timeouts (test_id,timeout_minutes).
        #[arg(long)]
        original: Option<PathBuf>,
        /// Static global timeout to include, minutes.
        #[arg(long = "static")]
        static_timeout: Option<u32>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Generate a synthetic workload and replay it under the rerun policy.
    Simulate {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        tests: usize,
        #[arg(long, default_value_t = 500)]
        runs: usize,
        #[arg(long, value_enum, default_value_t = DistributionArg::Lognormal)]
        distribution: DistributionArg,
        /// Median (lognormal), mean (exponential) or value (constant), minutes.
        #[arg(long, default_value_t = 10.0)]
        scale_minutes: f64,
        #[arg(long, default_value_t = 0.5)]
        sigma: f64,
        #[arg(long, default_value_t = 0.0)]
        outlier_prob: f64,
        #[arg(long, default_value_t = 1.0)]
        outlier_lo: f64,
        #[arg(long, default_value_t = 1.0)]
        outlier_hi: f64,
        #[arg(long, default_value_t = 0.0)]
        hang_prob: f64,
        /// Quantile of the true distribution used as the original timeout.
        #[arg(long, default_value_t = 0.85)]
        percentile: f64,
        #[arg(long, value_enum, default_value_t = AccountingArg::StopOnSuccess)]
        accounting: AccountingArg,
        /// Also write the generated executions as JSONL.
        #[arg(long)]
        write_dataset: Option<PathBuf>,
        /// Also write the original timeouts as CSV.
        #[arg(long)]
        write_policy: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    /// Input format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    input_format: Option<FormatArg>,
}

impl InputArgs {
    fn format(&self) -> InputFormat {
        resolve_format(self.input_format, &self.input)
    }
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output format; guessed from `--out` when omitted, else a table.
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    #[arg(long, default_value = "tolhurst")]
    method: String,
    /// Reruns after a failing execution.
    #[arg(long, default_value_t = 3)]
    m: u32,
    /// Breakage probability.
    #[arg(long, default_value_t = 0.0)]
    pb: f64,
    #[arg(long, default_value_t = 60.0)]
    grid_unit_seconds: f64,
    #[arg(long, default_value_t = 30)]
    min_samples: usize,
    /// Fallback timeout for small samples, minutes.
    #[arg(long, default_value_t = 120.0)]
    fallback: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DistributionArg {
    Lognormal,
    Exponential,
    Constant,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AccountingArg {
    StopOnSuccess,
    FullChain,
}

enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn resolve_format(arg: Option<FormatArg>, path: &Path) -> InputFormat {
    match arg {
        Some(FormatArg::Jsonl) => InputFormat::Jsonl,
        Some(FormatArg::Csv) => InputFormat::Csv,
        None => InputFormat::from_path(path),
    }
}

fn minutes_to_units(minutes: f64, grid_unit: f64) -> CliResult<u32> {
    let units = minutes * 60.0 / grid_unit;
    let rounded = units.round();
    if !(rounded >= 1.0) || (units - rounded).abs() > 1e-9 || rounded > f64::from(u32::MAX) {
        return Err(CliError::Usage(format!(
            "{minutes} minutes is not a positive whole number of {grid_unit}-second grid units"
        )));
    }
    Ok(rounded as u32)
}

fn units_to_minutes(units: u32, grid_unit: f64) -> f64 {
    f64::from(units) * grid_unit / 60.0
}

/// Minutes as a JSON number, integral when possible.
fn minutes_json(units: u32, grid_unit: f64) -> Value {
    let m = units_to_minutes(units, grid_unit);
    if m.fract() == 0.0 && m <= u64::MAX as f64 {
        json!(m as u64)
    } else {
        json!(m)
    }
}

impl ConfigArgs {
    fn build(&self) -> CliResult<OptimizationConfig> {
        let method: ProbabilityMethod = self.method.parse().map_err(CliError::Usage)?;
        let config = OptimizationConfig {
            m: self.m,
            breakage_probability: self.pb,
            probability_method: method,
            grid_unit: self.grid_unit_seconds,
            min_samples: self.min_samples,
            fallback_timeout: 0,
        };
        if !(self.grid_unit_seconds > 0.0) {
            return Err(CliError::Usage("--grid-unit-seconds must be positive".into()));
        }
        let config = OptimizationConfig {
            fallback_timeout: minutes_to_units(self.fallback, self.grid_unit_seconds)?,
            ..config
        };
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(config)
    }
}

struct Rendered {
    json: Value,
    table: String,
    csv: Option<String>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn emit(output: &OutputArgs, rendered: Rendered) -> CliResult<()> {
    let format = output.format.unwrap_or_else(|| match &output.out {
        Some(p) => match p.extension().and_then(|e| e.to_str()) {
            Some("csv") => OutputFormat::Csv,
            Some("json") => OutputFormat::Json,
            _ => OutputFormat::Table,
        },
        None => OutputFormat::Table,
    });
    let text = match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&rendered.json).expect("json values serialize");
            s.push('\n');
            s
        }
        OutputFormat::Table => rendered.table,
        OutputFormat::Csv => rendered
            .csv
            .ok_or_else(|| CliError::Usage("csv output is not available for this subcommand".into()))?,
    };
    match &output.out {
        Some(path) => fs::write(path, text).map_err(|source| {
            CliError::Data(Error::Io {
                path: path.clone(),
                source,
            })
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|source| {
                CliError::Data(Error::Io {
                    path: "<stdout>".into(),
                    source,
                })
            })
        }
    }
}

fn warn(lines: &[String]) {
    for line in lines {
        eprintln!("warning: {line}");
    }
}

fn load(input: &InputArgs) -> CliResult<ExecutionDataset> {
    load_path(&input.input, input.format())
}

fn load_path(path: &Path, format: InputFormat) -> CliResult<ExecutionDataset> {
    let (dataset, report) = load_executions(path, format)?;
    if report.rejected > 0 {
        let reasons: Vec<String> = report.reasons.iter().map(|(r, n)| format!("{r}: {n}")).collect();
        eprintln!(
            "warning: {} of {} rows rejected ({})",
            report.rejected,
            report.accepted + report.rejected,
            reasons.join(", ")
        );
    }
    warn(&report.warnings);
    Ok(dataset)
}

fn filter_revision(dataset: ExecutionDataset, revision: Option<&str>) -> CliResult<ExecutionDataset> {
    match revision {
        None => Ok(dataset),
        Some(rev) => {
            if !dataset.has_revision(rev) {
                return Err(Error::UnknownRevision(rev.to_string()).into());
            }
            let records = dataset
                .records()
                .iter()
                .filter(|r| r.revision_id == rev)
                .cloned()
                .collect();
            Ok(ExecutionDataset::from_records(records))
        }
    }
}

/// Reads a two-column `test_id,timeout_minutes` CSV into grid units.
fn load_policy_csv(path: &Path, grid_unit: f64) -> CliResult<BTreeMap<String, u32>> {
    let file = fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(file);
    let mut values = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(Error::from)?;
        let (Some(id), Some(minutes)) = (row.get(0), row.get(1)) else {
            return Err(CliError::Data(Error::InvalidArgument(format!(
                "{}: expected test_id,timeout_minutes rows",
                path.display()
            ))));
        };
        let minutes: f64 = minutes.trim().parse().map_err(|_| {
            CliError::Data(Error::InvalidArgument(format!("bad timeout {minutes:?} for {id}")))
        })?;
        values.insert(id.trim().to_string(), minutes_to_units(minutes, grid_unit)?);
    }
    Ok(values)
}

fn policy_csv(values: &BTreeMap<String, u32>, grid_unit: f64) -> String {
    let mut out = String::from("test_id,timeout_minutes\n");
    for (id, &v) in values {
        out.push_str(&format!("{id},{}\n", units_to_minutes(v, grid_unit)));
    }
    out
}

fn optimization_json(r: &OptimizationResult) -> Value {
    json!({
        "test_id": r.test_id,
        "optimal_timeout_minutes": minutes_json(r.optimal_timeout, r.grid_unit),
        "expected_cost_seconds": r.expected_cost_at_optimum,
        "probability_method": r.method_used.as_str(),
        "fallback_applied": r.fallback_applied,
    })
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or("n/a".into(), |v| format!("{v:.digits$}"))
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Summarize { input, output } => {
            let summary = summarize(&load(&input)?);
            let table = format!(
                "tests       {}\nexecutions  {}\nrevisions   {}\ncensored    {:.4}\n",
                summary.test_count, summary.execution_count, summary.revision_count, summary.censored_fraction
            );
            emit(&output, Rendered { json: to_value(&summary), table, csv: None })
        }
        Command::Flakiness { input, revision, step, output } => {
            let dataset = load(&input)?;
            let report = flakiness_report(&dataset, &revision)?;
            let evolution = flakiness_evolution(&dataset, &revision, step)?;
            let share = timeout_failure_share(&dataset);
            if let Some(w) = &share.warning {
                warn(std::slice::from_ref(w));
            }
            let mut table = format!(
                "revision          {}\nrepetitions       {}\nunique tests      {}\nflaky tests       {}\nflakiness rate    {:.4}\nbins              {:?}\ntimeout share     {:.4}\n\nrepetitions  flakiness_rate\n",
                report.revision_id,
                report.repetition_count,
                report.unique_tests,
                report.flaky_tests,
                report.flakiness_rate,
                report.bin_counts,
                share.share
            );
            for p in &evolution.points {
                table.push_str(&format!("{:>11}  {:.4}\n", p.repetitions_used, p.flakiness_rate));
            }
            let json = json!({ "report": report, "evolution": evolution, "timeout_share": share });
            emit(&output, Rendered { json, table, csv: None })
        }
        Command::Compare { input_a, input_b, revision_a, revision_b, input_format, output } => {
            let a = load_path(&input_a, resolve_format(input_format, &input_a))?;
            let b = load_path(&input_b, resolve_format(input_format, &input_b))?;
            let cmp = compare_flakiness(&a, &b, &revision_a, &revision_b)?;
            warn(&cmp.warnings);
            let table = format!(
                "{:<20} {:>12} {:>12} {:>10}\n{:<20} {:>12} {:>12} {:>10.4}\n{:<20} {:>12} {:>12} {:>10.4}\n\nrelative reduction {}\n",
                "revision", "repetitions", "flaky", "rate",
                cmp.a.revision_id, cmp.a.repetition_count, cmp.a.flaky_tests, cmp.a.flakiness_rate,
                cmp.b.revision_id, cmp.b.repetition_count, cmp.b.flaky_tests, cmp.b.flakiness_rate,
                fmt_opt(cmp.relative_reduction, 4)
            );
            emit(&output, Rendered { json: to_value(&cmp), table, csv: None })
        }
        Command::TimeoutHistory { input, output } => {
            let (changes, report) = load_timeout_changes(&input.input, input.format())?;
            if report.rejected > 0 {
                eprintln!("warning: {} change rows rejected", report.rejected);
            }
            let stats = timeout_change_stats(&changes);
            let q = |q: Option<crate::flakiness::Quartiles>| {
                q.map_or("n/a".to_string(), |q| format!("{:.2} / {:.2} / {:.2}", q.q1, q.median, q.q3))
            };
            let table = format!(
                "tests with changes        {}\nmedian changes per test   {}\nincreases (q1/med/q3)     {} ({})\ndecreases (q1/med/q3)     {} ({})\n",
                stats.tests_with_changes,
                stats.changes_per_test_median,
                q(stats.increase_ratios),
                stats.increase_count,
                q(stats.decrease_ratios),
                stats.decrease_count
            );
            emit(&output, Rendered { json: to_value(&stats), table, csv: None })
        }
        Command::Optimize { input, revision, config, output } => {
            let config = config.build()?;
            let dataset = filter_revision(load(&input)?, revision.as_deref())?;
            let results = optimize_all(&dataset, &config)?;
            let json = Value::Array(results.iter().map(optimization_json).collect());
            let values: BTreeMap<String, u32> =
                results.iter().map(|r| (r.test_id.clone(), r.optimal_timeout)).collect();
            let mut table = format!(
                "{:<24} {:>10} {:>16} {:>8}  {}\n",
                "test_id", "timeout_m", "cost_s", "p", "method"
            );
            for r in &results {
                table.push_str(&format!(
                    "{:<24} {:>10} {:>16} {:>8}  {}{}\n",
                    r.test_id,
                    units_to_minutes(r.optimal_timeout, r.grid_unit),
                    fmt_opt(r.expected_cost_at_optimum, 3),
                    fmt_opt(r.timeout_probability_at_optimum, 4),
                    r.method_used,
                    if r.fallback_applied { " (fallback)" } else { "" }
                ));
            }
            let csv = policy_csv(&values, config.grid_unit);
            emit(&output, Rendered { json, table, csv: Some(csv) })
        }
        Command::Sweep { input, lo, hi, config, output } => {
            let config = config.build()?;
            let lo_units = minutes_to_units(f64::from(lo), config.grid_unit)?;
            let hi_units = minutes_to_units(f64::from(hi), config.grid_unit)?;
            if lo_units >= hi_units {
                return Err(CliError::Usage("--lo must be below --hi".into()));
            }
            let sweep = static_sweep(&load(&input)?, lo_units, hi_units, &config)?;
            let mut csv = String::from("timeout_minutes,average_cost_seconds\n");
            for p in &sweep.curve.points {
                csv.push_str(&format!("{},{}\n", units_to_minutes(p.timeout, config.grid_unit), p.average_cost));
            }
            let minima: Vec<String> = sweep
                .local_minima
                .iter()
                .map(|&t| units_to_minutes(t, config.grid_unit).to_string())
                .collect();
            let table = format!(
                "argmin {}\nmin cost seconds {:.3}\nlocal minima [{}]\n",
                units_to_minutes(sweep.argmin, config.grid_unit),
                sweep.min_cost,
                minima.join(", ")
            );
            let mut json = to_value(&sweep);
            json["argmin_minutes"] = minutes_json(sweep.argmin, config.grid_unit);
            emit(&output, Rendered { json, table, csv: Some(csv) })
        }
        Command::Evaluate { input, original, static_timeout, k, seed, config, output } => {
            let config = config.build()?;
            let dataset = load(&input)?;
            let mut policies = Vec::new();
            if let Some(path) = &original {
                policies.push(TimeoutPolicy::original(load_policy_csv(path, config.grid_unit)?));
            }
            policies.push(TimeoutPolicy::optimized());
            if let Some(minutes) = static_timeout {
                let units = minutes_to_units(f64::from(minutes), config.grid_unit)?;
                policies.push(TimeoutPolicy::static_global(units).named(format!("static-{minutes}m")));
            }
            let cv = cross_validate(&dataset, &policies, &config, k, seed)?;
            warn(&cv.warnings);
            let comparison = compare_policies(&dataset, &policies, &config)?;
            let mut table = cv.to_table();
            table.push_str(&format!(
                "\n{:<20} {:>10} {:>16} {:>16}\n",
                "policy", "timeouts", "avg_cost_s", "median_timeout_m"
            ));
            for t in &comparison.totals {
                table.push_str(&format!(
                    "{:<20} {:>10} {:>16.3} {:>16}\n",
                    t.policy,
                    t.timeout_count,
                    t.average_cost,
                    t.median_timeout * config.grid_unit / 60.0
                ));
            }
            let json = json!({ "cross_validation": cv, "comparison": comparison });
            emit(&output, Rendered { json, table, csv: None })
        }
        Command::Simulate {
            seed,
            tests,
            runs,
            distribution,
            scale_minutes,
            sigma,
            outlier_prob,
            outlier_lo,
            outlier_hi,
            hang_prob,
            percentile,
            accounting,
            write_dataset,
            write_policy,
            config,
            output,
        } => {
            let config = config.build()?;
            let scale = scale_minutes * 60.0;
            let spec = WorkloadSpec {
                test_count: tests,
                executions_per_test: runs,
                base_distribution: match distribution {
                    DistributionArg::Lognormal => BaseDistribution::Lognormal { median_seconds: scale, sigma },
                    DistributionArg::Exponential => BaseDistribution::Exponential { mean_seconds: scale },
                    DistributionArg::Constant => BaseDistribution::Constant { seconds: scale },
                },
                outlier_probability: outlier_prob,
                outlier_factor_range: (outlier_lo, outlier_hi),
                hang_probability: hang_prob,
                original_timeout_percentile: percentile,
                grid_unit: config.grid_unit,
                seed,
                ..WorkloadSpec::default()
            };
            spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let workload = generate_workload(&spec)?;
            let accounting = match accounting {
                AccountingArg::StopOnSuccess => RerunAccounting::StopOnSuccess,
                AccountingArg::FullChain => RerunAccounting::FullChain,
            };
            if let Some(path) = &write_dataset {
                let mut buf = Vec::new();
                ingest::write_executions_jsonl(workload.dataset.records(), &mut buf)?;
                fs::write(path, buf).map_err(|source| Error::Io { path: path.clone(), source })?;
            }
            let original_values = match &workload.original_policy.values {
                crate::evaluation::PolicyValues::PerTest(v) => v.clone(),
                _ => unreachable!("generated policies are per test"),
            };
            if let Some(path) = &write_policy {
                fs::write(path, policy_csv(&original_values, config.grid_unit))
                    .map_err(|source| Error::Io { path: path.clone(), source })?;
            }
            let optimized: BTreeMap<String, u32> = optimize_all(&workload.dataset, &config)?
                .into_iter()
                .map(|r| (r.test_id, r.optimal_timeout))
                .collect();
            let optimized_policy = TimeoutPolicy {
                name: "optimized".into(),
                kind: crate::evaluation::PolicyKind::Optimized,
                values: crate::evaluation::PolicyValues::PerTest(optimized),
            };
            let original_sim =
                simulate_rerun_policy(&workload.dataset, &workload.original_policy, config.m, config.grid_unit, accounting, seed)?;
            let optimized_sim =
                simulate_rerun_policy(&workload.dataset, &optimized_policy, config.m, config.grid_unit, accounting, seed)?;
            let mut table = format!(
                "{:<12} {:>12} {:>10} {:>10} {:>20}\n",
                "policy", "initial", "timeouts", "reruns", "mean_cost_s"
            );
            for (name, r) in [("original", &original_sim), ("optimized", &optimized_sim)] {
                table.push_str(&format!(
                    "{:<12} {:>12} {:>10} {:>10} {:>20.3}\n",
                    name, r.initial_runs, r.timeout_events, r.rerun_count, r.mean_cost_per_initial_run
                ));
            }
            let json = json!({
                "spec": spec,
                "original": original_sim,
                "optimized": optimized_sim,
            });
            emit(&output, Rendered { json, table, csv: None })
        }
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            1
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}
