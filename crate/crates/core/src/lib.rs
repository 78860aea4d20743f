//! Test-execution analytics and cost-optimal timeout selection.
//!
//! The crate ingests per-test execution records, measures flakiness,
//! estimates how often a timeout would fire, and picks per-test timeouts that
//! minimise the expected machine time including flaky reruns.

pub mod cli;
pub mod error;
pub mod evaluation;
pub mod flakiness;
pub mod ingest;
pub mod model;
pub mod optimizer;
pub mod simulator;

pub use error::{Error, Result};
pub use evaluation::{
    compare_policies, count_timeouts, cross_validate, make_folds, CvReport, FoldAssignment,
    PolicyComparison, PolicyKind, PolicyValues, TimeoutPolicy,
};
pub use flakiness::{
    compare_flakiness, flakiness_evolution, flakiness_report, timeout_change_stats,
    timeout_failure_share, EvolutionSeries, FlakinessComparison, FlakinessReport,
    TimeoutChangeStats,
};
pub use ingest::{
    load_executions, load_timeout_changes, summarize, DatasetSummary, InputFormat,
    TimeoutChangeRecord, ValidationReport,
};
pub use model::{
    failure_rate, is_flaky, sample_stats, ExecutionDataset, ExecutionRecord, SampleKey,
    SampleStats, TestSample, Verdict,
};
pub use optimizer::{
    empirical_exceedance, expected_cost, optimize_all, optimize_timeout, static_sweep,
    tolhurst_bound, truncated_mean, CostCurve, OptimizationConfig, OptimizationResult,
    ProbabilityMethod, SweepResult,
};
pub use simulator::{
    generate_workload, simulate_rerun_policy, BaseDistribution, GroundTruth, RerunAccounting,
    SimulationReport, Workload, WorkloadSpec,
};
