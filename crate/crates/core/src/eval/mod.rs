//! Metrics, size-stratified reports, and the scope comparison experiments.

mod compare;
mod metrics;
mod report;

pub use compare::{
    compare_single_vs_idiographic, deltas, evaluate_baseline, random_groups, run_grouping_experiment,
    split_parts, DeltaRow, GroupingExperimentResult, GroupingMode, GroupingRun, MethodRuns, ScopeComparison,
    Summary, METRIC_NAMES,
};
pub use metrics::{
    avg_log_likelihood, compute_metrics, roc_auc, Confusion, Metrics, DEFAULT_THRESHOLD, LL_CLIP,
};
pub use report::{assign_strata, stratified_report, EvalReport, StrataLl, Stratum};
