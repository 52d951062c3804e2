use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{stratified_report, EvalReport};
use crate::baselines::{fit_selected, FittingScope, Variant};
use crate::data::{Cohort, SplitAssignment};
use crate::seeds::{derive_seed, rng_from_seed};
use crate::{Error, Result};

/// Metric columns of the results table, in order.
pub const METRIC_NAMES: [&str; 8] = [
    "ll_bottom",
    "ll_middle",
    "ll_top",
    "ll_all",
    "auc",
    "ppv",
    "sensitivity",
    "specificity",
];

impl EvalReport {
    pub fn values(&self) -> [f64; 8] {
        let m = &self.metrics;
        [
            self.strata.bottom,
            self.strata.middle,
            self.strata.top,
            self.strata.all,
            m.roc_auc,
            m.ppv,
            m.sensitivity,
            m.specificity,
        ]
    }

    pub fn value(&self, metric: &str) -> Option<f64> {
        METRIC_NAMES.iter().position(|&n| n == metric).map(|i| self.values()[i])
    }
}

/// Mean and sample standard deviation over the defined (non-NaN) values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    /// How many inputs were NaN and skipped.
    pub n_undefined: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let defined: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
        let n = defined.len();
        let mean = if n == 0 { f64::NAN } else { defined.iter().sum::<f64>() / n as f64 };
        let std = match n {
            0 => f64::NAN,
            1 => 0.0,
            _ => (defined.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt(),
        };
        Self {
            mean,
            std,
            n,
            n_undefined: values.len() - n,
        }
    }

    /// `mean ± std` with four decimals, or `NaN` when nothing was defined.
    /// Skipped undefined values are noted in brackets.
    pub fn display(&self) -> String {
        let base = if self.n == 0 {
            "NaN".into()
        } else {
            format!("{:.4} ± {:.4}", self.mean, self.std)
        };
        match self.n_undefined {
            0 => base,
            k => format!("{base} [{k} undefined]"),
        }
    }
}

/// Per-cut reports of one method in one scope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRuns {
    pub method: String,
    pub scope: String,
    pub reports: Vec<EvalReport>,
}

impl MethodRuns {
    pub fn summary(&self, metric: &str) -> Summary {
        let v: Vec<f64> = self.reports.iter().filter_map(|r| r.value(metric)).collect();
        Summary::of(&v)
    }
}

pub fn split_parts(cohort: &Cohort, split: &SplitAssignment) -> (Cohort, Cohort, Cohort) {
    (
        cohort.select(&split.train),
        cohort.select(&split.validation),
        cohort.select(&split.test),
    )
}

/// Selects hyperparameters on validation AUC, refits nothing further, and
/// reports on the test part of the split.
pub fn evaluate_baseline(
    variant: &Variant,
    scope: &FittingScope,
    cohort: &Cohort,
    split: &SplitAssignment,
) -> Result<EvalReport> {
    let (train, validation, test) = split_parts(cohort, split);
    let model = fit_selected(&variant.grid, scope, &train, &validation)?;
    Ok(stratified_report(
        |_, part| model.predict_cohort(part),
        &test,
        &train.counts_per_subject(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub method: String,
    pub metric: String,
    /// Idiographic minus single, summarized over cuts.
    pub delta: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeComparison {
    pub runs: Vec<MethodRuns>,
    pub deltas: Vec<DeltaRow>,
}

/// Idiographic − single differences per metric, from paired per-cut reports.
pub fn deltas(method: &str, single: &[EvalReport], idiographic: &[EvalReport]) -> Vec<DeltaRow> {
    METRIC_NAMES
        .iter()
        .enumerate()
        .map(|(i, &metric)| {
            let d: Vec<f64> = single
                .iter()
                .zip(idiographic)
                .map(|(s, o)| o.values()[i] - s.values()[i])
                .collect();
            DeltaRow {
                method: method.to_string(),
                metric: metric.to_string(),
                delta: Summary::of(&d),
            }
        })
        .collect()
}

pub fn compare_single_vs_idiographic(
    variants: &[Variant],
    cohort: &Cohort,
    splits: &[SplitAssignment],
) -> Result<ScopeComparison> {
    let mut runs = Vec::new();
    let mut rows = Vec::new();
    for variant in variants {
        let per_scope = |scope: FittingScope| -> Result<Vec<EvalReport>> {
            splits
                .par_iter()
                .map(|s| evaluate_baseline(variant, &scope, cohort, s))
                .collect()
        };
        let single = per_scope(FittingScope::Single)?;
        let idio = per_scope(FittingScope::Idiographic)?;
        rows.extend(deltas(&variant.name, &single, &idio));
        runs.push(MethodRuns {
            method: variant.name.clone(),
            scope: "single".into(),
            reports: single,
        });
        runs.push(MethodRuns {
            method: variant.name.clone(),
            scope: "idiographic".into(),
            reports: idio,
        });
    }
    Ok(ScopeComparison { runs, deltas: rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupingMode {
    Random,
    /// Fixed subject → label map; the number of labels sets G.
    Labeled(BTreeMap<u64, usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingRun {
    pub g: usize,
    pub repeat: usize,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingExperimentResult {
    pub method: String,
    pub mode: String,
    pub g_list: Vec<usize>,
    pub repeats: usize,
    pub runs: Vec<GroupingRun>,
}

impl GroupingExperimentResult {
    /// Median of `metric` over the repeats at each G, NaNs skipped.
    pub fn medians(&self, metric: &str) -> Vec<(usize, f64)> {
        self.g_list
            .iter()
            .map(|&g| {
                let mut v: Vec<f64> = self
                    .runs
                    .iter()
                    .filter(|r| r.g == g)
                    .filter_map(|r| r.report.value(metric))
                    .filter(|v| !v.is_nan())
                    .collect();
                v.sort_by(f64::total_cmp);
                let m = match v.len() {
                    0 => f64::NAN,
                    n if n % 2 == 1 => v[n / 2],
                    n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
                };
                (g, m)
            })
            .collect()
    }
}

/// Shuffles the subjects and deals them round-robin into `g` groups, so
/// every group is non-empty and sizes differ by at most one.
pub fn random_groups(subjects: &[u64], g: usize, seed: u64) -> Result<BTreeMap<u64, usize>> {
    if g == 0 || g > subjects.len() {
        return Err(Error::Config(format!(
            "cannot form {g} non-empty groups from {} subjects",
            subjects.len()
        )));
    }
    let mut order = subjects.to_vec();
    order.shuffle(&mut rng_from_seed(seed));
    Ok(order.into_iter().enumerate().map(|(i, s)| (s, i % g)).collect())
}

pub fn run_grouping_experiment(
    variant: &Variant,
    cohort: &Cohort,
    split: &SplitAssignment,
    g_list: &[usize],
    repeats: usize,
    mode: &GroupingMode,
    seed: u64,
) -> Result<GroupingExperimentResult> {
    let subjects = cohort.subject_ids();
    let jobs: Vec<(usize, usize, BTreeMap<u64, usize>)> = match mode {
        GroupingMode::Random => {
            let mut jobs = Vec::new();
            for &g in g_list {
                for r in 0..repeats {
                    let s = derive_seed(seed, "groups", &[g as u64, r as u64]);
                    jobs.push((g, r, random_groups(&subjects, g, s)?));
                }
            }
            jobs
        }
        GroupingMode::Labeled(labels) => {
            let distinct: std::collections::BTreeSet<usize> = labels.values().copied().collect();
            let dense: BTreeMap<usize, usize> = distinct.iter().enumerate().map(|(i, &l)| (l, i)).collect();
            let map = labels.iter().map(|(&s, l)| (s, dense[l])).collect();
            vec![(distinct.len(), 0, map)]
        }
    };
    let runs = jobs
        .into_par_iter()
        .map(|(g, repeat, map)| {
            let report = evaluate_baseline(variant, &FittingScope::Grouped(map), cohort, split)?;
            Ok(GroupingRun { g, repeat, report })
        })
        .collect::<Result<Vec<_>>>()?;
    let (g_list, repeats, mode_name) = match mode {
        GroupingMode::Random => (g_list.to_vec(), repeats, "random"),
        GroupingMode::Labeled(_) => (vec![runs[0].g], 1, "labeled"),
    };
    Ok(GroupingExperimentResult {
        method: variant.name.clone(),
        mode: mode_name.into(),
        g_list,
        repeats,
        runs,
    })
}
