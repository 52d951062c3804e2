use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use super::run::{ensure_exists, load_cohort, write_json};
use crate::data::{apply_inclusion_filter, make_splits, read_group_csv};
use crate::eval::{
    compute_metrics, run_grouping_experiment, stratified_report, EvalReport, GroupingExperimentResult,
    GroupingMode, DEFAULT_THRESHOLD, METRIC_NAMES,
};
use crate::seeds::derive_seed;
use crate::similarity::{patient_covariance, prune_and_export, GraphExport};
use crate::svlsgp::Checkpoint;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupsOptions {
    pub method: Method,
    pub g_list: Vec<usize>,
    pub repeats: usize,
    /// Subject → label CSV; switches to labeled mode.
    pub labels: Option<std::path::PathBuf>,
    /// Which cut of the configured splits to use.
    pub cut: usize,
}

impl Default for GroupsOptions {
    fn default() -> Self {
        Self {
            method: Method::Lr,
            g_list: vec![1, 2, 4, 8],
            repeats: 10,
            labels: None,
            cut: 0,
        }
    }
}

/// Runs the grouping experiment and writes `groups.csv` (long format:
/// `G,repeat,metric,value`) and `groups.json` into the output directory.
pub fn run_groups(config: &ExperimentConfig, options: &GroupsOptions) -> Result<GroupingExperimentResult> {
    config.validate()?;
    let variant = config
        .grids
        .variant(options.method)
        .ok_or_else(|| Error::Config("the grouping experiment supports lr and knn only".into()))?;
    if options.cut >= config.n_cuts {
        return Err(Error::Config(format!("cut {} out of range (n_cuts = {})", options.cut, config.n_cuts)));
    }
    let mode = match &options.labels {
        Some(path) => {
            ensure_exists(path, "group label file")?;
            GroupingMode::Labeled(read_group_csv(path)?.0)
        }
        None => GroupingMode::Random,
    };
    let (raw, _) = load_cohort(&config.data)?;
    let cohort = apply_inclusion_filter(&raw, config.min_pos, config.min_neg);
    if let GroupingMode::Random = mode {
        if let Some(&g) = options.g_list.iter().find(|&&g| g == 0 || g > cohort.n_subjects()) {
            return Err(Error::Config(format!("G = {g} outside 1..={}", cohort.n_subjects())));
        }
    }
    let split_seed = derive_seed(config.seed, "splits", &[]);
    let splits = make_splits(&cohort, config.fractions, config.n_cuts, split_seed, config.split_order)?;
    let result = run_grouping_experiment(
        &variant,
        &cohort,
        &splits[options.cut],
        &options.g_list,
        options.repeats,
        &mode,
        derive_seed(config.seed, "grouping", &[]),
    )?;
    let out = &config.output_dir;
    std::fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("groups.csv"))?;
    w.write_record(["G", "repeat", "metric", "value"])?;
    for run in &result.runs {
        for (metric, value) in METRIC_NAMES.iter().zip(run.report.values()) {
            w.write_record([run.g.to_string(), run.repeat.to_string(), metric.to_string(), value.to_string()])?;
        }
    }
    w.flush()?;
    write_json(&result, &out.join("groups.json"))?;
    Ok(result)
}

/// Builds the similarity graph of a saved SV-LSGP, labels it from a group
/// CSV, prunes at `threshold` (default: 75th percentile of off-diagonal
/// covariances) and writes `<stem>.dot` / `<stem>.json`.
pub fn run_graph(
    checkpoint: &Path,
    groups: &Path,
    threshold: Option<f64>,
    gamma: f64,
    stem: &Path,
) -> Result<GraphExport> {
    ensure_exists(checkpoint, "checkpoint")?;
    ensure_exists(groups, "group label file")?;
    let model = Checkpoint::load(checkpoint)?;
    let (map, _) = read_group_csv(groups)?;
    let graph = patient_covariance(&model)?.with_group_map(&map)?.with_gamma(gamma);
    let threshold = threshold.unwrap_or_else(|| graph.off_diagonal_quantile(0.75));
    if let Some(dir) = stem.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    prune_and_export(&graph, threshold, stem)
}

fn read_column(path: &Path, column: &str) -> Result<(Vec<Option<u64>>, Vec<f64>)> {
    ensure_exists(path, "input file")?;
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.clone();
    let find = |name: &str| header.iter().position(|h| h.trim() == name);
    let col = find(column).ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: format!("missing column `{column}`"),
    })?;
    let subject_col = find("subject_id");
    let mut subjects = Vec::new();
    let mut values = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let parse_err = |m: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            message: m,
        };
        let v: f64 = record[col].trim().parse().map_err(|e| parse_err(format!("{column}: {e}")))?;
        let s = match subject_col {
            Some(c) => Some(record[c].trim().parse().map_err(|e| parse_err(format!("subject_id: {e}")))?),
            None => None,
        };
        subjects.push(s);
        values.push(v);
    }
    Ok((subjects, values))
}

/// Scores a probabilities CSV (`prob` column) against a labels CSV (`label`
/// column, 0/1), row by row. When both carry `subject_id`, log-likelihood
/// is also stratified by each subject's row count in `train_counts` (or in
/// the labels file when absent).
pub fn score_files(probs: &Path, labels: &Path, train_counts: Option<&Path>) -> Result<EvalReport> {
    let (subjects, p) = read_column(probs, "prob")?;
    let (label_subjects, y) = read_column(labels, "label")?;
    if p.len() != y.len() || p.is_empty() {
        return Err(Error::Config(format!(
            "need equally many probabilities and labels (got {} and {})",
            p.len(),
            y.len()
        )));
    }
    if let Some(i) = p.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Validation {
            line: i + 2,
            message: format!("probability {} outside [0, 1]", p[i]),
        });
    }
    if let Some(i) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Validation {
            line: i + 2,
            message: format!("label {} is not 0 or 1", y[i]),
        });
    }
    let y: Vec<bool> = y.iter().map(|&v| v == 1.0).collect();
    let ids: Option<Vec<u64>> = subjects.iter().zip(&label_subjects).map(|(a, b)| a.or(*b)).collect();
    let Some(ids) = ids else {
        let metrics = compute_metrics(&p, &y, DEFAULT_THRESHOLD);
        let all = metrics.avg_log_likelihood;
        return Ok(EvalReport {
            metrics,
            strata: crate::eval::StrataLl {
                bottom: f64::NAN,
                middle: f64::NAN,
                top: f64::NAN,
                all,
            },
            excluded_subjects: Vec::new(),
        });
    };
    let counts: BTreeMap<u64, usize> = match train_counts {
        Some(path) => {
            let (s, c) = read_column(path, "count")?;
            s.into_iter()
                .zip(c)
                .map(|(s, c)| s.map(|s| (s, c as usize)))
                .collect::<Option<_>>()
                .ok_or_else(|| Error::Config("train counts file needs a subject_id column".into()))?
        }
        None => ids.iter().fold(BTreeMap::new(), |mut m, &s| {
            *m.entry(s).or_insert(0) += 1;
            m
        }),
    };
    let observations = ids
        .iter()
        .zip(&y)
        .map(|(&subject_id, &label)| crate::data::Observation {
            subject_id,
            timestamp: 0.0,
            responses: Vec::new(),
            label,
        })
        .collect();
    let cohort = crate::data::Cohort::new(observations, 0)?;
    let by_subject = cohort.subject_index().clone();
    Ok(stratified_report(
        |s, _| Ok(by_subject[&s].iter().map(|&i| p[i]).collect()),
        &cohort,
        &counts,
    ))
}
