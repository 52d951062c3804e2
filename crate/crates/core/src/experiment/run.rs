use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DataSource, ExperimentConfig, Method, ScopeChoice};
use crate::baselines::{fit_selected, FittingScope, Variant};
use crate::data::{
    apply_inclusion_filter, generate_synthetic, make_splits, read_cohort_csv, write_cohort_csv, write_group_csv,
    Cohort, CsvSchema, SplitAssignment,
};
use crate::eval::{deltas, split_parts, stratified_report, EvalReport, MethodRuns, METRIC_NAMES};
use crate::seeds::{derive_rng, derive_seed};
use crate::svlsgp::{fit_with_restarts, write_trace_csv, Checkpoint, LsgpConfig};
use crate::{Error, Result};

/// Scope label used for SV-LSGP rows.
pub const LSGP_SCOPE: &str = "latent";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub cut: Option<usize>,
    pub seed: u64,
    pub ok: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub crate_version: String,
    pub root_seed: u64,
    pub threads: usize,
    pub n_subjects: usize,
    pub n_observations: usize,
    pub excluded_subjects: Vec<u64>,
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    pub fn failed(&self) -> usize {
        self.stages.iter().filter(|s| !s.ok).count()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub runs: Vec<MethodRuns>,
    pub manifest: Manifest,
}

/// A loaded cohort, with ground-truth clusters when synthetic.
pub fn load_cohort(source: &DataSource) -> Result<(Cohort, Option<BTreeMap<u64, usize>>)> {
    match source {
        DataSource::Csv(path) => Ok((read_cohort_csv(path, &CsvSchema::default())?, None)),
        DataSource::Synthetic(spec) => {
            let g = generate_synthetic(spec)?;
            Ok((g.cohort, Some(g.clusters)))
        }
    }
}

pub(crate) fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

struct CutResult {
    report: Option<EvalReport>,
    stage: StageRecord,
}

fn stage(name: &str, cut: usize, seed: u64, outcome: Result<EvalReport>) -> CutResult {
    match outcome {
        Ok(report) => CutResult {
            report: Some(report),
            stage: StageRecord {
                name: name.into(),
                cut: Some(cut),
                seed,
                ok: true,
                error: None,
            },
        },
        Err(e) => {
            log::error!("{name} cut {cut} failed: {e}");
            CutResult {
                report: None,
                stage: StageRecord {
                    name: name.into(),
                    cut: Some(cut),
                    seed,
                    ok: false,
                    error: Some(e.to_string()),
                },
            }
        }
    }
}

fn baseline_cut(
    variant: &Variant,
    scope: &FittingScope,
    cohort: &Cohort,
    split: &SplitAssignment,
    model_path: &Path,
) -> Result<EvalReport> {
    let (train, validation, test) = split_parts(cohort, split);
    let model = fit_selected(&variant.grid, scope, &train, &validation)?;
    model.save(model_path)?;
    Ok(stratified_report(
        |_, part| model.predict_cohort(part),
        &test,
        &train.counts_per_subject(),
    ))
}

fn lsgp_cut(
    config: &LsgpConfig,
    n_restarts: usize,
    cohort: &Cohort,
    split: &SplitAssignment,
    cut: usize,
    out: &Path,
) -> Result<EvalReport> {
    let (train, validation, test) = split_parts(cohort, split);
    let best = fit_with_restarts(config, &train, &validation, n_restarts)?;
    for (r, trace) in best.traces.iter().enumerate() {
        write_trace_csv(trace, out.join(format!("traces/svlsgp_cut{cut}_restart{r}.csv")))?;
    }
    Checkpoint::save(&best.model, out.join(format!("checkpoints/svlsgp_cut{cut}.json")))?;
    let mut rng = derive_rng(config.seed, "predict", &[]);
    let mc = config.predict_mc_samples;
    Ok(stratified_report(
        |_, part| best.model.predict_cohort(part, mc, &mut rng),
        &test,
        &train.counts_per_subject(),
    ))
}

/// Runs every configured method over every cut and writes the results
/// directory. Stage failures are recorded in the manifest and skipped.
pub fn run_experiment(config: &ExperimentConfig, threads: usize) -> Result<RunOutcome> {
    config.validate()?;
    let out = &config.output_dir;
    for sub in ["splits", "traces", "checkpoints", "models"] {
        fs::create_dir_all(out.join(sub))?;
    }
    write_json(config, &out.join("config.json"))?;

    let (raw, _) = load_cohort(&config.data)?;
    let cohort = apply_inclusion_filter(&raw, config.min_pos, config.min_neg);
    let excluded: Vec<u64> = raw
        .subject_ids()
        .into_iter()
        .filter(|s| !cohort.subject_index().contains_key(s))
        .collect();
    if !excluded.is_empty() {
        log::warn!("{} subjects dropped by the inclusion filter", excluded.len());
    }
    let split_seed = derive_seed(config.seed, "splits", &[]);
    let splits = make_splits(&cohort, config.fractions, config.n_cuts, split_seed, config.split_order)?;
    for (k, s) in splits.iter().enumerate() {
        write_json(s, &out.join(format!("splits/cut_{k}.json")))?;
    }

    let mut runs = Vec::new();
    let mut stages = Vec::new();
    let mut collect = |method: &str, scope: &str, results: Vec<CutResult>| {
        let mut reports = Vec::new();
        for r in results {
            reports.extend(r.report);
            stages.push(r.stage);
        }
        runs.push(MethodRuns {
            method: method.into(),
            scope: scope.into(),
            reports,
        });
    };
    for &method in &config.methods {
        if let Some(variant) = config.grids.variant(method) {
            for &scope_choice in &config.scopes {
                let (scope, scope_name) = match scope_choice {
                    ScopeChoice::Single => (FittingScope::Single, "single"),
                    ScopeChoice::Idiographic => (FittingScope::Idiographic, "idiographic"),
                };
                let name = format!("{}_{scope_name}", method.name());
                let results = splits
                    .par_iter()
                    .enumerate()
                    .map(|(cut, split)| {
                        let path = out.join(format!("models/{name}_cut{cut}.json"));
                        stage(&name, cut, split.seed, baseline_cut(&variant, &scope, &cohort, split, &path))
                    })
                    .collect();
                collect(method.name(), scope_name, results);
            }
        } else {
            let results = splits
                .par_iter()
                .enumerate()
                .map(|(cut, split)| {
                    let cfg = LsgpConfig {
                        seed: derive_seed(config.seed, "svlsgp", &[cut as u64]),
                        ..config.lsgp.clone()
                    };
                    let outcome = lsgp_cut(&cfg, config.n_restarts, &cohort, split, cut, out);
                    stage(Method::Svlsgp.name(), cut, cfg.seed, outcome)
                })
                .collect();
            collect(Method::Svlsgp.name(), LSGP_SCOPE, results);
        }
    }

    let manifest = Manifest {
        crate_version: env!("CARGO_PKG_VERSION").into(),
        root_seed: config.seed,
        threads,
        n_subjects: cohort.n_subjects(),
        n_observations: cohort.len(),
        excluded_subjects: excluded,
        stages,
    };
    write_results_csv(&runs, config.knn_log_likelihood, &out.join("results.csv"))?;
    write_deltas_csv(&runs, &out.join("deltas.csv"))?;
    write_json(&runs, &out.join("results.json"))?;
    write_json(&manifest, &out.join("manifest.json"))?;
    Ok(RunOutcome { runs, manifest })
}

/// Table-1-shaped summary: one row per method and scope, each metric as
/// `mean ± std` over cuts.
pub fn write_results_csv(runs: &[MethodRuns], knn_log_likelihood: bool, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["method", "scope"];
    header.extend(METRIC_NAMES);
    w.write_record(&header)?;
    for r in runs {
        let mut row = vec![r.method.clone(), r.scope.clone()];
        for metric in METRIC_NAMES {
            let hide = r.method == Method::Knn.name() && metric.starts_with("ll_") && !knn_log_likelihood;
            row.push(if hide { "N/A".into() } else { r.summary(metric).display() });
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Idiographic − single differences for every method run in both scopes.
pub fn write_deltas_csv(runs: &[MethodRuns], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["method", "metric", "mean", "std", "n_cuts"])?;
    for single in runs.iter().filter(|r| r.scope == "single") {
        let Some(idio) = runs.iter().find(|r| r.method == single.method && r.scope == "idiographic") else {
            continue;
        };
        // only cuts where both scopes succeeded are paired
        if single.reports.len() != idio.reports.len() {
            continue;
        }
        for row in deltas(&single.method, &single.reports, &idio.reports) {
            w.write_record([
                row.method,
                row.metric,
                row.delta.mean.to_string(),
                row.delta.std.to_string(),
                row.delta.n.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `cohort.csv` and `ground_truth.csv` for a synthetic spec.
pub fn generate_to_dir(spec: &crate::data::SyntheticSpec, dir: &Path) -> Result<crate::data::SyntheticCohort> {
    let g = generate_synthetic(spec)?;
    fs::create_dir_all(dir)?;
    write_cohort_csv(&g.cohort, dir.join("cohort.csv"))?;
    write_group_csv(&g.clusters, "cluster", dir.join("ground_truth.csv"))?;
    Ok(g)
}

pub(crate) fn ensure_exists(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} not found: {}", path.display())))
    }
}
