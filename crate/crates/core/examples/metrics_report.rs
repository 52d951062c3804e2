//! Scores hand-made predictions: pooled metrics and log-likelihood by
//! thirds of per-subject training size.
//!
//! cargo run --example metrics_report

use std::collections::BTreeMap;

use lsgp::data::{Cohort, Observation};
use lsgp::eval::{compute_metrics, stratified_report, DEFAULT_THRESHOLD};

fn main() -> lsgp::Result<()> {
    let probs = [0.9, 0.7, 0.2, 0.6, 0.3, 0.4];
    let labels = [true, false, false, true, true, false];
    let m = compute_metrics(&probs, &labels, DEFAULT_THRESHOLD);
    println!(
        "auc {:.3}  ppv {:.3}  sensitivity {:.3}  specificity {:.3}  avg ll {:.3}",
        m.roc_auc, m.ppv, m.sensitivity, m.specificity, m.avg_log_likelihood
    );
    println!("confusion {:?}", m.confusion);

    let observations = labels
        .iter()
        .enumerate()
        .map(|(i, &label)| Observation {
            subject_id: i as u64 / 2,
            timestamp: i as f64,
            responses: vec![],
            label,
        })
        .collect();
    let test = Cohort::new(observations, 0)?;
    let train_counts: BTreeMap<u64, usize> = [(0, 10), (1, 20), (2, 30)].into_iter().collect();
    let report = stratified_report(
        |subject, part| Ok(vec![probs[2 * subject as usize]; part.len()]),
        &test,
        &train_counts,
    );
    println!("{}", serde_json::to_string_pretty(&report.strata)?);
    Ok(())
}
