use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metrics::{avg_log_likelihood, compute_metrics, Metrics, DEFAULT_THRESHOLD};
use crate::data::Cohort;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    Bottom,
    Middle,
    Top,
}

/// Splits subjects into thirds by training-set size. Subjects are ordered by
/// (count, id); the bottom and top strata each take `round(N / 3)` subjects
/// and the middle keeps the rest.
pub fn assign_strata(train_counts: &BTreeMap<u64, usize>) -> BTreeMap<u64, Stratum> {
    let mut order: Vec<(usize, u64)> = train_counts.iter().map(|(&s, &c)| (c, s)).collect();
    order.sort();
    let n = order.len();
    let outer = ((n as f64) / 3.0).round() as usize;
    order
        .into_iter()
        .enumerate()
        .map(|(i, (_, s))| {
            let stratum = if i < outer {
                Stratum::Bottom
            } else if i >= n - outer {
                Stratum::Top
            } else {
                Stratum::Middle
            };
            (s, stratum)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrataLl {
    pub bottom: f64,
    pub middle: f64,
    pub top: f64,
    pub all: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Pooled over every evaluated test point.
    pub metrics: Metrics,
    /// Average log-likelihood per point within each stratum (NaN if empty).
    pub strata: StrataLl,
    /// Subjects dropped because the predictor failed for them.
    pub excluded_subjects: Vec<u64>,
}

/// Evaluates `predict` subject by subject on `test`. A subject whose
/// prediction fails is excluded with a warning rather than aborting.
pub fn stratified_report<F>(
    mut predict: F,
    test: &Cohort,
    train_counts: &BTreeMap<u64, usize>,
) -> EvalReport
where
    F: FnMut(u64, &Cohort) -> Result<Vec<f64>>,
{
    let strata = assign_strata(train_counts);
    let mut probs = Vec::new();
    let mut labels = Vec::new();
    let mut by_stratum: BTreeMap<Stratum, (Vec<f64>, Vec<bool>)> = BTreeMap::new();
    let mut excluded = Vec::new();
    for (&subject, rows) in test.subject_index() {
        let part = test.select(rows);
        match predict(subject, &part) {
            Ok(p) => {
                let y = part.labels();
                if let Some(&s) = strata.get(&subject) {
                    let entry = by_stratum.entry(s).or_default();
                    entry.0.extend(&p);
                    entry.1.extend(&y);
                }
                probs.extend(p);
                labels.extend(y);
            }
            Err(e) => {
                log::warn!("excluding subject {subject} from evaluation: {e}");
                excluded.push(subject);
            }
        }
    }
    let ll = |s: Stratum| {
        by_stratum
            .get(&s)
            .map_or(f64::NAN, |(p, y)| avg_log_likelihood(p, y))
    };
    EvalReport {
        strata: StrataLl {
            bottom: ll(Stratum::Bottom),
            middle: ll(Stratum::Middle),
            top: ll(Stratum::Top),
            all: avg_log_likelihood(&probs, &labels),
        },
        metrics: compute_metrics(&probs, &labels, DEFAULT_THRESHOLD),
        excluded_subjects: excluded,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Observation;

    #[test]
    fn thirds_by_count() {
        let counts: BTreeMap<u64, usize> = (0..7u64).map(|s| (s, 10 + s as usize)).collect();
        let s = assign_strata(&counts);
        let n = |t| s.values().filter(|&&v| v == t).count();
        assert_eq!((n(Stratum::Bottom), n(Stratum::Middle), n(Stratum::Top)), (2, 3, 2));
        assert_eq!(s[&0], Stratum::Bottom);
        assert_eq!(s[&6], Stratum::Top);
    }

    #[test]
    fn ties_broken_by_id() {
        let counts: BTreeMap<u64, usize> = [(5, 3), (2, 3), (9, 3)].into_iter().collect();
        let s = assign_strata(&counts);
        assert_eq!(s[&2], Stratum::Bottom);
        assert_eq!(s[&5], Stratum::Middle);
        assert_eq!(s[&9], Stratum::Top);
    }

    #[test]
    fn failing_subject_is_excluded() {
        let obs = (0..4)
            .map(|i| Observation {
                subject_id: i / 2,
                timestamp: i as f64,
                responses: vec![1],
                label: i % 2 == 0,
            })
            .collect();
        let test = Cohort::new(obs, 1).unwrap();
        let counts = [(0, 5), (1, 5)].into_iter().collect();
        let r = stratified_report(
            |s, c| {
                if s == 1 {
                    Err(crate::Error::Scope(s))
                } else {
                    Ok(vec![0.5; c.len()])
                }
            },
            &test,
            &counts,
        );
        assert_eq!(r.excluded_subjects, vec![1]);
        assert_eq!(r.metrics.n, 2);
        assert!((r.strata.all - 0.5f64.ln()).abs() < 1e-15);
    }
}
