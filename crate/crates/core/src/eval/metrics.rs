use serde::{Deserialize, Serialize};

/// Probabilities are clipped to `[LL_CLIP, 1 - LL_CLIP]` before taking logs.
pub const LL_CLIP: f64 = 1e-12;

/// A probability at or above this is classified positive.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

pub fn avg_log_likelihood(probs: &[f64], labels: &[bool]) -> f64 {
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(LL_CLIP, 1.0 - LL_CLIP);
            if y {
                p.ln()
            } else {
                (1.0 - p).ln()
            }
        })
        .sum();
    total / probs.len() as f64
}

/// Area under the ROC curve via the rank-sum statistic with midranks, so
/// tied scores count one half. NaN when either class is absent.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let n_pos = labels.iter().filter(|&&l| l).count() as u128;
    let n_neg = labels.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return f64::NAN;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // doubled ranks keep the midranks integral
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let twice_mid = (i + 1 + j + 1) as u128;
        twice_rank_sum += twice_mid * order[i..=j].iter().filter(|&&k| labels[k]).count() as u128;
        i = j + 1;
    }
    let twice_u = twice_rank_sum - n_pos * (n_pos + 1);
    twice_u as f64 / (2 * n_pos * n_neg) as f64
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(probs: &[f64], labels: &[bool], threshold: f64) -> Self {
        let mut c = Confusion::default();
        for (&p, &y) in probs.iter().zip(labels) {
            match (p >= threshold, y) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub avg_log_likelihood: f64,
    pub roc_auc: f64,
    pub ppv: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub confusion: Confusion,
    /// Names of metrics that are undefined for this sample.
    pub undefined: Vec<String>,
}

pub fn compute_metrics(probs: &[f64], labels: &[bool], threshold: f64) -> Metrics {
    assert_eq!(probs.len(), labels.len(), "one probability per label");
    let confusion = Confusion::from_predictions(probs, labels, threshold);
    let m = Metrics {
        n: probs.len(),
        avg_log_likelihood: avg_log_likelihood(probs, labels),
        roc_auc: roc_auc(probs, labels),
        ppv: ratio(confusion.tp, confusion.tp + confusion.fp),
        sensitivity: ratio(confusion.tp, confusion.tp + confusion.fn_),
        specificity: ratio(confusion.tn, confusion.tn + confusion.fp),
        confusion,
        undefined: Vec::new(),
    };
    let undefined = [
        ("avg_log_likelihood", m.avg_log_likelihood),
        ("roc_auc", m.roc_auc),
        ("ppv", m.ppv),
        ("sensitivity", m.sensitivity),
        ("specificity", m.specificity),
    ]
    .iter()
    .filter(|(_, v)| v.is_nan())
    .map(|(k, _)| k.to_string())
    .collect();
    Metrics { undefined, ..m }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let mut twice = 0u128;
        let mut pairs = 0u128;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    pairs += 1;
                    if scores[i] > scores[j] {
                        twice += 2;
                    } else if scores[i] == scores[j] {
                        twice += 1;
                    }
                }
            }
        }
        twice as f64 / (2 * pairs) as f64
    }

    #[test]
    fn perfect_ranking() {
        let m = compute_metrics(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false], 0.5);
        assert_eq!(m.roc_auc, 1.0);
        assert_eq!(m.ppv, 1.0);
        assert_eq!(m.sensitivity, 1.0);
        assert_eq!(m.specificity, 1.0);
        assert!(m.undefined.is_empty());
    }

    #[test]
    fn all_ties_give_half() {
        assert_eq!(roc_auc(&[0.3; 6], &[true, false, true, false, false, true]), 0.5);
    }

    #[test]
    fn single_class_is_flagged() {
        let m = compute_metrics(&[0.2, 0.7], &[false, false], 0.5);
        assert!(m.roc_auc.is_nan() && m.sensitivity.is_nan());
        assert_eq!(m.specificity, 0.5);
        assert!(m.undefined.contains(&"roc_auc".to_string()));
        assert!(m.undefined.contains(&"sensitivity".to_string()));
    }

    #[test]
    fn no_positive_calls_leaves_ppv_undefined() {
        let m = compute_metrics(&[0.1, 0.2], &[true, false], 0.5);
        assert!(m.ppv.is_nan());
        assert_eq!(m.sensitivity, 0.0);
    }

    #[test]
    fn threshold_is_inclusive() {
        let c = Confusion::from_predictions(&[0.5], &[true], 0.5);
        assert_eq!(c.tp, 1);
    }

    #[test]
    fn log_likelihood_of_confident_mistake_is_finite() {
        let ll = avg_log_likelihood(&[1.0, 0.0], &[false, true]);
        assert!(ll.is_finite() && (ll - (1e-12f64).ln()).abs() < 1e-3);
        assert!((avg_log_likelihood(&[0.5, 0.5], &[true, false]) - 0.5f64.ln()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise_count(
            data in prop::collection::vec((0u8..6, any::<bool>()), 2..60)
        ) {
            let scores: Vec<f64> = data.iter().map(|d| d.0 as f64 / 5.0).collect();
            let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
            let auc = roc_auc(&scores, &labels);
            if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
                prop_assert!(auc.is_nan());
            } else {
                prop_assert_eq!(auc, pairwise_auc(&scores, &labels));
            }
        }

        #[test]
        fn auc_is_invariant_to_monotone_transforms(
            data in prop::collection::vec((-5.0f64..5.0, any::<bool>()), 2..40)
        ) {
            let scores: Vec<f64> = data.iter().map(|d| d.0).collect();
            let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
            let mapped: Vec<f64> = scores.iter().map(|s| 1.0 / (1.0 + (-s).exp())).collect();
            let a = roc_auc(&scores, &labels);
            let b = roc_auc(&mapped, &labels);
            prop_assert!(a == b || (a.is_nan() && b.is_nan()));
        }
    }
}
