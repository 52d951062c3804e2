use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::{derive_seed, rng_from_seed};

use super::Cohort;

/// Train/validation/test observation indices of one cut.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitAssignment {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// How each subject's observations of one class are ordered before being
/// dealt into the three sets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitOrder {
    #[default]
    Random,
    /// Earliest observations train, latest test.
    Chronological,
}

/// Builds `n_cuts` class-stratified splits.
///
/// For every subject the positives and negatives are split separately: each
/// of the three sets first receives one observation of each class, then the
/// validation and test sets are filled to `floor(fraction * count)` and all
/// remaining observations go to train.
pub fn make_splits(
    cohort: &Cohort,
    fractions: (f64, f64, f64),
    n_cuts: usize,
    seed: u64,
    order: SplitOrder,
) -> Result<Vec<SplitAssignment>> {
    if n_cuts == 0 {
        return Err(Error::Config("n_cuts must be at least 1".into()));
    }
    let (_, f_val, f_test) = fractions;
    if !(f_val > 0.0 && f_test > 0.0 && f_val + f_test < 1.0) {
        return Err(Error::Config(format!("invalid split fractions {fractions:?}")));
    }
    for subject in cohort.subject_ids() {
        let (pos, neg) = cohort.class_counts(subject);
        if pos < 3 || neg < 3 {
            return Err(Error::Constraint {
                subject,
                message: format!(
                    "needs at least 3 positive and 3 negative observations, has {pos} and {neg}"
                ),
            });
        }
    }

    let mut cuts = Vec::with_capacity(n_cuts);
    for cut in 0..n_cuts {
        let cut_seed = derive_seed(seed, "split", &[cut as u64]);
        let mut rng = rng_from_seed(cut_seed);
        let mut split = SplitAssignment {
            seed: cut_seed,
            train: Vec::new(),
            validation: Vec::new(),
            test: Vec::new(),
        };
        for indices in cohort.subject_index().values() {
            for class in [true, false] {
                let mut members: Vec<usize> = indices
                    .iter()
                    .copied()
                    .filter(|&i| cohort.observations()[i].label == class)
                    .collect();
                match order {
                    SplitOrder::Random => members.shuffle(&mut rng),
                    SplitOrder::Chronological => members.sort_by(|&a, &b| {
                        let ta = cohort.observations()[a].timestamp;
                        let tb = cohort.observations()[b].timestamp;
                        ta.total_cmp(&tb).then(a.cmp(&b))
                    }),
                }
                let n = members.len();
                let n_val = ((f_val * n as f64).floor() as usize).max(1);
                let n_test = ((f_test * n as f64).floor() as usize).max(1);
                let n_train = n - n_val - n_test;
                split.train.extend_from_slice(&members[..n_train]);
                split.validation.extend_from_slice(&members[n_train..n_train + n_val]);
                split.test.extend_from_slice(&members[n_train + n_val..]);
            }
        }
        split.train.sort_unstable();
        split.validation.sort_unstable();
        split.test.sort_unstable();
        cuts.push(split);
    }
    Ok(cuts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Observation;

    fn cohort(spec: &[(u64, usize, usize)]) -> Cohort {
        let mut v = Vec::new();
        let mut t = 0.0;
        for &(s, pos, neg) in spec {
            for k in 0..pos + neg {
                t += 1.0;
                v.push(Observation {
                    subject_id: s,
                    timestamp: t,
                    responses: vec![1],
                    label: k < pos,
                });
            }
        }
        Cohort::new(v, 1).unwrap()
    }

    fn class_ok(c: &Cohort, set: &[usize], subject: u64) -> bool {
        let mine: Vec<_> = set
            .iter()
            .map(|&i| &c.observations()[i])
            .filter(|o| o.subject_id == subject)
            .collect();
        mine.iter().any(|o| o.label) && mine.iter().any(|o| !o.label)
    }

    #[test]
    fn three_and_three_gives_one_of_each_per_set() {
        let c = cohort(&[(4, 3, 3)]);
        let s = &make_splits(&c, (0.5, 0.25, 0.25), 1, 1, SplitOrder::Random).unwrap()[0];
        for set in [&s.train, &s.validation, &s.test] {
            assert_eq!(set.len(), 2);
            assert!(class_ok(&c, set, 4));
        }
    }

    #[test]
    fn same_seed_same_splits() {
        let c = cohort(&[(1, 5, 20), (2, 7, 9)]);
        let a = make_splits(&c, (0.5, 0.25, 0.25), 3, 11, SplitOrder::Random).unwrap();
        let b = make_splits(&c, (0.5, 0.25, 0.25), 3, 11, SplitOrder::Random).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn five_cuts_all_fifteen_sets_constrained() {
        let c = cohort(&[(1, 5, 20), (2, 7, 9), (3, 3, 40)]);
        let cuts = make_splits(&c, (0.5, 0.25, 0.25), 5, 3, SplitOrder::Random).unwrap();
        assert_eq!(cuts.len(), 5);
        for i in 0..5 {
            for j in i + 1..5 {
                assert_ne!(cuts[i], cuts[j]);
            }
        }
        for s in &cuts {
            for set in [&s.train, &s.validation, &s.test] {
                for subject in [1, 2, 3] {
                    assert!(class_ok(&c, set, subject));
                }
            }
        }
    }

    #[test]
    fn violating_subject_named() {
        let c = cohort(&[(1, 5, 20), (9, 2, 9)]);
        let err = make_splits(&c, (0.5, 0.25, 0.25), 1, 0, SplitOrder::Random).unwrap_err();
        assert!(matches!(err, Error::Constraint { subject: 9, .. }));
    }

    #[test]
    fn sizes_near_half_quarter_quarter() {
        let c = cohort(&[(1, 40, 80)]);
        let s = &make_splits(&c, (0.5, 0.25, 0.25), 1, 0, SplitOrder::Random).unwrap()[0];
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (60, 30, 30));
    }

    #[test]
    fn chronological_trains_on_the_past() {
        let c = cohort(&[(1, 8, 8)]);
        let s = &make_splits(&c, (0.5, 0.25, 0.25), 1, 0, SplitOrder::Chronological).unwrap()[0];
        let t = |i: usize| c.observations()[i].timestamp;
        let max_train_pos = s.train.iter().filter(|&&i| c.observations()[i].label).map(|&i| t(i)).fold(0.0, f64::max);
        let min_test_pos = s.test.iter().filter(|&&i| c.observations()[i].label).map(|&i| t(i)).fold(f64::MAX, f64::min);
        assert!(max_train_pos < min_test_pos);
    }

    #[test]
    fn json_shape() {
        let s = SplitAssignment { seed: 3, train: vec![0, 2], validation: vec![1], test: vec![3] };
        let j = s.to_json().unwrap();
        assert_eq!(j, r#"{"seed":3,"train":[0,2],"validation":[1],"test":[3]}"#);
        assert_eq!(SplitAssignment::from_json(&j).unwrap(), s);
    }
}
