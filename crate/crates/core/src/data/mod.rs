//! Observation and cohort data model, ingestion, splits and synthetic cohorts.

mod csvio;
mod split;
mod standardize;
mod synthetic;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csvio::{
    read_cohort_csv, read_group_csv, write_cohort_csv, write_group_csv, CsvSchema,
};
pub use split::{make_splits, SplitAssignment, SplitOrder};
pub use standardize::Standardizer;
pub use synthetic::{generate_synthetic, SyntheticCohort, SyntheticSpec};

/// Largest admissible Likert response.
pub const MAX_RESPONSE: u8 = 10;

/// One survey response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub subject_id: u64,
    /// Study-day time coordinate. Carried for ordering, never used as a feature.
    pub timestamp: f64,
    pub responses: Vec<u8>,
    pub label: bool,
}

impl Observation {
    pub fn features(&self) -> Vec<f64> {
        self.responses.iter().map(|&r| f64::from(r)).collect()
    }

    pub fn y(&self) -> f64 {
        if self.label {
            1.0
        } else {
            0.0
        }
    }
}

/// A full dataset with its per-subject partition.
///
/// Immutable after construction; subsets are new cohorts built with
/// [`Cohort::select`].
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    observations: Vec<Observation>,
    feature_dim: usize,
    subject_index: BTreeMap<u64, Vec<usize>>,
}

impl Cohort {
    pub fn new(observations: Vec<Observation>, feature_dim: usize) -> Result<Self> {
        let mut subject_index: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (i, obs) in observations.iter().enumerate() {
            if obs.responses.len() != feature_dim {
                return Err(Error::Validation {
                    line: i + 2,
                    message: format!(
                        "expected {feature_dim} responses, found {}",
                        obs.responses.len()
                    ),
                });
            }
            if let Some(&r) = obs.responses.iter().find(|&&r| r > MAX_RESPONSE) {
                return Err(Error::Validation {
                    line: i + 2,
                    message: format!("response {r} outside [0, {MAX_RESPONSE}]"),
                });
            }
            subject_index.entry(obs.subject_id).or_default().push(i);
        }
        Ok(Self {
            observations,
            feature_dim,
            subject_index,
        })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn subject_index(&self) -> &BTreeMap<u64, Vec<usize>> {
        &self.subject_index
    }

    pub fn n_subjects(&self) -> usize {
        self.subject_index.len()
    }

    /// Subject ids in ascending order.
    pub fn subject_ids(&self) -> Vec<u64> {
        self.subject_index.keys().copied().collect()
    }

    pub fn subject_observations(&self, subject: u64) -> impl Iterator<Item = &Observation> {
        self.subject_index
            .get(&subject)
            .into_iter()
            .flatten()
            .map(move |&i| &self.observations[i])
    }

    /// Number of (positive, negative) observations of a subject.
    pub fn class_counts(&self, subject: u64) -> (usize, usize) {
        let pos = self.subject_observations(subject).filter(|o| o.label).count();
        let total = self.subject_index.get(&subject).map_or(0, Vec::len);
        (pos, total - pos)
    }

    pub fn positive_rate(&self) -> f64 {
        if self.observations.is_empty() {
            return f64::NAN;
        }
        let pos = self.observations.iter().filter(|o| o.label).count();
        pos as f64 / self.observations.len() as f64
    }

    /// New cohort made of the observations at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Cohort {
        let obs = indices.iter().map(|&i| self.observations[i].clone()).collect();
        Cohort::new(obs, self.feature_dim).expect("subset of a valid cohort is valid")
    }

    /// The same observations sorted by subject, timestamp, responses and
    /// label, so results built on it do not depend on input row order.
    pub fn canonical(&self) -> Cohort {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            let (oa, ob) = (&self.observations[a], &self.observations[b]);
            oa.subject_id
                .cmp(&ob.subject_id)
                .then(oa.timestamp.total_cmp(&ob.timestamp))
                .then(oa.responses.cmp(&ob.responses))
                .then(oa.label.cmp(&ob.label))
        });
        self.select(&idx)
    }

    /// Training-observation count per subject.
    pub fn counts_per_subject(&self) -> BTreeMap<u64, usize> {
        self.subject_index
            .iter()
            .map(|(&s, idx)| (s, idx.len()))
            .collect()
    }

    /// Features as an `n x D_x` row-major list of real vectors.
    pub fn feature_rows(&self) -> Vec<Vec<f64>> {
        self.observations.iter().map(Observation::features).collect()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.observations.iter().map(|o| o.label).collect()
    }
}

/// Keeps only subjects with at least `min_pos` positive and `min_neg`
/// negative observations. Observation order is preserved.
pub fn apply_inclusion_filter(cohort: &Cohort, min_pos: usize, min_neg: usize) -> Cohort {
    let keep: Vec<usize> = (0..cohort.len())
        .filter(|&i| {
            let (pos, neg) = cohort.class_counts(cohort.observations[i].subject_id);
            pos >= min_pos && neg >= min_neg
        })
        .collect();
    cohort.select(&keep)
}

/// Default inclusion thresholds: three events and three non-events.
pub const DEFAULT_MIN_POS: usize = 3;
pub const DEFAULT_MIN_NEG: usize = 3;
