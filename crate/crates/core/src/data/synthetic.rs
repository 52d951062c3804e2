use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::derive_rng;

use super::{Cohort, Observation, MAX_RESPONSE};

/// Parameters of the synthetic heterogeneous cohort.
///
/// Subjects are placed around cluster centres in a `latent_dim_true`
/// dimensional space; a fixed random linear map turns each subject's latent
/// position into the coefficient vector of its own logistic decision rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_subjects: usize,
    pub n_clusters: usize,
    /// Inclusive range of observations per subject.
    pub obs_per_subject: (usize, usize),
    pub feature_dim: usize,
    pub base_rate: f64,
    pub latent_dim_true: usize,
    pub seed: u64,
    /// Standard deviation of subjects around their cluster centre, in units
    /// of the (unit-variance) spread of cluster centres.
    pub within_cluster_spread: f64,
    /// Standard deviation of the logit's response-driven part.
    pub signal: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_subjects: 40,
            n_clusters: 4,
            obs_per_subject: (40, 240),
            feature_dim: 6,
            base_rate: 0.2,
            latent_dim_true: 2,
            seed: 0,
            within_cluster_spread: 0.15,
            signal: 3.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_subjects == 0 {
            return bad("n_subjects must be positive");
        }
        if self.n_clusters == 0 || self.n_clusters > self.n_subjects {
            return bad("n_clusters must be in 1..=n_subjects");
        }
        if !(self.base_rate > 0.0 && self.base_rate < 1.0) {
            return bad("base_rate must lie in (0, 1)");
        }
        if self.obs_per_subject.0 == 0 || self.obs_per_subject.0 > self.obs_per_subject.1 {
            return bad("obs_per_subject must be a non-empty range of positive counts");
        }
        if self.feature_dim == 0 || self.latent_dim_true == 0 {
            return bad("feature_dim and latent_dim_true must be positive");
        }
        if !(self.within_cluster_spread >= 0.0 && self.signal >= 0.0) {
            return bad("within_cluster_spread and signal must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub cohort: Cohort,
    /// True cluster of every subject.
    pub clusters: BTreeMap<u64, usize>,
    /// True logistic coefficients (on responses rescaled to `(r - 5) / 2.5`).
    pub coefficients: BTreeMap<u64, Vec<f64>>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCohort> {
    spec.validate()?;
    let mut rng = derive_rng(spec.seed, "synthetic", &[]);
    let dx = spec.feature_dim;
    let dl = spec.latent_dim_true;
    let std_normal = |rng: &mut rand_chacha::ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };

    // latent -> coefficient map, scaled so the logit's response part has
    // standard deviation close to `signal`
    let response_sd = 2.0 / 2.5;
    let map_scale = spec.signal / (response_sd * ((dx * dl) as f64).sqrt());
    let mixing: Vec<Vec<f64>> = (0..dx)
        .map(|_| (0..dl).map(|_| map_scale * std_normal(&mut rng)).collect())
        .collect();
    let centres: Vec<Vec<f64>> = (0..spec.n_clusters)
        .map(|_| (0..dl).map(|_| std_normal(&mut rng)).collect())
        .collect();

    // balanced cluster assignment
    let mut assignment: Vec<usize> = (0..spec.n_subjects).map(|n| n % spec.n_clusters).collect();
    assignment.shuffle(&mut rng);

    let noise = Normal::new(0.0, 2.0).expect("valid normal");
    let mut clusters = BTreeMap::new();
    let mut coefficients = BTreeMap::new();
    let mut rows: Vec<(Observation, f64)> = Vec::new();
    for (n, &k) in assignment.iter().enumerate() {
        let subject = n as u64;
        let latent: Vec<f64> = centres[k]
            .iter()
            .map(|c| c + spec.within_cluster_spread * std_normal(&mut rng))
            .collect();
        let beta: Vec<f64> = mixing
            .iter()
            .map(|row| row.iter().zip(&latent).map(|(a, l)| a * l).sum())
            .collect();
        let profile: Vec<f64> = (0..dx).map(|_| rng.random_range(2.0..8.0)).collect();
        let n_obs = rng.random_range(spec.obs_per_subject.0..=spec.obs_per_subject.1);
        let mut t = 0.0;
        for _ in 0..n_obs {
            t += rng.random_range(0.05..0.5);
            let responses: Vec<u8> = profile
                .iter()
                .map(|&m| {
                    let v: f64 = m + noise.sample(&mut rng);
                    v.round().clamp(0.0, f64::from(MAX_RESPONSE)) as u8
                })
                .collect();
            let eta: f64 = beta
                .iter()
                .zip(&responses)
                .map(|(b, &r)| b * (f64::from(r) - 5.0) / 2.5)
                .sum();
            rows.push((
                Observation {
                    subject_id: subject,
                    timestamp: (t * 1e4_f64).round() / 1e4,
                    responses,
                    label: false,
                },
                eta,
            ));
        }
        clusters.insert(subject, k);
        coefficients.insert(subject, beta);
    }

    let intercept = calibrate_intercept(rows.iter().map(|(_, e)| *e), spec.base_rate);
    let observations = rows
        .into_iter()
        .map(|(mut o, eta)| {
            o.label = rng.random::<f64>() < sigmoid(intercept + eta);
            o
        })
        .collect();

    Ok(SyntheticCohort {
        cohort: Cohort::new(observations, dx)?,
        clusters,
        coefficients,
    })
}

/// Bisection for the intercept whose mean sigmoid over `etas` equals `rate`.
fn calibrate_intercept(etas: impl Iterator<Item = f64> + Clone, rate: f64) -> f64 {
    let n = etas.clone().count().max(1) as f64;
    let mean_p = |b: f64| etas.clone().map(|e| sigmoid(b + e)).sum::<f64>() / n;
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_p(mid) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_given_seed() {
        let spec = SyntheticSpec { seed: 5, n_subjects: 8, ..Default::default() };
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a.cohort, b.cohort);
        assert_eq!(a.clusters, b.clusters);
    }

    #[test]
    fn responses_in_range() {
        let s = generate_synthetic(&SyntheticSpec { n_subjects: 10, ..Default::default() }).unwrap();
        assert!(s.cohort.observations().iter().all(|o| o.responses.iter().all(|&r| r <= 10)));
    }

    #[test]
    fn positive_rate_near_base_rate() {
        // Monte Carlo count over 50 x 200 observations
        let spec = SyntheticSpec {
            n_subjects: 50,
            obs_per_subject: (200, 200),
            base_rate: 0.2,
            seed: 13,
            ..Default::default()
        };
        let s = generate_synthetic(&spec).unwrap();
        assert_eq!(s.cohort.len(), 10_000);
        assert!((s.cohort.positive_rate() - 0.2).abs() < 0.05, "{}", s.cohort.positive_rate());
    }

    #[test]
    fn clusters_separate_coefficients() {
        let s = generate_synthetic(&SyntheticSpec { n_subjects: 40, seed: 2, ..Default::default() }).unwrap();
        let (mut within, mut between) = ((0.0, 0usize), (0.0, 0usize));
        let ids: Vec<u64> = s.clusters.keys().copied().collect();
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i + 1..] {
                let d: f64 = s.coefficients[a]
                    .iter()
                    .zip(&s.coefficients[b])
                    .map(|(x, y)| (x - y).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let slot = if s.clusters[a] == s.clusters[b] { &mut within } else { &mut between };
                slot.0 += d;
                slot.1 += 1;
            }
        }
        assert!(within.0 / within.1 as f64 * 2.0 < between.0 / between.1 as f64);
    }

    #[test]
    fn rejects_more_clusters_than_subjects() {
        let spec = SyntheticSpec { n_subjects: 3, n_clusters: 4, ..Default::default() };
        assert!(matches!(generate_synthetic(&spec), Err(Error::Config(_))));
    }
}
