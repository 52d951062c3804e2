use serde::{Deserialize, Serialize};

use crate::data::Standardizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    /// Minkowski with p = 2.
    Euclidean,
    Manhattan,
}

impl Distance {
    pub fn between(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Distance::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt(),
            Distance::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnHyper {
    pub k: usize,
    pub distance: Distance,
}

/// Stored standardized training points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnUnit {
    pub standardizer: Standardizer,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
    pub hyper: KnnHyper,
}

impl KnnUnit {
    pub fn fit(rows: &[Vec<f64>], labels: &[bool], dim: usize, hyper: KnnHyper) -> Self {
        let standardizer = Standardizer::fit(rows, dim);
        Self {
            points: rows.iter().map(|r| standardizer.apply(r)).collect(),
            labels: labels.to_vec(),
            standardizer,
            hyper,
        }
    }

    /// Positive labels among the `k` nearest points and the number of
    /// neighbours used. Distance ties go to the lower training index.
    pub fn votes(&self, features: &[f64]) -> (usize, usize) {
        let q = self.standardizer.apply(features);
        let mut d: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (self.hyper.distance.between(&q, p), i))
            .collect();
        let k = self.hyper.k.min(d.len());
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let pos = d[..k].iter().filter(|&&(_, i)| self.labels[i]).count();
        (pos, k)
    }

    /// Raw fraction of positive neighbours.
    pub fn vote_fraction(&self, features: &[f64]) -> f64 {
        let (pos, k) = self.votes(features);
        pos as f64 / k as f64
    }

    /// `(pos + 0.5) / (k + 1)`, which keeps the log-likelihood finite.
    pub fn predict(&self, features: &[f64]) -> f64 {
        let (pos, k) = self.votes(features);
        (pos as f64 + 0.5) / (k as f64 + 1.0)
    }
}
