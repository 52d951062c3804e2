//! Logistic regression and nearest-neighbour baselines fitted at one of
//! three scopes: one model for everybody, one per subject, or one per
//! group of subjects.

mod knn;
mod lr;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use knn::{Distance, KnnHyper, KnnUnit};
pub use lr::{fit_lr, LrHyper, LrUnit};

use crate::data::{Cohort, Observation};
use crate::eval::roc_auc;
use crate::{Error, Result};

/// Constant probabilities for single-class units are clipped to this range.
pub const CONSTANT_CLIP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scope", content = "groups", rename_all = "snake_case")]
pub enum FittingScope {
    Single,
    Idiographic,
    /// Subject id to group id.
    Grouped(BTreeMap<u64, usize>),
}

impl FittingScope {
    pub fn name(&self) -> &'static str {
        match self {
            FittingScope::Single => "single",
            FittingScope::Idiographic => "idiographic",
            FittingScope::Grouped(_) => "grouped",
        }
    }

    /// Unit key for a subject, or `None` when the scope does not cover it.
    fn unit_of(&self, subject: u64) -> Option<u64> {
        match self {
            FittingScope::Single => Some(0),
            FittingScope::Idiographic => Some(subject),
            FittingScope::Grouped(map) => map.get(&subject).map(|&g| g as u64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BaselineKind {
    Lr(LrHyper),
    Knn(KnnHyper),
}

impl BaselineKind {
    pub fn label(&self) -> String {
        match self {
            BaselineKind::Lr(h) => format!("lr(l2={})", h.l2),
            BaselineKind::Knn(h) => format!("knn(k={},{:?})", h.k, h.distance).to_lowercase(),
        }
    }
}

/// Hyperparameter grids searched during selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineFamily {
    Lr,
    Knn,
}

impl BaselineFamily {
    pub fn name(self) -> &'static str {
        match self {
            BaselineFamily::Lr => "lr",
            BaselineFamily::Knn => "knn",
        }
    }

    pub fn grid(self) -> Vec<BaselineKind> {
        match self {
            BaselineFamily::Lr => vec![BaselineKind::Lr(LrHyper::default())],
            BaselineFamily::Knn => [1, 2]
                .into_iter()
                .flat_map(|k| {
                    [Distance::Euclidean, Distance::Manhattan]
                        .into_iter()
                        .map(move |distance| BaselineKind::Knn(KnnHyper { k, distance }))
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Unit {
    Lr(LrUnit),
    Knn(KnnUnit),
    Constant { probability: f64 },
}

impl Unit {
    pub fn predict(&self, features: &[f64]) -> f64 {
        match self {
            Unit::Lr(u) => u.predict(features),
            Unit::Knn(u) => u.predict(features),
            Unit::Constant { probability } => *probability,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub kind: BaselineKind,
    pub scope: FittingScope,
    pub units: BTreeMap<u64, Unit>,
}

fn fit_unit(kind: &BaselineKind, obs: &[&Observation], dim: usize) -> Unit {
    let rows: Vec<Vec<f64>> = obs.iter().map(|o| o.features()).collect();
    let labels: Vec<bool> = obs.iter().map(|o| o.label).collect();
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 || pos == labels.len() {
        let rate = pos as f64 / labels.len().max(1) as f64;
        return Unit::Constant {
            probability: rate.clamp(CONSTANT_CLIP, 1.0 - CONSTANT_CLIP),
        };
    }
    match kind {
        BaselineKind::Lr(h) => Unit::Lr(fit_lr(&rows, &labels, dim, h).0),
        BaselineKind::Knn(h) => Unit::Knn(KnnUnit::fit(&rows, &labels, dim, *h)),
    }
}

/// Fits one unit per scope partition of the training data.
pub fn fit_baseline(kind: BaselineKind, scope: FittingScope, train: &Cohort) -> Result<BaselineModel> {
    if train.is_empty() {
        return Err(Error::Config("cannot fit a baseline on an empty training set".into()));
    }
    let mut partition: BTreeMap<u64, Vec<&Observation>> = BTreeMap::new();
    for o in train.observations() {
        let unit = scope.unit_of(o.subject_id).ok_or(Error::Scope(o.subject_id))?;
        partition.entry(unit).or_default().push(o);
    }
    let units = partition
        .into_iter()
        .map(|(key, obs)| (key, fit_unit(&kind, &obs, train.feature_dim())))
        .collect();
    Ok(BaselineModel { kind, scope, units })
}

impl BaselineModel {
    pub fn predict(&self, subject: u64, features: &[f64]) -> Result<f64> {
        let unit = self
            .scope
            .unit_of(subject)
            .and_then(|k| self.units.get(&k))
            .ok_or(Error::Scope(subject))?;
        Ok(unit.predict(features))
    }

    pub fn predict_cohort(&self, cohort: &Cohort) -> Result<Vec<f64>> {
        cohort
            .observations()
            .iter()
            .map(|o| self.predict(o.subject_id, &o.features()))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// A named hyperparameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub name: String,
    pub grid: Vec<BaselineKind>,
}

impl From<BaselineFamily> for Variant {
    fn from(family: BaselineFamily) -> Self {
        Self {
            name: family.name().into(),
            grid: family.grid(),
        }
    }
}

/// Fits every grid point and keeps the one with the best pooled validation
/// ROC-AUC (earliest grid point on ties or undefined AUC).
pub fn fit_selected(
    grid: &[BaselineKind],
    scope: &FittingScope,
    train: &Cohort,
    validation: &Cohort,
) -> Result<BaselineModel> {
    if grid.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    let labels = validation.labels();
    let mut best: Option<(f64, BaselineModel)> = None;
    for &kind in grid {
        let model = fit_baseline(kind, scope.clone(), train)?;
        if best.is_some() && validation.is_empty() {
            break;
        }
        let auc = roc_auc(&model.predict_cohort(validation)?, &labels);
        let score = if auc.is_nan() { f64::NEG_INFINITY } else { auc };
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, model));
        }
    }
    Ok(best.expect("grid checked non-empty").1)
}

#[cfg(test)]
mod tests;
