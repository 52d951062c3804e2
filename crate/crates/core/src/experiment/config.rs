use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineKind, Distance, KnnHyper, LrHyper, Variant};
use crate::data::{SplitOrder, SyntheticSpec, DEFAULT_MIN_NEG, DEFAULT_MIN_POS};
use crate::svlsgp::LsgpConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Csv(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lr,
    Knn,
    Svlsgp,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Lr => "lr",
            Method::Knn => "knn",
            Method::Svlsgp => "svlsgp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScopeChoice {
    Single,
    Idiographic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grids {
    pub lr_l2: Vec<f64>,
    pub knn_k: Vec<usize>,
    pub knn_distance: Vec<Distance>,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            lr_l2: vec![1.0],
            knn_k: vec![1, 2],
            knn_distance: vec![Distance::Euclidean, Distance::Manhattan],
        }
    }
}

impl Grids {
    pub fn variant(&self, method: Method) -> Option<Variant> {
        let grid = match method {
            Method::Lr => self
                .lr_l2
                .iter()
                .map(|&l2| BaselineKind::Lr(LrHyper { l2, ..LrHyper::default() }))
                .collect(),
            Method::Knn => self
                .knn_k
                .iter()
                .flat_map(|&k| {
                    self.knn_distance
                        .iter()
                        .map(move |&distance| BaselineKind::Knn(KnnHyper { k, distance }))
                })
                .collect(),
            Method::Svlsgp => return None,
        };
        Some(Variant {
            name: method.name().into(),
            grid,
        })
    }
}

/// Everything `run` and `groups` need; persisted as `config.json` in the
/// output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub methods: Vec<Method>,
    /// Scopes for the baselines; SV-LSGP always runs as one shared model.
    pub scopes: Vec<ScopeChoice>,
    pub grids: Grids,
    pub lsgp: LsgpConfig,
    pub n_cuts: usize,
    pub n_restarts: usize,
    pub seed: u64,
    pub fractions: (f64, f64, f64),
    pub split_order: SplitOrder,
    pub min_pos: usize,
    pub min_neg: usize,
    /// Report KNN log-likelihood (from smoothed votes) instead of N/A.
    pub knn_log_likelihood: bool,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Synthetic(SyntheticSpec::default()),
            methods: vec![Method::Lr, Method::Knn, Method::Svlsgp],
            scopes: vec![ScopeChoice::Single, ScopeChoice::Idiographic],
            grids: Grids::default(),
            lsgp: LsgpConfig::desk(),
            n_cuts: 5,
            n_restarts: 5,
            seed: 0,
            fractions: (0.5, 0.25, 0.25),
            split_order: SplitOrder::Random,
            min_pos: DEFAULT_MIN_POS,
            min_neg: DEFAULT_MIN_NEG,
            knn_log_likelihood: false,
            output_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.methods.is_empty() {
            return bad("no methods selected");
        }
        if self.n_cuts == 0 || self.n_restarts == 0 {
            return bad("n_cuts and n_restarts must be at least 1");
        }
        if self.grids.lr_l2.is_empty() || self.grids.knn_k.is_empty() || self.grids.knn_distance.is_empty() {
            return bad("hyperparameter grids must be non-empty");
        }
        if self.grids.knn_k.contains(&0) || self.grids.lr_l2.iter().any(|&l| !(l >= 0.0)) {
            return bad("knn k must be positive and lr l2 non-negative");
        }
        if self.methods.iter().any(|&m| m != Method::Svlsgp) && self.scopes.is_empty() {
            return bad("baselines need at least one scope");
        }
        if let DataSource::Synthetic(spec) = &self.data {
            spec.validate()?;
        }
        self.lsgp.validate()
    }
}
