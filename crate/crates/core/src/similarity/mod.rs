//! Subject-similarity graphs read off the latent kernel, modularity scoring
//! and pruned graph export.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::svlsgp::LsgpModel;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    /// Symmetric nonnegative covariance between subjects.
    pub k: DMatrix<f64>,
    pub subject_ids: Vec<u64>,
    /// Group label per subject, indexed like `subject_ids`.
    pub groups: Option<Vec<usize>>,
    pub gamma: f64,
}

/// Which normalization to apply when scoring modularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `1 / (2S)` prefactor and `gamma / (2S)` null term.
    Paper,
    /// Newman's weighted form: `1 / S` and `gamma / S`.
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModularityOptions {
    pub normalization: Normalization,
    /// Treat the diagonal of `K` as zero.
    pub exclude_diagonal: bool,
}

impl Default for ModularityOptions {
    fn default() -> Self {
        Self {
            normalization: Normalization::Paper,
            exclude_diagonal: false,
        }
    }
}

/// Evaluates the latent-only factor of the model's kernel at the posterior
/// means of the subject embeddings.
pub fn patient_covariance(model: &LsgpModel) -> Result<SimilarityGraph> {
    let factor = model.params.kernel.latent_factor(model.feature_dim())?;
    let dx = model.feature_dim();
    let means = &model.params.z_means;
    let (n, dz) = means.shape();
    let mut padded = DMatrix::zeros(n, dx + dz);
    padded.columns_mut(dx, dz).copy_from(means);
    Ok(SimilarityGraph {
        k: factor.matrix(&padded, &padded),
        subject_ids: model.subjects.clone(),
        groups: None,
        gamma: 1.0,
    })
}

impl SimilarityGraph {
    pub fn new(k: DMatrix<f64>, subject_ids: Vec<u64>) -> Self {
        Self {
            k,
            subject_ids,
            groups: None,
            gamma: 1.0,
        }
    }

    /// Attaches labels from a subject → group map. Every subject needs one.
    pub fn with_group_map(mut self, map: &BTreeMap<u64, usize>) -> Result<Self> {
        let groups = self
            .subject_ids
            .iter()
            .map(|s| map.get(s).copied().ok_or(Error::UnknownSubject(*s)))
            .collect::<Result<_>>()?;
        self.groups = Some(groups);
        Ok(self)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn len(&self) -> usize {
        self.subject_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subject_ids.is_empty()
    }

    /// Off-diagonal entries `(i, j, K[i, j])` with `i < j`.
    pub fn off_diagonal(&self) -> Vec<(usize, usize, f64)> {
        let n = self.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, self.k[(i, j)]))
            .collect()
    }

    /// Value at `q` (in `[0, 1]`) of the sorted off-diagonal entries, with
    /// linear interpolation.
    pub fn off_diagonal_quantile(&self, q: f64) -> f64 {
        let mut v: Vec<f64> = self.off_diagonal().into_iter().map(|e| e.2).collect();
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(f64::total_cmp);
        let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    }
}

pub fn modularity(graph: &SimilarityGraph, options: ModularityOptions) -> Result<f64> {
    let groups = graph
        .groups
        .as_ref()
        .ok_or_else(|| Error::Config("modularity needs group labels".into()))?;
    modularity_with(&graph.k, groups, graph.gamma, options)
}

/// Modularity of `groups` on the weighted adjacency `k`.
pub fn modularity_with(k: &DMatrix<f64>, groups: &[usize], gamma: f64, options: ModularityOptions) -> Result<f64> {
    let mut k = k.clone();
    if options.exclude_diagonal {
        k.fill_diagonal(0.0);
    }
    let rows: DVector<f64> = k.column_sum();
    let cols: DVector<f64> = k.row_sum().transpose();
    let s = rows.sum();
    if s <= 0.0 {
        return Err(Error::ZeroWeight);
    }
    // the double sum of degree products factorizes per group
    let mut within = 0.0;
    let mut degree: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    for (a, &ga) in groups.iter().enumerate() {
        let d = degree.entry(ga).or_default();
        d.0 += rows[a];
        d.1 += cols[a];
        for (b, &gb) in groups.iter().enumerate() {
            if ga == gb {
                within += k[(a, b)];
            }
        }
    }
    let (scale, null_scale) = match options.normalization {
        Normalization::Paper => (2.0 * s, 2.0 * s),
        Normalization::Standard => (s, s),
    };
    let null: f64 = degree.values().map(|&(r, c)| r / null_scale * c).sum();
    Ok((within - gamma * null) / scale)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: u64,
    pub group: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub a: u64,
    pub b: u64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphExport {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    #[serde(rename = "Q_paper")]
    pub q_paper: Option<f64>,
    #[serde(rename = "Q_standard")]
    pub q_standard: Option<f64>,
    pub gamma: f64,
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn group_color(group: Option<usize>) -> &'static str {
    group.map_or("#ffffff", |g| PALETTE[g % PALETTE.len()])
}

/// Keeps edges with `K[i, j] >= threshold`; self-loops are always dropped.
pub fn prune(graph: &SimilarityGraph, threshold: f64) -> GraphExport {
    let group_of = |i: usize| graph.groups.as_ref().map(|g| g[i]);
    let with_defaults = |options| graph.groups.as_ref().and_then(|_| modularity(graph, options).ok());
    GraphExport {
        nodes: graph
            .subject_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| GraphNode { id, group: group_of(i) })
            .collect(),
        edges: graph
            .off_diagonal()
            .into_iter()
            .filter(|e| e.2 >= threshold)
            .map(|(i, j, w)| GraphEdge {
                a: graph.subject_ids[i],
                b: graph.subject_ids[j],
                weight: w,
            })
            .collect(),
        q_paper: with_defaults(ModularityOptions::default()),
        q_standard: with_defaults(ModularityOptions {
            normalization: Normalization::Standard,
            exclude_diagonal: false,
        }),
        gamma: graph.gamma,
    }
}

impl GraphExport {
    pub fn to_dot(&self) -> String {
        let groups: BTreeMap<u64, Option<usize>> = self.nodes.iter().map(|n| (n.id, n.group)).collect();
        let max_w = self.edges.iter().map(|e| e.weight).fold(0.0, f64::max);
        let mut out = String::from("graph similarity {\n  node [style=filled];\n");
        for n in &self.nodes {
            let _ = writeln!(out, "  s{} [fillcolor=\"{}\"];", n.id, group_color(n.group));
        }
        for e in &self.edges {
            let (ga, gb) = (groups[&e.a], groups[&e.b]);
            let color = if ga.is_some() && ga == gb { group_color(ga) } else { "#000000" };
            let width = if max_w > 0.0 { 0.5 + 4.5 * e.weight / max_w } else { 1.0 };
            let _ = writeln!(out, "  s{} -- s{} [penwidth={:.3}, color=\"{}\"];", e.a, e.b, width, color);
        }
        out.push_str("}\n");
        out
    }

    /// Writes `<stem>.dot` and `<stem>.json`.
    pub fn write(&self, stem: &Path) -> Result<()> {
        std::fs::write(stem.with_extension("dot"), self.to_dot())?;
        std::fs::write(stem.with_extension("json"), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

pub fn prune_and_export(graph: &SimilarityGraph, threshold: f64, stem: &Path) -> Result<GraphExport> {
    if !(threshold >= 0.0) {
        return Err(Error::Config(format!("pruning threshold must be >= 0, got {threshold}")));
    }
    let export = prune(graph, threshold);
    export.write(stem)?;
    Ok(export)
}
