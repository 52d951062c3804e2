use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Standardizer;
use crate::error::{Error, Result};
use crate::kernels::Kernel;

use super::{LsgpConfig, LsgpModel, LsgpParams};

/// On-disk form of a fitted model. Matrices are stored as lists of rows;
/// the kernel carries natural-space values plus its unconstrained vector,
/// which takes precedence on load so a round trip is bit-exact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: LsgpConfig,
    pub kernel: Kernel,
    #[serde(default)]
    pub kernel_raw: Option<Vec<f64>>,
    pub inducing: Vec<Vec<f64>>,
    pub q_mu: Vec<f64>,
    pub q_chol: Vec<Vec<f64>>,
    pub subjects: Vec<u64>,
    pub z_means: Vec<Vec<f64>>,
    pub z_log_scales: Vec<Vec<f64>>,
    pub standardizer: Standardizer,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(name: &str, rows: &[Vec<f64>], ncols: usize) -> Result<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config(format!("checkpoint field `{name}` has ragged rows")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl From<&LsgpModel> for Checkpoint {
    fn from(m: &LsgpModel) -> Self {
        Self {
            config: m.config.clone(),
            kernel: m.params.kernel.clone(),
            kernel_raw: Some(m.params.kernel.raw_params()),
            inducing: rows(&m.params.inducing),
            q_mu: m.params.q_mu.iter().copied().collect(),
            q_chol: rows(&m.params.q_chol),
            subjects: m.subjects.clone(),
            z_means: rows(&m.params.z_means),
            z_log_scales: rows(&m.params.z_log_scales),
            standardizer: m.standardizer.clone(),
        }
    }
}

impl Checkpoint {
    pub fn into_model(self) -> Result<LsgpModel> {
        let dx = self.standardizer.mean.len();
        let dz = self.config.latent_dim;
        let m = self.q_mu.len();
        let inducing = matrix("inducing", &self.inducing, dx + dz)?;
        let q_chol = matrix("q_chol", &self.q_chol, m)?;
        let z_means = matrix("z_means", &self.z_means, dz)?;
        let z_log_scales = matrix("z_log_scales", &self.z_log_scales, dz)?;
        if inducing.nrows() != m || q_chol.nrows() != m {
            return Err(Error::Config("checkpoint inducing sizes disagree".into()));
        }
        if z_means.nrows() != self.subjects.len() || z_log_scales.nrows() != self.subjects.len() {
            return Err(Error::Config("checkpoint subject table disagrees with latent rows".into()));
        }
        if (0..m).any(|j| q_chol[(j, j)] <= 0.0) {
            return Err(Error::Config("q_chol diagonal must be positive".into()));
        }
        let mut kernel = self.kernel;
        if let Some(raw) = &self.kernel_raw {
            if raw.len() != kernel.n_params() {
                return Err(Error::Config("checkpoint kernel_raw length disagrees with the kernel".into()));
            }
            kernel.set_raw_params(raw);
        }
        Ok(LsgpModel {
            config: self.config,
            params: LsgpParams {
                kernel,
                inducing,
                q_mu: DVector::from_vec(self.q_mu),
                q_chol,
                z_means,
                z_log_scales,
            },
            subjects: self.subjects,
            standardizer: self.standardizer,
        })
    }

    pub fn save(model: &LsgpModel, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(&Checkpoint::from(model))?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<LsgpModel> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str::<Checkpoint>(&text)?.into_model()
    }
}
