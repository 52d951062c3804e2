use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{DEFAULT_HIDDEN, DEFAULT_JITTER};

/// Which kernel the model is built with.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    /// State-dependent linear kernel on responses times ARD on the latent block.
    #[default]
    StateLinearTimesArd,
    /// Single ARD-RBF over the full augmented input.
    ArdRbf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LsgpConfig {
    pub latent_dim: usize,
    pub n_inducing: usize,
    pub batch_size: usize,
    pub n_steps: usize,
    pub learning_rate: f64,
    pub quadrature_nodes: usize,
    /// Reparameterized latent draws per ELBO evaluation.
    pub mc_samples_z: usize,
    /// Latent draws per prediction.
    pub predict_mc_samples: usize,
    pub eval_every: usize,
    pub jitter: f64,
    pub hidden_width: usize,
    pub kernel: KernelChoice,
    pub seed: u64,
}

impl Default for LsgpConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl LsgpConfig {
    /// Laptop-scale preset.
    pub fn desk() -> Self {
        Self {
            latent_dim: 3,
            n_inducing: 64,
            batch_size: 64,
            n_steps: 3000,
            learning_rate: 0.01,
            quadrature_nodes: 20,
            mc_samples_z: 1,
            predict_mc_samples: 16,
            eval_every: 250,
            jitter: DEFAULT_JITTER,
            hidden_width: DEFAULT_HIDDEN,
            kernel: KernelChoice::default(),
            seed: 0,
        }
    }

    /// The full-size setting: 2000 inducing points, batches of 150, 15000
    /// steps at learning rate 0.005.
    pub fn paper() -> Self {
        Self {
            n_inducing: 2000,
            batch_size: 150,
            n_steps: 15000,
            learning_rate: 0.005,
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("latent_dim", self.latent_dim),
            ("n_inducing", self.n_inducing),
            ("batch_size", self.batch_size),
            ("quadrature_nodes", self.quadrature_nodes),
            ("mc_samples_z", self.mc_samples_z),
            ("predict_mc_samples", self.predict_mc_samples),
            ("eval_every", self.eval_every),
            ("hidden_width", self.hidden_width),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate > 0.0) || !(self.jitter >= 0.0) {
            return Err(Error::Config("learning_rate must be positive and jitter non-negative".into()));
        }
        Ok(())
    }
}
