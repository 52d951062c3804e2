//! Sparse variational latent similarity GP.
//!
//! Generative model: every subject has `z_n ~ N(0, I)`; observation `i` of
//! subject `n` has augmented input `x̂_i = [x_i; z_n]`, latent function
//! `f ~ GP(0, k)` and label `y_i ~ Bernoulli(sigmoid(f(x̂_i)))`. Inference
//! uses `M` inducing points with a full-covariance Gaussian `q(U)` and
//! mean-field Gaussians `q(z_n)`.

mod checkpoint;
mod config;
mod elbo;
mod params;
mod train;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::data::{Cohort, Observation, Standardizer};
use crate::error::{Error, Result};
use crate::kernels::{ArdRbf, Kernel, StateLinear};
use crate::quadrature::GaussHermite;
use crate::seeds::derive_rng;

pub use checkpoint::Checkpoint;
pub use config::{KernelChoice, LsgpConfig};
pub use elbo::{
    augment, elbo_with_draws, expected_log_bernoulli, expected_sigmoid, kl_u, kl_z, latent_sample,
    marginal_qf, ElboBreakdown, TrainingData, ZDraw, VARIANCE_FLOOR,
};
pub use params::{LsgpParams, ParamGrads};
pub use train::{fit, fit_with_restarts, write_trace_csv, RestartOutcome, TracePoint};

/// A model: configuration, parameters and the tables needed to map raw
/// observations onto them.
#[derive(Debug, Clone, PartialEq)]
pub struct LsgpModel {
    pub config: LsgpConfig,
    pub params: LsgpParams,
    /// Subject id of every row of `z_means`, ascending.
    pub subjects: Vec<u64>,
    pub standardizer: Standardizer,
}

fn build_kernel<R: Rng>(config: &LsgpConfig, dx: usize, rng: &mut R) -> Kernel {
    let dz = config.latent_dim;
    match config.kernel {
        KernelChoice::StateLinearTimesArd => Kernel::product(
            Kernel::StateLinear(StateLinear::init(dx, dz, config.hidden_width, 1.0, 1.0, rng)),
            Kernel::ArdRbf(ArdRbf::new(dx, &vec![1.0; dz], 1.0)),
        ),
        KernelChoice::ArdRbf => Kernel::ArdRbf(ArdRbf::new(0, &vec![1.0; dx + dz], 1.0)),
    }
}

impl LsgpModel {
    /// Initial parameters for `train`, deterministic given `config.seed`.
    ///
    /// Latent means `~ N(0, 0.1²)` with scales 0.1; `q(U) = N(0, I)`;
    /// inducing response blocks are distinct training rows (repeats only when
    /// `M` exceeds the training size) and latent blocks `~ N(0, 0.1²)`.
    pub fn init(config: &LsgpConfig, train: &Cohort) -> Result<Self> {
        config.validate()?;
        if train.is_empty() {
            return Err(Error::Config("empty training set".into()));
        }
        let mut rng = derive_rng(config.seed, "init", &[]);
        let dx = train.feature_dim();
        let dz = config.latent_dim;
        let m = config.n_inducing;
        let rows = train.feature_rows();
        let standardizer = Standardizer::fit(&rows, dx);
        let subjects = train.subject_ids();
        let small = Normal::new(0.0, 0.1).expect("valid normal");

        let kernel = build_kernel(config, dx, &mut rng);
        let picks: Vec<usize> = if m <= rows.len() {
            sample(&mut rng, rows.len(), m).into_vec()
        } else {
            (0..m).map(|_| rng.random_range(0..rows.len())).collect()
        };
        let mut inducing = DMatrix::zeros(m, dx + dz);
        for (r, &i) in picks.iter().enumerate() {
            let x = standardizer.apply(&rows[i]);
            for d in 0..dx {
                inducing[(r, d)] = x[d];
            }
            for d in 0..dz {
                inducing[(r, dx + d)] = small.sample(&mut rng);
            }
        }
        let n = subjects.len();
        let z_means = DMatrix::from_fn(n, dz, |_, _| small.sample(&mut rng));
        let params = LsgpParams {
            kernel,
            inducing,
            q_mu: nalgebra::DVector::zeros(m),
            q_chol: DMatrix::identity(m, m),
            z_means,
            z_log_scales: DMatrix::from_element(n, dz, 0.1f64.ln()),
        };
        Ok(Self {
            config: config.clone(),
            params,
            subjects,
            standardizer,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.standardizer.mean.len()
    }

    pub fn subject_row(&self, subject: u64) -> Option<usize> {
        self.subjects.binary_search(&subject).ok()
    }

    /// Standardized inputs of `cohort`; every subject must be known.
    pub fn training_data(&self, cohort: &Cohort) -> Result<TrainingData> {
        let n = cohort.len();
        let dx = self.feature_dim();
        let mut x = DMatrix::zeros(n, dx);
        let mut subject_row = Vec::with_capacity(n);
        for (i, o) in cohort.observations().iter().enumerate() {
            let s = self.standardizer.apply(&o.features());
            for d in 0..dx {
                x[(i, d)] = s[d];
            }
            subject_row.push(self.subject_row(o.subject_id).ok_or(Error::UnknownSubject(o.subject_id))?);
        }
        Ok(TrainingData {
            x,
            y: cohort.observations().iter().map(|o| o.label).collect(),
            subject_row,
        })
    }

    /// Minibatch ELBO with fresh reparameterized latent draws.
    pub fn elbo<R: Rng>(&self, data: &TrainingData, batch: &[usize], total_n: usize, rng: &mut R) -> Result<ElboBreakdown> {
        let draws = ZDraw::sample_many(self.config.mc_samples_z, self.subjects.len(), self.config.latent_dim, rng);
        let gh = GaussHermite::new(self.config.quadrature_nodes);
        elbo_with_draws(&self.params, data, batch, total_n, &draws, &gh, self.config.jitter, false).map(|r| r.0)
    }

    /// Marginal `q(f)` mean and variance of each observation in `batch`,
    /// using `z[subject]` as the latent vector of its subject.
    pub fn marginal_qf(
        &self,
        batch: &[Observation],
        z: &BTreeMap<u64, Vec<f64>>,
    ) -> Result<(nalgebra::DVector<f64>, nalgebra::DVector<f64>)> {
        let dx = self.feature_dim();
        let dz = self.config.latent_dim;
        let mut xhat = DMatrix::zeros(batch.len(), dx + dz);
        for (i, o) in batch.iter().enumerate() {
            let zs = z.get(&o.subject_id).ok_or(Error::UnknownSubject(o.subject_id))?;
            if zs.len() != dz {
                return Err(Error::Config(format!("latent draw has {} entries, expected {dz}", zs.len())));
            }
            let x = self.standardizer.apply(&o.features());
            for d in 0..dx {
                xhat[(i, d)] = x[d];
            }
            for d in 0..dz {
                xhat[(i, dx + d)] = zs[d];
            }
        }
        marginal_qf(&self.params, &xhat, self.config.jitter)
    }

    /// Predictive probability of an event for one response vector.
    ///
    /// Known subjects draw `z ~ q(z_n)`; unknown or absent subjects draw
    /// `z ~ N(0, I)` unless `strict`, in which case an unknown id is an error.
    pub fn predict<R: Rng>(
        &self,
        subject: Option<u64>,
        responses: &[u8],
        mc_samples: usize,
        strict: bool,
        rng: &mut R,
    ) -> Result<f64> {
        if responses.len() != self.feature_dim() || responses.iter().any(|&r| r > crate::data::MAX_RESPONSE) {
            return Err(Error::Config(format!(
                "expected {} responses in [0, 10]",
                self.feature_dim()
            )));
        }
        if strict {
            if let Some(s) = subject {
                self.subject_row(s).ok_or(Error::UnknownSubject(s))?;
            }
        }
        let x: Vec<f64> = responses.iter().map(|&r| f64::from(r)).collect();
        Ok(self.predict_rows(&[(subject, x)], mc_samples, rng)?[0])
    }

    /// Predictive probabilities for every observation of `cohort`.
    pub fn predict_cohort<R: Rng>(&self, cohort: &Cohort, mc_samples: usize, rng: &mut R) -> Result<Vec<f64>> {
        let rows: Vec<(Option<u64>, Vec<f64>)> = cohort
            .observations()
            .iter()
            .map(|o| (Some(o.subject_id), o.features()))
            .collect();
        self.predict_rows(&rows, mc_samples, rng)
    }

    /// Shared prediction path. One latent draw per subject per Monte Carlo
    /// sample; rows without a subject id draw independently.
    fn predict_rows<R: Rng>(&self, rows: &[(Option<u64>, Vec<f64>)], mc_samples: usize, rng: &mut R) -> Result<Vec<f64>> {
        if mc_samples == 0 {
            return Err(Error::Config("mc_samples must be positive".into()));
        }
        let dx = self.feature_dim();
        let dz = self.config.latent_dim;
        let n = rows.len();
        let chol = elbo::inducing_cholesky(&self.params, self.config.jitter)?;
        let gh = GaussHermite::new(self.config.quadrature_nodes);

        let mut x = DMatrix::zeros(n, dx);
        for (i, (_, r)) in rows.iter().enumerate() {
            let s = self.standardizer.apply(r);
            for d in 0..dx {
                x[(i, d)] = s[d];
            }
        }
        // ascending list of unseen ids gets its own prior draws
        let mut unseen: Vec<u64> = rows
            .iter()
            .filter_map(|(s, _)| *s)
            .filter(|s| self.subject_row(*s).is_none())
            .collect();
        unseen.sort_unstable();
        unseen.dedup();

        let mut probs = vec![0.0; n];
        for _ in 0..mc_samples {
            let eps_known = DMatrix::from_fn(self.subjects.len(), dz, |_, _| rng.sample::<f64, _>(StandardNormal));
            let z_known = latent_sample(&self.params, &eps_known);
            let z_unseen = DMatrix::from_fn(unseen.len(), dz, |_, _| rng.sample::<f64, _>(StandardNormal));
            let mut z = DMatrix::zeros(n, dz);
            for (i, (s, _)) in rows.iter().enumerate() {
                for d in 0..dz {
                    z[(i, d)] = match s {
                        Some(id) => match self.subject_row(*id) {
                            Some(row) => z_known[(row, d)],
                            None => z_unseen[(unseen.binary_search(id).expect("collected"), d)],
                        },
                        None => rng.sample::<f64, _>(StandardNormal),
                    };
                }
            }
            let xhat = augment(&x, &z);
            let kuf = self.params.kernel.matrix(&self.params.inducing, &xhat)?;
            let kff = self.params.kernel.diag(&xhat)?;
            let p = chol.solve(&kuf);
            let s_t_p = self.params.q_chol.transpose() * &p;
            for i in 0..n {
                let mean = p.column(i).dot(&self.params.q_mu);
                let var = (kff[i] - kuf.column(i).dot(&p.column(i)) + s_t_p.column(i).norm_squared()).max(VARIANCE_FLOOR);
                probs[i] += expected_sigmoid(&gh, mean, var);
            }
        }
        Ok(probs.into_iter().map(|p| (p / mc_samples as f64).clamp(0.0, 1.0)).collect())
    }

    /// Posterior latent means keyed by subject.
    pub fn latent_means(&self) -> BTreeMap<u64, Vec<f64>> {
        self.subjects
            .iter()
            .enumerate()
            .map(|(r, &s)| (s, self.params.z_means.row(r).iter().copied().collect()))
            .collect()
    }
}
