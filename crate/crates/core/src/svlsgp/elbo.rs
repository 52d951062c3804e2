//! ELBO of the sparse variational model and its gradient.
//!
//! For one latent draw and a minibatch `b` of observations:
//!
//! ```text
//! Kuu = K(W, W) + jitter I = L Lᵀ        P = Kuu⁻¹ K(W, X̂_b)
//! mean_i = P_iᵀ m                         var_i = k(x̂_i, x̂_i) - K(W, x̂_i)ᵀ P_i + |Sᵀ P_i|²
//! ```
//!
//! where `q(U) = N(m, S Sᵀ)`. The expected log-likelihood under
//! `N(mean_i, var_i)` uses Gauss–Hermite quadrature. The gradient is written
//! out by hand as a reverse pass over these matrix expressions.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{jittered_cholesky, JitteredCholesky};
use crate::quadrature::GaussHermite;

use super::params::{LsgpParams, ParamGrads};

/// Marginal variances are clamped below at this value.
pub const VARIANCE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElboBreakdown {
    /// Minibatch estimate rescaled to the full training set.
    pub expected_log_lik: f64,
    pub kl_u: f64,
    pub kl_z: f64,
    pub total: f64,
}

/// Standardized training inputs with each row's subject index.
#[derive(Debug, Clone)]
pub struct TrainingData {
    /// `n x D_x`.
    pub x: DMatrix<f64>,
    pub y: Vec<bool>,
    /// Row of the subject in `z_means` for every observation.
    pub subject_row: Vec<usize>,
}

impl TrainingData {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Standard-normal noise for every subject's latent vector, with a weight
/// for averaging over several draws.
#[derive(Debug, Clone)]
pub struct ZDraw {
    pub weight: f64,
    /// `N x D_z`.
    pub eps: DMatrix<f64>,
}

impl ZDraw {
    pub fn sample<R: Rng>(n_subjects: usize, latent_dim: usize, weight: f64, rng: &mut R) -> Self {
        Self {
            weight,
            eps: DMatrix::from_fn(n_subjects, latent_dim, |_, _| rng.sample(StandardNormal)),
        }
    }

    /// Equal-weight draws.
    pub fn sample_many<R: Rng>(n: usize, n_subjects: usize, latent_dim: usize, rng: &mut R) -> Vec<Self> {
        (0..n)
            .map(|_| Self::sample(n_subjects, latent_dim, 1.0 / n as f64, rng))
            .collect()
    }
}

/// Latent vectors `μ + exp(log_scale) ∘ ε` for all subjects.
pub fn latent_sample(params: &LsgpParams, eps: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(params.z_means.nrows(), params.z_means.ncols(), |n, d| {
        params.z_means[(n, d)] + params.z_log_scales[(n, d)].exp() * eps[(n, d)]
    })
}

/// Rows `[x_i, z_i]`.
pub fn augment(x: &DMatrix<f64>, z: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(x.nrows(), z.nrows());
    let dx = x.ncols();
    DMatrix::from_fn(x.nrows(), dx + z.ncols(), |i, c| {
        if c < dx {
            x[(i, c)]
        } else {
            z[(i, c - dx)]
        }
    })
}

pub(crate) fn inducing_cholesky(params: &LsgpParams, jitter: f64) -> Result<JitteredCholesky> {
    let kuu = params.kernel.matrix(&params.inducing, &params.inducing)?;
    jittered_cholesky(&kuu, jitter)
}

struct Marginals {
    p: DMatrix<f64>,
    s_t_p: DMatrix<f64>,
    mean: DVector<f64>,
    /// Before clamping.
    var_raw: DVector<f64>,
}

fn marginals(params: &LsgpParams, chol: &JitteredCholesky, xhat: &DMatrix<f64>) -> Result<Marginals> {
    let kuf = params.kernel.matrix(&params.inducing, xhat)?;
    let kff = params.kernel.diag(xhat)?;
    let p = chol.solve(&kuf);
    let s_t_p = params.q_chol.transpose() * &p;
    let mean = p.transpose() * &params.q_mu;
    let var_raw = DVector::from_fn(xhat.nrows(), |i, _| {
        kff[i] - kuf.column(i).dot(&p.column(i)) + s_t_p.column(i).norm_squared()
    });
    Ok(Marginals {
        p,
        s_t_p,
        mean,
        var_raw,
    })
}

/// Mean and variance of `q(f_i) = ∫ p(f_i | u) q(u) du` for augmented rows
/// `xhat`. Variances are clamped below at [`VARIANCE_FLOOR`].
pub fn marginal_qf(params: &LsgpParams, xhat: &DMatrix<f64>, jitter: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    let chol = inducing_cholesky(params, jitter)?;
    let m = marginals(params, &chol, xhat)?;
    Ok((m.mean, m.var_raw.map(|v| v.max(VARIANCE_FLOOR))))
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `E[log p(y | f)]` for `f ~ N(mean, var)` and its derivatives with
/// respect to `mean` and `var`, all from the same quadrature rule.
pub fn expected_log_bernoulli(gh: &GaussHermite, mean: f64, var: f64, y: bool) -> (f64, f64, f64) {
    let s = if y { 1.0 } else { -1.0 };
    let sd = var.sqrt();
    let (mut e, mut d_mean, mut d_var) = (0.0, 0.0, 0.0);
    for (&x, &w) in gh.nodes.iter().zip(&gh.weights) {
        let f = mean + sd * x;
        let g1 = s * sigmoid(-s * f);
        e += w * log_sigmoid(s * f);
        d_mean += w * g1;
        d_var += w * g1 * x;
    }
    (e, d_mean, d_var / (2.0 * sd))
}

/// `E[sigmoid(f)]` for `f ~ N(mean, var)`.
pub fn expected_sigmoid(gh: &GaussHermite, mean: f64, var: f64) -> f64 {
    gh.expect(mean, var, sigmoid)
}

/// `KL[N(m, SSᵀ) ‖ N(0, Kuu)]`.
pub fn kl_u(params: &LsgpParams, chol: &JitteredCholesky) -> f64 {
    let m = params.n_inducing() as f64;
    let kinv_s = chol.solve(&params.q_chol);
    let trace = params.q_chol.component_mul(&kinv_s).sum();
    let alpha = chol.solve(&DMatrix::from_column_slice(params.q_mu.len(), 1, params.q_mu.as_slice()));
    let maha = params.q_mu.dot(&alpha.column(0));
    let log_det_s: f64 = (0..params.n_inducing()).map(|j| params.q_chol[(j, j)].ln()).sum::<f64>() * 2.0;
    0.5 * (trace + maha - m + chol.log_det() - log_det_s)
}

/// `Σ_n KL[q(z_n) ‖ N(0, I)]` over all subjects.
pub fn kl_z(params: &LsgpParams) -> f64 {
    params
        .z_means
        .iter()
        .zip(params.z_log_scales.iter())
        .map(|(&mu, &ls)| 0.5 * ((2.0 * ls).exp() + mu * mu - 1.0 - 2.0 * ls))
        .sum()
}

/// ELBO for `batch` (indices into `data`, repeats allowed) averaged over the
/// given latent draws, optionally with its gradient.
#[allow(clippy::too_many_arguments)]
pub fn elbo_with_draws(
    params: &LsgpParams,
    data: &TrainingData,
    batch: &[usize],
    total_n: usize,
    draws: &[ZDraw],
    gh: &GaussHermite,
    jitter: f64,
    with_grad: bool,
) -> Result<(ElboBreakdown, Option<ParamGrads>)> {
    if batch.is_empty() {
        return Err(Error::Config("empty minibatch".into()));
    }
    let chol = inducing_cholesky(params, jitter)?;
    let scale = total_n as f64 / batch.len() as f64;
    let x_b = DMatrix::from_fn(batch.len(), data.x.ncols(), |i, d| data.x[(batch[i], d)]);
    let dx = data.x.ncols();
    let m_ind = params.n_inducing();

    let mut grads = with_grad.then(|| params.zero_grads());
    // adjoint of Kuu accumulated over draws and the KL term
    let mut d_kuu = DMatrix::zeros(m_ind, m_ind);
    let mut ell_total = 0.0;

    for draw in draws {
        let z_all = latent_sample(params, &draw.eps);
        let z_b = DMatrix::from_fn(batch.len(), params.latent_dim(), |i, d| {
            z_all[(data.subject_row[batch[i]], d)]
        });
        let xhat = augment(&x_b, &z_b);
        let mg = marginals(params, &chol, &xhat)?;

        let mut g_mean = DVector::zeros(batch.len());
        let mut g_var = DVector::zeros(batch.len());
        let mut ell = 0.0;
        for i in 0..batch.len() {
            let clamped = mg.var_raw[i] < VARIANCE_FLOOR;
            let var = mg.var_raw[i].max(VARIANCE_FLOOR);
            let (e, dm, dv) = expected_log_bernoulli(gh, mg.mean[i], var, data.y[batch[i]]);
            ell += e;
            g_mean[i] = scale * draw.weight * dm;
            g_var[i] = if clamped { 0.0 } else { scale * draw.weight * dv };
        }
        ell_total += scale * draw.weight * ell;

        let Some(g) = grads.as_mut() else { continue };

        // mean = Pᵀ m
        g.q_mu += &mg.p * &g_mean;
        // |Sᵀ P_i|² term
        let mut d_stp = mg.s_t_p.clone();
        for i in 0..batch.len() {
            d_stp.column_mut(i).scale_mut(2.0 * g_var[i]);
        }
        g.q_chol += &mg.p * d_stp.transpose();
        let mut d_p = &params.q_mu * g_mean.transpose() + &params.q_chol * &d_stp;
        // P = Kuu⁻¹ Kuf
        let kinv_dp = chol.solve(&d_p);
        d_kuu -= &kinv_dp * mg.p.transpose();
        let mut d_kuf = kinv_dp;
        // -Kufᵀ Kuu⁻¹ Kuf term of the variance
        for i in 0..batch.len() {
            let gv = g_var[i];
            d_kuf.column_mut(i).axpy(-2.0 * gv, &mg.p.column(i), 1.0);
            d_p.column_mut(i).copy_from(&(mg.p.column(i) * gv));
        }
        d_kuu += &d_p * mg.p.transpose();

        let mut d_xhat = DMatrix::zeros(xhat.nrows(), xhat.ncols());
        params
            .kernel
            .backward(&params.inducing, &xhat, &d_kuf, &mut g.kernel, Some(&mut g.inducing), Some(&mut d_xhat));
        params.kernel.backward_diag(&xhat, &g_var, &mut g.kernel, Some(&mut d_xhat));

        for i in 0..batch.len() {
            let n = data.subject_row[batch[i]];
            for d in 0..params.latent_dim() {
                let dz = d_xhat[(i, dx + d)];
                g.z_means[(n, d)] += dz;
                g.z_log_scales[(n, d)] += dz * draw.eps[(n, d)] * params.z_log_scales[(n, d)].exp();
            }
        }
    }

    let klu = kl_u(params, &chol);
    let klz = kl_z(params);
    let breakdown = ElboBreakdown {
        expected_log_lik: ell_total,
        kl_u: klu,
        kl_z: klz,
        total: ell_total - klu - klz,
    };

    if let Some(g) = grads.as_mut() {
        // KL[q(U) ‖ p(U)]
        let kinv = chol.solve(&DMatrix::identity(m_ind, m_ind));
        let alpha = &kinv * &params.q_mu;
        let kinv_s = &kinv * &params.q_chol;
        g.q_mu -= &alpha;
        let mut d_chol = kinv_s.clone();
        for j in 0..m_ind {
            d_chol[(j, j)] -= 1.0 / params.q_chol[(j, j)];
        }
        g.q_chol -= d_chol;
        let d_kuu_kl = (&kinv - &kinv_s * kinv_s.transpose() - &alpha * alpha.transpose()) * 0.5;
        d_kuu -= d_kuu_kl;

        let mut d_w1 = DMatrix::zeros(m_ind, params.inducing.ncols());
        let mut d_w2 = DMatrix::zeros(m_ind, params.inducing.ncols());
        params.kernel.backward(
            &params.inducing,
            &params.inducing,
            &d_kuu,
            &mut g.kernel,
            Some(&mut d_w1),
            Some(&mut d_w2),
        );
        g.inducing += d_w1 + d_w2;

        // Σ KL[q(z_n) ‖ N(0, I)]
        g.z_means -= &params.z_means;
        g.z_log_scales -= params.z_log_scales.map(|ls| (2.0 * ls).exp() - 1.0);

        // natural -> unconstrained for the Cholesky factor of q(U)
        for j in 0..m_ind {
            for i in 0..j {
                g.q_chol[(i, j)] = 0.0;
            }
            // d softplus(r) / dr = 1 - exp(-softplus(r))
            g.q_chol[(j, j)] *= -(-params.q_chol[(j, j)]).exp_m1();
        }
    }

    Ok((breakdown, grads))
}
