use nalgebra::{DMatrix, DVector};

use crate::kernels::positive::{inv_softplus, softplus};
use crate::kernels::Kernel;

/// Everything the optimizer moves.
///
/// `q_chol` is stored in natural form (lower triangular, positive
/// diagonal); its flat representation maps the diagonal through the inverse
/// softplus.
#[derive(Debug, Clone, PartialEq)]
pub struct LsgpParams {
    pub kernel: Kernel,
    /// Inducing locations, `M x (D_x + D_z)`.
    pub inducing: DMatrix<f64>,
    pub q_mu: DVector<f64>,
    pub q_chol: DMatrix<f64>,
    /// Mean-field latent posteriors, one row per training subject.
    pub z_means: DMatrix<f64>,
    pub z_log_scales: DMatrix<f64>,
}

/// Gradient of the ELBO with the same shapes as [`LsgpParams`], taken with
/// respect to the unconstrained parameters.
#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub kernel: Vec<f64>,
    pub inducing: DMatrix<f64>,
    pub q_mu: DVector<f64>,
    /// Lower triangle; diagonal entries are w.r.t. the raw (pre-softplus) value.
    pub q_chol: DMatrix<f64>,
    pub z_means: DMatrix<f64>,
    pub z_log_scales: DMatrix<f64>,
}

impl LsgpParams {
    pub fn n_inducing(&self) -> usize {
        self.inducing.nrows()
    }

    pub fn n_subjects(&self) -> usize {
        self.z_means.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.z_means.ncols()
    }

    /// `Σ_φ = q_chol q_cholᵀ`.
    pub fn q_cov(&self) -> DMatrix<f64> {
        &self.q_chol * self.q_chol.transpose()
    }

    pub fn zero_grads(&self) -> ParamGrads {
        let m = self.n_inducing();
        ParamGrads {
            kernel: vec![0.0; self.kernel.n_params()],
            inducing: DMatrix::zeros(m, self.inducing.ncols()),
            q_mu: DVector::zeros(m),
            q_chol: DMatrix::zeros(m, m),
            z_means: DMatrix::zeros(self.z_means.nrows(), self.z_means.ncols()),
            z_log_scales: DMatrix::zeros(self.z_means.nrows(), self.z_means.ncols()),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = self.kernel.raw_params();
        out.extend(self.inducing.iter());
        out.extend(self.q_mu.iter());
        let m = self.n_inducing();
        for j in 0..m {
            for i in j..m {
                let v = self.q_chol[(i, j)];
                out.push(if i == j { inv_softplus(v) } else { v });
            }
        }
        out.extend(self.z_means.iter());
        out.extend(self.z_log_scales.iter());
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut rest = flat;
        let mut take = |n: usize| {
            let (head, tail) = rest.split_at(n);
            rest = tail;
            head
        };
        let nk = self.kernel.n_params();
        self.kernel.set_raw_params(take(nk));
        let n = self.inducing.len();
        self.inducing.as_mut_slice().copy_from_slice(take(n));
        let m = self.n_inducing();
        self.q_mu.as_mut_slice().copy_from_slice(take(m));
        let tri = take(m * (m + 1) / 2);
        let mut k = 0;
        for j in 0..m {
            for i in j..m {
                self.q_chol[(i, j)] = if i == j { softplus(tri[k]) } else { tri[k] };
                k += 1;
            }
        }
        let nz = self.z_means.len();
        self.z_means.as_mut_slice().copy_from_slice(take(nz));
        self.z_log_scales.as_mut_slice().copy_from_slice(take(nz));
        assert!(rest.is_empty(), "flat parameter vector too long");
    }

    /// Euclidean norms of the parameter groups, for diagnostics.
    pub fn group_norms(&self) -> String {
        let k = self.kernel.raw_params().iter().map(|v| v * v).sum::<f64>().sqrt();
        format!(
            "|kernel|={k:.3e} |W|={:.3e} |q_mu|={:.3e} |q_chol|={:.3e} |z_mean|={:.3e} |z_log_scale|={:.3e}",
            self.inducing.norm(),
            self.q_mu.norm(),
            self.q_chol.norm(),
            self.z_means.norm(),
            self.z_log_scales.norm()
        )
    }
}

impl ParamGrads {
    /// Flattened in the same order as [`LsgpParams::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = self.kernel.clone();
        out.extend(self.inducing.iter());
        out.extend(self.q_mu.iter());
        let m = self.q_mu.len();
        for j in 0..m {
            for i in j..m {
                out.push(self.q_chol[(i, j)]);
            }
        }
        out.extend(self.z_means.iter());
        out.extend(self.z_log_scales.iter());
        out
    }
}
