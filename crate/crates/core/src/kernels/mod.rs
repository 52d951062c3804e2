//! Kernels over augmented inputs `x̂ = [x; z]` (responses followed by the
//! subject's latent vector).
//!
//! Every kernel exposes its unconstrained parameters as a flat vector and
//! can back-propagate an adjoint of its Gram matrix into that vector and into
//! the input rows.

mod ard;
mod cholesky;
pub mod positive;
mod state_linear;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ard::ArdRbf;
pub use cholesky::{jittered_cholesky, JitteredCholesky, DEFAULT_JITTER, JITTER_CAP};
pub use state_linear::{Mlp, StateLinear, DEFAULT_HIDDEN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "KernelSpec", try_from = "KernelSpec")]
pub enum Kernel {
    ArdRbf(ArdRbf),
    StateLinear(StateLinear),
    /// Elementwise product of the two factors' Gram matrices.
    Product(Box<Kernel>, Box<Kernel>),
}

impl Kernel {
    /// The default SV-LSGP kernel: a state-dependent linear kernel on the
    /// responses times an ARD kernel on the latent block.
    pub fn product(features: Kernel, latent: Kernel) -> Self {
        Kernel::Product(Box::new(features), Box::new(latent))
    }

    pub fn n_params(&self) -> usize {
        match self {
            Kernel::ArdRbf(k) => k.n_params(),
            Kernel::StateLinear(k) => k.n_params(),
            Kernel::Product(a, b) => a.n_params() + b.n_params(),
        }
    }

    pub fn raw_params(&self) -> Vec<f64> {
        match self {
            Kernel::ArdRbf(k) => k.raw().to_vec(),
            Kernel::StateLinear(k) => k.raw(),
            Kernel::Product(a, b) => {
                let mut v = a.raw_params();
                v.extend(b.raw_params());
                v
            }
        }
    }

    pub fn set_raw_params(&mut self, raw: &[f64]) {
        assert_eq!(raw.len(), self.n_params(), "kernel parameter length");
        match self {
            Kernel::ArdRbf(k) => k.set_raw(raw),
            Kernel::StateLinear(k) => k.set_raw(raw),
            Kernel::Product(a, b) => {
                let (ra, rb) = raw.split_at(a.n_params());
                a.set_raw_params(ra);
                b.set_raw_params(rb);
            }
        }
    }

    /// Smallest input width this kernel reads.
    pub fn input_dim(&self) -> usize {
        match self {
            Kernel::ArdRbf(k) => k.start + k.dim,
            Kernel::StateLinear(k) => k.feature_dim + k.latent_dim,
            Kernel::Product(a, b) => a.input_dim().max(b.input_dim()),
        }
    }

    fn check(&self, width: usize) -> Result<()> {
        if width < self.input_dim() {
            return Err(Error::Config(format!(
                "kernel reads {} input columns but inputs have {width}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Kernel::ArdRbf(k) => k.eval(a, b),
            Kernel::StateLinear(k) => k.eval(a, b),
            Kernel::Product(f, g) => f.eval(a, b) * g.eval(a, b),
        }
    }

    /// Gram matrix `K[i, j] = k(a_i, b_j)` over the rows of `a` and `b`.
    pub fn matrix(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if a.ncols() != b.ncols() {
            return Err(Error::Config(format!(
                "input widths differ: {} vs {}",
                a.ncols(),
                b.ncols()
            )));
        }
        self.check(a.ncols())?;
        Ok(self.matrix_unchecked(a, b))
    }

    fn matrix_unchecked(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Kernel::ArdRbf(k) => k.matrix(a, b),
            Kernel::StateLinear(k) => k.matrix(a, b),
            Kernel::Product(f, g) => f.matrix_unchecked(a, b).component_mul(&g.matrix_unchecked(a, b)),
        }
    }

    /// `k(a_i, a_i)` for every row.
    pub fn diag(&self, a: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check(a.ncols())?;
        Ok(self.diag_unchecked(a))
    }

    fn diag_unchecked(&self, a: &DMatrix<f64>) -> DVector<f64> {
        match self {
            Kernel::ArdRbf(k) => k.diag(a),
            Kernel::StateLinear(k) => k.diag(a),
            Kernel::Product(f, g) => f.diag_unchecked(a).component_mul(&g.diag_unchecked(a)),
        }
    }

    /// Back-propagates `dk = ∂L/∂K` through `K = matrix(a, b)`. Parameter
    /// gradients are added to `grad` (same layout as [`Kernel::raw_params`]),
    /// input gradients to `da` / `db` when given.
    pub fn backward(
        &self,
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        dk: &DMatrix<f64>,
        grad: &mut [f64],
        da: Option<&mut DMatrix<f64>>,
        db: Option<&mut DMatrix<f64>>,
    ) {
        match self {
            Kernel::ArdRbf(k) => k.backward(a, b, dk, grad, da, db),
            Kernel::StateLinear(k) => k.backward(a, b, dk, grad, da, db),
            Kernel::Product(f, g) => {
                let kf = f.matrix_unchecked(a, b);
                let kg = g.matrix_unchecked(a, b);
                let (gf, gg) = grad.split_at_mut(f.n_params());
                let (mut da, mut db) = (da, db);
                f.backward(a, b, &dk.component_mul(&kg), gf, da.as_deref_mut(), db.as_deref_mut());
                g.backward(a, b, &dk.component_mul(&kf), gg, da, db);
            }
        }
    }

    /// Back-propagates through `diag(a)`.
    pub fn backward_diag(&self, a: &DMatrix<f64>, dk: &DVector<f64>, grad: &mut [f64], da: Option<&mut DMatrix<f64>>) {
        match self {
            Kernel::ArdRbf(k) => k.backward_diag(dk, grad),
            Kernel::StateLinear(k) => k.backward_diag(a, dk, grad, da),
            Kernel::Product(f, g) => {
                let kf = f.diag_unchecked(a);
                let kg = g.diag_unchecked(a);
                let (gf, gg) = grad.split_at_mut(f.n_params());
                let mut da = da;
                f.backward_diag(a, &dk.component_mul(&kg), gf, da.as_deref_mut());
                g.backward_diag(a, &dk.component_mul(&kf), gg, da);
            }
        }
    }

    /// The factor of a product kernel that only reads latent columns
    /// (`>= feature_dim`), if the kernel decomposes that way.
    pub fn latent_factor(&self, feature_dim: usize) -> Result<&ArdRbf> {
        if let Kernel::Product(f, g) = self {
            for factor in [f, g] {
                if let Kernel::ArdRbf(k) = factor.as_ref() {
                    if k.start >= feature_dim {
                        return Ok(k);
                    }
                }
            }
        }
        Err(Error::Capability(
            "subject covariance needs a product kernel with a latent-only ARD factor".into(),
        ))
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            Kernel::ArdRbf(_) => "ard_rbf",
            Kernel::StateLinear(_) => "state_dependent_linear",
            Kernel::Product(..) => "product",
        }
    }
}

/// Serialized kernel: constrained scalars in natural space.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum KernelSpec {
    ArdRbf {
        start: usize,
        lengthscales: Vec<f64>,
        variance: f64,
    },
    StateDependentLinear {
        feature_dim: usize,
        latent_dim: usize,
        bias_net: Mlp,
        /// Network whose softplus is the scale `v(z)`.
        scale_net: Mlp,
        centre_net: Mlp,
    },
    Product {
        factors: Vec<KernelSpec>,
    },
}

impl From<Kernel> for KernelSpec {
    fn from(k: Kernel) -> Self {
        match k {
            Kernel::ArdRbf(k) => KernelSpec::ArdRbf {
                start: k.start,
                lengthscales: k.lengthscales(),
                variance: k.variance(),
            },
            Kernel::StateLinear(k) => KernelSpec::StateDependentLinear {
                feature_dim: k.feature_dim,
                latent_dim: k.latent_dim,
                bias_net: k.bias_net,
                scale_net: k.scale_net,
                centre_net: k.centre_net,
            },
            Kernel::Product(a, b) => KernelSpec::Product {
                factors: vec![(*a).into(), (*b).into()],
            },
        }
    }
}

impl TryFrom<KernelSpec> for Kernel {
    type Error = String;

    fn try_from(spec: KernelSpec) -> std::result::Result<Self, String> {
        Ok(match spec {
            KernelSpec::ArdRbf { start, lengthscales, variance } => {
                if variance <= 0.0 || lengthscales.iter().any(|&l| l <= 0.0) {
                    return Err("ARD lengthscales and variance must be positive".into());
                }
                Kernel::ArdRbf(ArdRbf::new(start, &lengthscales, variance))
            }
            KernelSpec::StateDependentLinear {
                feature_dim,
                latent_dim,
                bias_net,
                scale_net,
                centre_net,
            } => {
                let shapes_ok = [(&bias_net, 1), (&scale_net, 1), (&centre_net, feature_dim)]
                    .iter()
                    .all(|(m, out)| {
                        m.input == latent_dim
                            && m.output == *out
                            && m.w1.len() == m.hidden * m.input
                            && m.b1.len() == m.hidden
                            && m.w2.len() == m.output * m.hidden
                            && m.b2.len() == m.output
                    });
                if !shapes_ok {
                    return Err("state-dependent linear network shapes inconsistent".into());
                }
                Kernel::StateLinear(StateLinear {
                    feature_dim,
                    latent_dim,
                    bias_net,
                    scale_net,
                    centre_net,
                })
            }
            KernelSpec::Product { factors } => {
                let [a, b]: [KernelSpec; 2] = factors
                    .try_into()
                    .map_err(|_| "product kernel needs exactly two factors".to_string())?;
                Kernel::product(a.try_into()?, b.try_into()?)
            }
        })
    }
}

#[cfg(test)]
mod tests;
