//! Sparse variational latent similarity Gaussian processes (SV-LSGP) for
//! forecasting rare binary events from multi-subject longitudinal surveys.
//!
//! Every subject is embedded in a low-dimensional latent space. The GP
//! operates on each observation's responses concatenated with its
//! subject's latent vector, so subjects with little data borrow trends
//! from nearby subjects. Alongside the model the crate ships:
//!
//! - [`data`]: observation/cohort model, CSV ingestion, inclusion filter,
//!   class-constrained splits and a synthetic heterogeneous cohort generator.
//! - [`kernels`]: ARD-RBF, state-dependent linear and product kernels with
//!   analytic gradients, plus a jittered Cholesky.
//! - [`svlsgp`]: the model itself (ELBO, gradients, training, prediction).
//! - [`baselines`]: logistic regression and KNN in single, idiographic and
//!   grouped scopes.
//! - [`eval`]: metrics, data-quantity strata, the single-vs-idiographic
//!   comparison and the random grouping experiment.
//! - [`similarity`]: subject similarity graphs, modularity and DOT/JSON export.
//! - [`experiment`]: config-driven pipelines behind the `lsgp` binary.

pub mod baselines;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod kernels;
pub mod optim;
pub mod quadrature;
pub mod seeds;
pub mod similarity;
pub mod svlsgp;

pub use error::{Error, Result};
