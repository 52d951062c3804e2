use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

pub const DEFAULT_JITTER: f64 = 1e-6;
pub const JITTER_CAP: f64 = 1e-2;
/// First jitter tried when escalating from zero.
const MIN_ESCALATION: f64 = 1e-9;

/// Cholesky factor of `K + jitter * I` together with the jitter that made the
/// factorization succeed.
#[derive(Clone, Debug)]
pub struct JitteredCholesky {
    pub factor: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

impl JitteredCholesky {
    pub fn l(&self) -> DMatrix<f64> {
        self.factor.l()
    }

    /// `(K + jitter I)^{-1} B`.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.factor.solve(b)
    }

    pub fn log_det(&self) -> f64 {
        let l = self.factor.l_dirty();
        (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0
    }
}

/// Factorizes `k + jitter * I`, multiplying the jitter by ten after each
/// failure until it exceeds [`JITTER_CAP`].
pub fn jittered_cholesky(k: &DMatrix<f64>, jitter: f64) -> Result<JitteredCholesky> {
    if !k.is_square() {
        return Err(Error::Config(format!(
            "cholesky of non-square {}x{} matrix",
            k.nrows(),
            k.ncols()
        )));
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite entry in matrix to factorize".into()));
    }
    let mut current = jitter.max(0.0);
    loop {
        let mut shifted = k.clone();
        for i in 0..shifted.nrows() {
            shifted[(i, i)] += current;
        }
        if let Some(factor) = Cholesky::new(shifted) {
            return Ok(JitteredCholesky {
                factor,
                jitter: current,
            });
        }
        current = (current * 10.0).max(MIN_ESCALATION);
        if current > JITTER_CAP * (1.0 + 1e-12) {
            return Err(Error::Numerical(format!(
                "cholesky failed with jitter up to {JITTER_CAP:e}"
            )));
        }
    }
}
