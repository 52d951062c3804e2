//! Gauss–Hermite quadrature for expectations under a Gaussian.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights with `E[g(X)] ≈ Σ w_k g(x_k)` for `X ~ N(0, 1)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub–Welsch on the Jacobi matrix of the probabilists' Hermite
    /// polynomials.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "need at least one quadrature node");
        let mut jacobi = DMatrix::zeros(n, n);
        for k in 1..n {
            let off = (k as f64).sqrt();
            jacobi[(k - 1, k)] = off;
            jacobi[(k, k - 1)] = off;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // symmetrize to remove eigen-solver noise
        for k in 0..n / 2 {
            let (lo, hi) = (pairs[k], pairs[n - 1 - k]);
            let x = 0.5 * (hi.0 - lo.0);
            let w = 0.5 * (lo.1 + hi.1);
            pairs[k] = (-x, w);
            pairs[n - 1 - k] = (x, w);
        }
        if n % 2 == 1 {
            pairs[n / 2].0 = 0.0;
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        }
    }

    /// `E[g(F)]` for `F ~ N(mean, var)`.
    pub fn expect(&self, mean: f64, var: f64, g: impl Fn(f64) -> f64) -> f64 {
        let sd = var.max(0.0).sqrt();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(mean + sd * x))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_moments_exact() {
        let gh = GaussHermite::new(20);
        assert!((gh.expect(0.0, 1.0, |_| 1.0) - 1.0).abs() < 1e-13);
        assert!(gh.expect(0.0, 1.0, |x| x).abs() < 1e-13);
        assert!((gh.expect(0.0, 1.0, |x| x * x) - 1.0).abs() < 1e-12);
        assert!((gh.expect(0.0, 1.0, |x| x.powi(4)) - 3.0).abs() < 1e-11);
        assert!((gh.expect(1.5, 4.0, |x| x * x) - (1.5 * 1.5 + 4.0)).abs() < 1e-11);
    }

    #[test]
    fn cosine_expectation() {
        // E[cos X] = exp(-1/2)
        let gh = GaussHermite::new(20);
        assert!((gh.expect(0.0, 1.0, f64::cos) - (-0.5f64).exp()).abs() < 1e-12);
    }
}
