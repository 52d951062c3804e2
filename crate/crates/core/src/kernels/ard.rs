use nalgebra::{DMatrix, DVector};

use super::positive::{inv_softplus, softplus, softplus_grad};

/// Squared-exponential kernel with one lengthscale per input dimension,
/// acting on columns `start..start + dim` of the input rows.
///
/// Unconstrained parameters: `dim` raw lengthscales followed by one raw
/// signal variance, each mapped through softplus.
#[derive(Debug, Clone, PartialEq)]
pub struct ArdRbf {
    pub start: usize,
    pub dim: usize,
    raw: Vec<f64>,
}

impl ArdRbf {
    pub fn new(start: usize, lengthscales: &[f64], variance: f64) -> Self {
        let mut raw: Vec<f64> = lengthscales.iter().map(|&l| inv_softplus(l)).collect();
        raw.push(inv_softplus(variance));
        Self {
            start,
            dim: lengthscales.len(),
            raw,
        }
    }

    pub fn lengthscales(&self) -> Vec<f64> {
        self.raw[..self.dim].iter().map(|&r| softplus(r)).collect()
    }

    pub fn variance(&self) -> f64 {
        softplus(self.raw[self.dim])
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn set_raw(&mut self, raw: &[f64]) {
        self.raw.copy_from_slice(raw);
    }

    pub fn n_params(&self) -> usize {
        self.dim + 1
    }

    fn scaled(&self, x: &DMatrix<f64>, ls: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), self.dim, |i, d| x[(i, self.start + d)] / ls[d])
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let ls = self.lengthscales();
        let r2: f64 = (0..self.dim)
            .map(|d| ((a[self.start + d] - b[self.start + d]) / ls[d]).powi(2))
            .sum();
        self.variance() * (-0.5 * r2).exp()
    }

    pub fn matrix(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        let ls = self.lengthscales();
        let var = self.variance();
        let sa = self.scaled(a, &ls);
        let sb = self.scaled(b, &ls);
        DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
            let r2: f64 = (0..self.dim).map(|d| (sa[(i, d)] - sb[(j, d)]).powi(2)).sum();
            var * (-0.5 * r2).exp()
        })
    }

    pub fn diag(&self, a: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_element(a.nrows(), self.variance())
    }

    pub fn backward(
        &self,
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        dk: &DMatrix<f64>,
        grad: &mut [f64],
        mut da: Option<&mut DMatrix<f64>>,
        mut db: Option<&mut DMatrix<f64>>,
    ) {
        let ls = self.lengthscales();
        let var = self.variance();
        let k = self.matrix(a, b);
        let mut d_ls = vec![0.0; self.dim];
        let mut d_var = 0.0;
        for i in 0..a.nrows() {
            for j in 0..b.nrows() {
                let w = dk[(i, j)] * k[(i, j)];
                if w == 0.0 {
                    continue;
                }
                d_var += w / var;
                for d in 0..self.dim {
                    let diff = a[(i, self.start + d)] - b[(j, self.start + d)];
                    let l2 = ls[d] * ls[d];
                    d_ls[d] += w * diff * diff / (l2 * ls[d]);
                    if let Some(da) = da.as_deref_mut() {
                        da[(i, self.start + d)] -= w * diff / l2;
                    }
                    if let Some(db) = db.as_deref_mut() {
                        db[(j, self.start + d)] += w * diff / l2;
                    }
                }
            }
        }
        self.chain_raw(&d_ls, d_var, grad);
    }

    pub fn backward_diag(&self, dk: &DVector<f64>, grad: &mut [f64]) {
        let d_ls = vec![0.0; self.dim];
        self.chain_raw(&d_ls, dk.sum(), grad);
    }

    fn chain_raw(&self, d_ls: &[f64], d_var: f64, grad: &mut [f64]) {
        for d in 0..self.dim {
            grad[d] += d_ls[d] * softplus_grad(self.raw[d]);
        }
        grad[self.dim] += d_var * softplus_grad(self.raw[self.dim]);
    }
}
