use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::positive::{inv_softplus, softplus, softplus_grad};

pub const DEFAULT_HIDDEN: usize = 16;

/// Single-hidden-layer tanh network `out = W2 tanh(W1 z + b1) + b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    /// Row-major `hidden x input`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// Row-major `output x hidden`.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

struct MlpTrace {
    hidden: Vec<f64>,
    out: Vec<f64>,
}

impl Mlp {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            input,
            hidden,
            output,
            w1: vec![0.0; hidden * input],
            b1: vec![0.0; hidden],
            w2: vec![0.0; output * hidden],
            b2: vec![0.0; output],
        }
    }

    /// `W1 ~ N(0, 1/input)`, `W2 ~ N(0, out_scale^2 / hidden)`, zero biases.
    pub fn random<R: Rng>(input: usize, hidden: usize, output: usize, out_scale: f64, rng: &mut R) -> Self {
        let mut m = Self::zeros(input, hidden, output);
        let s1 = 1.0 / (input as f64).sqrt();
        for w in &mut m.w1 {
            *w = s1 * rng.sample::<f64, _>(StandardNormal);
        }
        let s2 = out_scale / (hidden as f64).sqrt();
        for w in &mut m.w2 {
            *w = s2 * rng.sample::<f64, _>(StandardNormal);
        }
        m
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    fn write(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.w1);
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.extend_from_slice(&self.b2);
    }

    fn read(&mut self, raw: &[f64]) {
        let (w1, rest) = raw.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.b1.len());
        let (w2, b2) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2.copy_from_slice(b2);
    }

    fn forward(&self, z: &[f64]) -> MlpTrace {
        let hidden: Vec<f64> = (0..self.hidden)
            .map(|h| {
                let row = &self.w1[h * self.input..(h + 1) * self.input];
                (row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>() + self.b1[h]).tanh()
            })
            .collect();
        let out = (0..self.output)
            .map(|o| {
                let row = &self.w2[o * self.hidden..(o + 1) * self.hidden];
                row.iter().zip(&hidden).map(|(w, x)| w * x).sum::<f64>() + self.b2[o]
            })
            .collect();
        MlpTrace { hidden, out }
    }

    /// Accumulates parameter gradients into `grad` (laid out as in `write`)
    /// and input gradients into `dz`.
    fn backward(&self, z: &[f64], trace: &MlpTrace, d_out: &[f64], grad: &mut [f64], dz: &mut [f64]) {
        let (g_w1, rest) = grad.split_at_mut(self.w1.len());
        let (g_b1, rest) = rest.split_at_mut(self.b1.len());
        let (g_w2, g_b2) = rest.split_at_mut(self.w2.len());
        let mut d_hidden = vec![0.0; self.hidden];
        for o in 0..self.output {
            let g = d_out[o];
            if g == 0.0 {
                continue;
            }
            g_b2[o] += g;
            for h in 0..self.hidden {
                g_w2[o * self.hidden + h] += g * trace.hidden[h];
                d_hidden[h] += g * self.w2[o * self.hidden + h];
            }
        }
        for h in 0..self.hidden {
            let da = d_hidden[h] * (1.0 - trace.hidden[h] * trace.hidden[h]);
            g_b1[h] += da;
            for i in 0..self.input {
                g_w1[h * self.input + i] += da * z[i];
                dz[i] += da * self.w1[h * self.input + i];
            }
        }
    }
}

/// Linear kernel whose bias, scale and centre depend on the latent part of
/// the input:
///
/// `k(x̂, x̂') = b(z) b(z') + v(z) v(z') (x - c(z))ᵀ (x' - c(z'))`
///
/// with `x = x̂[..feature_dim]`, `z = x̂[feature_dim..]`. `v` is the softplus
/// of its network's output so the scale stays positive.
#[derive(Debug, Clone, PartialEq)]
pub struct StateLinear {
    pub feature_dim: usize,
    pub latent_dim: usize,
    pub bias_net: Mlp,
    pub scale_net: Mlp,
    pub centre_net: Mlp,
}

/// Per-row quantities of a forward pass.
struct Rows {
    b: Vec<f64>,
    v: Vec<f64>,
    v_raw: Vec<f64>,
    /// `x - c(z)`, one row per input.
    u: DMatrix<f64>,
    traces: Vec<[MlpTrace; 3]>,
}

impl StateLinear {
    /// Randomly initialized networks with outputs close to `b = bias`,
    /// `v = scale`, `c = 0`.
    pub fn init<R: Rng>(feature_dim: usize, latent_dim: usize, hidden: usize, bias: f64, scale: f64, rng: &mut R) -> Self {
        let mut bias_net = Mlp::random(latent_dim, hidden, 1, 0.1, rng);
        bias_net.b2[0] = bias;
        let mut scale_net = Mlp::random(latent_dim, hidden, 1, 0.1, rng);
        scale_net.b2[0] = inv_softplus(scale);
        let centre_net = Mlp::random(latent_dim, hidden, feature_dim, 0.1, rng);
        Self {
            feature_dim,
            latent_dim,
            bias_net,
            scale_net,
            centre_net,
        }
    }

    /// Constant networks: `b ≡ bias`, `v ≡ scale`, `c ≡ 0`.
    pub fn constant(feature_dim: usize, latent_dim: usize, hidden: usize, bias: f64, scale: f64) -> Self {
        let mut bias_net = Mlp::zeros(latent_dim, hidden, 1);
        bias_net.b2[0] = bias;
        let mut scale_net = Mlp::zeros(latent_dim, hidden, 1);
        scale_net.b2[0] = inv_softplus(scale);
        Self {
            feature_dim,
            latent_dim,
            bias_net,
            scale_net,
            centre_net: Mlp::zeros(latent_dim, hidden, feature_dim),
        }
    }

    pub fn n_params(&self) -> usize {
        self.bias_net.n_params() + self.scale_net.n_params() + self.centre_net.n_params()
    }

    pub fn raw(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        self.bias_net.write(&mut out);
        self.scale_net.write(&mut out);
        self.centre_net.write(&mut out);
        out
    }

    pub fn set_raw(&mut self, raw: &[f64]) {
        let (b, rest) = raw.split_at(self.bias_net.n_params());
        let (v, c) = rest.split_at(self.scale_net.n_params());
        self.bias_net.read(b);
        self.scale_net.read(v);
        self.centre_net.read(c);
    }

    fn latent<'a>(&self, row: &'a [f64]) -> &'a [f64] {
        &row[self.feature_dim..self.feature_dim + self.latent_dim]
    }

    fn rows(&self, x: &DMatrix<f64>) -> Rows {
        let n = x.nrows();
        let mut rows = Rows {
            b: Vec::with_capacity(n),
            v: Vec::with_capacity(n),
            v_raw: Vec::with_capacity(n),
            u: DMatrix::zeros(n, self.feature_dim),
            traces: Vec::with_capacity(n),
        };
        for i in 0..n {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            let z = self.latent(&row);
            let tb = self.bias_net.forward(z);
            let tv = self.scale_net.forward(z);
            let tc = self.centre_net.forward(z);
            rows.b.push(tb.out[0]);
            rows.v_raw.push(tv.out[0]);
            rows.v.push(softplus(tv.out[0]));
            for d in 0..self.feature_dim {
                rows.u[(i, d)] = row[d] - tc.out[d];
            }
            rows.traces.push([tb, tv, tc]);
        }
        rows
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let ra = self.rows(&DMatrix::from_row_slice(1, a.len(), a));
        let rb = self.rows(&DMatrix::from_row_slice(1, b.len(), b));
        let dot: f64 = ra.u.row(0).dot(&rb.u.row(0));
        ra.b[0] * rb.b[0] + ra.v[0] * rb.v[0] * dot
    }

    /// Bias, scale and centre network outputs at latent point `z`.
    pub fn networks_at(&self, z: &[f64]) -> (f64, f64, Vec<f64>) {
        (
            self.bias_net.forward(z).out[0],
            softplus(self.scale_net.forward(z).out[0]),
            self.centre_net.forward(z).out,
        )
    }

    pub fn matrix(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        let ra = self.rows(a);
        let rb = self.rows(b);
        let dots = &ra.u * rb.u.transpose();
        DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
            ra.b[i] * rb.b[j] + ra.v[i] * rb.v[j] * dots[(i, j)]
        })
    }

    pub fn diag(&self, a: &DMatrix<f64>) -> DVector<f64> {
        let r = self.rows(a);
        DVector::from_fn(a.nrows(), |i, _| {
            r.b[i] * r.b[i] + r.v[i] * r.v[i] * r.u.row(i).norm_squared()
        })
    }

    pub fn backward(
        &self,
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        dk: &DMatrix<f64>,
        grad: &mut [f64],
        da: Option<&mut DMatrix<f64>>,
        db: Option<&mut DMatrix<f64>>,
    ) {
        let ra = self.rows(a);
        let rb = self.rows(b);
        let ba = DVector::from_vec(ra.b.clone());
        let bb = DVector::from_vec(rb.b.clone());
        let va = DVector::from_vec(ra.v.clone());
        let vb = DVector::from_vec(rb.v.clone());
        let dots = &ra.u * rb.u.transpose();

        let d_ba = dk * &bb;
        let d_bb = dk.transpose() * &ba;
        let g = dk.component_mul(&dots);
        let d_va = &g * &vb;
        let d_vb = g.transpose() * &va;
        let h = DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| dk[(i, j)] * va[i] * vb[j]);
        let d_ua = &h * &rb.u;
        let d_ub = h.transpose() * &ra.u;

        self.backward_rows(a, &ra, d_ba.as_slice(), d_va.as_slice(), &d_ua, grad, da);
        self.backward_rows(b, &rb, d_bb.as_slice(), d_vb.as_slice(), &d_ub, grad, db);
    }

    pub fn backward_diag(&self, a: &DMatrix<f64>, dk: &DVector<f64>, grad: &mut [f64], da: Option<&mut DMatrix<f64>>) {
        let r = self.rows(a);
        let n = a.nrows();
        let d_b: Vec<f64> = (0..n).map(|i| 2.0 * r.b[i] * dk[i]).collect();
        let d_v: Vec<f64> = (0..n)
            .map(|i| 2.0 * r.v[i] * r.u.row(i).norm_squared() * dk[i])
            .collect();
        let d_u = DMatrix::from_fn(n, self.feature_dim, |i, d| 2.0 * r.v[i] * r.v[i] * r.u[(i, d)] * dk[i]);
        self.backward_rows(a, &r, &d_b, &d_v, &d_u, grad, da);
    }

    fn backward_rows(
        &self,
        x: &DMatrix<f64>,
        rows: &Rows,
        d_b: &[f64],
        d_v: &[f64],
        d_u: &DMatrix<f64>,
        grad: &mut [f64],
        mut dx: Option<&mut DMatrix<f64>>,
    ) {
        let nb = self.bias_net.n_params();
        let nv = self.scale_net.n_params();
        let (g_b, rest) = grad.split_at_mut(nb);
        let (g_v, g_c) = rest.split_at_mut(nv);
        let mut dz = vec![0.0; self.latent_dim];
        for i in 0..x.nrows() {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            let z = self.latent(&row);
            dz.iter_mut().for_each(|v| *v = 0.0);
            let [tb, tv, tc] = &rows.traces[i];
            self.bias_net.backward(z, tb, &[d_b[i]], g_b, &mut dz);
            let dv_raw = d_v[i] * softplus_grad(rows.v_raw[i]);
            self.scale_net.backward(z, tv, &[dv_raw], g_v, &mut dz);
            let d_c: Vec<f64> = (0..self.feature_dim).map(|d| -d_u[(i, d)]).collect();
            self.centre_net.backward(z, tc, &d_c, g_c, &mut dz);
            if let Some(dx) = dx.as_deref_mut() {
                for d in 0..self.feature_dim {
                    dx[(i, d)] += d_u[(i, d)];
                }
                for (k, g) in dz.iter().enumerate() {
                    dx[(i, self.feature_dim + k)] += g;
                }
            }
        }
    }
}
