use serde::{Deserialize, Serialize};

use crate::data::Standardizer;

/// L2-penalized logistic regression fitted by full-batch gradient ascent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrHyper {
    /// Penalty on the weights (the intercept is not penalized).
    pub l2: f64,
    pub max_iter: usize,
    /// Stop when the gradient's largest absolute entry falls below this.
    pub tol: f64,
}

impl Default for LrHyper {
    fn default() -> Self {
        Self {
            l2: 1.0,
            max_iter: 5000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrUnit {
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

struct Problem<'a> {
    x: &'a [Vec<f64>],
    y: &'a [bool],
    l2: f64,
}

impl Problem<'_> {
    fn objective(&self, w: &[f64], b: f64) -> f64 {
        let ll: f64 = self
            .x
            .iter()
            .zip(self.y)
            .map(|(xi, &yi)| {
                let eta = b + dot(w, xi);
                if yi {
                    log_sigmoid(eta)
                } else {
                    log_sigmoid(-eta)
                }
            })
            .sum();
        ll - 0.5 * self.l2 * dot(w, w)
    }

    fn gradient(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let mut gw: Vec<f64> = w.iter().map(|wj| -self.l2 * wj).collect();
        let mut gb = 0.0;
        for (xi, &yi) in self.x.iter().zip(self.y) {
            let r = if yi { 1.0 } else { 0.0 } - sigmoid(b + dot(w, xi));
            gb += r;
            for (g, x) in gw.iter_mut().zip(xi) {
                *g += r * x;
            }
        }
        (gw, gb)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fits on raw feature rows. Returns the unit and the penalized objective
/// after every accepted iteration.
pub fn fit_lr(rows: &[Vec<f64>], labels: &[bool], dim: usize, hyper: &LrHyper) -> (LrUnit, Vec<f64>) {
    let standardizer = Standardizer::fit(rows, dim);
    let x: Vec<Vec<f64>> = rows.iter().map(|r| standardizer.apply(r)).collect();
    let problem = Problem {
        x: &x,
        y: labels,
        l2: hyper.l2,
    };
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut value = problem.objective(&w, b);
    let mut trace = vec![value];
    // step from a curvature bound on the mean log-likelihood, adapted below
    let mut step = 4.0 / (x.len().max(1) as f64 * (1.0 + dim as f64) + 4.0 * hyper.l2);
    let mut iterations = 0;
    while iterations < hyper.max_iter {
        let (gw, gb) = problem.gradient(&w, b);
        let gmax = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if gmax < hyper.tol {
            break;
        }
        iterations += 1;
        loop {
            let w_new: Vec<f64> = w.iter().zip(&gw).map(|(wj, g)| wj + step * g).collect();
            let b_new = b + step * gb;
            let v_new = problem.objective(&w_new, b_new);
            if v_new >= value {
                w = w_new;
                b = b_new;
                value = v_new;
                step *= 1.5;
                break;
            }
            step *= 0.5;
            if step < 1e-300 {
                break;
            }
        }
        trace.push(value);
    }
    (
        LrUnit {
            standardizer,
            weights: w,
            intercept: b,
            iterations,
        },
        trace,
    )
}

impl LrUnit {
    pub fn predict(&self, features: &[f64]) -> f64 {
        sigmoid(self.intercept + dot(&self.weights, &self.standardizer.apply(features)))
    }
}
