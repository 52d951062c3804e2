use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Cohort;
use crate::error::{Error, Result};
use crate::eval::avg_log_likelihood;
use crate::optim::Adam;
use crate::quadrature::GaussHermite;
use crate::seeds::{derive_rng, derive_seed};

use super::elbo::{elbo_with_draws, ZDraw};
use super::{LsgpConfig, LsgpModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: usize,
    /// Minibatch ELBO estimate evaluated before the step's update.
    pub elbo: f64,
    /// Validation average log-likelihood, recorded every `eval_every` steps
    /// and at the final step.
    pub val_ll: Option<f64>,
}

fn validation_ll(model: &LsgpModel, validation: &Cohort, step: usize) -> Result<f64> {
    // common random numbers across restarts
    let mut rng = derive_rng(0, "validate", &[step as u64]);
    let probs = model.predict_cohort(validation, model.config.predict_mc_samples, &mut rng)?;
    Ok(avg_log_likelihood(&probs, &validation.labels()))
}

/// Maximizes the ELBO with Adam on minibatches drawn uniformly with
/// replacement. Deterministic given `config.seed`; the training rows are put
/// in canonical order first, so their input order does not matter.
pub fn fit(config: &LsgpConfig, train: &Cohort, validation: &Cohort) -> Result<(LsgpModel, Vec<TracePoint>)> {
    let train = &train.canonical();
    let mut model = LsgpModel::init(config, train)?;
    let data = model.training_data(train)?;
    let n = data.len();
    let gh = GaussHermite::new(config.quadrature_nodes);
    let mut rng = derive_rng(config.seed, "batches", &[]);
    let mut flat = model.params.to_flat();
    let mut adam = Adam::new(flat.len(), config.learning_rate);
    let mut trace = Vec::with_capacity(config.n_steps);

    for step in 1..=config.n_steps {
        let batch: Vec<usize> = (0..config.batch_size).map(|_| rng.random_range(0..n)).collect();
        let draws = ZDraw::sample_many(config.mc_samples_z, model.subjects.len(), config.latent_dim, &mut rng);
        let (elbo, grads) = elbo_with_draws(&model.params, &data, &batch, n, &draws, &gh, config.jitter, true)
            .map_err(|e| Error::Diverged {
                step,
                message: format!("{e}; {}", model.params.group_norms()),
            })?;
        let grad = grads.expect("gradient requested").to_flat();
        if !elbo.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                step,
                message: format!("non-finite ELBO or gradient ({}); {}", elbo.total, model.params.group_norms()),
            });
        }
        adam.ascend(&mut flat, &grad);
        model.params.set_flat(&flat);

        let val_ll = if step % config.eval_every == 0 || step == config.n_steps {
            Some(validation_ll(&model, validation, step)?)
        } else {
            None
        };
        if let Some(v) = val_ll {
            log::debug!("step {step}: elbo {:.4} val_ll {v:.4}", elbo.total);
        }
        trace.push(TracePoint {
            step,
            elbo: elbo.total,
            val_ll,
        });
    }
    Ok((model, trace))
}

/// Result of [`fit_with_restarts`].
#[derive(Debug, Clone)]
pub struct RestartOutcome {
    pub model: LsgpModel,
    pub trace: Vec<TracePoint>,
    pub restart: usize,
    /// Final validation average log-likelihood of every restart.
    pub scores: Vec<f64>,
    /// Training trace of every restart.
    pub traces: Vec<Vec<TracePoint>>,
}

/// Runs `n_restarts` fits with derived seeds and keeps the one with the best
/// final validation average log-likelihood.
pub fn fit_with_restarts(
    config: &LsgpConfig,
    train: &Cohort,
    validation: &Cohort,
    n_restarts: usize,
) -> Result<RestartOutcome> {
    if n_restarts == 0 {
        return Err(Error::Config("n_restarts must be at least 1".into()));
    }
    let mut best: Option<(f64, RestartOutcome)> = None;
    let mut scores = Vec::with_capacity(n_restarts);
    let mut traces = Vec::with_capacity(n_restarts);
    for r in 0..n_restarts {
        let cfg = LsgpConfig {
            seed: derive_seed(config.seed, "restart", &[r as u64]),
            ..config.clone()
        };
        let (model, trace) = fit(&cfg, train, validation)?;
        let score = match trace.last().and_then(|t| t.val_ll) {
            Some(v) => v,
            None => validation_ll(&model, validation, 0)?,
        };
        scores.push(score);
        traces.push(trace.clone());
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((
                score,
                RestartOutcome {
                    model,
                    trace,
                    restart: r,
                    scores: Vec::new(),
                    traces: Vec::new(),
                },
            ));
        }
    }
    let (_, mut best) = best.expect("at least one restart");
    best.scores = scores;
    best.traces = traces;
    Ok(best)
}

/// Writes `step,elbo,val_ll` with an empty `val_ll` where none was recorded.
pub fn write_trace_csv(trace: &[TracePoint], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("step,elbo,val_ll\n");
    for t in trace {
        let v = t.val_ll.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", t.step, t.elbo, v));
    }
    File::create(path)?.write_all(out.as_bytes())?;
    Ok(())
}
