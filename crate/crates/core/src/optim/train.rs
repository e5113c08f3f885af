//! Training loops for the sparse GP models.

use std::time::Instant;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autodiff::{softplus, softplus_inv};
use crate::inference::{collapsed_bound_with_grad, CovarianceModel, Likelihood, Svgp};

use super::{natgrad_step, Adam, AdamConfig, OptimError, OptimizerConfig, Result, MAX_HALVINGS};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TracePoint {
    pub iter: usize,
    pub objective: f64,
    pub wallclock_ms: f64,
}

/// Uniform minibatches without replacement within an epoch.
struct Batcher {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl Batcher {
    fn new(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        Batcher { order, pos: 0, rng }
    }

    fn next(&mut self, size: usize) -> Vec<usize> {
        let n = self.order.len();
        if size >= n {
            return (0..n).collect();
        }
        if self.pos + size > n {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let b = self.order[self.pos..self.pos + size].to_vec();
        self.pos += size;
        b
    }
}

fn gather(xs: &[Vec<f64>], y: &DVector<f64>, idx: &[usize]) -> (Vec<Vec<f64>>, DVector<f64>) {
    (idx.iter().map(|&i| xs[i].clone()).collect(), DVector::from_iterator(idx.len(), idx.iter().map(|&i| y[i])))
}

fn elapsed_ms(t: &Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Natural-gradient warmup on `q(u)`, then rounds alternating one natural
/// gradient step with one Adam step on the covariance parameters (and the
/// noise for Gaussian likelihoods). The trace holds the full-data bound
/// before training and after every warmup step and round.
pub fn train_alternating<M: CovarianceModel>(
    q: &mut Svgp<M>,
    xs: &[Vec<f64>],
    y: &DVector<f64>,
    cfg: &OptimizerConfig,
) -> Result<Vec<TracePoint>> {
    cfg.validate()?;
    let clock = Instant::now();
    let n = xs.len();
    let mut batches = Batcher::new(n, cfg.seed);
    let mut trace = vec![TracePoint { iter: 0, objective: q.elbo(xs, y, n)?.value, wallclock_ms: elapsed_ms(&clock) }];
    let gamma = cfg.natgrad.gamma;
    let sched = cfg.schedule;
    for it in 0..sched.natgrad_warmup_iters {
        let (xb, yb) = gather(xs, y, &batches.next(sched.batch_size));
        let (_, g) = q.elbo_with_variational_grad(&xb, &yb, n)?;
        natgrad_step(q, &g, gamma)?;
        trace.push(TracePoint { iter: it + 1, objective: q.elbo(xs, y, n)?.value, wallclock_ms: elapsed_ms(&clock) });
    }
    let mut params = q.model.params();
    let gaussian = matches!(q.likelihood, Likelihood::Gaussian { .. });
    if let Likelihood::Gaussian { noise_var } = q.likelihood {
        params.push(softplus_inv(noise_var));
    }
    let mut adam = Adam::new(cfg.adam, params.len());
    for r in 0..sched.alternating_rounds {
        let (xb, yb) = gather(xs, y, &batches.next(sched.batch_size));
        let (_, g) = q.elbo_with_variational_grad(&xb, &yb, n)?;
        natgrad_step(q, &g, gamma)?;
        let (_, g) = q.elbo_with_grad(&xb, &yb, n)?;
        let mut grad: Vec<f64> = g.model.iter().map(|v| -v).collect();
        if gaussian {
            grad.push(-g.noise_raw);
        }
        adam.step(&mut params, &grad)?;
        let np = q.model.params().len();
        q.model.set_params(&params[..np]);
        if gaussian {
            q.likelihood = Likelihood::Gaussian { noise_var: softplus(params[np]) };
        }
        trace.push(TracePoint {
            iter: sched.natgrad_warmup_iters + r + 1,
            objective: q.elbo(xs, y, n)?.value,
            wallclock_ms: elapsed_ms(&clock),
        });
    }
    Ok(trace)
}

/// Full-batch Adam ascent on the collapsed bound over the covariance
/// parameters and the noise variance. A step that lands where the bound
/// cannot be evaluated (for instance a component whose frequencies cancel,
/// leaving a numerically indefinite `K_uu` block) is retried from the
/// previous state with half the learning rate, up to [`MAX_HALVINGS`] times.
pub fn train_collapsed<M: CovarianceModel + Clone>(
    model: &mut M,
    noise_var: &mut f64,
    xs: &[Vec<f64>],
    y: &DVector<f64>,
    adam: &AdamConfig,
    iters: usize,
) -> Result<Vec<TracePoint>> {
    adam.validate()?;
    let clock = Instant::now();
    let mut params = model.params();
    params.push(softplus_inv(*noise_var));
    let np = params.len() - 1;
    let mut opt = Adam::new(*adam, params.len());
    let mut trace = Vec::with_capacity(iters + 1);
    let (mut bound, mut g) = collapsed_bound_with_grad(model, xs, y, params[np])?;
    trace.push(TracePoint { iter: 0, objective: bound, wallclock_ms: elapsed_ms(&clock) });
    for it in 1..=iters {
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut lr = adam.lr;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let mut trial_opt = opt.clone();
            let mut trial = params.clone();
            trial_opt.step_with_lr(&mut trial, &neg, lr)?;
            let mut m = model.clone();
            m.set_params(&trial[..np]);
            if let Ok((b, gr)) = collapsed_bound_with_grad(&m, xs, y, trial[np]) {
                (opt, params, *model, bound, g) = (trial_opt, trial, m, b, gr);
                accepted = true;
                break;
            }
            lr *= 0.5;
        }
        if !accepted {
            return Err(OptimError::StepFailed { halvings: MAX_HALVINGS, gamma: 2.0 * lr });
        }
        *noise_var = softplus(params[np]);
        trace.push(TracePoint { iter: it, objective: bound, wallclock_ms: elapsed_ms(&clock) });
    }
    Ok(trace)
}
