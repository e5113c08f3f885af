//! Fitting an HMK to a target kernel by mean squared error on random
//! batches of grid pairs.

use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Real, Tape, Var};
use crate::kernels::{pack, unpack, ComponentView, HmkComponent, HmkLayout, HmkParams, LsgParams};

use super::{Adam, AdamConfig, OptimError, Result, TracePoint};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoverConfig {
    /// Mixture components `P`.
    pub components: usize,
    /// Frequencies per component `Q`.
    pub freqs: usize,
    /// Grid points per axis.
    pub grid_points: usize,
    pub iters: usize,
    /// Grid pairs per stochastic step.
    pub batch: usize,
    pub restarts: usize,
    pub adam: AdamConfig,
    /// Learning rate at the last iteration relative to the first; the
    /// schedule is geometric.
    pub final_lr_fraction: f64,
    pub trace_every: usize,
}

impl Default for RecoverConfig {
    fn default() -> Self {
        RecoverConfig {
            components: 2,
            freqs: 2,
            grid_points: 60,
            iters: 6000,
            batch: 256,
            restarts: 5,
            adam: AdamConfig { lr: 5e-2, ..AdamConfig::default() },
            final_lr_fraction: 0.05,
            trace_every: 50,
        }
    }
}

impl RecoverConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        if self.components == 0 || self.freqs == 0 || self.grid_points < 2 || self.batch == 0 || self.restarts == 0 {
            return Err(OptimError::InvalidConfig("components, freqs, batch and restarts must be positive; grid needs two points".into()));
        }
        if !(self.final_lr_fraction > 0.0 && self.final_lr_fraction <= 1.0) {
            return Err(OptimError::InvalidConfig("final_lr_fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RecoverResult {
    pub params: HmkParams,
    /// Full-grid MSE of `params`.
    pub mse: f64,
    pub restart_mse: Vec<f64>,
    pub best_restart: usize,
    /// Full-grid MSE along the best restart.
    pub trace: Vec<TracePoint>,
}

/// Mean of `(Re k(x_i, x_j) − T_ij)²` over the whole grid.
pub fn grid_mse(p: &HmkParams, grid: &[Vec<f64>], target: &DMatrix<f64>) -> f64 {
    let n = grid.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let r = p.eval(&grid[i], &grid[j]).re - target[(i, j)];
            s += r * r;
        }
    }
    s / (n * n) as f64
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Random real-valued HMK for fitting targets on `[lo, hi]`: centers inside
/// the window, envelopes of the order of its width and amplitudes matched
/// to `scale`, the target's largest magnitude.
pub fn recovery_init<R: Rng + ?Sized>(rng: &mut R, window: (f64, f64), components: usize, freqs: usize, scale: f64) -> HmkParams {
    let width = window.1 - window.0;
    let comps = (0..components)
        .map(|_| {
            let lambda2 = rng.random_range(0.1..0.5);
            let s1 = 4.0 * lambda2 * rng.random_range(0.05..0.5);
            let gamma = (rng.random_range(0.2f64.ln()..2.0f64.ln())).exp() / width;
            let amp = (scale / (components * freqs) as f64).sqrt();
            let b_chol = (0..freqs)
                .map(|i| {
                    (0..freqs)
                        .map(|j| match i.cmp(&j) {
                            std::cmp::Ordering::Equal => Complex64::new(amp * rng.random_range(0.5..1.5), 0.0),
                            std::cmp::Ordering::Greater => Complex64::new(0.1 * amp * normal(rng), 0.1 * amp * normal(rng)),
                            std::cmp::Ordering::Less => Complex64::new(0.0, 0.0),
                        })
                        .collect()
                })
                .collect();
            HmkComponent {
                center: vec![rng.random_range(window.0..window.1)],
                gamma: vec![gamma],
                mu: (0..freqs).map(|_| vec![rng.random_range(-1.5..1.5) / width]).collect(),
                b_chol,
                lsg: LsgParams { sigma1_diag: vec![s1], lambda2 },
            }
        })
        .collect();
    HmkParams { components: comps, real_valued: true }
}

/// Mean of `(Re k(x_i, x_j) − T_ij)²` over `pairs` and its gradient with
/// respect to the packed parameters `raw`.
fn pair_mse_grad(layout: &HmkLayout, raw: &[f64], grid: &[Vec<f64>], target: &DMatrix<f64>, pairs: &[(usize, usize)]) -> (f64, Vec<f64>) {
    let tape = Tape::new();
    let leaves = tape.leaves(raw);
    let views: Vec<ComponentView<Var>> =
        layout.ranges().iter().zip(&layout.freqs).map(|(r, &q)| ComponentView::from_raw(&leaves[r.clone()], layout.dim, q)).collect();
    let mut seeds = Vec::with_capacity(pairs.len() * views.len());
    let mut mse = 0.0;
    for &(i, j) in pairs {
        let parts: Vec<Var> = views.iter().map(|v| v.kernel(&grid[i], &grid[j]).re).collect();
        let r = parts.iter().map(|v| v.value()).sum::<f64>() - target[(i, j)];
        mse += r * r / pairs.len() as f64;
        let s = 2.0 * r / pairs.len() as f64;
        seeds.extend(parts.into_iter().map(|v| (v, s)));
    }
    (mse, tape.gradient(&seeds, &leaves))
}

/// [`grid_mse`] of `unpack(layout, raw, true)` and its gradient in `raw`.
pub fn grid_mse_with_grad(layout: &HmkLayout, raw: &[f64], grid: &[Vec<f64>], target: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let n = grid.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    pair_mse_grad(layout, raw, grid, target, &pairs)
}

fn fit_one(
    init: &HmkParams,
    grid: &[Vec<f64>],
    target: &DMatrix<f64>,
    cfg: &RecoverConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(HmkParams, f64, Vec<TracePoint>)> {
    let clock = Instant::now();
    let layout = HmkLayout::of(init);
    let mut raw = pack(init);
    let mut adam = Adam::new(cfg.adam, raw.len());
    let n = grid.len();
    let mut trace = Vec::new();
    let decay = cfg.final_lr_fraction.powf(1.0 / cfg.iters.max(1) as f64);
    let mut lr = cfg.adam.lr;
    for it in 0..=cfg.iters {
        if cfg.trace_every > 0 && (it % cfg.trace_every == 0 || it == cfg.iters) {
            let p = unpack(&layout, &raw, true);
            trace.push(TracePoint { iter: it, objective: grid_mse(&p, grid, target), wallclock_ms: clock.elapsed().as_secs_f64() * 1e3 });
        }
        if it == cfg.iters {
            break;
        }
        let pairs: Vec<(usize, usize)> = (0..cfg.batch).map(|_| (rng.random_range(0..n), rng.random_range(0..n))).collect();
        let (_, g) = pair_mse_grad(&layout, &raw, grid, target, &pairs);
        adam.step_with_lr(&mut raw, &g, lr)?;
        lr *= decay;
    }
    let p = unpack(&layout, &raw, true);
    let mse = grid_mse(&p, grid, target);
    Ok((p, mse, trace))
}

/// Fit from each initialisation and keep the lowest full-grid MSE. Restart
/// `r` draws its batches from stream `r` of a ChaCha8 generator seeded with
/// `seed`.
pub fn recover_kernel(
    target: &DMatrix<f64>,
    grid: &[Vec<f64>],
    inits: &[HmkParams],
    cfg: &RecoverConfig,
    seed: u64,
) -> Result<RecoverResult> {
    cfg.validate()?;
    if target.nrows() != grid.len() || target.ncols() != grid.len() {
        return Err(OptimError::ShapeMismatch { expected: grid.len(), found: target.nrows() });
    }
    let mut best: Option<RecoverResult> = None;
    let mut restart_mse = Vec::with_capacity(inits.len());
    for (r, init) in inits.iter().enumerate() {
        init.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let (p, mse, trace) = fit_one(init, grid, target, cfg, &mut rng)?;
        restart_mse.push(mse);
        if best.as_ref().is_none_or(|b| mse < b.mse) {
            best = Some(RecoverResult { params: p, mse, restart_mse: Vec::new(), best_restart: r, trace });
        }
    }
    let mut best = best.ok_or_else(|| OptimError::InvalidConfig("no initialisations given".into()))?;
    best.restart_mse = restart_mse;
    Ok(best)
}
