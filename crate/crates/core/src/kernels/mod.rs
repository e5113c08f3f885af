//! Kernel families: stationary (SE, SS, SM, generalized spectral), locally
//! stationary Gaussian, harmonizable mixture, and recovery targets.

pub mod hmk;
pub mod lsg;
pub mod stationary;
pub mod targets;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

pub use hmk::{eval_hmk, pack, unpack, ComponentView, CrossPrelude, HmkComponent, HmkLayout, HmkParams};
pub use lsg::{eval_lsg, LsgParams};
pub use stationary::{eval_gs, eval_se, eval_sm, eval_ss, gaussian_envelope, SmParams};
pub use targets::{eval_gsm_target, eval_ifbm_target, GsmFuncs, Linear, Target};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("lengthscale is not positive at x = {x}")]
    NonPositiveLengthscale { x: f64 },
    #[error("input {value} outside the kernel's domain")]
    DomainViolation { value: f64 },
    #[error("kernel has no spectral density (a centroid precision is zero)")]
    NotIntegrable,
    #[error("invalid kernel parameters: {0}")]
    InvalidParams(String),
}

/// Random, well-conditioned HMK with `freqs[p]` frequencies in component `p`.
pub fn random_hmk<R: Rng + ?Sized>(rng: &mut R, dim: usize, freqs: &[usize], real_valued: bool) -> HmkParams {
    let components = freqs
        .iter()
        .map(|&q| {
            let mut b_chol = vec![vec![Complex64::new(0.0, 0.0); q]; q];
            for (i, row) in b_chol.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate().take(i + 1) {
                    *v = if i == j {
                        Complex64::new(0.3 + 0.5 * normal(rng).abs(), 0.0)
                    } else {
                        Complex64::new(0.3 * normal(rng), 0.3 * normal(rng))
                    };
                }
            }
            HmkComponent {
                center: (0..dim).map(|_| rng.random_range(-0.5..0.5)).collect(),
                gamma: (0..dim).map(|_| rng.random_range(0.6..1.5)).collect(),
                mu: (0..q).map(|_| (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect()).collect(),
                b_chol,
                lsg: {
                    let lambda2 = rng.random_range(0.1..0.5);
                    LsgParams { sigma1_diag: (0..dim).map(|_| 4.0 * lambda2 * rng.random_range(0.1..0.9)).collect(), lambda2 }
                },
            }
        })
        .collect();
    HmkParams { components, real_valued }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}
