//! Stationary kernels written as functions of the lag `τ = x − x'`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::autodiff::Real;

/// Squared exponential `σ² exp(−|τ|²/(2ℓ²))`.
pub fn eval_se<T: Real>(tau: &[T], variance: T, lengthscale: T) -> T {
    let mut r2 = T::zero();
    for &t in tau {
        r2 += t * t;
    }
    variance * (-(r2 / (lengthscale * lengthscale * 2.0))).exp()
}

/// Sparse spectrum kernel. The cosine variant is the real kernel
/// `Σ α_q cos(2π ω_q·τ)`, the complex variant `Σ α_q e^{2iπ ω_q·τ}`.
pub fn eval_ss(tau: &[f64], weights: &[f64], freqs: &[Vec<f64>], complex: bool) -> Complex64 {
    weights
        .iter()
        .zip(freqs)
        .map(|(&a, w)| {
            let phase = 2.0 * PI * dot(w, tau);
            if complex {
                Complex64::from_polar(a, phase)
            } else {
                Complex64::new(a * phase.cos(), 0.0)
            }
        })
        .sum()
}

/// Spectral mixture weights, means and diagonal covariances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmParams {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

impl SmParams {
    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<(), super::KernelError> {
        let q = self.weights.len();
        if q == 0 || self.means.len() != q || self.variances.len() != q {
            return Err(super::KernelError::InvalidParams("spectral mixture needs matching, non-empty weights/means/variances".into()));
        }
        let d = self.dim();
        for (m, v) in self.means.iter().zip(&self.variances) {
            if m.len() != d || v.len() != d {
                return Err(super::KernelError::InvalidParams("inconsistent SM dimension".into()));
            }
            if v.iter().any(|&s| !(s > 0.0)) {
                return Err(super::KernelError::InvalidParams("SM variances must be positive".into()));
            }
        }
        if self.weights.iter().any(|&a| !(a > 0.0)) {
            return Err(super::KernelError::InvalidParams("SM weights must be positive".into()));
        }
        Ok(())
    }
}

/// `Σ α_q exp(−2π² τᵀΣ_qτ) cos(2π ω_q·τ)`
pub fn eval_sm(tau: &[f64], p: &SmParams) -> f64 {
    let mut k = 0.0;
    for q in 0..p.num_components() {
        k += sm_term(tau, p.weights[q], &p.means[q], &p.variances[q]);
    }
    k
}

/// One spectral mixture component, generic for differentiation.
pub fn sm_term<T: Real>(tau: &[T], weight: T, mean: &[T], var: &[T]) -> T {
    let mut quad = T::zero();
    let mut phase = T::zero();
    for d in 0..tau.len() {
        quad += var[d] * tau[d] * tau[d];
        phase += mean[d] * tau[d];
    }
    weight * (quad * (-2.0 * PI * PI)).exp() * (phase * (2.0 * PI)).cos()
}

/// Generalized spectral kernel `Σ α_q h(τ∘γ_q) e^{2iπ ω_q·τ}` with a
/// stationary envelope `h`, normalized so that `h(0) = 1`.
pub fn eval_gs<H: Fn(&[f64]) -> f64>(tau: &[f64], weights: &[f64], freqs: &[Vec<f64>], gammas: &[Vec<f64>], envelope: H) -> Complex64 {
    let h0 = envelope(&vec![0.0; tau.len()]);
    let mut k = Complex64::new(0.0, 0.0);
    let mut scaled = vec![0.0; tau.len()];
    for q in 0..weights.len() {
        for d in 0..tau.len() {
            scaled[d] = tau[d] * gammas[q][d];
        }
        let phase = 2.0 * PI * dot(&freqs[q], tau);
        k += Complex64::from_polar(weights[q] * envelope(&scaled) / h0, phase);
    }
    k
}

/// Gaussian envelope `exp(−|τ|²/2)` for [`eval_gs`].
pub fn gaussian_envelope(tau: &[f64]) -> f64 {
    (-0.5 * tau.iter().map(|t| t * t).sum::<f64>()).exp()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
