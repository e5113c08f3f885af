//! Locally stationary Gaussian kernel: a Gaussian envelope on the centroid
//! `(x + x')/2` times a squared exponential in the lag `x − x'`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Diagonal centroid precision `Σ₁` and isotropic lag precision `Σ₂ = λ²I`,
/// both in units of 1/input².
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsgParams {
    pub sigma1_diag: Vec<f64>,
    pub lambda2: f64,
}

impl LsgParams {
    pub fn dim(&self) -> usize {
        self.sigma1_diag.len()
    }

    /// Zero `Σ₁` entries are allowed (stationary limit); negatives are not.
    pub fn validate(&self) -> Result<(), super::KernelError> {
        if self.sigma1_diag.iter().any(|&s| !(s >= 0.0)) || !(self.lambda2 > 0.0) {
            return Err(super::KernelError::InvalidParams("LSG needs sigma1 >= 0 and lambda2 > 0".into()));
        }
        Ok(())
    }

    /// `k_LSG` is positive definite iff `Σ₁ ⪯ 4Σ₂`.
    pub fn is_positive_definite(&self) -> bool {
        self.sigma1_diag.iter().all(|&s| s <= 4.0 * self.lambda2)
    }

    /// A generalized spectral density exists only when every `Σ₁` entry is positive.
    pub fn is_integrable(&self) -> bool {
        self.sigma1_diag.iter().all(|&s| s > 0.0)
    }
}

/// `exp(−2π² x̃ᵀΣ₁x̃) exp(−2π² τᵀΣ₂τ)` with `x̃ = (x+x')/2`, `τ = x−x'`.
pub fn eval_lsg(x: &[f64], x2: &[f64], p: &LsgParams) -> f64 {
    let mut centroid = 0.0;
    let mut lag = 0.0;
    for d in 0..x.len() {
        let c = 0.5 * (x[d] + x2[d]);
        let t = x[d] - x2[d];
        centroid += p.sigma1_diag[d] * c * c;
        lag += t * t;
    }
    (-2.0 * PI * PI * (centroid + p.lambda2 * lag)).exp()
}
