//! Sparse variational GP inference with inter-domain inducing variables.
//!
//! The latent function is real. For the HMK model the inducing variables
//! are Fourier transforms of each (unshifted) mixture component at chosen
//! frequencies; their complex values enter every computation through the
//! stacked real representation described in [`covariance`].

pub mod collapsed;
pub mod covariance;
pub mod gauss_hermite;
pub mod svgp;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::KernelError;
use crate::linalg::{cholesky_with_ladder, HermitianMatrix, LinalgError};

pub use collapsed::{collapsed_bound, collapsed_bound_with_grad, optimal_q, CollapsedFit};
pub use covariance::{CovAdjoints, CovarianceModel, InducingPointModel, StationaryKind, VffModel};
pub use svgp::{Elbo, ElboGrad, Svgp};

/// Sparse GP over an HMK with variational Fourier features.
pub type SparseGpState = Svgp<VffModel>;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("invalid targets: {0}")]
    InvalidTargets(String),
    #[error("predictive variance {value:.3e} below the clamping floor {floor:.3e}")]
    NegativeVariance { value: f64, floor: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, InferenceError>;

/// `m_p` frequencies in `R^D` per mixture component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InducingFrequencies {
    /// Indexed `[component][frequency][dimension]`.
    pub freqs: Vec<Vec<Vec<f64>>>,
}

impl InducingFrequencies {
    pub fn new(freqs: Vec<Vec<Vec<f64>>>) -> std::result::Result<Self, KernelError> {
        let z = InducingFrequencies { freqs };
        if z.total() == 0 {
            return Err(KernelError::InvalidParams("need at least one inducing frequency".into()));
        }
        let d = z.dim();
        if z.freqs.iter().flatten().any(|w| w.len() != d || w.iter().any(|v| !v.is_finite())) {
            return Err(KernelError::InvalidParams("inducing frequencies must be finite with a common dimension".into()));
        }
        Ok(z)
    }

    pub fn num_components(&self) -> usize {
        self.freqs.len()
    }

    pub fn dim(&self) -> usize {
        self.freqs.iter().flatten().next().map_or(0, Vec::len)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.freqs.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.freqs.iter().map(Vec::len).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.freqs.iter().flatten().flatten().copied().collect()
    }

    pub fn assign_flat(&mut self, flat: &[f64]) {
        let mut k = 0;
        for w in self.freqs.iter_mut().flatten() {
            for v in w.iter_mut() {
                *v = flat[k];
                k += 1;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Likelihood {
    Gaussian {
        noise_var: f64,
    },
    /// Probit link.
    Bernoulli,
}

/// Map `{−1, +1}` or `{0, 1}` labels to `{0, 1}`.
pub fn normalize_labels(y: &[f64]) -> Result<Vec<f64>> {
    let pm = y.iter().all(|&v| v == -1.0 || v == 1.0);
    let zo = y.iter().all(|&v| v == 0.0 || v == 1.0);
    if zo {
        Ok(y.to_vec())
    } else if pm {
        Ok(y.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect())
    } else {
        Err(InferenceError::InvalidTargets("labels must be in {0,1} or {-1,+1}".into()))
    }
}

/// Dense `log N(y | 0, K + σ²I)`.
pub fn exact_log_marginal(kff: &DMatrix<f64>, y: &DVector<f64>, noise_var: f64) -> Result<f64> {
    let n = y.len();
    let k = HermitianMatrix::new(kff + DMatrix::identity(n, n) * noise_var)?;
    let l = cholesky_with_ladder(&k)?;
    let a = l.solve_lower(&DMatrix::from_column_slice(n, 1, y.as_slice()))?;
    Ok(-0.5 * a.norm_squared() - 0.5 * l.logdet() - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln())
}

/// Apply the variance floor: values in `[−1e−8·k(x,x), 0)` become 0, lower
/// values are an error.
pub fn clamp_variance(v: f64, kxx: f64) -> Result<f64> {
    if !v.is_finite() {
        return Err(InferenceError::NonFinite("predictive variance"));
    }
    if v >= 0.0 {
        return Ok(v);
    }
    let floor = -1e-8 * kxx.abs();
    if v >= floor {
        Ok(0.0)
    } else {
        Err(InferenceError::NegativeVariance { value: v, floor })
    }
}
