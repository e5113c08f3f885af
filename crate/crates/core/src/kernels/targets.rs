//! Fixed non-stationary kernels used as recovery targets.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::hmk::HmkParams;
use super::stationary::{eval_sm, SmParams};
use super::KernelError;

/// `a + b·x`
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub intercept: f64,
    pub slope: f64,
}

impl Linear {
    pub const fn new(intercept: f64, slope: f64) -> Self {
        Linear { intercept, slope }
    }

    pub fn at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Amplitude `w`, lengthscale `ℓ` and frequency `μ` functions of the
/// generalized spectral mixture target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GsmFuncs {
    pub w: Linear,
    pub ell: Linear,
    pub mu: Linear,
}

impl Default for GsmFuncs {
    fn default() -> Self {
        GsmFuncs { w: Linear::new(1.0, 0.0), ell: Linear::new(0.3, 0.0), mu: Linear::new(0.5, 0.4) }
    }
}

/// `w(x)w(x') k_Gibbs(x,x') cos(2π(μ(x)x − μ(x')x'))`
pub fn eval_gsm_target(x: f64, x2: f64, f: &GsmFuncs) -> Result<f64, KernelError> {
    let l1 = f.ell.at(x);
    let l2 = f.ell.at(x2);
    if !(l1 > 0.0) {
        return Err(KernelError::NonPositiveLengthscale { x });
    }
    if !(l2 > 0.0) {
        return Err(KernelError::NonPositiveLengthscale { x: x2 });
    }
    let s = l1 * l1 + l2 * l2;
    let gibbs = (2.0 * l1 * l2 / s).sqrt() * (-(x - x2) * (x - x2) / s).exp();
    let phase = 2.0 * PI * (f.mu.at(x) * x - f.mu.at(x2) * x2);
    Ok(f.w.at(x) * f.w.at(x2) * gibbs * phase.cos())
}

pub const IFBM_DOMAIN: (f64, f64) = (0.1, 1.1);

/// `½(t^{−2h} + s^{−2h} − |1/t − 1/s|^{2h})` on `t, s ∈ (0.1, 1.1]`.
pub fn eval_ifbm_target(t: f64, s: f64, h: f64) -> Result<f64, KernelError> {
    for v in [t, s] {
        if !(v > IFBM_DOMAIN.0 && v <= IFBM_DOMAIN.1) {
            return Err(KernelError::DomainViolation { value: v });
        }
    }
    if !(h > 0.0 && h < 1.0) {
        return Err(KernelError::InvalidParams(format!("Hurst parameter {h} outside (0,1)")));
    }
    let e = 2.0 * h;
    Ok(0.5 * (t.powf(-e) + s.powf(-e) - (1.0 / t - 1.0 / s).abs().powf(e)))
}

/// A kernel to be recovered, evaluated on scalar inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Target {
    Gsm {
        #[serde(default)]
        funcs: GsmFuncs,
    },
    Ifbm {
        #[serde(default = "default_hurst")]
        h: f64,
    },
    /// Stationary spectral mixture of record.
    SmOfRecord { params: SmParams },
    /// An HMK, used for self-recovery checks.
    Hmk { params: HmkParams },
}

fn default_hurst() -> f64 {
    0.5
}

impl Target {
    pub fn eval(&self, x: f64, x2: f64) -> Result<f64, KernelError> {
        match self {
            Target::Gsm { funcs } => eval_gsm_target(x, x2, funcs),
            Target::Ifbm { h } => eval_ifbm_target(x, x2, *h),
            Target::SmOfRecord { params } => Ok(eval_sm(&[x - x2], params)),
            Target::Hmk { params } => Ok(params.eval(&[x], &[x2]).re),
        }
    }

    /// Default evaluation interval for recovery grids.
    pub fn default_domain(&self) -> (f64, f64) {
        match self {
            Target::Ifbm { .. } => IFBM_DOMAIN,
            _ => (-1.0, 1.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Target::Gsm { .. } => "gsm",
            Target::Ifbm { .. } => "ifbm",
            Target::SmOfRecord { .. } => "sm-of-record",
            Target::Hmk { .. } => "hmk",
        }
    }
}
