//! Optimizers and training loops.

pub mod adam;
pub mod gradcheck;
pub mod natgrad;
pub mod recover;
pub mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::InferenceError;
use crate::kernels::KernelError;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{gradcheck, GradCheckReport, ParamCheck};
pub use natgrad::{natgrad_step, MAX_HALVINGS};
pub use recover::{grid_mse_with_grad, recover_kernel, recovery_init, RecoverConfig, RecoverResult};
pub use train::{train_alternating, train_collapsed, TracePoint};

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("optimizer step failed after {halvings} halvings (last step size {gamma:.3e})")]
    StepFailed { halvings: usize, gamma: f64 },
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

pub type Result<T> = std::result::Result<T, OptimError>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NatgradConfig {
    pub gamma: f64,
}

impl Default for NatgradConfig {
    fn default() -> Self {
        NatgradConfig { gamma: 0.1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub natgrad_warmup_iters: usize,
    pub alternating_rounds: usize,
    pub batch_size: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig { natgrad_warmup_iters: 200, alternating_rounds: 700, batch_size: 100 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub adam: AdamConfig,
    pub natgrad: NatgradConfig,
    pub schedule: ScheduleConfig,
    pub seed: u64,
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        if !(self.natgrad.gamma > 0.0 && self.natgrad.gamma <= 1.0) {
            return Err(OptimError::InvalidConfig(format!("natgrad step {} outside (0, 1]", self.natgrad.gamma)));
        }
        if self.schedule.batch_size == 0 {
            return Err(OptimError::InvalidConfig("batch size must be positive".into()));
        }
        Ok(())
    }
}
