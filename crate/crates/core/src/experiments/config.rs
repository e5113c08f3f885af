//! JSON experiment configurations. Every field except the dataset has a
//! default; relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::data::DatasetSpec;
use super::{ExperimentError, Result};
use crate::kernels::{HmkParams, LsgParams, Target};
use crate::optim::{AdamConfig, OptimizerConfig, RecoverConfig};

/// Parse a config file, returning it with its raw bytes for hashing.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<(T, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = serde_json::from_slice(&bytes).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
    Ok((cfg, bytes))
}

fn positive(what: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(ExperimentError::Config(format!("{what} must be at least 1")))
    } else {
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverExperiment {
    pub target: Target,
    #[serde(default)]
    pub recover: RecoverConfig,
    /// Evaluation interval; defaults to the target's domain.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    /// Start every restart from the target itself (HMK targets only).
    #[serde(default)]
    pub init_from_target: bool,
}

impl RecoverExperiment {
    pub fn validate(&self) -> Result<()> {
        self.recover.validate()?;
        if self.init_from_target && !matches!(self.target, Target::Hmk { .. }) {
            return Err(ExperimentError::Config("init_from_target needs an hmk target".into()));
        }
        if let Some([a, b]) = self.window {
            if !(a < b) {
                return Err(ExperimentError::Config(format!("empty window [{a}, {b}]")));
            }
        }
        // Probe the target across its domain so bad parameters fail as config errors.
        let (lo, hi) = self.window.map_or(self.target.default_domain(), |[a, b]| (a, b));
        for k in 1..=10 {
            let x = lo + (hi - lo) * k as f64 / 10.0;
            self.target.eval(x, x).map_err(|e| ExperimentError::Config(format!("target: {e}")))?;
        }
        Ok(())
    }
}

/// Data-driven HMK initialisation, in standardized input units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HmkInitConfig {
    pub lengthscale: f64,
    pub envelope: f64,
    pub variance: f64,
    /// Standard deviation of the initial frequency means (classification).
    pub freq_noise: f64,
}

impl Default for HmkInitConfig {
    fn default() -> Self {
        HmkInitConfig { lengthscale: 0.7, envelope: 1.5, variance: 2.0, freq_noise: 0.3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    pub dataset: DatasetSpec,
    #[serde(default = "ClassifyConfig::default_components")]
    pub components: usize,
    /// Frequencies `Q` per component.
    #[serde(default = "ClassifyConfig::default_freqs")]
    pub freqs: usize,
    /// Each entry is one run with that many inducing frequencies per component.
    #[serde(default = "ClassifyConfig::default_inducing")]
    pub inducing_per_component: Vec<usize>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "one")]
    pub restarts: usize,
    /// Decision-boundary grid points per axis.
    #[serde(default = "ClassifyConfig::default_grid")]
    pub grid_points: usize,
    #[serde(default)]
    pub init: HmkInitConfig,
}

fn one() -> usize {
    1
}

impl ClassifyConfig {
    fn default_components() -> usize {
        4
    }
    fn default_freqs() -> usize {
        2
    }
    fn default_inducing() -> Vec<usize> {
        vec![2, 8]
    }
    fn default_grid() -> usize {
        50
    }

    pub fn validate(&self) -> Result<()> {
        positive("components", self.components)?;
        positive("freqs", self.freqs)?;
        positive("restarts", self.restarts)?;
        positive("grid_points", self.grid_points)?;
        if self.inducing_per_component.is_empty() {
            return Err(ExperimentError::Config("inducing_per_component is empty".into()));
        }
        for &m in &self.inducing_per_component {
            positive("inducing frequencies per component", m)?;
        }
        self.optimizer.validate()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeSettings {
    pub lengthscale: f64,
}

impl Default for SeSettings {
    fn default() -> Self {
        SeSettings { lengthscale: 0.2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmSettings {
    pub components: usize,
    pub lengthscale: f64,
}

impl Default for SmSettings {
    fn default() -> Self {
        SmSettings { components: 4, lengthscale: 0.5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HmkSettings {
    pub components: usize,
    pub freqs: usize,
    pub inducing_per_component: usize,
    pub lengthscale: f64,
    pub envelope: f64,
}

impl Default for HmkSettings {
    fn default() -> Self {
        HmkSettings { components: 6, freqs: 3, inducing_per_component: 8, lengthscale: 0.5, envelope: 0.6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressConfig {
    pub dataset: DatasetSpec,
    #[serde(default = "RegressConfig::default_iters")]
    pub iters: usize,
    #[serde(default)]
    pub adam: AdamConfig,
    /// Inducing points for the SE and SM models.
    #[serde(default = "RegressConfig::default_inducing_points")]
    pub inducing_points: usize,
    #[serde(default)]
    pub se: SeSettings,
    #[serde(default)]
    pub sm: SmSettings,
    #[serde(default)]
    pub hmk: HmkSettings,
    /// Highest frequency searched by the periodogram, standardized units.
    #[serde(default = "RegressConfig::default_fmax")]
    pub fmax: f64,
    /// Initial noise variance in standardized target units.
    #[serde(default = "RegressConfig::default_noise")]
    pub noise_var: f64,
    #[serde(default = "RegressConfig::default_grid")]
    pub grid_points: usize,
    /// Restarts for SM and HMK; the highest final bound is kept.
    #[serde(default = "RegressConfig::default_restarts")]
    pub restarts: usize,
}

impl RegressConfig {
    fn default_iters() -> usize {
        1000
    }
    fn default_inducing_points() -> usize {
        50
    }
    fn default_fmax() -> f64 {
        20.0
    }
    fn default_noise() -> f64 {
        0.1
    }
    fn default_grid() -> usize {
        500
    }
    fn default_restarts() -> usize {
        5
    }

    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        positive("inducing_points", self.inducing_points)?;
        positive("restarts", self.restarts)?;
        positive("sm.components", self.sm.components)?;
        positive("hmk.components", self.hmk.components)?;
        positive("hmk.freqs", self.hmk.freqs)?;
        positive("hmk.inducing_per_component", self.hmk.inducing_per_component)?;
        positive("grid_points", self.grid_points)?;
        if self.dataset.inputs.len() != 1 {
            return Err(ExperimentError::Config("regression expects exactly one input column".into()));
        }
        if !(self.noise_var > 0.0 && self.fmax > 0.0) {
            return Err(ExperimentError::Config("noise_var and fmax must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DumpKernel {
    Se {
        variance: f64,
        lengthscale: f64,
    },
    Lsg {
        params: LsgParams,
    },
    Hmk {
        params: HmkParams,
    },
    /// Drawn from the run seed.
    RandomHmk {
        freqs: Vec<usize>,
        real_valued: bool,
    },
    /// A trained model; grids are in the model's standardized input units.
    Checkpoint {
        path: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpConfig {
    pub kernel: DumpKernel,
    #[serde(default = "DumpConfig::default_x")]
    pub x_range: [f64; 2],
    #[serde(default = "DumpConfig::default_omega")]
    pub omega_range: [f64; 2],
    #[serde(default = "DumpConfig::default_points")]
    pub points: usize,
}

impl DumpConfig {
    fn default_x() -> [f64; 2] {
        [-2.0, 2.0]
    }
    fn default_omega() -> [f64; 2] {
        [-3.0, 3.0]
    }
    fn default_points() -> usize {
        101
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(ExperimentError::Config("points must be at least 2".into()));
        }
        for [a, b] in [self.x_range, self.omega_range] {
            if !(a < b) {
                return Err(ExperimentError::Config(format!("empty range [{a}, {b}]")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    /// Data points per problem.
    pub n: usize,
    /// Random parameter points per objective.
    pub points: usize,
    pub components: usize,
    pub freqs: usize,
    pub inducing_per_component: usize,
    pub h_fd: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig { n: 10, points: 5, components: 2, freqs: 2, inducing_per_component: 3, h_fd: 1e-5 }
    }
}

impl GradcheckConfig {
    pub fn validate(&self) -> Result<()> {
        for (w, v) in [("n", self.n), ("points", self.points), ("components", self.components), ("freqs", self.freqs)] {
            positive(w, v)?;
        }
        positive("inducing_per_component", self.inducing_per_component)?;
        if !(self.h_fd > 0.0) {
            return Err(ExperimentError::Config("h_fd must be positive".into()));
        }
        Ok(())
    }
}
