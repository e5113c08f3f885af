//! Serialized sparse GP over an HMK.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::data::Standardizer;
use super::{ExperimentError, Result};
use crate::inference::{InducingFrequencies, Likelihood, Svgp, VffModel};
use crate::kernels::HmkParams;

/// Layout of the stacked real inducing vector.
pub const ORDERING: &str =
    "components in declaration order; within component p: Re u_p1..Re u_pm then Im u_p1..Im u_pm; frequencies in declaration order";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub kernel: HmkParams,
    pub inducing: InducingFrequencies,
    pub ordering: String,
    /// Per component, real and imaginary parts of the variational mean.
    pub mean_re: Vec<Vec<f64>>,
    pub mean_im: Vec<Vec<f64>>,
    /// Rows of the covariance of the stacked real vector.
    pub cov_stacked: Vec<Vec<f64>>,
    pub likelihood: Likelihood,
    /// Map from raw inputs to the units the kernel was fitted in.
    pub input_standardizer: Option<Standardizer>,
}

impl Checkpoint {
    pub fn from_parts(
        kernel: HmkParams,
        inducing: InducingFrequencies,
        mean: &DVector<f64>,
        cov: &DMatrix<f64>,
        likelihood: Likelihood,
        input_standardizer: Option<Standardizer>,
    ) -> Self {
        let (mut mean_re, mut mean_im) = (Vec::new(), Vec::new());
        let mut off = 0;
        for m in inducing.sizes() {
            mean_re.push(mean.rows(off, m).iter().copied().collect());
            mean_im.push(mean.rows(off + m, m).iter().copied().collect());
            off += 2 * m;
        }
        let cov_stacked = (0..cov.nrows()).map(|i| cov.row(i).iter().copied().collect()).collect();
        Checkpoint { kernel, inducing, ordering: ORDERING.to_string(), mean_re, mean_im, cov_stacked, likelihood, input_standardizer }
    }

    pub fn from_svgp(q: &Svgp<VffModel>, input_standardizer: Option<Standardizer>) -> Self {
        Self::from_parts(q.model.kernel(), q.model.inducing().clone(), &q.mean, &q.cov(), q.likelihood, input_standardizer)
    }

    pub fn stacked_mean(&self) -> DVector<f64> {
        let mut v = Vec::new();
        for (re, im) in self.mean_re.iter().zip(&self.mean_im) {
            v.extend(re);
            v.extend(im);
        }
        DVector::from_vec(v)
    }

    pub fn stacked_cov(&self) -> DMatrix<f64> {
        let n = self.cov_stacked.len();
        DMatrix::from_fn(n, n, |i, j| self.cov_stacked[i][j])
    }

    pub fn to_svgp(&self) -> Result<Svgp<VffModel>> {
        if self.ordering != ORDERING {
            return Err(ExperimentError::Config(format!("unsupported inducing ordering `{}`", self.ordering)));
        }
        let model = VffModel::new(&self.kernel, self.inducing.clone())?;
        let mut q = Svgp::prior(model, self.likelihood)?;
        let cov = self.stacked_cov();
        if cov.nrows() != q.mean.len() {
            return Err(ExperimentError::Config("checkpoint covariance does not match the inducing frequencies".into()));
        }
        q.mean = self.stacked_mean();
        q.cov_chol = cov.cholesky().ok_or_else(|| ExperimentError::Numerical("checkpoint covariance is not positive definite".into()))?.l();
        Ok(q)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("cannot read checkpoint {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ExperimentError::Config(format!("bad checkpoint {}: {e}", path.display())))
    }
}
