//! Collapsed evidence lower bound for Gaussian regression, with the
//! variational distribution over `u` integrated out analytically.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::autodiff::softplus;
use crate::linalg::{cholesky_blocks, cholesky_with_ladder, CholeskyFactor, HermitianMatrix};

use super::{clamp_variance, CovAdjoints, CovarianceModel, InferenceError, Result};

/// Factorizations shared by the bound, its gradient, the optimal `q(u)`
/// and prediction.
#[derive(Clone, Debug)]
pub struct CollapsedFit {
    /// `chol(K_uu)`
    pub lk: CholeskyFactor<f64>,
    /// `L⁻¹ K_uf`
    pub v: DMatrix<f64>,
    /// `chol(I + V Vᵀ / σ²)`
    pub lb: CholeskyFactor<f64>,
    /// `L_B⁻¹ V y / σ²`
    pub c: DVector<f64>,
    pub noise_var: f64,
    /// `Σ k(x,x)`
    pub kff_sum: f64,
    pub bound: f64,
}

impl CollapsedFit {
    pub fn new<M: CovarianceModel>(model: &M, xs: &[Vec<f64>], y: &DVector<f64>, noise_var: f64) -> Result<Self> {
        if xs.len() != y.len() {
            return Err(InferenceError::Shape(format!("{} inputs, {} targets", xs.len(), y.len())));
        }
        if !(noise_var > 0.0) {
            return Err(InferenceError::InvalidTargets(format!("noise variance {noise_var} must be positive")));
        }
        let n = y.len();
        let lk = cholesky_blocks(&HermitianMatrix::new(model.kuu())?, &model.blocks())?;
        let kfu = model.kfu(xs);
        let v = lk.solve_lower(&kfu.transpose())?;
        let mm = v.nrows();
        let b = DMatrix::identity(mm, mm) + &v * v.transpose() / noise_var;
        let lb = cholesky_with_ladder(&HermitianMatrix::new(b)?)?;
        let vy = &v * y;
        let c = lb.solve_lower(&DMatrix::from_column_slice(mm, 1, vy.as_slice()))? / noise_var;
        let c = DVector::from_column_slice(c.as_slice());
        let kff_sum = model.kff_diag(xs).sum();
        let bound = -0.5 * n as f64 * (2.0 * PI * noise_var).ln() - 0.5 * lb.logdet() - y.norm_squared() / (2.0 * noise_var)
            + 0.5 * c.norm_squared()
            - (kff_sum - v.norm_squared()) / (2.0 * noise_var);
        if !bound.is_finite() {
            return Err(InferenceError::NonFinite("collapsed bound"));
        }
        Ok(CollapsedFit { lk, v, lb, c, noise_var, kff_sum, bound })
    }

    /// Optimal `q(u) = N(m, S)`.
    pub fn posterior(&self) -> (DVector<f64>, DMatrix<f64>) {
        let r = self.lk.l() * self.lb.solve_upper(&DMatrix::identity(self.c.len(), self.c.len()));
        let cm = DMatrix::from_column_slice(self.c.len(), 1, self.c.as_slice());
        let m = self.lk.l() * self.lb.solve_upper(&cm);
        (DVector::from_column_slice(m.as_slice()), &r * r.transpose())
    }

    /// Latent mean and variance at `xs`.
    pub fn predict<M: CovarianceModel>(&self, model: &M, xs: &[Vec<f64>]) -> Result<(DVector<f64>, DVector<f64>)> {
        let vs = self.lk.solve_lower(&model.kfu(xs).transpose())?;
        let cm = DMatrix::from_column_slice(self.c.len(), 1, self.c.as_slice());
        let mean = vs.transpose() * self.lb.solve_upper(&cm);
        let ws = self.lb.solve_lower(&vs)?;
        let kss = model.kff_diag(xs);
        let mut var = DVector::zeros(xs.len());
        for i in 0..xs.len() {
            let raw = kss[i] - vs.column(i).norm_squared() + ws.column(i).norm_squared();
            var[i] = clamp_variance(raw, kss[i])?;
        }
        Ok((DVector::from_column_slice(mean.as_slice()), var))
    }

    /// Gradient with respect to the model parameters followed by the raw
    /// (softplus) noise parameter.
    pub fn gradient<M: CovarianceModel>(&self, model: &M, xs: &[Vec<f64>], y: &DVector<f64>) -> Result<Vec<f64>> {
        let s2 = self.noise_var;
        let n = y.len();
        let at = self.lk.solve_upper(&self.v);
        let w = self.lb.solve_lower(&self.v)?;
        let wy = &w * y;
        let alpha = (y - w.transpose() * wy / s2) / s2;
        let wa = &w * at.transpose();
        let ata = &at * &alpha;
        let kfu_bar = &alpha * ata.transpose() + w.transpose() * &wa / (s2 * s2);
        let kuu_bar = -0.5 * &ata * ata.transpose() - wa.transpose() * &wa / (2.0 * s2 * s2);
        let adj = CovAdjoints { kuu: kuu_bar, kfu: kfu_bar, kff: DVector::from_element(n, -0.5 / s2) };
        let mut g = model.pullback(xs, &adj);
        let ds2 = 0.5 * (alpha.norm_squared() - (n as f64 - w.norm_squared() / s2) / s2)
            + (self.kff_sum - self.v.norm_squared()) / (2.0 * s2 * s2);
        // d softplus / d raw expressed through σ² itself
        g.push(-ds2 * (-s2).exp_m1());
        Ok(g)
    }
}

pub fn collapsed_bound<M: CovarianceModel>(model: &M, xs: &[Vec<f64>], y: &DVector<f64>, noise_var: f64) -> Result<f64> {
    Ok(CollapsedFit::new(model, xs, y, noise_var)?.bound)
}

/// Bound and its gradient; `noise_raw` is the softplus-inverse noise variance.
pub fn collapsed_bound_with_grad<M: CovarianceModel>(
    model: &M,
    xs: &[Vec<f64>],
    y: &DVector<f64>,
    noise_raw: f64,
) -> Result<(f64, Vec<f64>)> {
    let fit = CollapsedFit::new(model, xs, y, softplus(noise_raw))?;
    let g = fit.gradient(model, xs, y)?;
    Ok((fit.bound, g))
}

pub fn optimal_q<M: CovarianceModel>(model: &M, xs: &[Vec<f64>], y: &DVector<f64>, noise_var: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
    Ok(CollapsedFit::new(model, xs, y, noise_var)?.posterior())
}
