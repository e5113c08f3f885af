//! Uncollapsed variational bound with an explicit `q(u) = N(m, L_S L_Sᵀ)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::linalg::{cholesky_blocks, CholeskyFactor, HermitianMatrix};

use super::gauss_hermite::{gauss_hermite, probit_expectation, probit_predict};
use super::{clamp_variance, CovAdjoints, CovarianceModel, InferenceError, Likelihood, Result};

/// Quadrature nodes for the Bernoulli expectation.
pub const DEFAULT_GH_NODES: usize = 20;

#[derive(Clone, Debug)]
pub struct Svgp<M> {
    pub model: M,
    pub mean: DVector<f64>,
    /// Lower triangular.
    pub cov_chol: DMatrix<f64>,
    pub likelihood: Likelihood,
    pub gh_nodes: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Elbo {
    pub value: f64,
    /// Sum over the batch, already rescaled to the full data size.
    pub expected_loglik: f64,
    pub kl: f64,
}

#[derive(Clone, Debug)]
pub struct ElboGrad {
    /// With respect to [`CovarianceModel::params`].
    pub model: Vec<f64>,
    pub mean: DVector<f64>,
    /// `∂/∂S`, symmetric.
    pub cov: DMatrix<f64>,
    /// `∂/∂L_S`, lower triangular.
    pub chol: DMatrix<f64>,
    /// With respect to the softplus-inverse noise variance; zero for Bernoulli.
    pub noise_raw: f64,
}

/// Per-point values, `∂/∂μ`, `∂/∂σ²`, and the summed noise derivative.
type Expectations = (DVector<f64>, DVector<f64>, DVector<f64>, f64);

struct Marginals {
    lk: CholeskyFactor<f64>,
    kfu: DMatrix<f64>,
    /// `K⁻¹ K_uf`
    at: DMatrix<f64>,
    kff: DVector<f64>,
    mu: DVector<f64>,
    var: DVector<f64>,
}

fn lower_triangle(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| if j <= i { m[(i, j)] } else { 0.0 })
}

impl<M: CovarianceModel> Svgp<M> {
    /// `q(u)` initialised to the prior.
    pub fn prior(model: M, likelihood: Likelihood) -> Result<Self> {
        let lk = cholesky_blocks(&HermitianMatrix::new(model.kuu())?, &model.blocks())?;
        let m = model.num_inducing();
        Ok(Svgp { mean: DVector::zeros(m), cov_chol: lk.l().clone(), model, likelihood, gh_nodes: DEFAULT_GH_NODES })
    }

    pub fn cov(&self) -> DMatrix<f64> {
        &self.cov_chol * self.cov_chol.transpose()
    }

    fn prior_chol(&self) -> Result<CholeskyFactor<f64>> {
        Ok(cholesky_blocks(&HermitianMatrix::new(self.model.kuu())?, &self.model.blocks())?)
    }

    fn marginals(&self, xs: &[Vec<f64>]) -> Result<Marginals> {
        let lk = self.prior_chol()?;
        let kfu = self.model.kfu(xs);
        let at = lk.solve(&kfu.transpose())?;
        let kff = self.model.kff_diag(xs);
        let mu = at.transpose() * &self.mean;
        let als = at.transpose() * &self.cov_chol;
        let var = DVector::from_fn(xs.len(), |i, _| kff[i] - at.column(i).dot(&kfu.row(i).transpose()) + als.row(i).norm_squared());
        Ok(Marginals { lk, kfu, at, kff, mu, var })
    }

    /// `KL[q(u) ‖ p(u)]`
    pub fn kl(&self) -> Result<f64> {
        self.kl_with(&self.prior_chol()?)
    }

    fn kl_with(&self, lk: &CholeskyFactor<f64>) -> Result<f64> {
        let m = self.mean.len();
        let tr = lk.solve_lower(&self.cov_chol)?.norm_squared();
        let mk = lk.solve_lower(&DMatrix::from_column_slice(m, 1, self.mean.as_slice()))?.norm_squared();
        let logdet_s: f64 = 2.0 * (0..m).map(|i| self.cov_chol[(i, i)].abs().ln()).sum::<f64>();
        Ok(0.5 * (tr + mk - m as f64 + lk.logdet() - logdet_s))
    }

    /// Latent marginal mean and variance, with the variance floor applied.
    pub fn conditional(&self, xs: &[Vec<f64>]) -> Result<(DVector<f64>, DVector<f64>)> {
        let mg = self.marginals(xs)?;
        let mut var = mg.var.clone();
        for i in 0..var.len() {
            var[i] = clamp_variance(var[i], mg.kff[i])?;
        }
        Ok((mg.mu, var))
    }

    /// Regression: `(mean, latent variance + noise)`. Classification:
    /// `(P(y = 1), latent variance)`.
    pub fn predict(&self, xs: &[Vec<f64>]) -> Result<(DVector<f64>, DVector<f64>)> {
        let (mu, var) = self.conditional(xs)?;
        Ok(match self.likelihood {
            Likelihood::Gaussian { noise_var } => (mu, var.add_scalar(noise_var)),
            Likelihood::Bernoulli => (DVector::from_fn(mu.len(), |i, _| probit_predict(mu[i], var[i])), var),
        })
    }

    /// Per-point `E_q ln p(y|f)` and its derivatives in `μ` and `σ²`, plus
    /// the derivative in the noise variance summed over the batch.
    fn expectations(&self, y: &DVector<f64>, mu: &DVector<f64>, var: &DVector<f64>) -> Result<Expectations> {
        let n = y.len();
        let (mut e, mut dmu, mut dv) = (DVector::zeros(n), DVector::zeros(n), DVector::zeros(n));
        let mut dnoise = 0.0;
        match self.likelihood {
            Likelihood::Gaussian { noise_var: s2 } => {
                for i in 0..n {
                    let r = y[i] - mu[i];
                    e[i] = -0.5 * (2.0 * PI * s2).ln() - (r * r + var[i]) / (2.0 * s2);
                    dmu[i] = r / s2;
                    dv[i] = -0.5 / s2;
                    dnoise += -0.5 / s2 + (r * r + var[i]) / (2.0 * s2 * s2);
                }
            }
            Likelihood::Bernoulli => {
                let (t, w) = gauss_hermite(self.gh_nodes);
                for i in 0..n {
                    let (a, b, c) = probit_expectation(y[i], mu[i], var[i], &t, &w);
                    e[i] = a;
                    dmu[i] = b;
                    dv[i] = c;
                }
            }
        }
        if e.iter().any(|v| !v.is_finite()) {
            return Err(InferenceError::NonFinite("expected log likelihood"));
        }
        Ok((e, dmu, dv, dnoise))
    }

    fn check_batch(xs: &[Vec<f64>], y: &DVector<f64>, n_total: usize) -> Result<f64> {
        if xs.len() != y.len() || xs.is_empty() {
            return Err(InferenceError::Shape(format!("{} inputs, {} targets", xs.len(), y.len())));
        }
        Ok(n_total as f64 / xs.len() as f64)
    }

    /// Bound on a minibatch `(xs, y)` drawn from `n_total` points.
    pub fn elbo(&self, xs: &[Vec<f64>], y: &DVector<f64>, n_total: usize) -> Result<Elbo> {
        let scale = Self::check_batch(xs, y, n_total)?;
        let mg = self.marginals(xs)?;
        let (e, ..) = self.expectations(y, &mg.mu, &mg.var)?;
        let kl = self.kl_with(&mg.lk)?;
        let ell = scale * e.sum();
        Ok(Elbo { value: ell - kl, expected_loglik: ell, kl })
    }

    pub fn elbo_with_grad(&self, xs: &[Vec<f64>], y: &DVector<f64>, n_total: usize) -> Result<(Elbo, ElboGrad)> {
        self.grad_impl(xs, y, n_total, true)
    }

    /// As [`Self::elbo_with_grad`] but skips the covariance pullback;
    /// `ElboGrad::model` is left empty.
    pub fn elbo_with_variational_grad(&self, xs: &[Vec<f64>], y: &DVector<f64>, n_total: usize) -> Result<(Elbo, ElboGrad)> {
        self.grad_impl(xs, y, n_total, false)
    }

    fn grad_impl(&self, xs: &[Vec<f64>], y: &DVector<f64>, n_total: usize, with_model: bool) -> Result<(Elbo, ElboGrad)> {
        let scale = Self::check_batch(xs, y, n_total)?;
        let mg = self.marginals(xs)?;
        let (e, dmu, dv, dnoise) = self.expectations(y, &mg.mu, &mg.var)?;
        let kl = self.kl_with(&mg.lk)?;
        let ell = scale * e.sum();
        let gmu = dmu * scale;
        let dsig = dv * scale;

        let s = self.cov();
        let kinv = mg.lk.inverse();
        let a = mg.at.transpose();
        // Ā = ḡμ mᵀ + 2 D_σ (A S − K_fu)
        let mut abar = &gmu * self.mean.transpose();
        let asm = &a * &s - &mg.kfu;
        for i in 0..abar.nrows() {
            for j in 0..abar.ncols() {
                abar[(i, j)] += 2.0 * dsig[i] * asm[(i, j)];
            }
        }
        let mut da = a.clone();
        for i in 0..da.nrows() {
            da.row_mut(i).scale_mut(dsig[i]);
        }
        let atda = a.transpose() * &da;
        let model = if with_model {
            let kfu_bar = &abar * &kinv;
            let smm = &s + &self.mean * self.mean.transpose();
            let kuu_bar = -(a.transpose() * &kfu_bar) - &atda - 0.5 * (&kinv - &kinv * smm * &kinv);
            let kuu_bar = 0.5 * (&kuu_bar + kuu_bar.transpose());
            self.model.pullback(xs, &CovAdjoints { kuu: kuu_bar, kfu: kfu_bar, kff: dsig.clone() })
        } else {
            Vec::new()
        };

        let g_mean = a.transpose() * &gmu - &kinv * &self.mean;
        let mm = self.mean.len();
        let ls_inv = self
            .cov_chol
            .clone()
            .solve_lower_triangular(&DMatrix::identity(mm, mm))
            .ok_or(InferenceError::NonFinite("variational covariance factor"))?;
        let s_inv = ls_inv.transpose() * &ls_inv;
        let g_cov = &atda - 0.5 * (&kinv - s_inv);
        let g_chol = lower_triangle(&(2.0 * &g_cov * &self.cov_chol));
        let noise_raw = match self.likelihood {
            Likelihood::Gaussian { noise_var } => -scale * dnoise * (-noise_var).exp_m1(),
            Likelihood::Bernoulli => 0.0,
        };
        Ok((Elbo { value: ell - kl, expected_loglik: ell, kl }, ElboGrad { model, mean: g_mean, cov: g_cov, chol: g_chol, noise_raw }))
    }
}
