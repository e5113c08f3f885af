//! Natural-gradient update of `q(u) = N(m, S)` on the stacked real vector.
//!
//! With natural parameters `θ₁ = S⁻¹m`, `θ₂ = −½S⁻¹` and expectation
//! parameters `η₁ = m`, `η₂ = S + mmᵀ`, the natural gradient in `θ` is the
//! ordinary gradient in `η`: `∂L/∂η₁ = ∂L/∂m − 2(∂L/∂S)m`, `∂L/∂η₂ = ∂L/∂S`.

use nalgebra::DMatrix;

use crate::inference::{CovarianceModel, ElboGrad, Svgp};

use super::{OptimError, Result};

pub const MAX_HALVINGS: usize = 10;

/// Take one step of size `gamma`, halving it while `S` would lose positive
/// definiteness. Returns the step size actually used.
pub fn natgrad_step<M: CovarianceModel>(q: &mut Svgp<M>, grad: &ElboGrad, gamma: f64) -> Result<f64> {
    let n = q.mean.len();
    if grad.mean.len() != n || grad.cov.nrows() != n {
        return Err(OptimError::ShapeMismatch { expected: n, found: grad.mean.len() });
    }
    if grad.mean.iter().all(|&v| v == 0.0) && grad.cov.iter().all(|&v| v == 0.0) {
        return Ok(gamma);
    }
    let ls_inv =
        q.cov_chol.clone().solve_lower_triangular(&DMatrix::identity(n, n)).ok_or(OptimError::StepFailed { halvings: 0, gamma })?;
    let s_inv = ls_inv.transpose() * &ls_inv;
    let theta1 = &s_inv * &q.mean;
    let theta2 = -0.5 * &s_inv;
    let d1 = &grad.mean - 2.0 * &grad.cov * &q.mean;
    let mut g = gamma;
    for _ in 0..=MAX_HALVINGS {
        let t2 = &theta2 + g * &grad.cov;
        let prec = -2.0 * &t2;
        let prec = 0.5 * (&prec + prec.transpose());
        if let Some(pc) = prec.cholesky() {
            let s = pc.inverse();
            let s = 0.5 * (&s + s.transpose());
            if let Some(sc) = s.clone().cholesky() {
                let t1 = &theta1 + g * &d1;
                q.mean = &s * t1;
                q.cov_chol = sc.l();
                return Ok(g);
            }
        }
        g *= 0.5;
    }
    Err(OptimError::StepFailed { halvings: MAX_HALVINGS, gamma: 2.0 * g })
}
