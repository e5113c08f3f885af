//! Gauss–Hermite quadrature and the probit likelihood.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::erf::erfc;

/// Nodes and weights for `∫ e^{−t²} g(t) dt ≈ Σ w_k g(t_k)`, from the
/// eigen-decomposition of the Jacobi matrix.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::zeros(n, n);
    for i in 1..n {
        let b = (i as f64 / 2.0).sqrt();
        j[(i, i - 1)] = b;
        j[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n).map(|k| (eig.eigenvalues[k], PI.sqrt() * eig.eigenvectors[(0, k)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Below this argument `Φ` underflows and the asymptotic series is used.
const LOG_PHI_ASYMPTOTIC: f64 = -37.0;

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// `ln Φ(z)`
pub fn log_norm_cdf(z: f64) -> f64 {
    if z < LOG_PHI_ASYMPTOTIC {
        let z2 = z * z;
        -0.5 * z2 - (-z).ln() - 0.5 * (2.0 * PI).ln() + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
    } else {
        norm_cdf(z).ln()
    }
}

/// `φ(z)/Φ(z)`, the derivative of `ln Φ`.
pub fn inv_mills(z: f64) -> f64 {
    if z < LOG_PHI_ASYMPTOTIC {
        let z2 = z * z;
        -z / (1.0 - 1.0 / z2 + 3.0 / (z2 * z2))
    } else {
        let log_pdf = -0.5 * z * z - 0.5 * (2.0 * PI).ln();
        (log_pdf - log_norm_cdf(z)).exp()
    }
}

/// `E_{f∼N(μ,v)} ln Φ(s f)` with `s = 2y − 1`, and its partial derivatives
/// with respect to `μ` and `v`.
pub fn probit_expectation(y: f64, mu: f64, var: f64, nodes: &[f64], weights: &[f64]) -> (f64, f64, f64) {
    let s = 2.0 * y - 1.0;
    let sd = (2.0 * var.max(0.0)).sqrt();
    let (mut e, mut dmu, mut dv) = (0.0, 0.0, 0.0);
    for (&t, &w) in nodes.iter().zip(weights) {
        let z = s * (mu + sd * t);
        let wk = w / PI.sqrt();
        e += wk * log_norm_cdf(z);
        let r = s * inv_mills(z);
        dmu += wk * r;
        if sd > 0.0 {
            dv += wk * r * t / sd;
        }
    }
    (e, dmu, dv)
}

/// `P(y = 1) = Φ(μ / √(1 + v))`
pub fn probit_predict(mu: f64, var: f64) -> f64 {
    norm_cdf(mu / (1.0 + var.max(0.0)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let (t, w) = gauss_hermite(20);
        let m0: f64 = w.iter().sum();
        let m2: f64 = t.iter().zip(&w).map(|(t, w)| w * t * t).sum();
        let m4: f64 = t.iter().zip(&w).map(|(t, w)| w * t.powi(4)).sum();
        assert!((m0 - PI.sqrt()).abs() < 1e-13);
        assert!((m2 - PI.sqrt() / 2.0).abs() < 1e-13);
        assert!((m4 - 3.0 * PI.sqrt() / 4.0).abs() < 1e-12);
    }

    #[test]
    fn probit_refinement_20_vs_50() {
        let (t20, w20) = gauss_hermite(20);
        let (t50, w50) = gauss_hermite(50);
        for &(y, mu, v) in &[(1.0, 0.3, 0.5), (0.0, -1.2, 2.0), (1.0, 2.5, 0.05), (0.0, 0.0, 1.0)] {
            let a = probit_expectation(y, mu, v, &t20, &w20).0;
            let b = probit_expectation(y, mu, v, &t50, &w50).0;
            assert!((a - b).abs() < 1e-6, "{a} {b}");
        }
    }

    #[test]
    fn log_cdf_is_continuous_at_switch() {
        let a = log_norm_cdf(LOG_PHI_ASYMPTOTIC + 1e-9);
        let b = log_norm_cdf(LOG_PHI_ASYMPTOTIC - 1e-9);
        assert!((a - b).abs() < 1e-6 * a.abs());
        assert!(log_norm_cdf(-60.0).is_finite());
        assert!((inv_mills(-36.99) - inv_mills(-37.01)).abs() < 0.05);
    }

    #[test]
    fn probit_expectation_derivatives() {
        let (t, w) = gauss_hermite(20);
        let (y, mu, v) = (1.0, -0.4, 0.7);
        let (_, dmu, dv) = probit_expectation(y, mu, v, &t, &w);
        let h = 1e-6;
        let fm = (probit_expectation(y, mu + h, v, &t, &w).0 - probit_expectation(y, mu - h, v, &t, &w).0) / (2.0 * h);
        let fv = (probit_expectation(y, mu, v + h, &t, &w).0 - probit_expectation(y, mu, v - h, &t, &w).0) / (2.0 * h);
        assert!((dmu - fm).abs() < 1e-7 && (dv - fv).abs() < 1e-7);
    }
}
