//! Generalized spectral densities and Wigner distributions.
//!
//! For the LSG kernel the pairing is `S(ω,ξ) = N(ω−ξ | 0, Σ₁)·N((ω+ξ)/2 | 0, Σ₂)`:
//! the centroid precision governs the spread across the diagonal `ω = ξ`
//! and the lag precision the spread along it. The quadrature oracles in
//! [`quadrature`] confirm this pairing.

pub mod quadrature;

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{HmkParams, KernelError, LsgParams, SmParams};

pub use quadrature::{gsd_oracle, gsd_oracle_grid, wigner_oracle, QuadConfig};

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("quadrature window too small: boundary integrand {boundary:.3e} vs peak {peak:.3e}")]
    WindowTooSmall { boundary: f64, peak: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Uniform lattice over frequency (or input) space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub points: Vec<usize>,
}

impl FrequencyGrid {
    pub fn new(min: Vec<f64>, max: Vec<f64>, points: Vec<usize>) -> Result<Self, SpectralError> {
        let g = FrequencyGrid { min, max, points };
        g.validate()?;
        Ok(g)
    }

    pub fn uniform_1d(min: f64, max: f64, points: usize) -> Result<Self, SpectralError> {
        Self::new(vec![min], vec![max], vec![points])
    }

    pub fn validate(&self) -> Result<(), SpectralError> {
        let d = self.min.len();
        if d == 0 || self.max.len() != d || self.points.len() != d {
            return Err(SpectralError::InvalidGrid("dimension mismatch".into()));
        }
        for i in 0..d {
            if !(self.min[i] < self.max[i]) || self.points[i] < 2 {
                return Err(SpectralError::InvalidGrid(format!("axis {i} needs min < max and >= 2 points")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn axis(&self, d: usize) -> Vec<f64> {
        linspace(self.min[d], self.max[d], self.points[d])
    }

    /// All lattice points, last axis fastest.
    pub fn nodes(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dim()).map(|d| self.axis(d)).collect();
        let mut out: Vec<Vec<f64>> = vec![Vec::new()];
        for a in &axes {
            out = out.iter().flat_map(|p| a.iter().map(move |&v| [p.as_slice(), &[v]].concat())).collect();
        }
        out
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { hi } else { lo + h * i as f64 }).collect()
}

fn normal_density(v: f64, var: f64) -> f64 {
    (-0.5 * v * v / var).exp() / (2.0 * PI * var).sqrt()
}

/// `N(ω−ξ | 0, Σ₁)·N((ω+ξ)/2 | 0, λ²I)`
pub fn gsd_lsg(omega: &[f64], xi: &[f64], p: &LsgParams) -> Result<f64, SpectralError> {
    if !p.is_integrable() {
        return Err(KernelError::NotIntegrable.into());
    }
    let mut s = 1.0;
    for d in 0..omega.len() {
        s *= normal_density(omega[d] - xi[d], p.sigma1_diag[d]) * normal_density(0.5 * (omega[d] + xi[d]), p.lambda2);
    }
    Ok(s)
}

/// `Σ_p S_p(ω,ξ) e^{−2iπ x_p·(ω−ξ)}`; real-valued kernels use
/// `(S(ω,ξ) + conj S(−ω,−ξ))/2`.
pub fn gsd_hmk(omega: &[f64], xi: &[f64], p: &HmkParams) -> Result<Complex64, SpectralError> {
    if !p.is_integrable() {
        return Err(KernelError::NotIntegrable.into());
    }
    let mut s = Complex64::new(0.0, 0.0);
    for v in p.views() {
        let comp = if p.real_valued { v.gsd_real(omega, xi) } else { v.gsd(omega, xi) };
        s += comp.mul(v.shift_phase(omega, xi)).to_f64();
    }
    Ok(s)
}

/// `N(ω | 0, λ²I)·exp(−2π² xᵀΣ₁x)`
pub fn wdf_lsg(x: &[f64], omega: &[f64], p: &LsgParams) -> f64 {
    let mut w = 1.0;
    for d in 0..x.len() {
        w *= normal_density(omega[d], p.lambda2) * (-2.0 * PI * PI * p.sigma1_diag[d] * x[d] * x[d]).exp();
    }
    w
}

/// Sum over components and frequency pairs of recentred, rescaled LSG
/// Wigner terms modulated by `Re(b_ij e^{2iπ(μ_i−μ_j)·x})`.
pub fn wdf_hmk(x: &[f64], omega: &[f64], p: &HmkParams) -> f64 {
    p.views().iter().map(|v| if p.real_valued { v.wdf_real(x, omega) } else { v.wdf(x, omega) }).sum()
}

/// `½Σ α_q (N(ξ|ω_q,Σ_q) + N(ξ|−ω_q,Σ_q))`
pub fn sd_sm(xi: &[f64], p: &SmParams) -> f64 {
    let mut s = 0.0;
    for q in 0..p.num_components() {
        let mut plus = 1.0;
        let mut minus = 1.0;
        for d in 0..xi.len() {
            plus *= normal_density(xi[d] - p.means[q][d], p.variances[q][d]);
            minus *= normal_density(xi[d] + p.means[q][d], p.variances[q][d]);
        }
        s += 0.5 * p.weights[q] * (plus + minus);
    }
    s
}

/// Spectral density of the squared exponential `σ² exp(−|τ|²/(2ℓ²))`.
pub fn sd_se(xi: &[f64], variance: f64, lengthscale: f64) -> f64 {
    let var = 1.0 / (4.0 * PI * PI * lengthscale * lengthscale);
    variance * xi.iter().map(|&w| normal_density(w, var)).product::<f64>()
}

/// Write a `(a, b, re, im)` grid as CSV, row-major over `(a, b)`.
pub fn write_grid_csv<P: AsRef<Path>>(
    path: P,
    header: [&str; 4],
    a: &[f64],
    b: &[f64],
    mut value: impl FnMut(f64, f64) -> Result<Complex64, SpectralError>,
) -> Result<(), SpectralError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for &u in a {
        for &v in b {
            let z = value(u, v)?;
            writeln!(w, "{u},{v},{},{}", z.re, z.im)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{random_hmk, HmkComponent};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lsg_gsd_at_origin() {
        let p = LsgParams { sigma1_diag: vec![1.0], lambda2: 1.0 };
        assert!((gsd_lsg(&[0.0], &[0.0], &p).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((gsd_lsg(&[0.0], &[0.0], &p).unwrap() - 0.159155).abs() < 1e-6);
    }

    #[test]
    fn lsg_gsd_symmetric_and_requires_integrability() {
        let p = LsgParams { sigma1_diag: vec![0.7], lambda2: 0.3 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let w = rng.random_range(-3.0..3.0);
            let x = rng.random_range(-3.0..3.0);
            assert_eq!(gsd_lsg(&[w], &[x], &p).unwrap(), gsd_lsg(&[x], &[w], &p).unwrap());
        }
        let q = LsgParams { sigma1_diag: vec![0.0], lambda2: 0.3 };
        assert!(matches!(gsd_lsg(&[0.0], &[0.0], &q), Err(SpectralError::Kernel(KernelError::NotIntegrable))));
    }

    fn lsg_hmk(s1: f64, lam2: f64, center: f64) -> HmkParams {
        HmkParams {
            components: vec![HmkComponent::single(
                vec![center],
                vec![1.0],
                vec![0.0],
                1.0,
                LsgParams { sigma1_diag: vec![s1], lambda2: lam2 },
            )],
            real_valued: false,
        }
    }

    #[test]
    fn degenerate_hmk_gsd_is_lsg() {
        let h = lsg_hmk(0.6, 0.4, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let w = [rng.random_range(-2.0..2.0)];
            let x = [rng.random_range(-2.0..2.0)];
            let a = gsd_hmk(&w, &x, &h).unwrap();
            let b = gsd_lsg(&w, &x, &h.components[0].lsg).unwrap();
            assert!((a.re - b).abs() < 1e-14 * (1.0 + b) && a.im.abs() < 1e-15);
        }
    }

    #[test]
    fn center_shift_is_a_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = random_hmk(&mut rng, 1, &[2], false);
        p.components[0].center = vec![0.0];
        let mut shifted = p.clone();
        let c = 0.37;
        shifted.components[0].center = vec![c];
        for _ in 0..50 {
            let w = rng.random_range(-2.0..2.0);
            let x = rng.random_range(-2.0..2.0);
            let a = gsd_hmk(&[w], &[x], &shifted).unwrap();
            let b = gsd_hmk(&[w], &[x], &p).unwrap() * Complex64::from_polar(1.0, -2.0 * PI * c * (w - x));
            assert!((a - b).norm() < 1e-14 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn hmk_gsd_conjugate_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for real in [false, true] {
            let p = random_hmk(&mut rng, 2, &[2, 3], real);
            for _ in 0..50 {
                let w = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
                let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
                let a = gsd_hmk(&w, &x, &p).unwrap();
                let b = gsd_hmk(&x, &w, &p).unwrap().conj();
                assert!((a - b).norm() < 1e-12 * (1.0 + a.norm()));
            }
        }
    }

    #[test]
    fn real_kernel_frequency_reflection() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_hmk(&mut rng, 1, &[2, 2], true);
        for _ in 0..100 {
            let w = rng.random_range(-2.0..2.0);
            let x = rng.random_range(-2.0..2.0);
            let t = rng.random_range(-1.0..1.0);
            let a = gsd_hmk(&[w], &[x], &p).unwrap();
            let b = gsd_hmk(&[-w], &[-x], &p).unwrap();
            // a real kernel has S(−ω,−ξ) = conj S(ω,ξ)
            assert!((a - b.conj()).norm() < 1e-12 * (1.0 + a.norm()));
            assert!((wdf_hmk(&[t], &[w], &p) - wdf_hmk(&[t], &[-w], &p)).abs() < 1e-12);
        }
    }

    #[test]
    fn lsg_wdf_values() {
        let p = LsgParams { sigma1_diag: vec![0.5], lambda2: 1.0 };
        assert!((wdf_lsg(&[0.0], &[0.0], &p) - 0.398942).abs() < 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let x = rng.random_range(-1.0..1.0);
            let w1 = rng.random_range(-2.0..2.0);
            let w2 = rng.random_range(-2.0..2.0);
            let r1 = wdf_lsg(&[x], &[w1], &p) / wdf_lsg(&[0.0], &[w1], &p);
            let r2 = wdf_lsg(&[x], &[w2], &p) / wdf_lsg(&[0.0], &[w2], &p);
            assert!((r1 - r2).abs() < 1e-14);
        }
    }

    #[test]
    fn single_frequency_wdf_is_recentred_lsg() {
        let lsg = LsgParams { sigma1_diag: vec![0.4], lambda2: 0.2 };
        let p = HmkParams { components: vec![HmkComponent::single(vec![0.0], vec![1.0], vec![0.8], 1.0, lsg.clone())], real_valued: false };
        for &(x, w) in &[(0.0, 0.8), (0.3, 1.1), (-0.5, -0.2)] {
            assert!((wdf_hmk(&[x], &[w], &p) - wdf_lsg(&[x], &[w - 0.8], &lsg)).abs() < 1e-15);
        }
    }

    #[test]
    fn sm_sd_properties() {
        let p = SmParams { weights: vec![1.0], means: vec![vec![0.0]], variances: vec![vec![0.3]] };
        assert!((sd_sm(&[0.0], &p) - normal_density(0.0, 0.3)).abs() < 1e-15);
        let q = SmParams { weights: vec![0.7, 1.3], means: vec![vec![0.5], vec![-1.5]], variances: vec![vec![0.1], vec![0.2]] };
        for &x in &[0.1, 0.9, 2.0] {
            assert_eq!(sd_sm(&[x], &q), sd_sm(&[-x], &q));
        }
        // normalization over ±8σ around the outermost means
        let xs = linspace(-1.5 - 8.0 * 0.2f64.sqrt(), 1.5 + 8.0 * 0.2f64.sqrt(), 4001);
        let h = xs[1] - xs[0];
        let total: f64 = xs.iter().map(|&x| sd_sm(&[x], &q)).sum::<f64>() * h;
        assert!((total - 2.0).abs() < 1e-4);
    }

    #[test]
    fn grid_nodes_order() {
        let g = FrequencyGrid::new(vec![0.0, 10.0], vec![1.0, 11.0], vec![2, 3]).unwrap();
        let n = g.nodes();
        assert_eq!(n.len(), 6);
        assert_eq!(n[0], vec![0.0, 10.0]);
        assert_eq!(n[1], vec![0.0, 10.5]);
        assert_eq!(n[5], vec![1.0, 11.0]);
        assert!(FrequencyGrid::uniform_1d(1.0, 1.0, 5).is_err());
        assert!(FrequencyGrid::uniform_1d(0.0, 1.0, 1).is_err());
    }
}
