//! Brute-force trapezoid oracles for one-dimensional inputs.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{linspace, SpectralError};

/// Boundary integrand magnitude allowed relative to the peak.
const WINDOW_TOL: f64 = 1e-6;

/// Uniform trapezoid rule on `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadConfig {
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
}

impl QuadConfig {
    pub fn symmetric(half_width: f64, nodes: usize) -> Self {
        QuadConfig { lo: -half_width, hi: half_width, nodes }
    }

    pub fn points(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.nodes)
    }

    pub fn weights(&self) -> Vec<f64> {
        let h = (self.hi - self.lo) / (self.nodes - 1) as f64;
        let mut w = vec![h; self.nodes];
        w[0] *= 0.5;
        w[self.nodes - 1] *= 0.5;
        w
    }
}

fn check_window(boundary: f64, peak: f64) -> Result<(), SpectralError> {
    if boundary > WINDOW_TOL * peak {
        Err(SpectralError::WindowTooSmall { boundary, peak })
    } else {
        Ok(())
    }
}

/// `∫ f(t) e^{−2iπωt} dt`
pub fn fourier_1d(f: impl Fn(f64) -> Complex64, omega: f64, cfg: &QuadConfig) -> Result<Complex64, SpectralError> {
    let ts = cfg.points();
    let ws = cfg.weights();
    let vals: Vec<Complex64> = ts.iter().map(|&t| f(t)).collect();
    let peak = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
    check_window(vals[0].norm().max(vals[vals.len() - 1].norm()), peak)?;
    Ok(ts.iter().zip(&ws).zip(&vals).map(|((&t, &w), &v)| v * Complex64::from_polar(w, -2.0 * PI * omega * t)).sum())
}

/// `W(x,ω) = ∫ k(x+τ/2, x−τ/2) e^{−2iπωτ} dτ` over the lag window `cfg`.
pub fn wigner_oracle(kernel: impl Fn(f64, f64) -> Complex64, x: f64, omega: f64, cfg: &QuadConfig) -> Result<Complex64, SpectralError> {
    fourier_1d(|t| kernel(x + 0.5 * t, x - 0.5 * t), omega, cfg)
}

/// `∬ k(x,x') e^{−2iπ(ωx − ξx')} dx dx'` for a single pair.
pub fn gsd_oracle(kernel: impl Fn(f64, f64) -> Complex64, omega: f64, xi: f64, cfg: &QuadConfig) -> Result<Complex64, SpectralError> {
    Ok(gsd_oracle_grid(kernel, &[omega], &[xi], cfg)?[0][0])
}

/// [`gsd_oracle`] over every `(omegas[a], xis[b])`, reusing one kernel
/// tabulation. Result is indexed `[a][b]`.
pub fn gsd_oracle_grid(
    kernel: impl Fn(f64, f64) -> Complex64,
    omegas: &[f64],
    xis: &[f64],
    cfg: &QuadConfig,
) -> Result<Vec<Vec<Complex64>>, SpectralError> {
    double_transform(kernel, omegas, xis, -1.0, cfg)
}

/// `Σ_ij w_i w_j f(t_i, t_j) e^{2iπ·sign·(a t_i − b t_j)}` for every `(a, b)`.
/// With `sign = +1` this inverts a generalized spectral density back to a
/// kernel value.
pub fn double_transform(
    f: impl Fn(f64, f64) -> Complex64,
    a_vals: &[f64],
    b_vals: &[f64],
    sign: f64,
    cfg: &QuadConfig,
) -> Result<Vec<Vec<Complex64>>, SpectralError> {
    let ts = cfg.points();
    let ws = cfg.weights();
    let n = ts.len();
    let mut table = vec![Complex64::new(0.0, 0.0); n * n];
    let mut peak: f64 = 0.0;
    let mut boundary: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = f(ts[i], ts[j]);
            let m = v.norm();
            peak = peak.max(m);
            if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
                boundary = boundary.max(m);
            }
            table[i * n + j] = v;
        }
    }
    check_window(boundary, peak)?;
    let mut out = vec![vec![Complex64::new(0.0, 0.0); b_vals.len()]; a_vals.len()];
    let mut inner = vec![Complex64::new(0.0, 0.0); n];
    for (bi, &b) in b_vals.iter().enumerate() {
        let right: Vec<Complex64> = ts.iter().zip(&ws).map(|(&t, &w)| Complex64::from_polar(w, -sign * 2.0 * PI * b * t)).collect();
        for i in 0..n {
            let row = &table[i * n..(i + 1) * n];
            inner[i] = row.iter().zip(&right).map(|(x, y)| x * y).sum();
        }
        for (ai, &a) in a_vals.iter().enumerate() {
            out[ai][bi] = ts.iter().zip(&ws).zip(&inner).map(|((&t, &w), &v)| v * Complex64::from_polar(w, sign * 2.0 * PI * a * t)).sum();
        }
    }
    Ok(out)
}
