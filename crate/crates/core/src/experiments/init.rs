//! Initial parameters for training runs.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::inference::InducingFrequencies;
use crate::kernels::{HmkComponent, HmkParams, LsgParams, SmParams};

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm from a k-means++ seeding.
pub fn kmeans<R: Rng + ?Sized>(rng: &mut R, points: &[Vec<f64>], k: usize, iters: usize) -> Vec<Vec<f64>> {
    assert!(k >= 1 && !points.is_empty());
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    while centers.len() < k {
        let d2: Vec<f64> = points.iter().map(|p| centers.iter().map(|c| sq_dist(p, c)).fold(f64::INFINITY, f64::min)).collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random_range(0.0..total);
            let mut pick = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            rng.random_range(0..points.len())
        };
        centers.push(points[next].clone());
    }
    let d = points[0].len();
    for _ in 0..iters {
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for p in points {
            let j = (0..k).min_by(|&a, &b| sq_dist(p, &centers[a]).total_cmp(&sq_dist(p, &centers[b]))).unwrap();
            counts[j] += 1;
            for t in 0..d {
                sums[j][t] += p[t];
            }
        }
        let mut moved = false;
        for j in 0..k {
            if counts[j] > 0 {
                let c: Vec<f64> = sums[j].iter().map(|s| s / counts[j] as f64).collect();
                moved |= c != centers[j];
                centers[j] = c;
            }
        }
        if !moved {
            break;
        }
    }
    centers
}

/// `|Σ_n y_n e^{−2iπωx_n}|² / n` on `points` frequencies in `(0, fmax]`, for
/// scattered one-dimensional inputs.
pub fn periodogram(x: &[f64], y: &[f64], fmax: f64, points: usize) -> Vec<(f64, f64)> {
    (1..=points)
        .map(|k| {
            let w = fmax * k as f64 / points as f64;
            let s: Complex64 = x.iter().zip(y).map(|(&t, &v)| Complex64::from_polar(v, -2.0 * PI * w * t)).sum();
            (w, s.norm_sqr() / x.len() as f64)
        })
        .collect()
}

/// Frequencies of the `count` highest local maxima of the periodogram.
pub fn dominant_frequencies(x: &[f64], y: &[f64], fmax: f64, points: usize, count: usize) -> Vec<f64> {
    let p = periodogram(x, y, fmax, points);
    let mut peaks: Vec<(f64, f64)> =
        (0..p.len()).filter(|&i| (i == 0 || p[i].1 >= p[i - 1].1) && (i + 1 == p.len() || p[i].1 >= p[i + 1].1)).map(|i| p[i]).collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));
    peaks.into_iter().take(count).map(|(w, _)| w).collect()
}

/// Amplitude Cholesky factor with diagonal near `amp` and small random
/// off-diagonal entries.
fn amplitude<R: Rng + ?Sized>(rng: &mut R, q: usize, amp: f64) -> Vec<Vec<Complex64>> {
    (0..q)
        .map(|i| {
            (0..q)
                .map(|j| {
                    if i == j {
                        Complex64::new(amp * rng.random_range(0.8..1.2), 0.0)
                    } else if i > j {
                        Complex64::new(0.05 * amp * normal(rng), 0.05 * amp * normal(rng))
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect()
        })
        .collect()
}

/// Settings shared by the data-driven HMK initialisers, in standardized
/// input units.
#[derive(Clone, Copy, Debug)]
pub struct HmkInit {
    /// Correlation length of the stationary part.
    pub lengthscale: f64,
    /// Width of each component's envelope.
    pub envelope: f64,
    /// Total prior variance shared across components.
    pub variance: f64,
}

fn component<R: Rng + ?Sized>(rng: &mut R, center: Vec<f64>, mu: Vec<Vec<f64>>, init: &HmkInit, amp: f64) -> HmkComponent {
    let d = center.len();
    // γ = 1: Bc = 2π²λ² = 1/(2ℓ²) and A = 2π²σ₁² = 1/w²
    let lambda2 = 1.0 / (4.0 * PI * PI * init.lengthscale * init.lengthscale);
    let s1 = (1.0 / (2.0 * PI * PI * init.envelope * init.envelope)).min(3.6 * lambda2);
    let q = mu.len();
    HmkComponent { center, gamma: vec![1.0; d], mu, b_chol: amplitude(rng, q, amp), lsg: LsgParams { sigma1_diag: vec![s1; d], lambda2 } }
}

/// Centers from k-means on the inputs, frequencies near zero with Gaussian
/// noise of scale `freq_noise`.
pub fn hmk_from_inputs<R: Rng + ?Sized>(rng: &mut R, xs: &[Vec<f64>], p: usize, q: usize, freq_noise: f64, init: &HmkInit) -> HmkParams {
    let centers = kmeans(rng, xs, p, 50);
    let amp = (init.variance / (p * q) as f64).sqrt();
    let components = centers
        .into_iter()
        .map(|c| {
            let d = c.len();
            let mu = (0..q).map(|_| (0..d).map(|_| freq_noise * normal(rng)).collect()).collect();
            component(rng, c, mu, init, amp)
        })
        .collect();
    HmkParams { components, real_valued: true }
}

/// Seed frequencies for regression: zero for the slowly varying part, then
/// the `count − 1` strongest periodogram peaks of `residual`.
pub fn seed_frequencies(x: &[f64], residual: &[f64], fmax: f64, count: usize) -> Vec<f64> {
    let mut f = vec![0.0];
    if count > 1 {
        f.extend(dominant_frequencies(x, residual, fmax, 2000, count - 1));
    }
    f
}

/// One-dimensional regression initialiser: centers from k-means, frequency
/// means cycling through `seeds` plus Gaussian noise of scale `spread`.
pub fn hmk_from_spectrum<R: Rng + ?Sized>(
    rng: &mut R,
    x: &[f64],
    seeds: &[f64],
    p: usize,
    q: usize,
    spread: f64,
    init: &HmkInit,
) -> HmkParams {
    let rows: Vec<Vec<f64>> = x.iter().map(|&v| vec![v]).collect();
    let centers = kmeans(rng, &rows, p, 50);
    let amp = (init.variance / (p * q) as f64).sqrt();
    let components = centers
        .into_iter()
        .map(|c| {
            let mu = (0..q).map(|i| vec![seeds[i % seeds.len()] + spread * normal(rng)]).collect();
            component(rng, c, mu, init, amp)
        })
        .collect();
    HmkParams { components, real_valued: true }
}

/// Spectral mixture with one component per seed frequency (cycling).
pub fn sm_from_spectrum<R: Rng + ?Sized>(rng: &mut R, seeds: &[f64], q: usize, spread: f64, variance: f64, lengthscale: f64) -> SmParams {
    let v = 1.0 / (4.0 * PI * PI * lengthscale * lengthscale);
    SmParams {
        weights: vec![variance / q as f64; q],
        means: (0..q).map(|i| vec![seeds[i % seeds.len()] + spread * normal(rng)]).collect(),
        variances: vec![vec![v]; q],
    }
}

/// `m` frequencies per component, scattered around the component's
/// frequency means with the spread of its spectral envelope and reflected
/// into the half-space with a positive first coordinate (`±ω` carry the
/// same information for a real process).
pub fn inducing_frequencies<R: Rng + ?Sized>(rng: &mut R, kernel: &HmkParams, m: usize) -> InducingFrequencies {
    let freqs = kernel
        .components
        .iter()
        .map(|c| {
            let spread: Vec<f64> = (0..c.dim()).map(|d| c.gamma[d] * (c.lsg.lambda2 + 0.25 * c.lsg.sigma1_diag[d]).sqrt()).collect();
            (0..m)
                .map(|j| {
                    let mu = &c.mu[j % c.num_freqs()];
                    let mut w: Vec<f64> = (0..c.dim()).map(|d| mu[d].abs() + spread[d] * normal(rng)).collect();
                    if w[0] < 0.0 {
                        w.iter_mut().for_each(|v| *v = -*v);
                    }
                    w
                })
                .collect()
        })
        .collect();
    InducingFrequencies::new(freqs).expect("frequencies are finite with a common dimension")
}
