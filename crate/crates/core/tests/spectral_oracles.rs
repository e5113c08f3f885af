use std::f64::consts::PI;

use hmk_core::kernels::{random_hmk, ComponentView, HmkParams};
use hmk_core::spectral::quadrature::{double_transform, fourier_1d};
use hmk_core::spectral::{gsd_hmk, gsd_oracle_grid, linspace, wdf_hmk, wigner_oracle, QuadConfig};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Input window wide enough that every component envelope is below 1e-7.
fn input_window(p: &HmkParams) -> f64 {
    p.components
        .iter()
        .map(|c| {
            let a = 2.0 * PI * PI * c.lsg.sigma1_diag[0] * c.gamma[0] * c.gamma[0];
            c.center[0].abs() + 2.0 * (16.2 / a).sqrt()
        })
        .fold(0.0, f64::max)
}

fn kernel_fn(p: &HmkParams) -> impl Fn(f64, f64) -> Complex64 + '_ {
    let views = p.views();
    move |a, b| {
        let mut k: Complex64 = views.iter().map(|v| v.kernel(&[a], &[b]).to_f64()).sum();
        if p.real_valued {
            k.im = 0.0;
        }
        k
    }
}

#[test]
fn hmk_gsd_matches_double_fourier_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for real in [false, true] {
        let p = random_hmk(&mut rng, 1, &[2, 2], real);
        let cfg = QuadConfig::symmetric(input_window(&p), 400);
        let ws = linspace(-2.5, 2.5, 10);
        let oracle = gsd_oracle_grid(kernel_fn(&p), &ws, &ws, &cfg).unwrap();
        let exact: Vec<Vec<Complex64>> = ws.iter().map(|&w| ws.iter().map(|&x| gsd_hmk(&[w], &[x], &p).unwrap()).collect()).collect();
        let peak = exact.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
        for a in 0..ws.len() {
            for b in 0..ws.len() {
                let e = exact[a][b];
                if e.norm() > 0.01 * peak {
                    let rel = (oracle[a][b] - e).norm() / e.norm();
                    assert!(rel < 2e-3, "real={real} ({}, {}) rel {rel}", ws[a], ws[b]);
                }
            }
        }
    }
}

#[test]
fn hmk_wdf_matches_wigner_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for real in [false, true] {
        let p = random_hmk(&mut rng, 1, &[2, 2], real);
        let k = kernel_fn(&p);
        let lag = QuadConfig::symmetric(2.0 * input_window(&p), 600);
        let xs = linspace(-1.5, 1.5, 20);
        let ws = linspace(-2.5, 2.5, 20);
        let mut worst: f64 = 0.0;
        let mut peak: f64 = 0.0;
        for &x in &xs {
            for &w in &ws {
                let o = wigner_oracle(&k, x, w, &lag).unwrap();
                let e = wdf_hmk(&[x], &[w], &p);
                assert!(o.im.abs() < 1e-8, "imaginary WDF residual {}", o.im);
                worst = worst.max((o.re - e).abs());
                peak = peak.max(e.abs());
            }
        }
        assert!(worst < 1e-3 * peak.max(1.0), "real={real} worst {worst}");
    }
}

#[test]
fn fourier_cross_covariance_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let p = random_hmk(&mut rng, 1, &[3], false);
    let mut c = p.components[0].clone();
    let v = ComponentView::from_component(&c);
    c.center = vec![0.0];
    let v0 = ComponentView::from_component(&c);
    let cfg = QuadConfig::symmetric(input_window(&p) + 2.0, 600);
    for i in 0..20 {
        let x = -1.2 + 0.12 * i as f64;
        let w = 2.0 - 0.19 * i as f64;
        // the cross term of the centred kernel at the shifted input
        let xs = x - p.components[0].center[0];
        let oracle = fourier_1d(|t| v0.kernel(&[t], &[xs]).to_f64(), w, &cfg).unwrap();
        let exact = v.cross(&[w], &[x]).to_f64();
        assert!((oracle - exact).norm() < 1e-3 * exact.norm().max(1e-3), "{x} {w}");
        let oracle_r = fourier_1d(|t| Complex64::new(v0.kernel(&[t], &[xs]).re, 0.0), w, &cfg).unwrap();
        let exact_r = v.cross_real(&[w], &[x]).to_f64();
        assert!((oracle_r - exact_r).norm() < 1e-3 * exact_r.norm().max(1e-3));
        // cov(f(x), f̂(ω)) = ∫ k(x,t) e^{2iπωt} dt is the conjugate of cov(f̂(ω), f(x))
        let fwd = fourier_1d(|t| v0.kernel(&[xs], &[t]).to_f64().conj(), w, &cfg).unwrap().conj();
        assert!((fwd - exact.conj()).norm() < 1e-3 * exact.norm().max(1e-3));
    }
}

#[test]
fn wigner_marginal_recovers_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let p = random_hmk(&mut rng, 1, &[2, 3], true);
    let freq = QuadConfig::symmetric(8.0, 2000);
    for i in 0..20 {
        let x = -1.0 + 0.1 * i as f64;
        let integral: f64 = freq.points().iter().zip(freq.weights()).map(|(&w, h)| wdf_hmk(&[x], &[w], &p) * h).sum();
        let kxx = p.eval(&[x], &[x]).re;
        assert!((integral - kxx).abs() < 1e-3, "{integral} vs {kxx}");
    }
}

#[test]
fn inverse_gsd_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let p = random_hmk(&mut rng, 1, &[2], false);
    let freq = QuadConfig::symmetric(6.0, 300);
    let xs = [-0.7, -0.1, 0.3, 0.8, 1.1];
    let s = |w: f64, x: f64| gsd_hmk(&[w], &[x], &p).unwrap();
    let back = double_transform(s, &xs, &xs, 1.0, &freq).unwrap();
    for (a, &x) in xs.iter().enumerate() {
        for (b, &y) in xs.iter().enumerate() {
            let k = p.eval(&[x], &[y]);
            assert!((back[a][b] - k).norm() < 2e-3 * k.norm().max(0.05), "{x} {y}");
        }
    }
}
