//! Harmonizable mixture kernel.
//!
//! Component `p` is `k_p(x, x') = k_LSG(x∘γ, x'∘γ) Σ_ij b_ij e^{2iπ(μ_i·x − μ_j·x')}`
//! with `B = L L^†`, and the mixture is `Σ_p k_p(x − x_p, x' − x_p)`. In
//! real-valued mode the kernel is `Re k`.
//!
//! Every closed form (kernel, generalized spectral density, Fourier
//! cross-covariance, Wigner distribution) is written once on
//! [`ComponentView`], generic over [`Real`], so the same code serves plain
//! evaluation and reverse-mode differentiation.

use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::lsg::LsgParams;
use super::KernelError;
use crate::autodiff::{softplus_inv, Cx, Real};
use crate::linalg::HermitianMatrix;

/// Bound on the packed logit of `Σ₁_d / (4λ²)`.
const MAX_LOGIT: f64 = 30.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HmkComponent {
    pub center: Vec<f64>,
    pub gamma: Vec<f64>,
    /// `Q × D` frequencies in cycles/input.
    pub mu: Vec<Vec<f64>>,
    /// Lower-triangular `Q × Q` factor of the amplitude matrix.
    pub b_chol: Vec<Vec<Complex64>>,
    pub lsg: LsgParams,
}

impl HmkComponent {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_freqs(&self) -> usize {
        self.mu.len()
    }

    /// `B = L L^†`
    pub fn amplitude(&self) -> DMatrix<Complex64> {
        let q = self.num_freqs();
        let l = DMatrix::from_fn(q, q, |i, j| if j <= i { self.b_chol[i][j] } else { Complex64::new(0.0, 0.0) });
        &l * l.adjoint()
    }

    /// Simple single-frequency component: LSG envelope times one sinusoid.
    pub fn single(center: Vec<f64>, gamma: Vec<f64>, mu: Vec<f64>, amplitude: f64, lsg: LsgParams) -> Self {
        HmkComponent { center, gamma, mu: vec![mu], b_chol: vec![vec![Complex64::new(amplitude.sqrt(), 0.0)]], lsg }
    }

    fn validate(&self, d: usize) -> Result<(), KernelError> {
        let bad = |m: &str| Err(KernelError::InvalidParams(m.to_string()));
        let q = self.num_freqs();
        if q == 0 {
            return bad("component needs at least one frequency");
        }
        if self.center.len() != d || self.gamma.len() != d || self.lsg.dim() != d {
            return bad("inconsistent input dimension in component");
        }
        if self.mu.iter().any(|m| m.len() != d) {
            return bad("frequency dimension mismatch");
        }
        if self.gamma.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
            return bad("gamma must be positive and finite");
        }
        if self.lsg.sigma1_diag.iter().any(|&s| s > 4.0 * self.lsg.lambda2) {
            return bad("centroid precision exceeds 4*lambda2; kernel would not be positive definite");
        }
        if self.b_chol.len() != q || self.b_chol.iter().any(|r| r.len() != q) {
            return bad("amplitude factor must be Q x Q");
        }
        let finite = self.center.iter().chain(self.mu.iter().flatten()).all(|v| v.is_finite())
            && self.b_chol.iter().flatten().all(|c| c.re.is_finite() && c.im.is_finite());
        if !finite {
            return bad("non-finite component parameter");
        }
        self.lsg.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HmkParams {
    pub components: Vec<HmkComponent>,
    pub real_valued: bool,
}

impl HmkParams {
    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, HmkComponent::dim)
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        if self.components.is_empty() {
            return Err(KernelError::InvalidParams("HMK needs at least one component".into()));
        }
        let d = self.dim();
        if d == 0 {
            return Err(KernelError::InvalidParams("input dimension must be positive".into()));
        }
        self.components.iter().try_for_each(|c| c.validate(d))
    }

    pub fn is_integrable(&self) -> bool {
        self.components.iter().all(|c| c.lsg.is_integrable())
    }

    pub fn views(&self) -> Vec<ComponentView<f64>> {
        self.components.iter().map(ComponentView::from_component).collect()
    }

    /// Kernel value; in real-valued mode the imaginary part is exactly zero.
    pub fn eval(&self, x: &[f64], x2: &[f64]) -> Complex64 {
        eval_views(&self.views(), self.real_valued, x, x2)
    }

    /// Gram matrix over `xs`.
    pub fn gram(&self, xs: &[Vec<f64>]) -> HermitianMatrix<Complex64> {
        let views = self.views();
        HermitianMatrix::from_lower_fn(xs.len(), |i, j| eval_views(&views, self.real_valued, &xs[i], &xs[j]))
    }

    /// Diagonal `k(x, x)` for every point; always real.
    pub fn diag(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        let views = self.views();
        xs.iter().map(|x| eval_views(&views, self.real_valued, x, x).re).collect()
    }
}

fn eval_views(views: &[ComponentView<f64>], real: bool, x: &[f64], x2: &[f64]) -> Complex64 {
    let mut k = Complex64::new(0.0, 0.0);
    for v in views {
        k += v.kernel(x, x2).to_f64();
    }
    if real {
        k.im = 0.0;
    }
    k
}

/// Kernel value as a free function.
pub fn eval_hmk(x: &[f64], x2: &[f64], p: &HmkParams) -> Complex64 {
    p.eval(x, x2)
}

/// Positions of each component's block inside the unconstrained parameter
/// vector. Per component, in order: center `[D]`, softplus⁻¹ γ `[D]`,
/// μ `[Q·D]` row-major, amplitude factor `[Q²]` (real diagonal, then the
/// strictly lower entries row-major as re/im pairs), logit of `Σ₁_d/(4λ²)`
/// `[D]`, softplus⁻¹ λ² `[1]`. The logit keeps every component inside the
/// positive definite region `Σ₁_d ≤ 4λ²`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HmkLayout {
    pub dim: usize,
    pub freqs: Vec<usize>,
}

impl HmkLayout {
    pub fn of(p: &HmkParams) -> Self {
        HmkLayout { dim: p.dim(), freqs: p.components.iter().map(HmkComponent::num_freqs).collect() }
    }

    pub fn component_len(&self, p: usize) -> usize {
        let (d, q) = (self.dim, self.freqs[p]);
        3 * d + q * d + q * q + 1
    }

    pub fn ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        (0..self.freqs.len())
            .map(|p| {
                let r = start..start + self.component_len(p);
                start = r.end;
                r
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        (0..self.freqs.len()).map(|p| self.component_len(p)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Pack into the unconstrained vector described by [`HmkLayout`]. Column
/// phases of the amplitude factor are rotated so its diagonal is real and
/// nonnegative; `L L^†` is unchanged.
pub fn pack(p: &HmkParams) -> Vec<f64> {
    let mut out = Vec::new();
    for c in &p.components {
        let q = c.num_freqs();
        out.extend_from_slice(&c.center);
        out.extend(c.gamma.iter().map(|&g| softplus_inv(g)));
        for m in &c.mu {
            out.extend_from_slice(m);
        }
        let phases: Vec<Complex64> = (0..q)
            .map(|j| {
                let d = c.b_chol[j][j];
                if d.norm() > 0.0 {
                    (d / d.norm()).conj()
                } else {
                    Complex64::new(1.0, 0.0)
                }
            })
            .collect();
        for j in 0..q {
            out.push((c.b_chol[j][j] * phases[j]).re);
        }
        for i in 0..q {
            for j in 0..i {
                let v = c.b_chol[i][j] * phases[j];
                out.push(v.re);
                out.push(v.im);
            }
        }
        let cap = 4.0 * c.lsg.lambda2;
        out.extend(c.lsg.sigma1_diag.iter().map(|&s| {
            let r = s / cap;
            (r / (1.0 - r)).ln().clamp(-MAX_LOGIT, MAX_LOGIT)
        }));
        out.push(softplus_inv(c.lsg.lambda2));
    }
    out
}

/// Inverse of [`pack`].
pub fn unpack(layout: &HmkLayout, raw: &[f64], real_valued: bool) -> HmkParams {
    let components = layout
        .ranges()
        .iter()
        .zip(&layout.freqs)
        .map(|(r, &q)| {
            let v = ComponentView::from_raw(&raw[r.clone()], layout.dim, q);
            let d = layout.dim;
            let s = &raw[r.clone()];
            let lo = 2 * d + q * d;
            let mut l = vec![vec![Complex64::new(0.0, 0.0); q]; q];
            for j in 0..q {
                l[j][j] = Complex64::new(s[lo + j], 0.0);
            }
            let mut k = lo + q;
            for i in 0..q {
                for j in 0..i {
                    l[i][j] = Complex64::new(s[k], s[k + 1]);
                    k += 2;
                }
            }
            HmkComponent {
                center: v.center,
                gamma: v.gamma,
                mu: v.mu,
                b_chol: l,
                lsg: LsgParams { sigma1_diag: v.sigma1, lambda2: v.lambda2 },
            }
        })
        .collect();
    HmkParams { components, real_valued }
}

/// Per-input factors of the cross-covariance: for frequency `ω` and
/// index `i`, the term is `exp(base − Σ_d π²ν_d²/cs_d + i Σ_d lin_d ν_d)·rows_i`
/// with `ν = ω − μ_i`.
#[derive(Clone, Debug)]
pub struct CrossPrelude<T> {
    pub base: T,
    pub lin: Vec<T>,
    pub cs: Vec<T>,
    pub rows: Vec<Cx<T>>,
}

/// One component with every quantity needed by the closed forms, over any
/// [`Real`]. Input points stay `f64`; frequencies are `T` so that inducing
/// frequencies can be differentiated.
#[derive(Clone, Debug)]
pub struct ComponentView<T> {
    pub center: Vec<T>,
    pub gamma: Vec<T>,
    pub mu: Vec<Vec<T>>,
    /// Full amplitude matrix `B`.
    pub b: Vec<Vec<Cx<T>>>,
    pub sigma1: Vec<T>,
    pub lambda2: T,
    /// `2π² Σ₁_d γ_d²`
    a: Vec<T>,
    /// `2π² λ² γ_d²`
    bc: Vec<T>,
}

impl ComponentView<f64> {
    pub fn from_component(c: &HmkComponent) -> Self {
        let q = c.num_freqs();
        let l: Vec<Vec<Cx<f64>>> = (0..q)
            .map(|i| (0..q).map(|j| if j <= i { Cx::new(c.b_chol[i][j].re, c.b_chol[i][j].im) } else { Cx::zero() }).collect())
            .collect();
        Self::assemble(c.center.clone(), c.gamma.clone(), c.mu.clone(), &l, c.lsg.sigma1_diag.clone(), c.lsg.lambda2)
    }
}

impl<T: Real> ComponentView<T> {
    /// Build from one component's slice of the unconstrained vector.
    pub fn from_raw(raw: &[T], d: usize, q: usize) -> Self {
        let center = raw[0..d].to_vec();
        let gamma: Vec<T> = raw[d..2 * d].iter().map(|v| v.softplus()).collect();
        let mu: Vec<Vec<T>> = (0..q).map(|i| raw[2 * d + i * d..2 * d + (i + 1) * d].to_vec()).collect();
        let lo = 2 * d + q * d;
        let mut l = vec![vec![Cx::zero(); q]; q];
        for j in 0..q {
            l[j][j] = Cx::real(raw[lo + j]);
        }
        let mut k = lo + q;
        for i in 0..q {
            for j in 0..i {
                l[i][j] = Cx::new(raw[k], raw[k + 1]);
                k += 2;
            }
        }
        let s0 = lo + q * q;
        let lambda2 = raw[s0 + d].softplus();
        let cap = lambda2 * 4.0;
        let sigma1: Vec<T> = raw[s0..s0 + d].iter().map(|&v| cap / ((-v).exp() + 1.0)).collect();
        Self::assemble(center, gamma, mu, &l, sigma1, lambda2)
    }

    fn assemble(center: Vec<T>, gamma: Vec<T>, mu: Vec<Vec<T>>, l: &[Vec<Cx<T>>], sigma1: Vec<T>, lambda2: T) -> Self {
        let q = l.len();
        let mut b = vec![vec![Cx::zero(); q]; q];
        for i in 0..q {
            for j in 0..=i {
                let mut s = Cx::zero();
                for k in 0..=j {
                    s = s.add(l[i][k].mul(l[j][k].conj()));
                }
                b[i][j] = s;
                b[j][i] = s.conj();
            }
        }
        let two_pi2 = 2.0 * PI * PI;
        let a = (0..gamma.len()).map(|d| sigma1[d] * gamma[d] * gamma[d] * two_pi2).collect();
        let bc = gamma.iter().map(|&g| lambda2 * g * g * two_pi2).collect();
        ComponentView { center, gamma, mu, b, sigma1, lambda2, a, bc }
    }

    pub fn num_freqs(&self) -> usize {
        self.mu.len()
    }

    fn shifted(&self, x: &[f64]) -> Vec<T> {
        self.center.iter().zip(x).map(|(&c, &v)| -c + v).collect()
    }

    /// `Σ_d μ_id x_d` for each frequency.
    fn projections(&self, x: &[T]) -> Vec<T> {
        self.mu
            .iter()
            .map(|m| {
                let mut s = T::zero();
                for d in 0..x.len() {
                    s += m[d] * x[d];
                }
                s
            })
            .collect()
    }

    /// `k_p(x − x_p, x' − x_p)`, complex.
    pub fn kernel(&self, x: &[f64], x2: &[f64]) -> Cx<T> {
        let xs = self.shifted(x);
        let ys = self.shifted(x2);
        let mut expo = T::zero();
        for d in 0..xs.len() {
            let s = xs[d] + ys[d];
            let t = xs[d] - ys[d];
            expo += self.a[d] * s * s * 0.25 + self.bc[d] * t * t;
        }
        let env = (-expo).exp();
        let px = self.projections(&xs);
        let py = self.projections(&ys);
        let q = self.num_freqs();
        let right: Vec<Cx<T>> = py.iter().map(|&v| Cx::cis(v * (-2.0 * PI))).collect();
        let mut total = Cx::zero();
        for i in 0..q {
            let mut row = Cx::zero();
            for j in 0..q {
                row = row.add(self.b[i][j].mul(right[j]));
            }
            total = total.add(Cx::cis(px[i] * (2.0 * PI)).mul(row));
        }
        total.scale(env)
    }

    /// Generalized spectral density of the unshifted component.
    pub fn gsd(&self, w: &[T], xi: &[T]) -> Cx<T> {
        let q = self.num_freqs();
        let dd = w.len();
        let mut norm = T::zero();
        for d in 0..dd {
            // ln(1/γ²) − ½ln(2πΣ₁) − ½ln(2πλ²)
            norm += -(self.gamma[d].ln() * 2.0) - (self.sigma1[d] * (2.0 * PI)).ln() * 0.5 - (self.lambda2 * (2.0 * PI)).ln() * 0.5;
        }
        let mut total = Cx::zero();
        for i in 0..q {
            for j in 0..q {
                let mut e = norm;
                for d in 0..dd {
                    let a = w[d] - self.mu[i][d];
                    let b = xi[d] - self.mu[j][d];
                    let g2 = self.gamma[d] * self.gamma[d];
                    let diff = a - b;
                    let sum = a + b;
                    e -= diff * diff / (self.sigma1[d] * g2 * 2.0) + sum * sum / (self.lambda2 * g2 * 8.0);
                }
                total = total.add(self.b[i][j].scale(e.exp()));
            }
        }
        total
    }

    /// GSD of `Re k_p`: `(S(ω,ξ) + conj S(−ω,−ξ)) / 2`.
    pub fn gsd_real(&self, w: &[T], xi: &[T]) -> Cx<T> {
        let nw: Vec<T> = w.iter().map(|&v| -v).collect();
        let nxi: Vec<T> = xi.iter().map(|&v| -v).collect();
        self.gsd(w, xi).add(self.gsd(&nw, &nxi).conj()).scale(T::cst(0.5))
    }

    /// `∫ k_p(t, x) e^{−2iπ ω·t} dt` evaluated at `x − x_p`.
    pub fn cross(&self, w: &[T], x: &[f64]) -> Cx<T> {
        let xs = self.shifted(x);
        let q = self.num_freqs();
        let dd = xs.len();
        let mut base = T::zero();
        let mut cs = Vec::with_capacity(dd);
        let mut lin = Vec::with_capacity(dd);
        for d in 0..dd {
            let c = self.a[d] * 0.25 + self.bc[d];
            base += (c / PI).ln() * -0.5 - self.a[d] * self.bc[d] * xs[d] * xs[d] / c;
            lin.push((self.a[d] * 0.5 - self.bc[d] * 2.0) * xs[d] * PI / c);
            cs.push(c);
        }
        let py = self.projections(&xs);
        let right: Vec<Cx<T>> = py.iter().map(|&v| Cx::cis(v * (-2.0 * PI))).collect();
        let mut total = Cx::zero();
        for i in 0..q {
            let mut re = base;
            let mut im = T::zero();
            for d in 0..dd {
                let nu = w[d] - self.mu[i][d];
                re -= nu * nu * (PI * PI) / cs[d];
                im += lin[d] * nu;
            }
            let mut row = Cx::zero();
            for j in 0..q {
                row = row.add(self.b[i][j].mul(right[j]));
            }
            total = total.add(Cx::new(re, im).exp().mul(row));
        }
        total
    }

    /// Cross term for `Re k_p`: `(G(ω,x) + conj G(−ω,x)) / 2`.
    pub fn cross_real(&self, w: &[T], x: &[f64]) -> Cx<T> {
        let nw: Vec<T> = w.iter().map(|&v| -v).collect();
        self.cross(w, x).add(self.cross(&nw, x).conj()).scale(T::cst(0.5))
    }

    /// Quantities of the cross-covariance at `x` shared by all frequencies.
    pub fn cross_prelude(&self, x: &[f64]) -> CrossPrelude<T> {
        let xs = self.shifted(x);
        let q = self.num_freqs();
        let dd = xs.len();
        let mut base = T::zero();
        let mut cs = Vec::with_capacity(dd);
        let mut lin = Vec::with_capacity(dd);
        for d in 0..dd {
            let c = self.a[d] * 0.25 + self.bc[d];
            base += (c / PI).ln() * -0.5 - self.a[d] * self.bc[d] * xs[d] * xs[d] / c;
            lin.push((self.a[d] * 0.5 - self.bc[d] * 2.0) * xs[d] * PI / c);
            cs.push(c);
        }
        let py = self.projections(&xs);
        let right: Vec<Cx<T>> = py.iter().map(|&v| Cx::cis(v * (-2.0 * PI))).collect();
        let rows = (0..q)
            .map(|i| {
                let mut row = Cx::zero();
                for j in 0..q {
                    row = row.add(self.b[i][j].mul(right[j]));
                }
                row
            })
            .collect();
        CrossPrelude { base, lin, cs, rows }
    }

    /// [`Self::cross_real`] at every frequency in `ws`.
    pub fn cross_real_many(&self, ws: &[Vec<T>], x: &[f64]) -> Vec<Cx<T>> {
        let pre = self.cross_prelude(x);
        let dd = pre.cs.len();
        let half = |w: &[T], sign: f64| {
            let mut total = Cx::zero();
            for (i, row) in pre.rows.iter().enumerate() {
                let mut re = pre.base;
                let mut im = T::zero();
                for d in 0..dd {
                    let nu = w[d] * sign - self.mu[i][d];
                    re -= nu * nu * (PI * PI) / pre.cs[d];
                    im += pre.lin[d] * nu;
                }
                total = total.add(Cx::new(re, im).exp().mul(*row));
            }
            total
        };
        ws.iter().map(|w| half(w, 1.0).add(half(w, -1.0).conj()).scale(T::cst(0.5))).collect()
    }

    /// Wigner distribution of `k_p(· − x_p, · − x_p)`.
    pub fn wdf(&self, x: &[f64], w: &[T]) -> T {
        let xs = self.shifted(x);
        let q = self.num_freqs();
        let dd = xs.len();
        let mut base = T::zero();
        for d in 0..dd {
            base -= self.a[d] * xs[d] * xs[d] + self.gamma[d].ln() + (self.lambda2 * (2.0 * PI)).ln() * 0.5;
        }
        let px = self.projections(&xs);
        let mut total = T::zero();
        for i in 0..q {
            for j in 0..q {
                let mut e = base;
                for d in 0..dd {
                    let nu = (w[d] - (self.mu[i][d] + self.mu[j][d]) * 0.5) / self.gamma[d];
                    e -= nu * nu / (self.lambda2 * 2.0);
                }
                let phase = Cx::cis((px[i] - px[j]) * (2.0 * PI));
                total += self.b[i][j].mul(phase).re * e.exp();
            }
        }
        total
    }

    /// Wigner distribution of `Re k_p`: `(W(x,ω) + W(x,−ω)) / 2`.
    pub fn wdf_real(&self, x: &[f64], w: &[T]) -> T {
        let nw: Vec<T> = w.iter().map(|&v| -v).collect();
        (self.wdf(x, w) + self.wdf(x, &nw)) * 0.5
    }

    /// `e^{−2iπ x_p·(ω − ξ)}`
    pub fn shift_phase(&self, w: &[T], xi: &[T]) -> Cx<T> {
        let mut s = T::zero();
        for d in 0..w.len() {
            s += self.center[d] * (w[d] - xi[d]);
        }
        Cx::cis(s * (-2.0 * PI))
    }
}
