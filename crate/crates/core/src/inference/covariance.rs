//! Prior covariances between function values and inducing variables.
//!
//! Every model exposes real matrices: `K_uu` (`M × M`), `K_fu` (`n × M`) and
//! the diagonal `k(x, x)`. For the Fourier-feature model the complex
//! inducing variables `u_pj = f̂_p(ω_pj)` are stacked per component as
//! `[Re u_p1 … Re u_pm, Im u_p1 … Im u_pm]`, components in declaration order.
//! Gradients are obtained by seeding matrix-level adjoints onto a tape over
//! the assembly code ([`CovarianceModel::pullback`]).

use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::autodiff::{softplus, softplus_inv, Cx, Real, Tape, Var};
use crate::kernels::{pack, unpack, ComponentView, CrossPrelude, HmkLayout, HmkParams, KernelError, SmParams};

use super::InducingFrequencies;

/// Adjoints of a scalar objective with respect to the assembled covariances.
#[derive(Clone, Debug)]
pub struct CovAdjoints {
    pub kuu: DMatrix<f64>,
    pub kfu: DMatrix<f64>,
    pub kff: DVector<f64>,
}

pub trait CovarianceModel {
    /// Length `M` of the (stacked, real) inducing vector.
    fn num_inducing(&self) -> usize;
    /// Diagonal blocks of `K_uu`; entries outside them are exactly zero.
    fn blocks(&self) -> Vec<Range<usize>>;
    fn kuu(&self) -> DMatrix<f64>;
    fn kfu(&self, xs: &[Vec<f64>]) -> DMatrix<f64>;
    fn kff_diag(&self, xs: &[Vec<f64>]) -> DVector<f64>;
    /// Dense prior covariance of `f` at `xs`.
    fn kff(&self, xs: &[Vec<f64>]) -> DMatrix<f64>;
    /// Unconstrained trainable parameters.
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, raw: &[f64]);
    /// Gradient of the objective with respect to [`Self::params`].
    fn pullback(&self, xs: &[Vec<f64>], adj: &CovAdjoints) -> Vec<f64>;
}

/// Seeds for the lower triangle of a symmetric block whose entries were
/// assembled once each: `(i, j)` carries `K̄_ij + K̄_ji`.
fn sym_seed(bar: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    if i == j {
        bar[(i, i)]
    } else {
        bar[(i, j)] + bar[(j, i)]
    }
}

/// Real-valued HMK with variational Fourier features.
#[derive(Clone, Debug)]
pub struct VffModel {
    layout: HmkLayout,
    raw: Vec<f64>,
    inducing: InducingFrequencies,
    views: Vec<ComponentView<f64>>,
}

impl VffModel {
    pub fn new(kernel: &HmkParams, inducing: InducingFrequencies) -> Result<Self, KernelError> {
        kernel.validate()?;
        if !kernel.is_integrable() {
            return Err(KernelError::NotIntegrable);
        }
        if inducing.num_components() != kernel.components.len() || inducing.dim() != kernel.dim() {
            return Err(KernelError::InvalidParams("inducing frequencies do not match the kernel".into()));
        }
        let layout = HmkLayout::of(kernel);
        let raw = pack(kernel);
        let views = Self::build_views(&layout, &raw);
        Ok(VffModel { layout, raw, inducing, views })
    }

    fn build_views(layout: &HmkLayout, raw: &[f64]) -> Vec<ComponentView<f64>> {
        layout.ranges().into_iter().zip(&layout.freqs).map(|(r, &q)| ComponentView::from_raw(&raw[r], layout.dim, q)).collect()
    }

    pub fn kernel(&self) -> HmkParams {
        unpack(&self.layout, &self.raw, true)
    }

    pub fn inducing(&self) -> &InducingFrequencies {
        &self.inducing
    }

    pub fn layout(&self) -> &HmkLayout {
        &self.layout
    }

    pub fn num_kernel_params(&self) -> usize {
        self.raw.len()
    }

    fn offsets(&self) -> Vec<usize> {
        let mut o = vec![0];
        for p in 0..self.inducing.num_components() {
            o.push(o[p] + 2 * self.inducing.freqs[p].len());
        }
        o
    }
}

/// Reverse pass of [`ComponentView::cross_real_many`] at one input, given
/// adjoints `gbar` (as `∂/∂Re + i ∂/∂Im`) of each output. Returns the
/// prelude adjoints and accumulates those of the frequencies and means.
fn cross_real_adjoint(
    pre: &CrossPrelude<Var>,
    ws: &[Vec<f64>],
    mu: &[Vec<f64>],
    gbar: &[Complex64],
    w_bar: &mut [Vec<f64>],
    mu_bar: &mut [Vec<f64>],
) -> CrossPrelude<f64> {
    let dd = pre.cs.len();
    let base = pre.base.value();
    let lin: Vec<f64> = pre.lin.iter().map(|v| v.value()).collect();
    let cs: Vec<f64> = pre.cs.iter().map(|v| v.value()).collect();
    let rows: Vec<Complex64> = pre.rows.iter().map(|r| Complex64::new(r.re.value(), r.im.value())).collect();
    let pi2 = PI * PI;
    let mut out = CrossPrelude { base: 0.0, lin: vec![0.0; dd], cs: vec![0.0; dd], rows: vec![Cx::zero(); rows.len()] };
    let mut row_bar = vec![Complex64::new(0.0, 0.0); rows.len()];
    let mut nu = vec![0.0; dd];
    for (j, w) in ws.iter().enumerate() {
        if gbar[j] == Complex64::new(0.0, 0.0) {
            continue;
        }
        // g = (t⁺ + conj t⁻)/2
        for (sign, tbar) in [(1.0, 0.5 * gbar[j]), (-1.0, 0.5 * gbar[j].conj())] {
            for (i, row) in rows.iter().enumerate() {
                let (mut re, mut im) = (base, 0.0);
                for t in 0..dd {
                    nu[t] = sign * w[t] - mu[i][t];
                    re -= nu[t] * nu[t] * pi2 / cs[t];
                    im += lin[t] * nu[t];
                }
                let e = Complex64::new(re, im).exp();
                row_bar[i] += e.conj() * tbar;
                let pz = tbar.conj() * row * e;
                let (re_bar, im_bar) = (pz.re, -pz.im);
                out.base += re_bar;
                for t in 0..dd {
                    out.cs[t] += re_bar * nu[t] * nu[t] * pi2 / (cs[t] * cs[t]);
                    out.lin[t] += im_bar * nu[t];
                    let nu_bar = -2.0 * re_bar * nu[t] * pi2 / cs[t] + im_bar * lin[t];
                    w_bar[j][t] += sign * nu_bar;
                    mu_bar[i][t] -= nu_bar;
                }
            }
        }
    }
    out.rows = row_bar.iter().map(|z| Cx::new(z.re, z.im)).collect();
    out
}

/// Stacked `2m × 2m` covariance of one component, row-major. Mirrored
/// entries share one value so that seeding every position with its own
/// adjoint pulls back correctly.
fn vff_block<T: Real>(v: &ComponentView<T>, w: &[Vec<T>]) -> Vec<T> {
    let m = w.len();
    let n2 = 2 * m;
    let mut out = vec![T::zero(); n2 * n2];
    for i in 0..m {
        let neg_i: Vec<T> = w[i].iter().map(|&x| -x).collect();
        for j in 0..=i {
            let k = v.gsd_real(&w[i], &w[j]);
            // C(ω_i, ω_j) = S(ω_i, −ω_j) = conj S(−ω_i, ω_j)
            let c = v.gsd_real(&neg_i, &w[j]).conj();
            let aa = (k.re + c.re) * 0.5;
            let bb = (k.re - c.re) * 0.5;
            let ab = (c.im - k.im) * 0.5;
            let ba = (k.im + c.im) * 0.5;
            out[i * n2 + j] = aa;
            out[j * n2 + i] = aa;
            out[(m + i) * n2 + m + j] = bb;
            out[(m + j) * n2 + m + i] = bb;
            // E[a_i b_j] and E[b_i a_j]; transposes follow from symmetry
            out[i * n2 + m + j] = ab;
            out[(m + j) * n2 + i] = ab;
            out[(m + i) * n2 + j] = ba;
            out[j * n2 + m + i] = ba;
        }
    }
    out
}

impl CovarianceModel for VffModel {
    fn num_inducing(&self) -> usize {
        2 * self.inducing.total()
    }

    fn blocks(&self) -> Vec<Range<usize>> {
        let o = self.offsets();
        (0..o.len() - 1).map(|p| o[p]..o[p + 1]).collect()
    }

    fn kuu(&self) -> DMatrix<f64> {
        let mm = self.num_inducing();
        let mut k = DMatrix::zeros(mm, mm);
        for (p, r) in self.blocks().into_iter().enumerate() {
            let b = vff_block(&self.views[p], &self.inducing.freqs[p]);
            let n2 = r.len();
            for i in 0..n2 {
                for j in 0..n2 {
                    k[(r.start + i, r.start + j)] = b[i * n2 + j];
                }
            }
        }
        k
    }

    fn kfu(&self, xs: &[Vec<f64>]) -> DMatrix<f64> {
        let mut k = DMatrix::zeros(xs.len(), self.num_inducing());
        for (p, r) in self.blocks().into_iter().enumerate() {
            let w = &self.inducing.freqs[p];
            let m = w.len();
            for (n, x) in xs.iter().enumerate() {
                for (j, g) in self.views[p].cross_real_many(w, x).into_iter().enumerate() {
                    k[(n, r.start + j)] = g.re;
                    k[(n, r.start + m + j)] = g.im;
                }
            }
        }
        k
    }

    fn kff_diag(&self, xs: &[Vec<f64>]) -> DVector<f64> {
        DVector::from_iterator(xs.len(), xs.iter().map(|x| self.views.iter().map(|v| v.kernel(x, x).re).sum()))
    }

    fn kff(&self, xs: &[Vec<f64>]) -> DMatrix<f64> {
        let n = xs.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = self.views.iter().map(|v| v.kernel(&xs[i], &xs[j]).re).sum();
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    fn params(&self) -> Vec<f64> {
        let mut p = self.raw.clone();
        p.extend(self.inducing.flatten());
        p
    }

    fn set_params(&mut self, raw: &[f64]) {
        let nk = self.raw.len();
        self.raw.copy_from_slice(&raw[..nk]);
        self.inducing.assign_flat(&raw[nk..]);
        self.views = Self::build_views(&self.layout, &self.raw);
    }

    fn pullback(&self, xs: &[Vec<f64>], adj: &CovAdjoints) -> Vec<f64> {
        let nk = self.raw.len();
        let mut grad = vec![0.0; nk + self.inducing.total() * self.layout.dim];
        let ranges = self.layout.ranges();
        let d = self.layout.dim;
        let mut foff = nk;
        for (p, r) in self.blocks().into_iter().enumerate() {
            let tape = Tape::new();
            let kleaves = tape.leaves(&self.raw[ranges[p].clone()]);
            let m = self.inducing.freqs[p].len();
            let wflat: Vec<f64> = self.inducing.freqs[p].iter().flatten().copied().collect();
            let wleaves = tape.leaves(&wflat);
            let w: Vec<Vec<Var>> = wleaves.chunks(d).map(|c| c.to_vec()).collect();
            let view = ComponentView::from_raw(&kleaves, d, self.layout.freqs[p]);
            let mut seeds: Vec<(Var, f64)> = Vec::new();
            let n2 = 2 * m;
            let block = vff_block(&view, &w);
            for i in 0..n2 {
                for j in 0..n2 {
                    let s = adj.kuu[(r.start + i, r.start + j)];
                    if s != 0.0 {
                        seeds.push((block[i * n2 + j], s));
                    }
                }
            }
            // K_fu is differentiated by hand through the per-input prelude;
            // only the prelude itself goes on the tape.
            let wf = &self.inducing.freqs[p];
            let muf = &self.views[p].mu;
            let mut w_bar = vec![vec![0.0; d]; m];
            let mut mu_bar = vec![vec![0.0; d]; muf.len()];
            for (n, x) in xs.iter().enumerate() {
                let pre = view.cross_prelude(x);
                let gbar: Vec<Complex64> =
                    (0..m).map(|j| Complex64::new(adj.kfu[(n, r.start + j)], adj.kfu[(n, r.start + m + j)])).collect();
                let pb = cross_real_adjoint(&pre, wf, muf, &gbar, &mut w_bar, &mut mu_bar);
                seeds.push((pre.base, pb.base));
                for t in 0..d {
                    seeds.push((pre.lin[t], pb.lin[t]));
                    seeds.push((pre.cs[t], pb.cs[t]));
                }
                for (row, rb) in pre.rows.iter().zip(&pb.rows) {
                    seeds.push((row.re, rb.re));
                    seeds.push((row.im, rb.im));
                }
                if adj.kff[n] != 0.0 {
                    seeds.push((view.kernel(x, x).re, adj.kff[n]));
                }
            }
            for (wv, wb) in w.iter().zip(&w_bar) {
                for t in 0..d {
                    seeds.push((wv[t], wb[t]));
                }
            }
            for (mv, mb) in view.mu.iter().zip(&mu_bar) {
                for t in 0..d {
                    seeds.push((mv[t], mb[t]));
                }
            }
            let mut leaves = kleaves;
            leaves.extend(wleaves);
            let g = tape.gradient(&seeds, &leaves);
            grad[ranges[p].clone()].copy_from_slice(&g[..ranges[p].len()]);
            grad[foff..foff + m * d].copy_from_slice(&g[ranges[p].len()..]);
            foff += m * d;
        }
        grad
    }
}

/// Stationary kernel families for the inducing-point baselines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StationaryKind {
    Se,
    Sm { components: usize },
}

/// Stationary kernel with inducing points `Z` in input space.
#[derive(Clone, Debug)]
pub struct InducingPointModel {
    kind: StationaryKind,
    dim: usize,
    hyper: Vec<f64>,
    z: Vec<Vec<f64>>,
}

impl InducingPointModel {
    pub fn se(variance: f64, lengthscale: f64, z: Vec<Vec<f64>>) -> Self {
        let dim = z.first().map_or(1, Vec::len);
        InducingPointModel { kind: StationaryKind::Se, dim, hyper: vec![softplus_inv(variance), softplus_inv(lengthscale)], z }
    }

    pub fn sm(p: &SmParams, z: Vec<Vec<f64>>) -> Self {
        let dim = p.dim();
        let mut hyper = Vec::new();
        for q in 0..p.num_components() {
            hyper.push(softplus_inv(p.weights[q]));
            hyper.extend_from_slice(&p.means[q]);
            hyper.extend(p.variances[q].iter().map(|&v| softplus_inv(v)));
        }
        InducingPointModel { kind: StationaryKind::Sm { components: p.num_components() }, dim, hyper, z }
    }

    pub fn kind(&self) -> StationaryKind {
        self.kind
    }

    pub fn inducing_points(&self) -> &[Vec<f64>] {
        &self.z
    }

    /// Constrained hyperparameters: `(variance, lengthscale)` for SE.
    pub fn se_params(&self) -> Option<(f64, f64)> {
        match self.kind {
            StationaryKind::Se => Some((softplus(self.hyper[0]), softplus(self.hyper[1]))),
            _ => None,
        }
    }

    pub fn sm_params(&self) -> Option<SmParams> {
        match self.kind {
            StationaryKind::Sm { components } => {
                let d = self.dim;
                let stride = 1 + 2 * d;
                let mut p = SmParams { weights: vec![], means: vec![], variances: vec![] };
                for q in 0..components {
                    let h = &self.hyper[q * stride..(q + 1) * stride];
                    p.weights.push(softplus(h[0]));
                    p.means.push(h[1..1 + d].to_vec());
                    p.variances.push(h[1 + d..].iter().map(|&v| softplus(v)).collect());
                }
                Some(p)
            }
            _ => None,
        }
    }

    fn eval<T: Real>(&self, hyper: &[T], tau: &[T]) -> T {
        match self.kind {
            StationaryKind::Se => {
                let var = hyper[0].softplus();
                let ell = hyper[1].softplus();
                crate::kernels::eval_se(tau, var, ell)
            }
            StationaryKind::Sm { components } => {
                let d = self.dim;
                let stride = 1 + 2 * d;
                let mut k = T::zero();
                for q in 0..components {
                    let h = &hyper[q * stride..(q + 1) * stride];
                    let var: Vec<T> = h[1 + d..].iter().map(|v| v.softplus()).collect();
                    k += crate::kernels::stationary::sm_term(tau, h[0].softplus(), &h[1..1 + d], &var);
                }
                k
            }
        }
    }

    fn eval_f64(&self, a: &[f64], b: &[f64]) -> f64 {
        let tau: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        self.eval(&self.hyper, &tau)
    }
}

impl CovarianceModel for InducingPointModel {
    fn num_inducing(&self) -> usize {
        self.z.len()
    }

    fn blocks(&self) -> Vec<Range<usize>> {
        // a single dense block
        std::iter::once(0..self.z.len()).collect()
    }

    fn kuu(&self) -> DMatrix<f64> {
        let m = self.z.len();
        DMatrix::from_fn(m, m, |i, j| self.eval_f64(&self.z[i], &self.z[j]))
    }

    fn kfu(&self, xs: &[Vec<f64>]) -> DMatrix<f64> {
        DMatrix::from_fn(xs.len(), self.z.len(), |n, j| self.eval_f64(&xs[n], &self.z[j]))
    }

    fn kff_diag(&self, xs: &[Vec<f64>]) -> DVector<f64> {
        let k0 = self.eval(&self.hyper, &vec![0.0; self.dim]);
        DVector::from_element(xs.len(), k0)
    }

    fn kff(&self, xs: &[Vec<f64>]) -> DMatrix<f64> {
        DMatrix::from_fn(xs.len(), xs.len(), |i, j| self.eval_f64(&xs[i], &xs[j]))
    }

    fn params(&self) -> Vec<f64> {
        let mut p = self.hyper.clone();
        p.extend(self.z.iter().flatten());
        p
    }

    fn set_params(&mut self, raw: &[f64]) {
        let nh = self.hyper.len();
        self.hyper.copy_from_slice(&raw[..nh]);
        for (j, z) in self.z.iter_mut().enumerate() {
            z.copy_from_slice(&raw[nh + j * self.dim..nh + (j + 1) * self.dim]);
        }
    }

    fn pullback(&self, xs: &[Vec<f64>], adj: &CovAdjoints) -> Vec<f64> {
        let tape = Tape::new();
        let h = tape.leaves(&self.hyper);
        let zflat: Vec<f64> = self.z.iter().flatten().copied().collect();
        let zl = tape.leaves(&zflat);
        let d = self.dim;
        let z: Vec<&[Var]> = zl.chunks(d).collect();
        let m = self.z.len();
        let mut seeds = Vec::new();
        for i in 0..m {
            for j in 0..=i {
                let s = sym_seed(&adj.kuu, i, j);
                if s != 0.0 {
                    let tau: Vec<Var> = (0..d).map(|k| z[i][k] - z[j][k]).collect();
                    seeds.push((self.eval(&h, &tau), s));
                }
            }
        }
        for (n, x) in xs.iter().enumerate() {
            for j in 0..m {
                let s = adj.kfu[(n, j)];
                if s != 0.0 {
                    let tau: Vec<Var> = (0..d).map(|k| -z[j][k] + x[k]).collect();
                    seeds.push((self.eval(&h, &tau), s));
                }
            }
        }
        let kbar: f64 = adj.kff.iter().sum();
        if kbar != 0.0 {
            let zero: Vec<Var> = (0..d).map(|_| Var::cst(0.0)).collect();
            seeds.push((self.eval(&h, &zero), kbar));
        }
        let mut leaves = h;
        leaves.extend(zl);
        tape.gradient(&seeds, &leaves)
    }
}
