//! Scalar reverse-mode differentiation.
//!
//! Covariance assembly is written once against [`Real`] and evaluated either
//! with plain `f64` or with [`Var`], which records every operation on a
//! thread-local tape. Matrix-level objectives supply adjoints for the
//! assembled entries and [`Tape::gradient`] pulls them back to the leaves.

use std::cell::RefCell;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Numeric scalar that can flow through kernel and covariance formulas.
pub trait Real:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn cst(v: f64) -> Self;
    fn value(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn square(self) -> Self {
        self * self
    }

    /// `ln(1 + e^x)`, the map used for every positive parameter.
    fn softplus(self) -> Self;
}

impl Real for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn softplus(self) -> Self {
        softplus(self)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse of [`softplus`] for `y > 0`.
pub fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    }
}

#[derive(Clone, Copy, Debug)]
struct Node {
    a: u32,
    b: u32,
    da: f64,
    db: f64,
}

const NO_PARENT: u32 = u32::MAX;

thread_local! {
    static TAPE: RefCell<Vec<Node>> = const { RefCell::new(Vec::new()) };
    /// Adjoint buffer reused across backward passes.
    static ADJOINTS: RefCell<Vec<f64>> = const { RefCell::new(Vec::new()) };
}

#[inline]
fn push(a: u32, da: f64, b: u32, db: f64) -> u32 {
    TAPE.with(|t| {
        let mut t = t.borrow_mut();
        let idx = t.len() as u32;
        t.push(Node { a, b, da, db });
        idx
    })
}

/// A value recorded on the current thread's tape.
#[derive(Clone, Copy, Debug)]
pub struct Var {
    val: f64,
    idx: u32,
}

impl Var {
    #[inline]
    fn unary(val: f64, x: Var, d: f64) -> Var {
        Var { val, idx: push(x.idx, d, NO_PARENT, 0.0) }
    }

    #[inline]
    fn binary(val: f64, x: Var, dx: f64, y: Var, dy: f64) -> Var {
        Var { val, idx: push(x.idx, dx, y.idx, dy) }
    }

    pub fn index(self) -> usize {
        self.idx as usize
    }
}

/// Handle on the thread-local tape. Creating one clears any previous
/// recording, so only one may be live per thread.
pub struct Tape {
    _private: (),
}

impl Tape {
    pub fn new() -> Self {
        TAPE.with(|t| t.borrow_mut().clear());
        Tape { _private: () }
    }

    /// Register an independent variable.
    pub fn leaf(&self, v: f64) -> Var {
        Var { val: v, idx: push(NO_PARENT, 0.0, NO_PARENT, 0.0) }
    }

    pub fn leaves(&self, vs: &[f64]) -> Vec<Var> {
        vs.iter().map(|&v| self.leaf(v)).collect()
    }

    pub fn len(&self) -> usize {
        TAPE.with(|t| t.borrow().len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Backpropagate `Σ seed · output` and return d/d`leaf` for each leaf.
    pub fn gradient(&self, seeds: &[(Var, f64)], leaves: &[Var]) -> Vec<f64> {
        TAPE.with(|t| {
            ADJOINTS.with(|a| {
                let t = t.borrow();
                let mut adj = a.borrow_mut();
                adj.clear();
                adj.resize(t.len(), 0.0);
                for &(v, s) in seeds {
                    adj[v.idx as usize] += s;
                }
                for i in (0..t.len()).rev() {
                    let g = adj[i];
                    if g == 0.0 {
                        continue;
                    }
                    let n = t[i];
                    if n.a != NO_PARENT {
                        adj[n.a as usize] += g * n.da;
                    }
                    if n.b != NO_PARENT {
                        adj[n.b as usize] += g * n.db;
                    }
                }
                leaves.iter().map(|l| adj[l.idx as usize]).collect()
            })
        })
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Drop for Tape {
    fn drop(&mut self) {
        TAPE.with(|t| {
            let mut t = t.borrow_mut();
            t.clear();
            t.shrink_to(1 << 16);
        });
    }
}

impl Add for Var {
    type Output = Var;
    #[inline]
    fn add(self, o: Var) -> Var {
        Var::binary(self.val + o.val, self, 1.0, o, 1.0)
    }
}

impl Sub for Var {
    type Output = Var;
    #[inline]
    fn sub(self, o: Var) -> Var {
        Var::binary(self.val - o.val, self, 1.0, o, -1.0)
    }
}

impl Mul for Var {
    type Output = Var;
    #[inline]
    fn mul(self, o: Var) -> Var {
        Var::binary(self.val * o.val, self, o.val, o, self.val)
    }
}

impl Div for Var {
    type Output = Var;
    #[inline]
    fn div(self, o: Var) -> Var {
        let q = self.val / o.val;
        Var::binary(q, self, 1.0 / o.val, o, -q / o.val)
    }
}

impl Neg for Var {
    type Output = Var;
    #[inline]
    fn neg(self) -> Var {
        Var::unary(-self.val, self, -1.0)
    }
}

impl Add<f64> for Var {
    type Output = Var;
    #[inline]
    fn add(self, c: f64) -> Var {
        Var::unary(self.val + c, self, 1.0)
    }
}

impl Sub<f64> for Var {
    type Output = Var;
    #[inline]
    fn sub(self, c: f64) -> Var {
        Var::unary(self.val - c, self, 1.0)
    }
}

impl Mul<f64> for Var {
    type Output = Var;
    #[inline]
    fn mul(self, c: f64) -> Var {
        Var::unary(self.val * c, self, c)
    }
}

impl Div<f64> for Var {
    type Output = Var;
    #[inline]
    fn div(self, c: f64) -> Var {
        Var::unary(self.val / c, self, 1.0 / c)
    }
}

impl AddAssign for Var {
    fn add_assign(&mut self, o: Var) {
        *self = *self + o;
    }
}

impl SubAssign for Var {
    fn sub_assign(&mut self, o: Var) {
        *self = *self - o;
    }
}

impl MulAssign for Var {
    fn mul_assign(&mut self, o: Var) {
        *self = *self * o;
    }
}

impl Real for Var {
    /// Constants are recorded as parentless nodes so that every `Var`
    /// carries a valid tape index.
    fn cst(v: f64) -> Self {
        Var { val: v, idx: push(NO_PARENT, 0.0, NO_PARENT, 0.0) }
    }
    fn value(self) -> f64 {
        self.val
    }
    fn exp(self) -> Self {
        let e = self.val.exp();
        Var::unary(e, self, e)
    }
    fn ln(self) -> Self {
        Var::unary(self.val.ln(), self, 1.0 / self.val)
    }
    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        Var::unary(s, self, 0.5 / s)
    }
    fn sin(self) -> Self {
        Var::unary(self.val.sin(), self, self.val.cos())
    }
    fn cos(self) -> Self {
        Var::unary(self.val.cos(), self, -self.val.sin())
    }
    fn softplus(self) -> Self {
        // d/dx softplus = logistic(x)
        let s = 1.0 / (1.0 + (-self.val).exp());
        Var::unary(softplus(self.val), self, s)
    }
}

/// Complex number over any [`Real`], used inside differentiable formulas.
#[derive(Clone, Copy, Debug)]
pub struct Cx<T> {
    pub re: T,
    pub im: T,
}

// Plain methods rather than operator traits keep `T: Real` bounds local.
#[allow(clippy::should_implement_trait)]
impl<T: Real> Cx<T> {
    pub fn new(re: T, im: T) -> Self {
        Cx { re, im }
    }

    pub fn real(re: T) -> Self {
        Cx { re, im: T::zero() }
    }

    pub fn zero() -> Self {
        Cx { re: T::zero(), im: T::zero() }
    }

    /// `e^{i θ}`
    pub fn cis(theta: T) -> Self {
        Cx { re: theta.cos(), im: theta.sin() }
    }

    /// `e^{re + i im}`
    pub fn exp(self) -> Self {
        let m = self.re.exp();
        Cx { re: m * self.im.cos(), im: m * self.im.sin() }
    }

    pub fn conj(self) -> Self {
        Cx { re: self.re, im: -self.im }
    }

    pub fn scale(self, s: T) -> Self {
        Cx { re: self.re * s, im: self.im * s }
    }

    pub fn add(self, o: Self) -> Self {
        Cx { re: self.re + o.re, im: self.im + o.im }
    }

    pub fn sub(self, o: Self) -> Self {
        Cx { re: self.re - o.re, im: self.im - o.im }
    }

    pub fn mul(self, o: Self) -> Self {
        Cx { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
    }

    pub fn to_f64(self) -> num_complex::Complex64 {
        num_complex::Complex64::new(self.re.value(), self.im.value())
    }
}
