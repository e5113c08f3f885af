//! Dense Hermitian linear algebra over real or complex entries.
//!
//! Every covariance in the crate passes through [`HermitianMatrix`] and is
//! factorized with [`cholesky_hermitian`] or the jitter ladder in
//! [`cholesky_with_ladder`]. The routines are generic over `f64` and
//! [`ComplexScalar`] so the stacked real representation of complex
//! inducing variables shares the same code.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub type ComplexScalar = Complex64;
pub type ComplexMatrix = DMatrix<Complex64>;
pub type RealMatrix = DMatrix<f64>;

/// Relative asymmetry below which a matrix is symmetrized on construction.
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive definite (last jitter tried: {jitter:.3e})")]
    NotPositiveDefinite { jitter: f64 },
    #[error("shape mismatch: expected {expected} rows, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (relative asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },
    #[error("matrix has non-finite entries")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Scalars the factorizations accept.
pub trait Field: ComplexField<RealField = f64> + Copy {}
impl Field for f64 {}
impl Field for Complex64 {}

/// A square matrix with `M[i][j] = conj(M[j][i])` exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix<T: Field = Complex64> {
    inner: DMatrix<T>,
}

impl<T: Field> HermitianMatrix<T> {
    /// Symmetrize as `(M + M^†)/2` when the asymmetry is within
    /// [`HERMITIAN_TOL`] relative to the largest entry, otherwise reject.
    pub fn new(m: DMatrix<T>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(LinalgError::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        let n = m.nrows();
        let mut scale = 0.0_f64;
        let mut asym = 0.0_f64;
        for j in 0..n {
            for i in 0..n {
                let a = m[(i, j)];
                if !a.is_finite() {
                    return Err(LinalgError::NonFinite);
                }
                scale = scale.max(a.modulus());
                asym = asym.max((a - m[(j, i)].conjugate()).modulus());
            }
        }
        let rel = if scale > 0.0 { asym / scale } else { 0.0 };
        if rel > HERMITIAN_TOL {
            return Err(LinalgError::NotHermitian { asymmetry: rel });
        }
        Ok(Self::symmetrize(m))
    }

    /// Build from an analytically Hermitian formula; the lower triangle is
    /// evaluated and mirrored.
    pub fn from_lower_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = DMatrix::<T>::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v.conjugate();
            }
            let d = m[(j, j)];
            m[(j, j)] = T::from_real(d.real());
        }
        HermitianMatrix { inner: m }
    }

    fn symmetrize(m: DMatrix<T>) -> Self {
        let half = T::from_real(0.5);
        let sym = (&m + m.adjoint()) * half;
        HermitianMatrix { inner: sym }
    }

    pub fn identity(n: usize) -> Self {
        HermitianMatrix { inner: DMatrix::identity(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<T> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.inner
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.inner[(i, i)].real()).sum()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.inner[(i, j)]
    }

    /// `self + c·I`
    pub fn add_diagonal(&self, c: f64) -> Self {
        let mut m = self.inner.clone();
        for i in 0..self.dim() {
            m[(i, i)] += T::from_real(c);
        }
        HermitianMatrix { inner: m }
    }

    pub fn scaled(&self, c: f64) -> Self {
        HermitianMatrix { inner: &self.inner * T::from_real(c) }
    }
}

/// Lower-triangular `L` with `L L^† = M + jitter·I`.
#[derive(Clone, Debug)]
pub struct CholeskyFactor<T: Field = Complex64> {
    l: DMatrix<T>,
    jitter: f64,
}

impl<T: Field> CholeskyFactor<T> {
    pub fn l(&self) -> &DMatrix<T> {
        &self.l
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// `X` with `(L L^†) X = B`.
    pub fn solve(&self, b: &DMatrix<T>) -> Result<DMatrix<T>> {
        let y = self.solve_lower(b)?;
        Ok(self.solve_upper(&y))
    }

    pub fn solve_vec(&self, b: &DVector<T>) -> Result<DVector<T>> {
        let m = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
        let x = self.solve(&m)?;
        Ok(DVector::from_column_slice(x.as_slice()))
    }

    /// `L^{-1} B` by forward substitution.
    pub fn solve_lower(&self, b: &DMatrix<T>) -> Result<DMatrix<T>> {
        let n = self.dim();
        if b.nrows() != n {
            return Err(LinalgError::ShapeMismatch { expected: n, found: b.nrows() });
        }
        let mut x = b.clone();
        for c in 0..x.ncols() {
            for i in 0..n {
                let mut s = x[(i, c)];
                for k in 0..i {
                    s -= self.l[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s / self.l[(i, i)];
            }
        }
        Ok(x)
    }

    /// `L^{-†} Y` by back substitution; `Y` must already have `dim` rows.
    pub fn solve_upper(&self, y: &DMatrix<T>) -> DMatrix<T> {
        let n = self.dim();
        let mut x = y.clone();
        for c in 0..x.ncols() {
            for i in (0..n).rev() {
                let mut s = x[(i, c)];
                for k in (i + 1)..n {
                    s -= self.l[(k, i)].conjugate() * x[(k, c)];
                }
                x[(i, c)] = s / self.l[(i, i)].conjugate();
            }
        }
        x
    }

    /// `log det(L L^†) = 2 Σ log Re(L_ii)`.
    pub fn logdet(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.l[(i, i)].real().ln()).sum::<f64>()
    }

    /// `(L L^†)^{-1}`
    pub fn inverse(&self) -> DMatrix<T> {
        let n = self.dim();
        self.solve(&DMatrix::identity(n, n)).expect("identity has matching shape")
    }

    /// `L L^†`, i.e. the factorized matrix including jitter.
    pub fn reconstruct(&self) -> DMatrix<T> {
        &self.l * self.l.adjoint()
    }
}

/// Factorize `M + jitter·I`.
pub fn cholesky_hermitian<T: Field>(m: &HermitianMatrix<T>, jitter: f64) -> Result<CholeskyFactor<T>> {
    let n = m.dim();
    let a = m.as_matrix();
    let mut l = DMatrix::<T>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].real() + jitter;
        for k in 0..j {
            d -= l[(j, k)].modulus_squared();
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(LinalgError::NotPositiveDefinite { jitter });
        }
        let djj = d.sqrt();
        l[(j, j)] = T::from_real(djj);
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conjugate();
            }
            l[(i, j)] = s / T::from_real(djj);
        }
    }
    Ok(CholeskyFactor { l, jitter })
}

/// Try jitter 0, then `start·trace/dim` growing ×10 up to `1e-4·trace/dim`.
pub fn cholesky_with_ladder<T: Field>(m: &HermitianMatrix<T>) -> Result<CholeskyFactor<T>> {
    cholesky_with_ladder_from(m, 1e-10)
}

pub fn cholesky_with_ladder_from<T: Field>(m: &HermitianMatrix<T>, start: f64) -> Result<CholeskyFactor<T>> {
    if let Ok(f) = cholesky_hermitian(m, 0.0) {
        return Ok(f);
    }
    let n = m.dim().max(1);
    let unit = (m.trace() / n as f64).abs().max(f64::MIN_POSITIVE);
    let mut rel = start;
    let mut last = 0.0;
    while rel <= 1e-4 * (1.0 + 1e-9) {
        last = rel * unit;
        if let Ok(f) = cholesky_hermitian(m, last) {
            return Ok(f);
        }
        rel *= 10.0;
    }
    Err(LinalgError::NotPositiveDefinite { jitter: last })
}

/// Factorize a block-diagonal matrix one diagonal block at a time, each
/// with its own jitter ladder. Entries outside `blocks` are ignored. The
/// reported jitter is the largest used by any block.
pub fn cholesky_blocks<T: Field>(m: &HermitianMatrix<T>, blocks: &[std::ops::Range<usize>]) -> Result<CholeskyFactor<T>> {
    let n = m.dim();
    let mut l = DMatrix::<T>::zeros(n, n);
    let mut jitter: f64 = 0.0;
    for r in blocks {
        let sub = m.as_matrix().view((r.start, r.start), (r.len(), r.len())).clone_owned();
        let f = cholesky_with_ladder(&HermitianMatrix { inner: sub })?;
        jitter = jitter.max(f.jitter);
        l.view_mut((r.start, r.start), (r.len(), r.len())).copy_from(&f.l);
    }
    Ok(CholeskyFactor { l, jitter })
}

/// Solve `(L L^†) X = B`.
pub fn solve_hermitian<T: Field>(l: &CholeskyFactor<T>, b: &DMatrix<T>) -> Result<DMatrix<T>> {
    l.solve(b)
}

pub fn logdet<T: Field>(l: &CholeskyFactor<T>) -> f64 {
    l.logdet()
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue<T: Field>(m: &HermitianMatrix<T>) -> f64 {
    eigenvalues(m).into_iter().fold(f64::INFINITY, f64::min)
}

/// All eigenvalues, unordered.
pub fn eigenvalues<T: Field>(m: &HermitianMatrix<T>) -> Vec<f64> {
    if m.dim() == 0 {
        return Vec::new();
    }
    let eig = nalgebra::SymmetricEigen::new(m.as_matrix().clone());
    eig.eigenvalues.iter().copied().collect()
}

/// `A^† B` for real or complex matrices.
pub fn adjoint_mul<T: Field>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    a.adjoint() * b
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_pd(n: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix {
        let x = ComplexMatrix::from_fn(n + 3, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let g = x.adjoint() * &x + ComplexMatrix::identity(n, n) * c(0.1, 0.0);
        HermitianMatrix::new(g).unwrap()
    }

    #[test]
    fn identity_factor_is_identity() {
        let f = cholesky_hermitian(&HermitianMatrix::<Complex64>::identity(3), 0.0).unwrap();
        assert_eq!(f.l(), &ComplexMatrix::identity(3, 3));
    }

    #[test]
    fn complex_two_by_two_reconstructs() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let h = HermitianMatrix::new(m.clone()).unwrap();
        let f = cholesky_hermitian(&h, 0.0).unwrap();
        let err = (f.reconstruct() - m).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn indefinite_is_rejected() {
        let h = HermitianMatrix::new(RealMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        assert!(matches!(cholesky_hermitian(&h, 0.0), Err(LinalgError::NotPositiveDefinite { .. })));
        assert!(cholesky_with_ladder(&h).is_err());
    }

    #[test]
    fn asymmetric_input_rejected_and_tiny_asymmetry_symmetrized() {
        let bad = RealMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(HermitianMatrix::new(bad), Err(LinalgError::NotHermitian { .. })));
        let ok = RealMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5 + 1e-13, 1.0]);
        let h = HermitianMatrix::new(ok).unwrap();
        assert_eq!(h.get(0, 1), h.get(1, 0));
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let f = cholesky_hermitian(&HermitianMatrix::<Complex64>::identity(3), 0.0).unwrap();
        let b = ComplexMatrix::from_fn(3, 2, |i, j| c(i as f64, j as f64 - 0.5));
        assert_eq!(f.solve(&b).unwrap(), b);
    }

    #[test]
    fn solve_recovers_known_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_pd(5, &mut rng);
        let x0 = ComplexMatrix::from_fn(5, 3, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let b = m.as_matrix() * &x0;
        let f = cholesky_hermitian(&m, 0.0).unwrap();
        let x = solve_hermitian(&f, &b).unwrap();
        assert!((x - x0).iter().all(|z| z.norm() < 1e-8));
    }

    #[test]
    fn solve_shape_mismatch() {
        let f = cholesky_hermitian(&HermitianMatrix::<Complex64>::identity(3), 0.0).unwrap();
        let b = ComplexMatrix::zeros(4, 1);
        assert_eq!(f.solve(&b).unwrap_err(), LinalgError::ShapeMismatch { expected: 3, found: 4 });
    }

    #[test]
    fn logdet_cases() {
        let f = cholesky_hermitian(&HermitianMatrix::<f64>::identity(4), 0.0).unwrap();
        assert_eq!(logdet(&f), 0.0);
        let d = HermitianMatrix::new(RealMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0]))).unwrap();
        let f = cholesky_hermitian(&d, 0.0).unwrap();
        assert!((logdet(&f) - 2.0 * 2f64.ln()).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_pd(6, &mut rng);
        let f = cholesky_hermitian(&m, 0.0).unwrap();
        let from_eigs: f64 = eigenvalues(&m).iter().map(|e| e.ln()).sum();
        assert!((f.logdet() - from_eigs).abs() < 1e-9);
    }

    #[test]
    fn min_eigenvalue_cases() {
        assert!((min_eigenvalue(&HermitianMatrix::<f64>::identity(2)) - 1.0).abs() < 1e-14);
        let r1 = HermitianMatrix::new(RealMatrix::from_element(2, 2, 1.0)).unwrap();
        assert!(min_eigenvalue(&r1).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = ComplexMatrix::from_fn(3, 6, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let g = HermitianMatrix::new(x.adjoint() * x).unwrap();
        assert!(min_eigenvalue(&g) >= -1e-10);
    }

    #[test]
    fn ladder_adds_jitter_for_singular_psd() {
        let r1 = HermitianMatrix::new(RealMatrix::from_element(3, 3, 1.0)).unwrap();
        let f = cholesky_with_ladder(&r1).unwrap();
        assert!(f.jitter() > 0.0 && f.jitter() <= 1e-4);
    }
}
