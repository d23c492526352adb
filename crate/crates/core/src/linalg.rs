//! Small dense complex linear algebra.
//!
//! Composite spaces are always ordered output ⊗ input (`K ⊗ H`): index
//! `(m, n)` of a bipartite operator lives at `m * dim_in + n`.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Hermiticity tolerance for eigendecomposition inputs.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Smallest eigenvalue still accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-10;
/// Cholesky pivots at or below this value are treated as exact zeros.
pub const PIVOT_TOL: f64 = 1e-12;

/// Which tensor factor `partial_trace` removes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factor {
    /// The output space `K` (leftmost factor).
    First,
    /// The input space `H` (rightmost factor).
    Second,
}

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> ComplexMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch(format!(
                "matrix dimensions must be positive (got {rows}x{cols})"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::new(T::zero(), T::zero()); rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Complex<T>,
    ) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from real row-major entries given as `f64`.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        let data = entries
            .iter()
            .map(|&x| Complex::new(T::lit(x), T::zero()))
            .collect();
        Self::new(rows, cols, data)
    }

    pub fn diagonal(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex::new(v, T::zero());
        }
        m
    }

    /// `|a⟩⟨b|` for column vectors `a` and `b`.
    pub fn outer(ket: &[Complex<T>], bra: &[Complex<T>]) -> Self {
        Self::from_fn(ket.len(), bra.len(), |i, j| ket[i] * bra[j].conj())
    }

    /// Column vector as an `n x 1` matrix.
    pub fn column(v: &[Complex<T>]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn into_entries(self) -> Vec<Complex<T>> {
        self.data
    }

    pub fn column_vec(&self, j: usize) -> Vec<Complex<T>> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn map(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_complex(&self, s: Complex<T>) -> Self {
        self.map(|z| z * s)
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .fold(Complex::new(T::zero(), T::zero()), |a, b| a + b)
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> T {
        self.data.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    /// `‖self − other‖_F`; panics on shape mismatch.
    pub fn distance(&self, other: &Self) -> T {
        (self - other).frobenius_norm()
    }

    /// Largest entrywise deviation of `self` from its adjoint.
    pub fn hermitian_deviation(&self) -> T {
        if !self.is_square() {
            return T::infinity();
        }
        let mut dev = T::zero();
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = rhs[(k, j)];
                    out[(i, j)] += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "cannot apply {}x{} matrix to vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| {
                (0..self.cols).fold(Complex::new(T::zero(), T::zero()), |acc, j| {
                    acc + self[(i, j)] * v[j]
                })
            })
            .collect())
    }

    /// `Tr[self · rhs]` without forming the product.
    pub fn trace_product(&self, rhs: &Self) -> Result<Complex<T>> {
        if self.cols != rhs.rows || self.rows != rhs.cols {
            return Err(Error::DimensionMismatch(format!(
                "trace of {}x{} times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut acc = Complex::new(T::zero(), T::zero());
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self[(i, k)] * rhs[(k, i)];
            }
        }
        Ok(acc)
    }

    fn check_same_shape(&self, other: &Self) {
        assert!(
            self.rows == other.rows && self.cols == other.cols,
            "shape mismatch: {}x{} vs {}x{}",
            self.rows,
            self.cols,
            other.rows,
            other.cols
        );
    }
}

impl<T> Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = Complex<T>;

    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for ComplexMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Scalar> Add for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;

    fn add(self, rhs: Self) -> ComplexMatrix<T> {
        self.check_same_shape(rhs);
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl<T: Scalar> Sub for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;

    fn sub(self, rhs: Self) -> ComplexMatrix<T> {
        self.check_same_shape(rhs);
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl<T: Scalar> Mul for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;

    /// Panics on incompatible shapes; use [`ComplexMatrix::matmul`] for a checked product.
    fn mul(self, rhs: Self) -> ComplexMatrix<T> {
        self.matmul(rhs).expect("incompatible matrix shapes")
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    entries: Vec<[f64; 2]>,
}

impl<T: Scalar> Serialize for ComplexMatrix<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixRepr {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .data
                .iter()
                .map(|z| [z.re.as_f64(), z.im.as_f64()])
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for ComplexMatrix<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = MatrixRepr::deserialize(deserializer)?;
        let data = repr
            .entries
            .iter()
            .map(|&[re, im]| Complex::new(T::lit(re), T::lit(im)))
            .collect();
        ComplexMatrix::new(repr.rows, repr.cols, data).map_err(serde::de::Error::custom)
    }
}

/// Upper-triangular factor `C` with a real, nonnegative diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct UpperTriangular<T> {
    inner: ComplexMatrix<T>,
}

impl<T: Scalar> UpperTriangular<T> {
    /// Validates the triangular shape and diagonal sign exactly.
    pub fn from_matrix(m: ComplexMatrix<T>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "triangular factor must be square (got {}x{})",
                m.rows(),
                m.cols()
            )));
        }
        for i in 0..m.rows() {
            for j in 0..i {
                if m[(i, j)] != Complex::new(T::zero(), T::zero()) {
                    return Err(Error::InvalidParameter(format!(
                        "entry ({i},{j}) below the diagonal is nonzero"
                    )));
                }
            }
            let d = m[(i, i)];
            if d.im != T::zero() || d.re < T::zero() {
                return Err(Error::InvalidParameter(format!(
                    "diagonal entry {i} must be real and nonnegative"
                )));
            }
        }
        Ok(Self { inner: m })
    }

    pub fn dim(&self) -> usize {
        self.inner.rows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix<T> {
        &self.inner
    }

    pub fn into_matrix(self) -> ComplexMatrix<T> {
        self.inner
    }

    /// `C†C`.
    pub fn gram(&self) -> ComplexMatrix<T> {
        let n = self.dim();
        let c = &self.inner;
        let mut s = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = Complex::new(T::zero(), T::zero());
                for k in 0..=i {
                    acc += c[(k, i)].conj() * c[(k, j)];
                }
                s[(i, j)] = acc;
                s[(j, i)] = acc.conj();
            }
        }
        s
    }
}

/// Kronecker product `A ⊗ B`.
pub fn tensor_product<T: Scalar>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    let (rb, cb) = (b.rows(), b.cols());
    ComplexMatrix::from_fn(a.rows() * rb, a.cols() * cb, |r, c| {
        a[(r / rb, c / cb)] * b[(r % rb, c % cb)]
    })
}

/// Kronecker product of two column vectors.
pub fn tensor_vec<T: Scalar>(a: &[Complex<T>], b: &[Complex<T>]) -> Vec<Complex<T>> {
    a.iter()
        .flat_map(|&x| b.iter().map(move |&y| x * y))
        .collect()
}

fn check_bipartite<T: Scalar>(s: &ComplexMatrix<T>, dim_out: usize, dim_in: usize) -> Result<()> {
    let d = dim_out * dim_in;
    if !s.is_square() || s.rows() != d {
        return Err(Error::DimensionMismatch(format!(
            "expected a {d}x{d} operator on a {dim_out}x{dim_in} product space, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    Ok(())
}

/// Traces out one factor of an operator on `K ⊗ H` (`dim K = dim_out`,
/// `dim H = dim_in`).
pub fn partial_trace<T: Scalar>(
    s: &ComplexMatrix<T>,
    dim_out: usize,
    dim_in: usize,
    which: Factor,
) -> Result<ComplexMatrix<T>> {
    check_bipartite(s, dim_out, dim_in)?;
    let zero = Complex::new(T::zero(), T::zero());
    Ok(match which {
        Factor::First => ComplexMatrix::from_fn(dim_in, dim_in, |n, n2| {
            (0..dim_out).fold(zero, |acc, m| acc + s[(m * dim_in + n, m * dim_in + n2)])
        }),
        Factor::Second => ComplexMatrix::from_fn(dim_out, dim_out, |m, m2| {
            (0..dim_in).fold(zero, |acc, n| acc + s[(m * dim_in + n, m2 * dim_in + n)])
        }),
    })
}

/// Transposes the second (input) factor of an operator on `K ⊗ H`.
pub fn partial_transpose<T: Scalar>(
    s: &ComplexMatrix<T>,
    dim_out: usize,
    dim_in: usize,
) -> Result<ComplexMatrix<T>> {
    check_bipartite(s, dim_out, dim_in)?;
    Ok(ComplexMatrix::from_fn(s.rows(), s.cols(), |r, c| {
        let (m, n) = (r / dim_in, r % dim_in);
        let (m2, n2) = (c / dim_in, c % dim_in);
        s[(m * dim_in + n2, m2 * dim_in + n)]
    }))
}

/// Factors a Hermitian positive semidefinite `S` as `C†C`.
///
/// Eigenvalues down to `-PSD_TOL` are accepted. Pivots at or below
/// `PIVOT_TOL` become zero along with the rest of their row, so singular
/// inputs factor without error.
pub fn cholesky<T: Scalar>(s: &ComplexMatrix<T>) -> Result<UpperTriangular<T>> {
    let (values, _) = hermitian_eigen(s)?;
    let min = values.last().copied().unwrap_or_else(T::zero);
    if min < -T::tol(PSD_TOL) {
        return Err(Error::NotPositiveSemidefinite {
            min_eigenvalue: min.as_f64(),
        });
    }
    Ok(cholesky_unchecked(s))
}

/// Cholesky recursion without the spectral positivity check.
pub(crate) fn cholesky_unchecked<T: Scalar>(s: &ComplexMatrix<T>) -> UpperTriangular<T> {
    let n = s.rows();
    let pivot_tol = T::tol(PIVOT_TOL);
    let zero = Complex::new(T::zero(), T::zero());
    let mut c = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        let d = s[(i, i)].re - (0..i).map(|k| c[(k, i)].norm_sqr()).sum::<T>();
        if d <= pivot_tol {
            // rank-deficient direction: zero pivot, row left empty
            continue;
        }
        let pivot = d.sqrt();
        c[(i, i)] = Complex::new(pivot, T::zero());
        for j in i + 1..n {
            let acc = (0..i).fold(zero, |acc, k| acc + c[(k, i)].conj() * c[(k, j)]);
            c[(i, j)] = (s[(i, j)] - acc) / pivot;
        }
    }
    UpperTriangular { inner: c }
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations.
///
/// Eigenvalues are returned in descending order; column `k` of the second
/// value is the normalized eigenvector for eigenvalue `k`.
pub fn hermitian_eigen<T: Scalar>(s: &ComplexMatrix<T>) -> Result<(Vec<T>, ComplexMatrix<T>)> {
    if !s.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    let scale = T::one().max(s.max_abs());
    let deviation = s.hermitian_deviation();
    if deviation > T::tol(HERMITIAN_TOL) * scale {
        return Err(Error::NotHermitian {
            deviation: deviation.as_f64(),
        });
    }

    let n = s.rows();
    let zero = Complex::new(T::zero(), T::zero());
    let mut a = s.clone();
    // symmetrize exactly so the rotations act on a Hermitian matrix
    for i in 0..n {
        a[(i, i)] = Complex::new(a[(i, i)].re, T::zero());
        for j in i + 1..n {
            let avg = (a[(i, j)] + a[(j, i)].conj()).scale(T::lit(0.5));
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
    let mut v = ComplexMatrix::<T>::identity(n);
    let norm = a.frobenius_norm();
    let threshold = T::epsilon() * norm;

    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<T>()
            .sqrt();
        if off <= threshold || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r == T::zero() {
                    continue;
                }
                // phase that makes the (p, q) entry real and positive
                let phase = apq / r;
                let theta = (a[(q, q)].re - a[(p, p)].re) / (T::lit(2.0) * r);
                let t = theta.signum() / (theta.abs() + (T::one() + theta * theta).sqrt());
                let t = if theta == T::zero() { T::one() } else { t };
                let c = T::one() / (T::one() + t * t).sqrt();
                let sn = t * c;
                // J = diag(1, conj(phase)) · [[c, s], [-s, c]] on the (p, q) plane
                let ph = phase.conj();
                let jpp = Complex::new(c, T::zero());
                let jpq = Complex::new(sn, T::zero());
                let jqp = ph * (-sn);
                let jqq = ph * c;
                // A <- A J
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * jpp + akq * jqp;
                    a[(k, q)] = akp * jpq + akq * jqq;
                }
                // A <- J† A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = jpp.conj() * apk + jqp.conj() * aqk;
                    a[(q, k)] = jpq.conj() * apk + jqq.conj() * aqk;
                }
                a[(p, q)] = zero;
                a[(q, p)] = zero;
                a[(p, p)] = Complex::new(a[(p, p)].re, T::zero());
                a[(q, q)] = Complex::new(a[(q, q)].re, T::zero());
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * jpp + vkq * jqp;
                    v[(k, q)] = vkp * jpq + vkq * jqq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[(j, j)]
            .re
            .partial_cmp(&a[(i, i)].re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

/// `f(S)` for Hermitian `S`, applying `f` to each eigenvalue.
pub fn hermitian_function<T: Scalar>(
    s: &ComplexMatrix<T>,
    f: impl Fn(T) -> T,
) -> Result<ComplexMatrix<T>> {
    let (values, vectors) = hermitian_eigen(s)?;
    let n = s.rows();
    let mut out = ComplexMatrix::zeros(n, n);
    for (k, &lambda) in values.iter().enumerate() {
        let fl = f(lambda);
        for i in 0..n {
            let vik = vectors[(i, k)] * fl;
            for j in 0..n {
                out[(i, j)] += vik * vectors[(j, k)].conj();
            }
        }
    }
    Ok(out)
}
