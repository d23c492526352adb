//! Completely positive maps in Kraus and Choi form.
//!
//! The Choi operator of a map `E: L(H) -> L(K)` is
//! `S = (E ⊗ 1)(|Ψ⟩⟨Ψ|)` with the unnormalized maximally entangled vector
//! `|Ψ⟩ = Σ_n |n⟩|n⟩`, stored on `K ⊗ H` (output factor first). A Kraus
//! operator `A` corresponds to the vector `(A ⊗ 1)|Ψ⟩`, whose component
//! `(m, n)` is `A[m, n]`; that is the row-major flattening of `A`.
//!
//! The operator basis used for the canonical (random-unitary) form is the
//! matrix-unit basis `V_(a,b) = |a⟩⟨b|` indexed as `a * N + b`. It is
//! orthonormal under `Tr[V_i† V_j]`.

use num_complex::Complex;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eigen, hermitian_function, partial_trace, partial_transpose, tensor_product,
    ComplexMatrix, Factor, PSD_TOL,
};
use crate::scalar::Scalar;

/// Tolerance of the Kraus completeness relation `Σ A†A = 1`.
pub const TP_TOL: f64 = 1e-10;
/// Eigenvalues of a Choi matrix at or below this are dropped when extracting Kraus operators.
pub const KRAUS_CUTOFF: f64 = 1e-12;

/// CP map as a list of `M x N` Kraus operators.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausSet<T> {
    dim_in: usize,
    dim_out: usize,
    operators: Vec<ComplexMatrix<T>>,
}

impl<T: Scalar> KrausSet<T> {
    /// Trace-preserving Kraus set; checks shapes and `Σ A†A = 1` within [`TP_TOL`].
    pub fn new(operators: Vec<ComplexMatrix<T>>) -> Result<Self> {
        let set = Self::without_tp_check(operators)?;
        let dev = set.completeness_deviation();
        if dev > T::tol(TP_TOL) {
            return Err(Error::InvalidParameter(format!(
                "Kraus operators are not trace preserving (deviation {:e})",
                dev.as_f64()
            )));
        }
        Ok(set)
    }

    /// General (possibly trace-decreasing or increasing) CP map.
    pub fn without_tp_check(operators: Vec<ComplexMatrix<T>>) -> Result<Self> {
        let first = operators
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty Kraus set".into()))?;
        let (dim_out, dim_in) = (first.rows(), first.cols());
        if let Some(bad) = operators
            .iter()
            .find(|a| a.rows() != dim_out || a.cols() != dim_in)
        {
            return Err(Error::DimensionMismatch(format!(
                "Kraus operators must all be {dim_out}x{dim_in}, found {}x{}",
                bad.rows(),
                bad.cols()
            )));
        }
        Ok(Self {
            dim_in,
            dim_out,
            operators,
        })
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn operators(&self) -> &[ComplexMatrix<T>] {
        &self.operators
    }

    /// `‖Σ A†A − 1‖_F`.
    pub fn completeness_deviation(&self) -> T {
        let sum = self
            .operators
            .iter()
            .fold(ComplexMatrix::zeros(self.dim_in, self.dim_in), |acc, a| {
                &acc + &(&a.adjoint() * a)
            });
        sum.distance(&ComplexMatrix::identity(self.dim_in))
    }
}

/// Positive operator `S` on `K ⊗ H` representing a CP map.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiMatrix<T> {
    dim_in: usize,
    dim_out: usize,
    s: ComplexMatrix<T>,
}

impl<T: Scalar> ChoiMatrix<T> {
    /// Validates shape, Hermiticity and positivity (eigenvalues ≥ `-PSD_TOL`).
    pub fn new(s: ComplexMatrix<T>, dim_in: usize, dim_out: usize) -> Result<Self> {
        let d = dim_in * dim_out;
        if !s.is_square() || s.rows() != d || d == 0 {
            return Err(Error::DimensionMismatch(format!(
                "Choi matrix for N={dim_in}, M={dim_out} must be {d}x{d}, got {}x{}",
                s.rows(),
                s.cols()
            )));
        }
        let (values, _) = hermitian_eigen(&s)?;
        let min = values.last().copied().unwrap_or_else(T::zero);
        if min < -T::tol(PSD_TOL) {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: min.as_f64(),
            });
        }
        Ok(Self { dim_in, dim_out, s })
    }

    /// Skips validation; callers guarantee `s = C†C` or an equivalent construction.
    pub(crate) fn from_psd_unchecked(s: ComplexMatrix<T>, dim_in: usize, dim_out: usize) -> Self {
        debug_assert_eq!(s.rows(), dim_in * dim_out);
        Self { dim_in, dim_out, s }
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.s
    }

    pub fn into_matrix(self) -> ComplexMatrix<T> {
        self.s
    }

    pub fn trace(&self) -> T {
        self.s.trace().re
    }

    /// Same map with `S` multiplied by `factor` (must be ≥ 0).
    pub fn scaled(&self, factor: T) -> Self {
        assert!(
            factor >= T::zero(),
            "scaling a Choi matrix by a negative factor"
        );
        Self::from_psd_unchecked(self.s.scale(factor), self.dim_in, self.dim_out)
    }
}

/// Random-unitary form `E(ρ) = Σ p_n U_n ρ U_n†` with `Tr[U_i† U_j] = δ_ij`.
#[derive(Clone, Debug)]
pub struct CanonicalForm<T> {
    pub weights: Vec<T>,
    pub operators: Vec<ComplexMatrix<T>>,
}

impl<T: Scalar> CanonicalForm<T> {
    pub fn apply(&self, rho: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
        let mut out = ComplexMatrix::zeros(rho.rows(), rho.cols());
        for (p, u) in self.weights.iter().zip(&self.operators) {
            let term = u.matmul(rho)?.matmul(&u.adjoint())?;
            out = &out + &term.scale(*p);
        }
        Ok(out)
    }
}

/// `|Ψ⟩ = Σ_n |n⟩|n⟩` on `C^n ⊗ C^n`.
pub fn max_entangled<T: Scalar>(n: usize) -> Vec<Complex<T>> {
    let mut v = vec![Complex::new(T::zero(), T::zero()); n * n];
    for i in 0..n {
        v[i * n + i] = Complex::new(T::one(), T::zero());
    }
    v
}

/// `σ_0 = 1, σ_x, σ_y, σ_z`.
pub fn paulis<T: Scalar>() -> [ComplexMatrix<T>; 4] {
    let o = Complex::new(T::zero(), T::zero());
    let one = Complex::new(T::one(), T::zero());
    let i = Complex::new(T::zero(), T::one());
    let m = |d: [Complex<T>; 4]| ComplexMatrix::new(2, 2, d.to_vec()).expect("2x2");
    [
        m([one, o, o, one]),
        m([o, one, one, o]),
        m([o, -i, i, o]),
        m([one, o, o, -one]),
    ]
}

fn check_state<T: Scalar>(rho: &ComplexMatrix<T>, dim: usize) -> Result<()> {
    if !rho.is_square() || rho.rows() != dim {
        return Err(Error::DimensionMismatch(format!(
            "state must be {dim}x{dim}, got {}x{}",
            rho.rows(),
            rho.cols()
        )));
    }
    Ok(())
}

/// `E(ρ) = Σ_k A_k ρ A_k†`.
pub fn kraus_apply<T: Scalar>(k: &KrausSet<T>, rho: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    check_state(rho, k.dim_in)?;
    let mut out = ComplexMatrix::zeros(k.dim_out, k.dim_out);
    for a in &k.operators {
        out = &out + &a.matmul(rho)?.matmul(&a.adjoint())?;
    }
    Ok(out)
}

/// `S = Σ_k (A_k ⊗ 1)|Ψ⟩⟨Ψ|(A_k ⊗ 1)†`.
pub fn choi_from_kraus<T: Scalar>(k: &KrausSet<T>) -> ChoiMatrix<T> {
    let n = k.dim_in;
    let psi = ComplexMatrix::column(&max_entangled::<T>(n));
    let id = ComplexMatrix::identity(n);
    let d = n * k.dim_out;
    let mut s = ComplexMatrix::zeros(d, d);
    for a in &k.operators {
        let v = &tensor_product(a, &id) * &psi;
        s = &s + &(&v * &v.adjoint());
    }
    ChoiMatrix::from_psd_unchecked(s, n, k.dim_out)
}

/// `E(ρ) = Tr_H[(1_K ⊗ ρᵀ) S]`.
pub fn choi_apply<T: Scalar>(
    c: &ChoiMatrix<T>,
    rho: &ComplexMatrix<T>,
) -> Result<ComplexMatrix<T>> {
    check_state(rho, c.dim_in)?;
    let lifted = tensor_product(&ComplexMatrix::identity(c.dim_out), &rho.transpose());
    partial_trace(&(&lifted * &c.s), c.dim_out, c.dim_in, Factor::Second)
}

/// `E(ρ) = Tr_H[(1_K ⊗ ρ) S^Γ]`, the partially transposed route to [`choi_apply`].
pub fn choi_apply_transposed<T: Scalar>(
    c: &ChoiMatrix<T>,
    rho: &ComplexMatrix<T>,
) -> Result<ComplexMatrix<T>> {
    check_state(rho, c.dim_in)?;
    let sg = partial_transpose(&c.s, c.dim_out, c.dim_in)?;
    let lifted = tensor_product(&ComplexMatrix::identity(c.dim_out), rho);
    partial_trace(&(&lifted * &sg), c.dim_out, c.dim_in, Factor::Second)
}

/// Spectral Kraus decomposition `A_k = √λ_k · unvec(v_k)`.
pub fn kraus_from_choi<T: Scalar>(c: &ChoiMatrix<T>) -> Result<KrausSet<T>> {
    let (values, vectors) = hermitian_eigen(&c.s)?;
    let min = values.last().copied().unwrap_or_else(T::zero);
    if min < -T::tol(PSD_TOL) {
        return Err(Error::NotPositiveSemidefinite {
            min_eigenvalue: min.as_f64(),
        });
    }
    let (n, m) = (c.dim_in, c.dim_out);
    let mut ops: Vec<ComplexMatrix<T>> = values
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > T::tol(KRAUS_CUTOFF))
        .map(|(k, &l)| {
            let amp = l.sqrt();
            ComplexMatrix::from_fn(m, n, |row, col| vectors[(row * n + col, k)] * amp)
        })
        .collect();
    if ops.is_empty() {
        ops.push(ComplexMatrix::zeros(m, n));
    }
    KrausSet::without_tp_check(ops)
}

fn matrix_unit<T: Scalar>(n: usize, index: usize) -> ComplexMatrix<T> {
    let mut v = ComplexMatrix::zeros(n, n);
    v[(index / n, index % n)] = Complex::new(T::one(), T::zero());
    v
}

/// Diagonalizes `q_ij = Σ_k Tr[A_k V_i†] Tr[A_k† V_j]` to obtain the
/// random-unitary form of a map with equal input and output dimension.
pub fn canonical_form<T: Scalar>(c: &ChoiMatrix<T>) -> Result<CanonicalForm<T>> {
    if c.dim_in != c.dim_out {
        return Err(Error::NonSquareChannel {
            dim_in: c.dim_in,
            dim_out: c.dim_out,
        });
    }
    let n = c.dim_in;
    let kraus = kraus_from_choi(c)?;
    let basis: Vec<ComplexMatrix<T>> = (0..n * n).map(|i| matrix_unit(n, i)).collect();
    let coeffs: Vec<Vec<Complex<T>>> = kraus
        .operators
        .iter()
        .map(|a| {
            basis
                .iter()
                .map(|v| a.trace_product(&v.adjoint()).expect("square"))
                .collect()
        })
        .collect();
    let q = ComplexMatrix::from_fn(n * n, n * n, |i, j| {
        coeffs
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |acc, t| {
                acc + t[i] * t[j].conj()
            })
    });
    let (values, w) = hermitian_eigen(&q)?;
    let weights = values.iter().map(|&p| p.max(T::zero())).collect();
    let operators = (0..n * n)
        .map(|k| {
            basis
                .iter()
                .enumerate()
                .fold(ComplexMatrix::zeros(n, n), |acc, (i, v)| {
                    &acc + &v.scale_complex(w[(i, k)])
                })
        })
        .collect();
    Ok(CanonicalForm { weights, operators })
}

/// `(deviation ≤ tol, ‖Tr_K[S] − 1_N‖_F)`.
pub fn is_trace_preserving<T: Scalar>(c: &ChoiMatrix<T>, tol: T) -> (bool, T) {
    let reduced = partial_trace(&c.s, c.dim_out, c.dim_in, Factor::First).expect("shape checked");
    let dev = reduced.distance(&ComplexMatrix::identity(c.dim_in));
    (dev <= tol, dev)
}

/// `Σ_k A_k A_k† = 1_M` within `tol` (Frobenius).
pub fn is_bistochastic<T: Scalar>(k: &KrausSet<T>, tol: T) -> bool {
    let sum = k
        .operators
        .iter()
        .fold(ComplexMatrix::zeros(k.dim_out, k.dim_out), |acc, a| {
            &acc + &(a * &a.adjoint())
        });
    sum.distance(&ComplexMatrix::identity(k.dim_out)) <= tol
}

/// Pauli channel `Σ p_i σ_i ρ σ_i` with `σ_0 = 1`.
pub fn pauli_channel<T: Scalar>(p: [T; 4]) -> Result<KrausSet<T>> {
    if p.iter().any(|&x| !(x >= T::zero())) {
        return Err(Error::InvalidProbabilities(format!(
            "Pauli probabilities must be nonnegative, got {p:?}"
        )));
    }
    let total: T = p.iter().copied().sum();
    if (total - T::one()).abs() > T::tol(1e-12) {
        return Err(Error::InvalidProbabilities(format!(
            "Pauli probabilities must sum to 1, got {total}"
        )));
    }
    let ops = paulis::<T>()
        .into_iter()
        .zip(p)
        .map(|(s, pi)| s.scale(pi.sqrt()))
        .collect();
    KrausSet::new(ops)
}

/// Pauli weights `((1+3λ)/4, (1−λ)/4, (1−λ)/4, (1−λ)/4)` of the depolarizing channel.
pub fn depolarizing_probs<T: Scalar>(lambda: T) -> [T; 4] {
    let four = T::lit(4.0);
    let p0 = ((T::one() + T::lit(3.0) * lambda) / four).max(T::zero());
    let p1 = ((T::one() - lambda) / four).max(T::zero());
    [p0, p1, p1, p1]
}

/// Depolarizing channel `λρ + (1−λ)/2 · 1` for `λ ∈ [−1/3, 1]`.
pub fn depolarizing<T: Scalar>(lambda: T) -> Result<KrausSet<T>> {
    let lo = -T::one() / T::lit(3.0) - T::tol(1e-12);
    if !(lambda >= lo && lambda <= T::one() + T::tol(1e-12)) {
        return Err(Error::InvalidParameter(format!(
            "depolarizing parameter must lie in [-1/3, 1], got {lambda}"
        )));
    }
    pauli_channel(depolarizing_probs(lambda.min(T::one())))
}

/// Amplitude damping with `M_1 = diag(1, √p)` and `M_2 = √(1−p)|0⟩⟨1|`.
///
/// `p = 1` is the identity and `p = 0` sends every state to `|0⟩⟨0|`.
pub fn amplitude_damping<T: Scalar>(p: T) -> Result<KrausSet<T>> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::InvalidParameter(format!(
            "damping parameter must lie in [0, 1], got {p}"
        )));
    }
    let o = Complex::new(T::zero(), T::zero());
    let r = |x: T| Complex::new(x, T::zero());
    let m1 = ComplexMatrix::new(2, 2, vec![r(T::one()), o, o, r(p.sqrt())])?;
    let m2 = ComplexMatrix::new(2, 2, vec![o, r((T::one() - p).sqrt()), o, o])?;
    KrausSet::new(vec![m1, m2])
}

pub fn identity_channel<T: Scalar>(n: usize) -> KrausSet<T> {
    KrausSet::new(vec![ComplexMatrix::identity(n)]).expect("identity is trace preserving")
}

/// Random trace-preserving Kraus set: Gaussian `G_k`, `A_k = G_k T^{-1/2}`
/// with `T = Σ G_k† G_k`.
pub fn random_tp_kraus<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    dim_in: usize,
    dim_out: usize,
    count: usize,
) -> KrausSet<T> {
    let gs: Vec<ComplexMatrix<T>> = (0..count.max(1))
        .map(|_| {
            ComplexMatrix::from_fn(dim_out, dim_in, |_, _| {
                Complex::new(T::sample_normal(rng), T::sample_normal(rng))
            })
        })
        .collect();
    let t = gs
        .iter()
        .fold(ComplexMatrix::zeros(dim_in, dim_in), |acc, g| {
            &acc + &(&g.adjoint() * g)
        });
    let inv_sqrt =
        hermitian_function(&t, |x| T::one() / x.sqrt()).expect("Gram matrix is Hermitian");
    let ops = gs.iter().map(|g| g * &inv_sqrt).collect();
    KrausSet::without_tp_check(ops).expect("uniform shapes")
}
