//! Log-likelihood of measurement data as a function of a Cholesky factor.
//!
//! A parameter vector of length `(NM)²` encodes an upper-triangular `C`
//! with nonnegative real diagonal; the candidate Choi matrix is `S = C†C`,
//! positive by construction. Each observation contributes
//! `log Tr[S (F ⊗ ρᵀ)]`, evaluated as a squared norm so the argument of the
//! logarithm is never negative:
//!
//! * projective effect `F = |φ⟩⟨φ|` on pure input `ψ`: `‖C (φ ⊗ ψ*)‖²`;
//! * general effect `F = A†A`, input `ρᵀ = R†R`: `‖C (A ⊗ R)†‖_F²`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::experiment::MeasurementRecord;
use crate::linalg::{cholesky, tensor_product, tensor_vec, ComplexMatrix, UpperTriangular};
use crate::scalar::Scalar;

/// Default lower clamp of per-record probabilities inside the logarithm.
pub const DEFAULT_FLOOR: f64 = 1e-12;
/// Records per partial sum before the pairwise reduction.
pub const REDUCTION_CHUNK: usize = 256;

/// Flat real parameters of a Cholesky factor.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector<T>(Vec<T>);

impl<T: Scalar> ParamVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "parameter {i} is not finite"
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![T::zero(); len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }
}

/// Number of real parameters for an `N`-to-`M` map.
pub fn param_len(dim_in: usize, dim_out: usize) -> usize {
    let d = dim_in * dim_out;
    d * d
}

/// Decodes `v` into `C`: the first `NM` entries become the diagonal
/// (through `|·|`), the rest fill the strictly upper triangle in row-major
/// order as interleaved `(re, im)` pairs.
pub fn params_to_cholesky<T: Scalar>(
    v: &[T],
    dim_in: usize,
    dim_out: usize,
) -> Result<UpperTriangular<T>> {
    let d = dim_in * dim_out;
    if v.len() != d * d {
        return Err(Error::LengthMismatch {
            expected: d * d,
            got: v.len(),
        });
    }
    let mut c = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        c[(i, i)] = Complex::new(v[i].abs(), T::zero());
    }
    let mut k = d;
    for i in 0..d {
        for j in i + 1..d {
            c[(i, j)] = Complex::new(v[k], v[k + 1]);
            k += 2;
        }
    }
    UpperTriangular::from_matrix(c)
}

/// Inverse of [`params_to_cholesky`].
pub fn cholesky_to_params<T: Scalar>(c: &UpperTriangular<T>) -> ParamVector<T> {
    let d = c.dim();
    let m = c.as_matrix();
    let mut v = Vec::with_capacity(d * d);
    v.extend((0..d).map(|i| m[(i, i)].re));
    for i in 0..d {
        for j in i + 1..d {
            v.push(m[(i, j)].re);
            v.push(m[(i, j)].im);
        }
    }
    ParamVector(v)
}

/// Parameters of the Cholesky factor of a positive semidefinite `S`.
pub fn choi_to_params<T: Scalar>(s: &ComplexMatrix<T>) -> Result<ParamVector<T>> {
    Ok(cholesky_to_params(&cholesky(s)?))
}

/// Data of the likelihood functional.
#[derive(Clone, Debug)]
pub struct LikelihoodContext<T> {
    dim_in: usize,
    dim_out: usize,
    floor: T,
    /// `φ ⊗ ψ*` for projective records, `NM` entries each.
    rank1: Vec<Complex<T>>,
    /// `(A ⊗ R)†` for general observations.
    general: Vec<ComplexMatrix<T>>,
}

impl<T: Scalar> LikelihoodContext<T> {
    pub fn from_records(records: &[MeasurementRecord<T>]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidParameter("no measurement records".into()));
        }
        let (dim_in, dim_out) = (records[0].state.dim(), 2);
        let mut rank1 = Vec::with_capacity(records.len() * dim_in * dim_out);
        for r in records {
            if r.state.dim() != dim_in {
                return Err(Error::DimensionMismatch(
                    "records mix input dimensions".into(),
                ));
            }
            let phi = r.measurement.ket(r.outcome);
            let psi_conj: Vec<Complex<T>> = r.state.amplitudes().iter().map(|z| z.conj()).collect();
            rank1.extend(tensor_vec(&phi, &psi_conj));
        }
        Ok(Self {
            dim_in,
            dim_out,
            floor: T::lit(DEFAULT_FLOOR),
            rank1,
            general: Vec::new(),
        })
    }

    /// Observations with arbitrary input density matrices `ρ` (`N x N`) and
    /// POVM effects `F` (`M x M`).
    pub fn from_general(
        observations: &[(ComplexMatrix<T>, ComplexMatrix<T>)],
        dim_in: usize,
        dim_out: usize,
    ) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::InvalidParameter("no observations".into()));
        }
        let mut general = Vec::with_capacity(observations.len());
        for (rho, effect) in observations {
            if rho.rows() != dim_in
                || !rho.is_square()
                || effect.rows() != dim_out
                || !effect.is_square()
            {
                return Err(Error::DimensionMismatch(format!(
                    "observation needs a {dim_in}x{dim_in} state and a {dim_out}x{dim_out} effect"
                )));
            }
            let r = cholesky(&rho.transpose())?;
            let a = cholesky(effect)?;
            general.push(tensor_product(a.as_matrix(), r.as_matrix()).adjoint());
        }
        Ok(Self {
            dim_in,
            dim_out,
            floor: T::lit(DEFAULT_FLOOR),
            rank1: Vec::new(),
            general,
        })
    }

    /// Sets the probability clamp; must lie in `(0, 1e-6]`.
    pub fn with_floor(mut self, floor: T) -> Result<Self> {
        if !(floor > T::zero() && floor <= T::lit(1e-6)) {
            return Err(Error::InvalidParameter(format!(
                "probability floor must lie in (0, 1e-6], got {floor}"
            )));
        }
        self.floor = floor;
        Ok(self)
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn floor(&self) -> T {
        self.floor
    }

    /// Number of observations `K`.
    pub fn len(&self) -> usize {
        let d = self.dim_in * self.dim_out;
        self.rank1.len() / d + self.general.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn param_len(&self) -> usize {
        param_len(self.dim_in, self.dim_out)
    }

    /// Per-observation probabilities `Tr[C†C (F ⊗ ρᵀ)]`, unclamped.
    pub fn probabilities(&self, c: &UpperTriangular<T>) -> Vec<T> {
        let d = self.dim_in * self.dim_out;
        let cm = c.as_matrix();
        let mut out: Vec<T> = self
            .rank1
            .chunks_exact(d)
            .map(|w| rank1_probability(cm, w))
            .collect();
        out.extend(
            self.general
                .iter()
                .map(|g| (cm * g).frobenius_norm().powi(2)),
        );
        out
    }

    fn log_sum(&self, c: &UpperTriangular<T>) -> T {
        let d = self.dim_in * self.dim_out;
        let cm = c.as_matrix();
        let floor = self.floor;
        let mut partial: Vec<T> = self
            .rank1
            .chunks(d * REDUCTION_CHUNK)
            .map(|block| {
                block
                    .chunks_exact(d)
                    .map(|w| rank1_probability(cm, w).max(floor).ln())
                    .fold(T::zero(), |a, b| a + b)
            })
            .collect();
        partial.extend(self.general.chunks(REDUCTION_CHUNK).map(|block| {
            block
                .iter()
                .map(|g| (cm * g).frobenius_norm().powi(2).max(floor).ln())
                .fold(T::zero(), |a, b| a + b)
        }));
        pairwise_sum(partial)
    }
}

/// `‖C w‖²` for upper-triangular `C`.
#[inline]
fn rank1_probability<T: Scalar>(c: &ComplexMatrix<T>, w: &[Complex<T>]) -> T {
    let d = w.len();
    let mut total = T::zero();
    for i in 0..d {
        let mut acc = Complex::new(T::zero(), T::zero());
        for j in i..d {
            acc += c[(i, j)] * w[j];
        }
        total += acc.norm_sqr();
    }
    total
}

/// Deterministic pairwise reduction.
fn pairwise_sum<T: Scalar>(mut values: Vec<T>) -> T {
    if values.is_empty() {
        return T::zero();
    }
    while values.len() > 1 {
        values = values
            .chunks(2)
            .map(|p| if p.len() == 2 { p[0] + p[1] } else { p[0] })
            .collect();
    }
    values[0]
}

/// `Σ_l log max(floor, Tr[C†C (F_l ⊗ ρ_lᵀ)])`.
pub fn log_likelihood<T: Scalar>(v: &[T], ctx: &LikelihoodContext<T>) -> Result<T> {
    let c = params_to_cholesky(v, ctx.dim_in, ctx.dim_out)?;
    Ok(ctx.log_sum(&c))
}

/// Log-likelihood for an explicit factor `C`.
pub fn log_likelihood_factor<T: Scalar>(c: &UpperTriangular<T>, ctx: &LikelihoodContext<T>) -> T {
    ctx.log_sum(c)
}

/// `(K/N) Tr[C†C]`, which equals `(K/N) ‖v‖²` under the parameterization.
pub fn trace_penalty<T: Scalar>(v: &[T], ctx: &LikelihoodContext<T>) -> T {
    let k = T::from_usize(ctx.len()).expect("record count fits");
    let n = T::from_usize(ctx.dim_in).expect("dimension fits");
    k / n * v.iter().map(|&x| x * x).sum::<T>()
}

/// `L(C) − (K/N) Tr[C†C]`.
pub fn penalized_log_likelihood<T: Scalar>(v: &[T], ctx: &LikelihoodContext<T>) -> Result<T> {
    Ok(log_likelihood(v, ctx)? - trace_penalty(v, ctx))
}

/// Penalized log-likelihood for an explicit positive `S`; used by reduced
/// channel models that build `S` directly.
pub fn penalized_log_likelihood_choi<T: Scalar>(
    s: &ComplexMatrix<T>,
    ctx: &LikelihoodContext<T>,
) -> T {
    let c = crate::linalg::cholesky_unchecked(s);
    let k = T::from_usize(ctx.len()).expect("record count fits");
    let n = T::from_usize(ctx.dim_in).expect("dimension fits");
    ctx.log_sum(&c) - k / n * s.trace().re
}
