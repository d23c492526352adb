use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::ComplexMatrix;
use crate::scalar::Scalar;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix<f64> {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        Complex::new(f64::sample_normal(rng), f64::sample_normal(rng))
    })
}

/// Random density matrix `G G† / Tr[G G†]`.
pub fn random_density(rng: &mut ChaCha8Rng, dim: usize) -> ComplexMatrix<f64> {
    let g = random_matrix(rng, dim, dim);
    let rho = &g * &g.adjoint();
    let tr = rho.trace().re;
    rho.scale(1.0 / tr)
}
