//! Maximum-likelihood reconstruction of completely positive maps from
//! randomized state preparations and projective measurements.
//!
//! The numerical core is generic over the real scalar ([`Scalar`], implemented
//! for `f32` and `f64`). The aliases below fix the scalar for everyday use.

pub mod catalog;
pub mod channels;
pub mod error;
pub mod experiment;
pub mod likelihood;
pub mod linalg;
pub mod optimizer;
pub mod reconstruct;
pub mod scalar;
#[cfg(test)]
mod test_util;

pub use catalog::ChannelSpec;
pub use error::{Error, Result};
pub use reconstruct::{reconstruct, Model, ReconstructOptions};
pub use scalar::Scalar;

pub type Matrix = linalg::ComplexMatrix<f64>;
pub type Choi = channels::ChoiMatrix<f64>;
pub type Kraus = channels::KrausSet<f64>;
pub type Record = experiment::MeasurementRecord<f64>;
pub type Reconstruction = reconstruct::ReconstructionResult<f64>;

pub type Matrix32 = linalg::ComplexMatrix<f32>;
pub type Choi32 = channels::ChoiMatrix<f32>;
pub type Kraus32 = channels::KrausSet<f32>;
pub type Record32 = experiment::MeasurementRecord<f32>;
pub type Reconstruction32 = reconstruct::ReconstructionResult<f32>;
