//! MCL-GAN on 2D synthetic mixtures: one generator trained against a bank of
//! specialized discriminators under a multiple-choice-learning assignment.
//!
//! The numeric core (tape autodiff, optimizer, losses, MCL machinery) is
//! generic over the scalar type; training and evaluation run in `f64`.

pub mod adam;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod losses;
pub mod mcl;
pub mod metrics;
pub mod nets;
pub mod ops;
pub mod prd;
pub mod rng;
pub mod scalar;
pub mod tape;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Scalar type used by training and evaluation.
pub type Real = f64;
/// Dense matrix over the training scalar.
pub type RealTensor = tensor::Tensor<Real>;
/// Autodiff tape over the training scalar.
pub type RealTape = tape::Tape<Real>;
