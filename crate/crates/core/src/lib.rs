//! Coordinate-gated convolutions for static spatially-varying (de)convolution.
//!
//! The crate is generic over the scalar type: everything that only needs ring
//! arithmetic works for [`Scalar`] (including exact rationals), while training,
//! data generation and metrics require [`Real`]. Double precision is the
//! working type; see the aliases below.

pub mod autodiff;
pub mod datagen;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod pgm;
pub mod scalar;
pub mod snapshot;
pub mod tensor;

pub use autodiff::{Padding, Resample, Tape, Var};
pub use error::{Error, Result};
pub use scalar::{Real, Scalar};
pub use tensor::Tensor;

pub use num_rational::Rational64;

pub type Tensor64 = Tensor<f64>;
pub type Tensor32 = Tensor<f32>;
pub type TensorQ = Tensor<Rational64>;
pub type Tape64 = Tape<f64>;
pub type TapeQ = Tape<Rational64>;
pub type Model64 = nn::Model<f64>;
pub type Model32 = nn::Model<f32>;
pub type Dataset64 = datagen::DatasetPair<f64>;
