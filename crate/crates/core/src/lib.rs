//! Dictionary-based zero-shot classification.
//!
//! Trains a joint embedding dictionary model on labeled seen-class data,
//! scores unseen classes through a shared latent space, and adapts to the
//! unseen domain with a transductive self-training loop. All numerics are
//! generic over the scalar type ([`Scalar`], implemented for `f32`/`f64`);
//! use the `F64` aliases below unless you need single precision.

pub mod admm;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod inference;
pub mod io;
pub mod jedm;
pub mod matrix;
pub mod rng;
pub mod scalar;
pub mod tstd;

pub use dataset::{Hyperparams, SeenDataset, UnseenDataset};
pub use error::{Error, Result};
pub use eval::{EvalReport, SynthSpec};
pub use jedm::{AdmmConfig, JedmModel};
pub use matrix::DenseMatrix;
pub use scalar::Scalar;

pub type DenseMatrixF64 = DenseMatrix<f64>;
pub type DenseMatrixF32 = DenseMatrix<f32>;
pub type SeenDatasetF64 = SeenDataset<f64>;
pub type UnseenDatasetF64 = UnseenDataset<f64>;
pub type JedmModelF64 = JedmModel<f64>;
