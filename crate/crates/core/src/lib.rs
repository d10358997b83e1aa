//! Activation-function engineering toolkit.
//!
//! The crate covers five activation functions (ReLU, ReLU6, Sigmoid, Swish,
//! Hard-Swish) with exact derivatives, a small dense tensor library with
//! hand-written backward passes, staged residual mini-CNNs whose activation
//! sites can be swapped by layer group ("activation surgery"), smoothing of
//! per-frame phase probabilities with moving averages, kernel throughput
//! benchmarks, and an experiment runner that ties them together.

pub mod bench;
pub mod dataio;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod modelspec;
pub mod smoother;
pub mod tensor;

pub use error::{Error, Result};
pub use kernels::ActivationKind;
pub use tensor::{Rng, Tensor};
