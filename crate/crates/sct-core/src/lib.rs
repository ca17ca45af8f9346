//! Spectral-compression transformer for 2D-to-3D human pose lifting.
//!
//! Framework-free building blocks: a dense tensor engine with reverse-mode
//! differentiation, an orthonormal DCT/IDCT pair with low-pass sequence
//! compression, line-pose-graph input augmentation, the dual-stream encoder
//! network, training losses, and evaluation metrics.
//!
//! All numerics are generic over [`Scalar`] (f32 or f64); the concrete
//! aliases [`Tensor32`] / [`Tensor64`] cover the two supported widths.

pub mod block;
pub mod error;
pub mod lpg;
pub mod metrics;
pub mod network;
pub mod scalar;
pub mod spectral;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::Tensor;

/// 32-bit tensors: training and throughput benchmarks.
pub type Tensor32 = Tensor<f32>;
/// 64-bit tensors: gradient checks and reference computations.
pub type Tensor64 = Tensor<f64>;
