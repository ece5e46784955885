//! Tensor container and the layer kernels of the trajectory network.
//!
//! Activations are batched NHWC (`[batch, height, width, channels]`) or
//! `[batch, features]` for the dense tail. Every kernel is generic over
//! [`Real`] so the same code runs in f32 for training and f64 for gradient
//! checks.

mod activation;
mod adam;
mod batchnorm;
mod conv;
mod dense;
pub mod gradcheck;
mod init;
mod loss;
mod pool;
mod simd;
mod tensor;

pub use activation::{dropout, dropout_backward, flatten, relu, relu_backward, unflatten, DropoutMask};
pub use adam::{AdamConfig, AdamState};
pub use batchnorm::{BatchNorm, BatchNormCache, BatchStats, BN_EPSILON, BN_MOMENTUM};
pub use conv::{Conv2d, ConvGrads};
pub use dense::{Dense, DenseGrads};
pub use init::{glorot_limit, glorot_uniform, glorot_uniform_seeded};
pub use loss::{mse_loss, rmse};
pub use pool::{MaxPool2d, PoolIndices};
pub use tensor::Tensor;

use std::fmt::Debug;
use std::iter::Sum;

/// Scalar type a kernel can run in.
pub trait Real: num_traits::Float + num_traits::FromPrimitive + Sum + Debug + Send + Sync + 'static {
    /// Checkpoint dtype code.
    const DTYPE: u8;

    fn from_f64_lossy(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("finite cast")
    }

    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {
    const DTYPE: u8 = 0;
}

impl Real for f64 {
    const DTYPE: u8 = 1;
}

/// Whether batch statistics and dropout are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}
