//! A compact reverse-mode automatic differentiation engine for dense
//! `[B, C, H, W]` image tensors on the CPU.
//!
//! The engine is deliberately small: tensors are immutable, reference-counted
//! nodes in a dynamically built graph, and [`Tensor::backward`] walks that
//! graph in reverse topological order. Everything is generic over [`Float`]
//! so that training can run in `f32` while gradient checks run in `f64`.
//!
//! Convolutions (regular, transposed and deformable) lower to GEMM through
//! `matrixmultiply`, which keeps single-core throughput reasonable.

mod error;
mod float;
pub mod gradcheck;
pub mod init;
mod ops;
pub mod optim;
mod param;
mod tensor;

pub use error::{Error, Result};
pub use float::Float;
pub use ops::conv::{Conv2dSpec, ConvTranspose2dSpec};
pub use ops::deform::DeformConv2dSpec;
pub use ops::unary::UnaryOp;
pub use init::Init;
pub use optim::{Adam, AdamConfig};
pub use param::{Param, ParamBuilder, ParamStore};
pub use tensor::{Gradients, Tensor};

use std::sync::atomic::{AtomicBool, Ordering};

static PARALLEL: AtomicBool = AtomicBool::new(false);

/// Enables batch-level parallelism inside convolution kernels.
///
/// Results are bit-identical either way: per-sample work is independent and
/// cross-sample reductions are always summed in batch order.
pub fn set_parallel(enabled: bool) {
    PARALLEL.store(enabled, Ordering::Relaxed);
}

pub fn parallel_enabled() -> bool {
    PARALLEL.load(Ordering::Relaxed)
}
