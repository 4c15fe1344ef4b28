//! 4x single-image super-resolution with weighted dense blocks, residual
//! spatial attention and residual deconvolution, on a small CPU autodiff core.

pub mod blocks;
pub mod imageio;
pub mod kv;
pub mod metrics;
pub mod tensor;
pub mod train;
