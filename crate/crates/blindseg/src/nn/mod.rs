//! Minimal numeric kernel: the four layer primitives with exact forward and
//! backward passes, the Adam optimizer, and a finite-difference gradient
//! checker.
//!
//! Tensors are immutable once produced by an op; parameters are mutated only
//! by gradient accumulation and [`adam::adam_step`]. One training step runs
//! at a time; inner loops parallelize only over independent output cells, so
//! forward passes are bitwise independent of the thread count and backward
//! passes use the fixed reduction orders documented on each op.

pub mod adam;
pub mod conv;
pub mod diagnostics;
pub mod gradcheck;
pub mod norm;
pub mod ops;
pub(crate) mod par;

pub use adam::{adam_step, AdamConfig};
pub use conv::{conv1d_backward, conv1d_forward, conv1d_out_len};
pub use diagnostics::encoder_nce_grad_check;
pub use gradcheck::{grad_check, GradCheckReport};
pub use norm::{BatchNorm, NormCache};
pub use ops::{leaky_relu, leaky_relu_backward, linear_backward, linear_forward};
