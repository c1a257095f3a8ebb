//! Self-supervised phoneme boundary detection from raw audio.
//!
//! The toolkit trains a strided-convolution encoder on raw 16 kHz waveforms
//! with a noise-contrastive objective over adjacent frames, then finds
//! segment boundaries by peak-picking the cosine dissimilarity between
//! consecutive learned frames. It ships with the full evaluation suite
//! (precision/recall/F1 at a time tolerance, over-segmentation, R-value) and
//! a synthetic-corpus generator so the whole pipeline can be exercised
//! without licensed speech datasets.
//!
//! See the `examples/` directory for one runnable example per capability,
//! and the `blindseg` binary for the equivalent command-line entry points.

pub mod checkpoint;
pub mod config;
pub mod contrastive;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod segmenter;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{Parameter, Scalar, Tensor};
