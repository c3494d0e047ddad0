//! Inference engine for the LCS super-resolution generator.
//!
//! The crate covers the numeric kernels ([`ops`]), the generator graph and
//! its cost accounting ([`model`]), kernel merging for inference
//! ([`reparam`]), INT8 weight quantization ([`quantize`]), image quality
//! metrics ([`metrics`]) and the on-disk formats ([`io`]).

pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod ops;
pub mod quantize;
pub mod reparam;
pub mod synth;
pub mod tensor;

pub use error::{LcsError, Result};
pub use model::{Mode, ModelConfig, ModelWeights};
pub use ops::ConvWeights;
pub use tensor::{Element, Tensor};
