//! Explainable hierarchical attention network (HAN) for user-level
//! depression screening.
//!
//! A user is a set of tweet embeddings plus a set of metaphor concept
//! mapping (MCM) embeddings. Each set is encoded by a stack of HAN layers
//! (context-level attention with a trainable query, FNN projections and
//! layer normalization); the two final queries are fused by a small
//! classifier head. Attention weights of every layer are kept so that
//! predictions can be explained by ranking the user's tweets and mappings.
//!
//! Modules:
//! - [`tensor`] / [`autodiff`]: dense matrices, reverse-mode gradients, and a
//!   finite-difference checker.
//! - [`encoder`]: HAN layers and stacks.
//! - [`head`]: branch fusion, prediction, cross-entropy and the full model.
//! - [`mcm`]: metaphor concept mapping acquisition.
//! - [`data`]: dataset files, preprocessing, IMDL transform, splits, padding
//!   and synthetic data.
//! - [`train`]: Adam, training loop, metrics and parameter accounting.
//! - [`explain`]: attention-based explanation reports.

pub mod autodiff;
pub mod cli;
pub mod data;
pub mod encoder;
pub mod error;
pub mod explain;
pub mod head;
pub mod mcm;
pub mod tensor;
pub mod train;

pub use autodiff::{finite_diff_check, GradCheck, Gradients, Param, ParamId, Parameterized, Tape};
pub use error::{HanError, Result};
pub use tensor::Mat;
