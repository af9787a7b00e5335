//! Joint multiple intent detection and slot filling for spoken language
//! understanding.
//!
//! The crate provides the full pipeline at desk scale:
//!
//! - [`autodiff`]: a dense-tensor engine with reverse-mode differentiation,
//!   the Adam optimizer and a finite-difference gradient checker,
//! - [`corpus`]: dataset model, text format I/O, vocabularies, batching and
//!   the multi-intent corpus mixer,
//! - [`model`]: the network itself — self-attentive BiLSTM encoder,
//!   multi-label intent decoder, and a slot decoder refined per token by a
//!   graph attention layer over the predicted intents (plus the ablation
//!   variants of that interaction),
//! - [`training`]: multi-task loss, epoch loop, checkpointing and dev-set
//!   model selection,
//! - [`metrics`]: span-level slot F1, intent accuracy / macro F1, overall
//!   accuracy and attention-weight export.
//!
//! All numeric code is generic over the scalar type: `f32` is the training
//! precision, `f64` is used for gradient checking.

pub mod autodiff;
pub mod corpus;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod training;

pub use scalar::Scalar;

/// Training-precision tensor.
pub type Tensor32 = autodiff::Tensor<f32>;
/// Gradient-checking-precision tensor.
pub type Tensor64 = autodiff::Tensor<f64>;
/// Training-precision parameter set.
pub type ModelParams32 = model::ModelParams<f32>;
/// Gradient-checking-precision parameter set.
pub type ModelParams64 = model::ModelParams<f64>;
