//! Planning cost-effective annotation of extractive question answering data.
//!
//! The crate is organised bottom-up:
//!
//! - [`corpus`]: SQuAD-format ingestion, tokenization and preprocessing.
//! - [`metrics`]: Exact Match and token F1.
//! - [`scorer`]: span distributions, entropy, the built-in linear-softmax
//!   baseline and the client for external scorer processes.
//! - [`strategies`]: sample-selection strategies and worklist export.
//! - [`simulation`]: the incremental annotation experiment, saturation
//!   detection and strategy comparison.
//!
//! The numerical kernels are generic over [`Scalar`]; the aliases below fix
//! them to `f64`, which is what the rest of the crate uses.

pub mod corpus;
pub mod error;
pub mod fsutil;
pub mod metrics;
pub mod rng;
pub mod scalar;
pub mod scorer;
pub mod simulation;
pub mod strategies;
pub mod synthetic;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;

/// Span prediction over `f64` probabilities.
pub type SpanPrediction = scorer::SpanPrediction<f64>;
/// Span prediction over `f32` probabilities.
pub type SpanPredictionF32 = scorer::SpanPrediction<f32>;
/// The built-in baseline model with `f64` weights.
pub type BaselineModel = scorer::BaselineModel<f64>;
/// The built-in baseline model with `f32` weights.
pub type BaselineModelF32 = scorer::BaselineModel<f32>;
/// Per-token feature matrix with `f64` entries.
pub type FeatureMatrix = scorer::FeatureMatrix<f64>;
