//! Benchmark harness for benign/malignant dermoscopy classification.
//!
//! The pipeline mirrors a fixed experimental recipe: ingest an ISIC-style
//! image folder, build a deterministic stratified 70/30 manifest, augment the
//! training stream (zoom, rotation, flips), fine-tune one of four
//! convolutional backbones with Adam on categorical cross-entropy, then
//! report accuracy/precision/recall/F1 alongside training curves, confusion
//! matrices and cross-model comparison tables.
//!
//! Core numerics are generic over the scalar type (`f32` or `f64`) through
//! [`scalar::Real`]; `f32` is the default used by the CLI.

pub mod cli;
pub mod data;
pub mod error;
pub mod metrics;
pub mod modelzoo;
pub mod nn;
pub mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Real;

/// Scalar type used by the CLI and the default type aliases.
pub type DefaultScalar = f32;

/// Classifier specialized to the default scalar.
pub type Classifier = modelzoo::ClassifierModel<DefaultScalar>;
/// Classifier in double precision, mainly for gradient-accuracy checks.
pub type Classifier64 = modelzoo::ClassifierModel<f64>;
/// Image tensor in the default scalar.
pub type Image = data::ImageTensor<DefaultScalar>;
