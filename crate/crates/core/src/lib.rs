//! Multiclass network intrusion detection on NSL-KDD.
//!
//! The crate covers the full experiment path: parsing NSL-KDD text files,
//! fitting one-hot/min-max preprocessing on training data, four classifiers
//! (multinomial logistic regression, CART, random forest, Newton-boosted
//! trees) and an imbalanced-multiclass evaluation suite.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*F64` and
//! `*F32` aliases below fix the width for callers that do not care.

pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod linear;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod preprocess;
pub mod rng;
pub mod scalar;
pub mod synth;
pub mod tree;

pub use dataset::{ClassLabel, LabeledDataset, NUM_CLASSES};
pub use error::{Error, Result};
pub use matrix::DesignMatrix;
pub use scalar::Scalar;

pub type DesignMatrixF64 = matrix::DesignMatrix<f64>;
pub type DesignMatrixF32 = matrix::DesignMatrix<f32>;
pub type LogRegF64 = linear::LogRegModel<f64>;
pub type LogRegF32 = linear::LogRegModel<f32>;
pub type CartF64 = tree::ClassificationTree<f64>;
pub type CartF32 = tree::ClassificationTree<f32>;
pub type ForestF64 = ensemble::ForestModel<f64>;
pub type ForestF32 = ensemble::ForestModel<f32>;
pub type GbtF64 = ensemble::GbtModel<f64>;
pub type GbtF32 = ensemble::GbtModel<f32>;
pub type TrainedModelF64 = model::TrainedModel<f64>;
