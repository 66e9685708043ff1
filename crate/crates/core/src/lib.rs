//! Detection of densely connected, attribute-coherent node groups in binary
//! attributed graphs.
//!
//! The pipeline embeds adjacency and attribute rows with a jointly trained
//! autoencoder, clusters the embeddings with DBSCAN after a deterministic
//! principal-component reduction, and ranks clusters by the density of their
//! induced subgraph. A synthetic-injection harness provides labeled
//! benchmarks for unsupervised hyperparameter search, and fingerprint
//! reports summarize each dense cluster for analyst review.

pub mod autoencoder;
pub mod baseline;
pub mod cluster;
pub mod error;
pub mod fingerprint;
pub mod graph;
pub mod matrix;
pub mod pipeline;
pub mod scalar;
pub mod seeding;
pub mod similarity;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Concrete single-precision aliases.
pub type DenseMatrixF32 = matrix::DenseMatrix<f32>;
pub type DistanceMatrixF32 = similarity::DistanceMatrix<f32>;
pub type ModelParamsF32 = autoencoder::ModelParams<f32>;
pub type LatentMatrixF32 = autoencoder::LatentMatrix<f32>;

/// Concrete double-precision aliases; the CLI pipeline runs on these.
pub type DenseMatrixF64 = matrix::DenseMatrix<f64>;
pub type DistanceMatrixF64 = similarity::DistanceMatrix<f64>;
pub type ModelParamsF64 = autoencoder::ModelParams<f64>;
pub type LatentMatrixF64 = autoencoder::LatentMatrix<f64>;
