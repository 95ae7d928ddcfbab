//! Account-level factuality classification for news-publishing social accounts.
//!
//! The pipeline reads account timelines, splits them into chronological chunks,
//! turns each tweet into a concatenated feature vector (emotion, sentiment,
//! morality, style, word embeddings), and classifies each chunk with an LSTM +
//! attention network. Account labels come from a majority vote over chunk
//! predictions. The [`eval`] module provides the cross-validation harness,
//! ablations, sweeps, and a synthetic corpus generator; [`baselines`] holds the
//! comparison systems.

pub mod baselines;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod eval;
pub mod features;
pub mod lexicons;
pub mod linalg;
pub mod scalar;
pub mod seqnet;

/// Default scalar type for the training pipeline. Double precision keeps the
/// finite-difference gradient checks tight.
pub type Real = f64;

/// Concrete network parameters used by the pipeline.
pub type SeqNetParams = seqnet::SeqNetParams<Real>;
/// Concrete linear model used by the baselines.
pub type LinearModel = baselines::LinearModel<Real>;
/// Concrete dense matrix alias.
pub type Matrix = linalg::Matrix<Real>;
