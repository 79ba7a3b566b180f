//! Fraud detection toolkit for heavily imbalanced tabular data.
//!
//! The crate covers the whole modelling loop over CSV transaction data:
//!
//! - [`data`]: CSV ingestion, cleansing, one-hot encoding, min-max scaling and splits
//! - [`resample`]: SMOTE, ENN, Tomek links, their composites and ADASYN
//! - [`neural`]: a small dense network engine with backpropagation
//! - [`augment`]: vanilla and Wasserstein GAN oversampling
//! - [`classify`]: seven binary classifiers and decision-tree rule extraction
//! - [`occ`]: six one-class anomaly detectors
//! - [`evaluate`]: confusion metrics, stratified k-fold, grid search, paired t-test
//! - [`explain`]: Shapley attribution (exact, sampled, tree path) and summaries
//! - [`counterfactual`]: randomized, KD-tree and genetic counterfactual search
//! - [`pipeline`]: config-driven orchestration, synthetic data and report files

pub mod augment;
pub mod classify;
pub mod counterfactual;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod explain;
pub mod neighbors;
pub mod neural;
pub mod occ;
pub mod pipeline;
pub mod resample;
pub mod rng;

pub use error::{Error, Result};
