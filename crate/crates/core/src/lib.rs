//! Causal structure discovery for datasets that mix continuous and binary
//! variables.
//!
//! Continuous nodes follow a linear non-Gaussian structural equation
//! (`X_i = b_i0 + sum_j b_ij X_j + e_i`), binary nodes (values `{1, 2}`) follow
//! a logistic conditional distribution of their parents. Structures are scored
//! with a decomposable BIC and selected by exhaustive search over all DAGs, or
//! over the acyclic orientations of a known skeleton.
//!
//! The numeric core is generic over [`Scalar`] (`f32` and `f64`); the aliases
//! below fix the common `f64` instantiation.

pub mod baseline_pc;
pub mod bench;
pub mod dataset;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod scalar;
pub mod scoring;
pub mod search;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{Dag, Skeleton};
pub use scalar::Scalar;

/// `f64` dataset.
pub type Dataset = dataset::Dataset<f64>;
/// `f32` dataset.
pub type Dataset32 = dataset::Dataset<f32>;
pub type GenerativeModel = synth::GenerativeModel<f64>;
pub type GenerativeModel32 = synth::GenerativeModel<f32>;
pub type FittedLocal = scoring::FittedLocal<f64>;
pub type FittedLocal32 = scoring::FittedLocal<f32>;
pub type ScoredDag = scoring::ScoredDag<f64>;
pub type ScoredDag32 = scoring::ScoredDag<f32>;
pub type SearchReport = search::SearchReport<f64>;
pub type SearchReport32 = search::SearchReport<f32>;
pub type CITestResult = baseline_pc::CITestResult<f64>;
