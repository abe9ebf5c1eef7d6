//! Size estimation for cosine-similarity joins.
//!
//! Given a collection of sparse vectors and a similarity threshold, the
//! crate estimates how many pairs meet the threshold without comparing
//! them all. A random-hyperplane index extended with bucket counts
//! splits all pairs into a same-bucket stratum, where similar pairs
//! concentrate and uniform sampling is cheap, and the rest, which an
//! adaptive stage samples with a safe fallback when true pairs are too
//! rare to scale up reliably.
//!
//! The crate ships the stratified estimator and its multi-table
//! variants, two random-sampling baselines, a closed-form estimator
//! under a uniformity assumption and its sampled refinement, an exact
//! brute-force oracle for validation, a deterministic synthetic-corpus
//! generator, and a benchmark harness that sweeps thresholds and
//! parameters against the oracle.

pub mod bench;
pub mod dataset;
pub mod error;
pub mod estimators;
pub mod general;
pub mod lsh;
pub mod oracle;
pub mod synth;
pub mod vector;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use estimators::{Dampening, EstimateReport, Estimator, EstimatorParams};
pub use lsh::{HashFamily, LshIndex, LshTable};
pub use oracle::{OracleProfile, Regime};
pub use vector::SparseVector;
