//! Sparse vectors and the cosine/angular similarity measures.
//!
//! All pair predicates in the crate are expressed against a cosine
//! threshold. The angular form `1 - theta/pi` is the similarity for
//! which a random-hyperplane hash collides with probability exactly
//! equal to the similarity, so estimator-internal probability math
//! runs in angular space. The two orders agree: converting a cosine
//! threshold with [`threshold_to_angular`] selects the same pair set.

use crate::error::{Error, Result};

/// A sparse vector: `(dimension, weight)` entries sorted strictly by
/// dimension, with the Euclidean norm cached at construction.
///
/// Zero vectors are rejected here so that similarity computations never
/// see a zero norm.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    id: u32,
    entries: Vec<(u32, f64)>,
    norm: f64,
}

impl SparseVector {
    /// Builds a vector from entries sorted strictly by ascending dimension.
    ///
    /// Zero-weight entries are dropped. A vector with no nonzero entry,
    /// a non-finite weight, or out-of-order/duplicate dimensions is an
    /// invalid-input error.
    pub fn new(id: u32, mut entries: Vec<(u32, f64)>) -> Result<Self> {
        for pair in entries.windows(2) {
            if pair[0].0 >= pair[1].0 {
                return Err(Error::InvalidInput(format!(
                    "vector {id}: dimensions must be strictly ascending (saw {} then {})",
                    pair[0].0, pair[1].0
                )));
            }
        }
        if entries.iter().any(|&(_, w)| !w.is_finite()) {
            return Err(Error::InvalidInput(format!("vector {id}: non-finite weight")));
        }
        entries.retain(|&(_, w)| w != 0.0);
        if entries.is_empty() {
            return Err(Error::InvalidInput(format!(
                "vector {id}: zero vectors are rejected at ingestion"
            )));
        }
        let norm = entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
        Ok(Self { id, entries, norm })
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    /// Cached Euclidean norm; always > 0.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }
}

/// Dot product by merging the two sorted entry lists.
pub fn dot(u: &SparseVector, v: &SparseVector) -> f64 {
    let (a, b) = (u.entries(), v.entries());
    let (mut i, mut j) = (0, 0);
    let mut acc = 0.0;
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Cosine similarity, clamped to `[-1, 1]` against rounding drift.
pub fn cosine(u: &SparseVector, v: &SparseVector) -> f64 {
    (dot(u, v) / (u.norm() * v.norm())).clamp(-1.0, 1.0)
}

/// Maps a cosine value to angular similarity `1 - arccos(c)/pi`.
///
/// The input is clamped to `[-1, 1]` before the arccos.
pub fn cosine_to_angular(c: f64) -> f64 {
    1.0 - c.clamp(-1.0, 1.0).acos() / std::f64::consts::PI
}

/// Angular similarity of two vectors, in `[0, 1]`.
pub fn angular_sim(u: &SparseVector, v: &SparseVector) -> f64 {
    cosine_to_angular(cosine(u, v))
}

/// Converts a cosine threshold to the equivalent angular threshold.
///
/// Monotone increasing, so `{cosine >= tau}` and
/// `{angular >= threshold_to_angular(tau)}` select the same pairs.
/// Inputs outside `[-1, 1]` are rejected; estimator parameters restrict
/// thresholds further to `(0, 1]` when they are validated.
pub fn threshold_to_angular(tau_cos: f64) -> Result<f64> {
    if !tau_cos.is_finite() || !(-1.0..=1.0).contains(&tau_cos) {
        return Err(Error::InvalidInput(format!(
            "cosine threshold {tau_cos} outside [-1, 1]"
        )));
    }
    Ok(cosine_to_angular(tau_cos))
}

/// The two order-equivalent similarity measures used by the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityKind {
    Cosine,
    Angular,
}

impl SimilarityKind {
    pub fn eval(self, u: &SparseVector, v: &SparseVector) -> f64 {
        match self {
            SimilarityKind::Cosine => cosine(u, v),
            SimilarityKind::Angular => angular_sim(u, v),
        }
    }
}
