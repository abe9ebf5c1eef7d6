//! Deterministic synthetic corpora: planted near-duplicate clusters over
//! a background of sparse vectors, optionally organized into topics so
//! that background pairs span a controllable mid-similarity range.
//!
//! Cluster members are unit seed directions plus a perturbation of norm
//! `noise`, which yields a worst-case intra-cluster cosine floor of
//! `(1 - 2v - v^2) / (1 + v)^2` for `v = noise`; the floor is recorded
//! in the generation manifest. Topic members are
//! `w * topic + sqrt(1 - w^2) * noise_direction` with `w` drawn from the
//! configured range, so same-topic cosines concentrate around the
//! product of the two weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::vector::SparseVector;

#[derive(Debug, Clone, Serialize)]
pub struct SyntheticSpec {
    /// Corpus size.
    pub n: usize,
    /// Dimensionality of the space entries are drawn from.
    pub dims: u32,
    /// Planted near-duplicate clusters.
    pub cluster_count: usize,
    pub cluster_size: usize,
    /// Perturbation norm applied to cluster members; 0 plants exact
    /// copies.
    pub noise: f64,
    /// Background topic count; 0 leaves the background unstructured.
    pub bg_topics: usize,
    /// Range of topic weights for background vectors.
    pub bg_weight_lo: f64,
    pub bg_weight_hi: f64,
    /// Entries per generated direction.
    pub nnz: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 2000,
            dims: 5000,
            cluster_count: 10,
            cluster_size: 15,
            noise: 0.01,
            bg_topics: 0,
            bg_weight_lo: 0.3,
            bg_weight_hi: 0.9,
            nnz: 20,
            seed: 42,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput("corpus size must be positive".into()));
        }
        if self.cluster_count * self.cluster_size > self.n {
            return Err(Error::InvalidInput(
                "cluster_count * cluster_size exceeds the corpus size".into(),
            ));
        }
        if self.cluster_count > 0 && self.cluster_size < 1 {
            return Err(Error::InvalidInput("clusters need at least one member".into()));
        }
        if !self.noise.is_finite() || self.noise < 0.0 {
            return Err(Error::InvalidInput("noise must be >= 0".into()));
        }
        if self.nnz == 0 || (self.nnz as u32) > self.dims {
            return Err(Error::InvalidInput(
                "nnz must be in [1, dims]".into(),
            ));
        }
        if !(0.0 < self.bg_weight_lo
            && self.bg_weight_lo <= self.bg_weight_hi
            && self.bg_weight_hi < 1.0)
        {
            return Err(Error::InvalidInput(
                "background weights must satisfy 0 < lo <= hi < 1".into(),
            ));
        }
        Ok(())
    }

    /// Worst-case cosine between two members of the same cluster.
    pub fn intra_cluster_cosine_floor(&self) -> f64 {
        let v = self.noise;
        ((1.0 - 2.0 * v - v * v) / ((1.0 + v) * (1.0 + v))).max(-1.0)
    }
}

/// Summary emitted next to a generated corpus.
#[derive(Debug, Clone, Serialize)]
pub struct SynthManifest {
    pub spec: SyntheticSpec,
    pub intra_cluster_cosine_floor: f64,
    pub clustered_vectors: usize,
    pub background_vectors: usize,
}

impl SynthManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

/// A unit-norm sparse direction on `nnz` distinct dimensions.
fn random_direction(rng: &mut ChaCha8Rng, dims: u32, nnz: usize) -> Vec<(u32, f64)> {
    let mut picked = rand::seq::index::sample(rng, dims as usize, nnz).into_vec();
    picked.sort_unstable();
    let weights: Vec<f64> = (0..nnz).map(|_| rng.gen_range(0.2..1.0)).collect();
    let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    picked
        .into_iter()
        .zip(weights)
        .map(|(d, w)| (d as u32, w / norm))
        .collect()
}

/// `a + scale * b` over sorted entry lists.
fn add_scaled(a: &[(u32, f64)], b: &[(u32, f64)], scale: f64) -> Vec<(u32, f64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j >= b.len() || (i < a.len() && a[i].0 < b[j].0) {
            out.push(a[i]);
            i += 1;
        } else if i >= a.len() || b[j].0 < a[i].0 {
            out.push((b[j].0, scale * b[j].1));
            j += 1;
        } else {
            out.push((a[i].0, a[i].1 + scale * b[j].1));
            i += 1;
            j += 1;
        }
    }
    out
}

/// Generates the corpus for a spec. Identical specs produce identical
/// datasets. Cluster members come first (cluster by cluster), then the
/// background.
pub fn generate(spec: &SyntheticSpec) -> Result<(Dataset, SynthManifest)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut vectors = Vec::with_capacity(spec.n);
    let mut next_id = 0u32;

    for _ in 0..spec.cluster_count {
        let seed_dir = random_direction(&mut rng, spec.dims, spec.nnz);
        for _ in 0..spec.cluster_size {
            let entries = if spec.noise == 0.0 {
                seed_dir.clone()
            } else {
                let bump = random_direction(&mut rng, spec.dims, spec.nnz);
                add_scaled(&seed_dir, &bump, spec.noise)
            };
            vectors.push(SparseVector::new(next_id, entries)?);
            next_id += 1;
        }
    }

    let background = spec.n - vectors.len();
    let topics: Vec<Vec<(u32, f64)>> = (0..spec.bg_topics)
        .map(|_| random_direction(&mut rng, spec.dims, spec.nnz))
        .collect();
    for _ in 0..background {
        let own = random_direction(&mut rng, spec.dims, spec.nnz);
        let entries = if topics.is_empty() {
            own
        } else {
            let topic = &topics[rng.gen_range(0..topics.len())];
            let w: f64 = rng.gen_range(spec.bg_weight_lo..=spec.bg_weight_hi);
            add_scaled(topic, &own, (1.0 - w * w).sqrt() / w).iter()
                .map(|&(d, x)| (d, x * w))
                .collect()
        };
        vectors.push(SparseVector::new(next_id, entries)?);
        next_id += 1;
    }

    let manifest = SynthManifest {
        spec: spec.clone(),
        intra_cluster_cosine_floor: spec.intra_cluster_cosine_floor(),
        clustered_vectors: spec.cluster_count * spec.cluster_size,
        background_vectors: background,
    };
    Ok((Dataset::new(vectors)?, manifest))
}
