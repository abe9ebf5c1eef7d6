//! Joins between two vector collections.
//!
//! Both sides are hashed with the same single-table family so their
//! signatures are comparable. The same-bucket stratum holds the ordered
//! cross pairs whose signatures match; its size is the sum of
//! `b_j * c_i` over matching buckets. Sampling mirrors the self-join
//! estimator: weighted bucket-pair draws in the matched stratum, and
//! rejection plus adaptive sampling in the rest. When both sides are the
//! same collection, identity pairs `(u, u)` are counted like any other
//! cross pair.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{Dampening, EstimateReport, Estimator, EstimatorParams};
use crate::lsh::{HashFamily, LshTable};
use crate::vector::cosine;

/// A pair of bucket lists with matching signatures.
#[derive(Debug, Clone)]
struct MatchedBucket {
    left_bucket: usize,
    right_bucket: usize,
    cum_weight: u64,
}

/// Single-table indexes over both join sides plus the matched-signature
/// weights needed for sampling.
#[derive(Debug, Clone)]
pub struct GeneralJoinIndex {
    left: LshTable,
    right: LshTable,
    matched: Vec<MatchedBucket>,
    matched_pairs: u64,
}

/// Builds single-table indexes over `left` and `right` with one shared
/// family (`ell` must be 1) and precomputes the matched-bucket weights.
pub fn general_join_build(
    left: &Dataset,
    right: &Dataset,
    family: &HashFamily,
) -> Result<GeneralJoinIndex> {
    if family.ell() != 1 {
        return Err(Error::InvalidInput(
            "general joins use a single-table family (ell = 1)".into(),
        ));
    }
    let hasher = family.hasher(0)?;
    let left_table = LshTable::build(left, hasher);
    let right_table = LshTable::build(right, hasher);

    // Merge join over the signature-sorted bucket lists.
    let mut matched = Vec::new();
    let mut total = 0u64;
    let (lb, rb) = (left_table.buckets(), right_table.buckets());
    let (mut i, mut j) = (0, 0);
    while i < lb.len() && j < rb.len() {
        match lb[i].signature.cmp(&rb[j].signature) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                total += lb[i].count() * rb[j].count();
                matched.push(MatchedBucket {
                    left_bucket: i,
                    right_bucket: j,
                    cum_weight: total,
                });
                i += 1;
                j += 1;
            }
        }
    }
    Ok(GeneralJoinIndex {
        left: left_table,
        right: right_table,
        matched,
        matched_pairs: total,
    })
}

impl GeneralJoinIndex {
    /// Ordered cross pairs with matching signatures.
    pub fn matched_pairs(&self) -> u64 {
        self.matched_pairs
    }

    /// Total ordered cross pairs `|left| * |right|`.
    pub fn total_pairs(&self) -> u64 {
        self.left.n() as u64 * self.right.n() as u64
    }

    pub fn same_signature(&self, u: u32, v: u32) -> Result<bool> {
        Ok(self.left.signature_of(u)? == self.right.signature_of(v)?)
    }

    /// Uniform draw from the matched stratum: a bucket pair weighted by
    /// `b_j * c_i`, then one member from each side.
    fn sample_matched_pair<R: Rng>(&self, rng: &mut R) -> (u32, u32) {
        let target = rng.gen_range(0..self.matched_pairs);
        let idx = self
            .matched
            .partition_point(|mb| mb.cum_weight <= target);
        let mb = &self.matched[idx];
        let lm = &self.left.buckets()[mb.left_bucket].members;
        let rm = &self.right.buckets()[mb.right_bucket].members;
        (lm[rng.gen_range(0..lm.len())], rm[rng.gen_range(0..rm.len())])
    }
}

/// Stratified estimator for the join size between two collections.
pub fn general_lsh_ss(
    index: &GeneralJoinIndex,
    left: &Dataset,
    right: &Dataset,
    params: &EstimatorParams,
) -> Result<EstimateReport> {
    params.validate()?;
    if left.n() != index.left.n() || right.n() != index.right.n() {
        return Err(Error::InvalidInput(
            "datasets do not match the join index".into(),
        ));
    }
    let mut report = EstimateReport {
        estimator: if matches!(params.dampening, Dampening::None) {
            Estimator::LshSs
        } else {
            Estimator::LshSsD
        },
        ..empty_report(params)?
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let m = index.total_pairs();
    let pairs_h = index.matched_pairs();
    let pairs_l = m - pairs_h;

    // Matched stratum.
    let mut j_h = 0.0;
    if pairs_h > 0 {
        let mut hits = 0u64;
        for _ in 0..params.m_h {
            let (u, v) = index.sample_matched_pair(&mut rng);
            report.samples_used += 1;
            report.sim_evals += 1;
            if cosine(left.get(u), right.get(v)) >= params.tau_cos {
                hits += 1;
            }
        }
        report.n_true_sampled += hits;
        j_h = hits as f64 * pairs_h as f64 / params.m_h as f64;
    }

    // Unmatched stratum: uniform cross pairs, rejecting signature
    // matches, with the adaptive stop and exhaustion scale-up.
    let mut j_l = 0.0;
    let mut safe = false;
    if pairs_l > 0 {
        let (nl, nr) = (left.n() as u32, right.n() as u32);
        let mut accepted = 0u64;
        let mut found = 0u64;
        while found < params.delta && accepted < params.m_l {
            let (u, v) = (rng.gen_range(0..nl), rng.gen_range(0..nr));
            report.samples_used += 1;
            if index.same_signature(u, v)? {
                if params.count_rejected {
                    accepted += 1;
                }
                continue;
            }
            accepted += 1;
            report.sim_evals += 1;
            if cosine(left.get(u), right.get(v)) >= params.tau_cos {
                found += 1;
            }
        }
        report.n_true_sampled += found;
        if accepted >= params.m_l {
            safe = true;
            j_l = match params.dampening {
                Dampening::None => found as f64,
                Dampening::Adaptive => {
                    found as f64 * (found as f64 / params.delta as f64) * pairs_l as f64
                        / params.m_l as f64
                }
                Dampening::Fixed(c) => found as f64 * c * pairs_l as f64 / params.m_l as f64,
            };
        } else {
            j_l = found as f64 * pairs_l as f64 / accepted as f64;
        }
    }

    report.j_hat = j_h + j_l;
    report.j_h_hat = Some(j_h);
    report.j_l_hat = Some(j_l);
    report.safe_lower_bound = safe;
    Ok(report)
}

fn empty_report(params: &EstimatorParams) -> Result<EstimateReport> {
    Ok(EstimateReport {
        estimator: Estimator::LshSs,
        j_hat: 0.0,
        j_h_hat: None,
        j_l_hat: None,
        n_true_sampled: 0,
        samples_used: 0,
        sim_evals: 0,
        safe_lower_bound: false,
        tau_cos: params.tau_cos,
        tau_ang: params.tau_angular()?,
        clamped: false,
        degenerate: false,
        closed_form_fallback: false,
        virtual_pairs_estimated: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::SparseVector;

    fn dataset(entries: &[&[(u32, f64)]]) -> Dataset {
        Dataset::new(
            entries
                .iter()
                .enumerate()
                .map(|(i, e)| SparseVector::new(i as u32, e.to_vec()).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn self_cross_counts_include_identity_pairs() {
        let data = dataset(&[&[(0, 1.0)], &[(0, 2.0)], &[(1, 1.0)]]);
        let family = HashFamily::new(5, 8, 1).unwrap();
        let gj = general_join_build(&data, &data, &family).unwrap();
        // Every signature matches itself, so matched pairs is the sum of
        // squared bucket counts: 2^2 + 1^2 = 5 here.
        let by_squares: u64 = gj
            .left
            .buckets()
            .iter()
            .map(|b| b.count() * b.count())
            .sum();
        assert_eq!(gj.matched_pairs(), by_squares);
        assert_eq!(gj.total_pairs(), 9);
    }

    #[test]
    fn disjoint_signatures_give_zero_matched() {
        let left = dataset(&[&[(0, 1.0)], &[(1, 1.0)]]);
        let right = dataset(&[&[(0, -1.0)], &[(1, -1.0)]]);
        let family = HashFamily::new(5, 16, 1).unwrap();
        let gj = general_join_build(&left, &right, &family).unwrap();
        // Negated vectors complement every signature bit.
        assert_eq!(gj.matched_pairs(), 0);
        let r = general_lsh_ss(&gj, &left, &right, &EstimatorParams::new(0.9, 2, 3)).unwrap();
        assert_eq!(r.j_h_hat, Some(0.0));
    }

    #[test]
    fn matched_weight_three_by_two() {
        // Sides of sizes 3 and 2 sharing one signature with bucket
        // counts 2 and 2: matched pairs = 4.
        let left = dataset(&[&[(0, 1.0)], &[(0, 2.0)], &[(9, 1.0), (17, -2.0)]]);
        let right = dataset(&[&[(0, 3.0)], &[(0, 0.5)]]);
        let family = HashFamily::new(2, 12, 1).unwrap();
        let gj = general_join_build(&left, &right, &family).unwrap();
        assert_eq!(gj.matched_pairs(), 4);
    }

    #[test]
    fn single_identical_vector_estimates_one() {
        let left = dataset(&[&[(0, 1.0), (1, 1.0)]]);
        let right = dataset(&[&[(0, 2.0), (1, 2.0)]]);
        let family = HashFamily::new(7, 10, 1).unwrap();
        let gj = general_join_build(&left, &right, &family).unwrap();
        let mut params = EstimatorParams::new(0.9, 1, 3);
        params.m_h = 4;
        params.m_l = 4;
        params.delta = 1;
        let r = general_lsh_ss(&gj, &left, &right, &params).unwrap();
        assert_eq!(r.j_hat, 1.0);
    }

    #[test]
    fn multi_table_family_rejected() {
        let data = dataset(&[&[(0, 1.0)]]);
        let family = HashFamily::new(7, 10, 2).unwrap();
        assert!(general_join_build(&data, &data, &family).is_err());
    }
}
