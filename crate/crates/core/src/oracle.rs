//! Exact brute-force ground truth for join sizes, stratum sizes, and
//! conditional probabilities. Correctness tool, not a fast path: every
//! operation here is a full O(n^2) pass and refuses to run past a
//! configurable size limit rather than silently sampling.

use std::io::Write;

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::lsh::LshIndex;
use crate::vector::cosine;

/// Default cap on vectors for the O(n^2) pass (about 2e8 comparisons).
pub const DEFAULT_EXACT_LIMIT: u64 = 20_000;

/// Exact join size and probability profile at one threshold.
///
/// Probabilities with a zero denominator are reported as 0.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleProfile {
    pub tau_cos: f64,
    /// Exact number of true pairs.
    pub j: u64,
    /// True pairs inside / outside the same-bucket stratum.
    pub j_h: u64,
    pub j_l: u64,
    /// Stratum sizes; `n_h + n_l` is the total pair count.
    pub n_h: u64,
    pub n_l: u64,
    pub p_t: f64,
    pub p_t_given_h: f64,
    pub p_h_given_t: f64,
    pub p_t_given_l: f64,
}

/// Threshold regime under the stratified-sampling analysis, driven by
/// `alpha = P(true | same bucket)` and `beta = P(true | split)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    High,
    Low,
    Neither,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::High => "high",
            Regime::Low => "low",
            Regime::Neither => "neither",
        })
    }
}

fn check_self_limit(n: usize, limit: u64) -> Result<()> {
    let n = n as u64;
    if n > limit {
        return Err(Error::OracleLimit {
            pairs: n * n.saturating_sub(1) / 2,
            limit: limit * limit.saturating_sub(1) / 2,
        });
    }
    Ok(())
}

fn validate_taus(taus: &[f64]) -> Result<()> {
    if taus.is_empty() {
        return Err(Error::InvalidInput("no thresholds given".into()));
    }
    for pair in taus.windows(2) {
        if pair[0] >= pair[1] {
            return Err(Error::InvalidInput(
                "thresholds must be strictly ascending".into(),
            ));
        }
    }
    if taus.iter().any(|&t| !t.is_finite() || t <= 0.0 || t > 1.0) {
        return Err(Error::InvalidInput("thresholds must lie in (0, 1]".into()));
    }
    Ok(())
}

/// Exact true-pair counts for an ascending threshold list, one pass.
pub fn exact_join_sizes(data: &Dataset, taus: &[f64], limit: u64) -> Result<Vec<u64>> {
    validate_taus(taus)?;
    check_self_limit(data.n(), limit)?;
    let n = data.n();
    let counts = (0..n)
        .into_par_iter()
        .fold(
            || vec![0u64; taus.len()],
            |mut acc, i| {
                let u = data.get(i as u32);
                for j in (i + 1)..n {
                    let c = cosine(u, data.get(j as u32));
                    let true_upto = taus.partition_point(|&t| t <= c);
                    for slot in acc.iter_mut().take(true_upto) {
                        *slot += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; taus.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    Ok(counts)
}

/// Exact true-pair count at one threshold.
pub fn exact_join_size(data: &Dataset, tau_cos: f64, limit: u64) -> Result<u64> {
    Ok(exact_join_sizes(data, &[tau_cos], limit)?[0])
}

/// Exact ordered cross-join size between two collections.
pub fn exact_cross_join_sizes(
    left: &Dataset,
    right: &Dataset,
    taus: &[f64],
    limit: u64,
) -> Result<Vec<u64>> {
    validate_taus(taus)?;
    let pairs = left.n() as u64 * right.n() as u64;
    let max_pairs = limit * limit.saturating_sub(1) / 2;
    if pairs > max_pairs {
        return Err(Error::OracleLimit {
            pairs,
            limit: max_pairs,
        });
    }
    let counts = (0..left.n())
        .into_par_iter()
        .fold(
            || vec![0u64; taus.len()],
            |mut acc, i| {
                let u = left.get(i as u32);
                for j in 0..right.n() {
                    let c = cosine(u, right.get(j as u32));
                    let true_upto = taus.partition_point(|&t| t <= c);
                    for slot in acc.iter_mut().take(true_upto) {
                        *slot += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; taus.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    Ok(counts)
}

pub fn exact_cross_join_size(
    left: &Dataset,
    right: &Dataset,
    tau_cos: f64,
    limit: u64,
) -> Result<u64> {
    Ok(exact_cross_join_sizes(left, right, &[tau_cos], limit)?[0])
}

#[derive(Clone)]
struct SweepAcc {
    n_h: u64,
    j: Vec<u64>,
    j_h: Vec<u64>,
}

impl SweepAcc {
    fn new(len: usize) -> Self {
        Self {
            n_h: 0,
            j: vec![0; len],
            j_h: vec![0; len],
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.n_h += other.n_h;
        for (a, b) in self.j.iter_mut().zip(other.j) {
            *a += b;
        }
        for (a, b) in self.j_h.iter_mut().zip(other.j_h) {
            *a += b;
        }
        self
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// One O(n^2) pass classifying every pair as true/false and
/// same-bucket/split for each threshold in the ascending list. With
/// `virtual_buckets` the same-bucket event means colliding in any table;
/// otherwise the first table defines the strata.
pub fn profile_sweep(
    index: &LshIndex,
    data: &Dataset,
    taus: &[f64],
    virtual_buckets: bool,
    limit: u64,
) -> Result<Vec<OracleProfile>> {
    validate_taus(taus)?;
    check_self_limit(data.n(), limit)?;
    if index.n() != data.n() {
        return Err(Error::InvalidInput("index does not match the dataset".into()));
    }
    let n = data.n();
    let table = &index.tables()[0];
    let acc = (0..n)
        .into_par_iter()
        .fold(
            || SweepAcc::new(taus.len()),
            |mut acc, i| {
                let u = data.get(i as u32);
                for j in (i + 1)..n {
                    let c = cosine(u, data.get(j as u32));
                    let in_h = if virtual_buckets {
                        index
                            .same_virtual_bucket(i as u32, j as u32)
                            .expect("ids in range")
                    } else {
                        table.same_bucket(i as u32, j as u32).expect("ids in range")
                    };
                    if in_h {
                        acc.n_h += 1;
                    }
                    let true_upto = taus.partition_point(|&t| t <= c);
                    for slot in acc.j.iter_mut().take(true_upto) {
                        *slot += 1;
                    }
                    if in_h {
                        for slot in acc.j_h.iter_mut().take(true_upto) {
                            *slot += 1;
                        }
                    }
                }
                acc
            },
        )
        .reduce(|| SweepAcc::new(taus.len()), SweepAcc::merge);

    let m = data.pair_count();
    let n_l = m - acc.n_h;
    Ok(taus
        .iter()
        .enumerate()
        .map(|(i, &tau_cos)| {
            let (j, j_h) = (acc.j[i], acc.j_h[i]);
            let j_l = j - j_h;
            OracleProfile {
                tau_cos,
                j,
                j_h,
                j_l,
                n_h: acc.n_h,
                n_l,
                p_t: ratio(j, m),
                p_t_given_h: ratio(j_h, acc.n_h),
                p_h_given_t: ratio(j_h, j),
                p_t_given_l: ratio(j_l, n_l),
            }
        })
        .collect())
}

/// Profile at a single threshold.
pub fn profile(
    index: &LshIndex,
    data: &Dataset,
    tau_cos: f64,
    virtual_buckets: bool,
    limit: u64,
) -> Result<OracleProfile> {
    Ok(profile_sweep(index, data, &[tau_cos], virtual_buckets, limit)?.remove(0))
}

/// Classifies a profile against the high/low threshold regimes:
/// high when `alpha >= log2(n)/n` and `beta < 1/n`, low when both
/// `alpha` and `beta` are at least `log2(n)/n`.
pub fn assumption_check(profile: &OracleProfile, n: usize) -> Regime {
    let nf = n as f64;
    let log_over_n = nf.log2() / nf;
    let alpha = profile.p_t_given_h;
    let beta = profile.p_t_given_l;
    if alpha >= log_over_n && beta < 1.0 / nf {
        Regime::High
    } else if alpha >= log_over_n && beta >= log_over_n {
        Regime::Low
    } else {
        Regime::Neither
    }
}

/// CSV emitter for profiles, one row per threshold.
pub fn write_profile_csv<W: Write>(mut w: W, profiles: &[OracleProfile]) -> Result<()> {
    writeln!(
        w,
        "tau,J,J_H,J_L,N_H,N_L,p_T,p_T_given_H,p_H_given_T,p_T_given_L"
    )?;
    for p in profiles {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            p.tau_cos,
            p.j,
            p.j_h,
            p.j_l,
            p.n_h,
            p.n_l,
            p.p_t,
            p.p_t_given_h,
            p.p_h_given_t,
            p.p_t_given_l
        )?;
    }
    Ok(())
}
