//! Join-size estimators.
//!
//! Baselines:
//! * `rs_pop` samples pairs uniformly and scales the true-pair count up
//!   by `M / m`.
//! * `rs_cross` samples records and compares every pair within the
//!   sample.
//!
//! Index-backed estimators over a single table:
//! * `j_uniform` is a closed form in the same-bucket pair count,
//!   assuming pair similarities are uniform on [0, 1].
//! * `lsh_s` replaces that assumption with sampled similarities,
//!   weighting each by its bucket-collision probability `s^k`.
//! * `lsh_ss` splits all pairs into the same-bucket stratum (sampled
//!   uniformly through the buckets) and the rest (sampled adaptively,
//!   with a safe lower bound or a dampened scale-up on exhaustion), and
//!   sums the per-stratum estimates.
//!
//! Multi-table variants take the median of per-table estimates or merge
//! tables into virtual buckets. Probability formulas operate on angular
//! similarity; pair predicates test the cosine threshold directly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::lsh::{derive_seed, LshIndex, LshTable};
use crate::vector::{cosine, cosine_to_angular, threshold_to_angular};

/// Scale-up applied when the adaptive stage exhausts its sample budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dampening {
    /// Return the raw true-pair count (a safe lower bound).
    None,
    /// Scale by `n_found / delta` of the full factor.
    Adaptive,
    /// Scale by a fixed fraction in (0, 1] of the full factor.
    Fixed(f64),
}

impl std::str::FromStr for Dampening {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Dampening::None),
            "adaptive" => Ok(Dampening::Adaptive),
            other => {
                let v: f64 = other.parse().map_err(|_| {
                    Error::InvalidInput(format!("dampening must be none, adaptive or a float, got {other:?}"))
                })?;
                Ok(Dampening::Fixed(v))
            }
        }
    }
}

/// Tunable knobs shared by every estimator run.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorParams {
    /// Cosine threshold in (0, 1].
    pub tau_cos: f64,
    /// Sample size for the same-bucket stratum.
    pub m_h: u64,
    /// Maximum samples for the cross-bucket stratum.
    pub m_l: u64,
    /// Answer-size threshold that stops the adaptive stage early.
    pub delta: u64,
    pub dampening: Dampening,
    /// Sample size for the random-sampling baselines.
    pub m_r: u64,
    pub seed: u64,
    /// Count rejected same-bucket draws against the adaptive budget.
    pub count_rejected: bool,
    /// Largest `n` for which virtual-bucket pair counts are enumerated
    /// exactly; above it they are estimated from the rejection stream.
    pub virtual_exact_limit: usize,
}

/// Default answer-size threshold, `ceil(log2 n)`, at least 1.
pub fn default_delta(n: usize) -> u64 {
    ((n as f64).log2().ceil() as u64).max(1)
}

/// Threshold-dependent answer-size heuristic: a smaller budget at high
/// thresholds, a larger one at low thresholds.
pub fn heuristic_delta(n: usize, tau_cos: f64) -> u64 {
    let lg = (n as f64).log2();
    let raw = if tau_cos >= 0.7 {
        0.3 * lg
    } else if tau_cos <= 0.3 {
        2.0 * lg
    } else {
        lg
    };
    (raw.ceil() as u64).max(1)
}

impl EstimatorParams {
    /// Defaults for a dataset of `n` vectors: `m_h = m_l = n`,
    /// `delta = ceil(log2 n)`, `m_r = ceil(1.5 n)`, no dampening.
    pub fn new(tau_cos: f64, n: usize, seed: u64) -> Self {
        Self {
            tau_cos,
            m_h: (n as u64).max(1),
            m_l: (n as u64).max(1),
            delta: default_delta(n),
            dampening: Dampening::None,
            m_r: ((n as f64) * 1.5).ceil() as u64,
            seed,
            count_rejected: false,
            virtual_exact_limit: 5000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.tau_cos.is_finite() || self.tau_cos <= 0.0 || self.tau_cos > 1.0 {
            return Err(Error::InvalidInput(format!(
                "threshold must be in (0, 1], got {}",
                self.tau_cos
            )));
        }
        if self.m_h == 0 || self.m_l == 0 || self.m_r == 0 {
            return Err(Error::InvalidInput("sample sizes must be at least 1".into()));
        }
        if self.delta == 0 || self.delta > self.m_l {
            return Err(Error::InvalidInput(format!(
                "delta must satisfy 1 <= delta <= m_l, got {} with m_l {}",
                self.delta, self.m_l
            )));
        }
        if let Dampening::Fixed(c) = self.dampening {
            if !c.is_finite() || c <= 0.0 || c > 1.0 {
                return Err(Error::InvalidInput(format!(
                    "fixed dampening factor must be in (0, 1], got {c}"
                )));
            }
        }
        Ok(())
    }

    pub fn tau_angular(&self) -> Result<f64> {
        threshold_to_angular(self.tau_cos)
    }
}

/// The estimators exposed to the harness and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    RsPop,
    RsCross,
    JUniform,
    LshS,
    LshSs,
    LshSsD,
    LshSsMedian,
    LshSsVirtual,
}

impl Estimator {
    pub const ALL: [Estimator; 8] = [
        Estimator::RsPop,
        Estimator::RsCross,
        Estimator::JUniform,
        Estimator::LshS,
        Estimator::LshSs,
        Estimator::LshSsD,
        Estimator::LshSsMedian,
        Estimator::LshSsVirtual,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::RsPop => "rs_pop",
            Estimator::RsCross => "rs_cross",
            Estimator::JUniform => "j_uniform",
            Estimator::LshS => "lsh_s",
            Estimator::LshSs => "lsh_ss",
            Estimator::LshSsD => "lsh_ss_d",
            Estimator::LshSsMedian => "lsh_ss_median",
            Estimator::LshSsVirtual => "lsh_ss_virtual",
        }
    }

    /// Needs `ell = 1`.
    pub fn single_table_only(self) -> bool {
        matches!(
            self,
            Estimator::JUniform | Estimator::LshS | Estimator::LshSs | Estimator::LshSsD
        )
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown estimator {s:?}")))
    }
}

/// The outcome of one estimator run.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub estimator: Estimator,
    /// Estimated join size, always >= 0.
    pub j_hat: f64,
    /// Same-bucket stratum estimate, when the estimator is stratified.
    pub j_h_hat: Option<f64>,
    /// Cross-bucket stratum estimate, when the estimator is stratified.
    pub j_l_hat: Option<f64>,
    /// True pairs seen while sampling.
    pub n_true_sampled: u64,
    /// Pairs drawn, including draws rejected by a bucket check.
    pub samples_used: u64,
    /// Cosine evaluations performed.
    pub sim_evals: u64,
    /// The adaptive stage exhausted its budget.
    pub safe_lower_bound: bool,
    pub tau_cos: f64,
    pub tau_ang: f64,
    /// The raw estimate fell outside [0, M] and was clamped.
    pub clamped: bool,
    /// No usable estimate; zero was reported.
    pub degenerate: bool,
    /// A conditional probability fell back to its closed form.
    pub closed_form_fallback: bool,
    /// The virtual-bucket pair count was estimated, not enumerated.
    pub virtual_pairs_estimated: bool,
}

impl EstimateReport {
    fn new(estimator: Estimator, tau_cos: f64, tau_ang: f64) -> Self {
        Self {
            estimator,
            j_hat: 0.0,
            j_h_hat: None,
            j_l_hat: None,
            n_true_sampled: 0,
            samples_used: 0,
            sim_evals: 0,
            safe_lower_bound: false,
            tau_cos,
            tau_ang,
            clamped: false,
            degenerate: false,
            closed_form_fallback: false,
            virtual_pairs_estimated: false,
        }
    }
}

#[derive(Default)]
struct Costs {
    samples: u64,
    sim_evals: u64,
    n_true: u64,
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform unordered pair of distinct ids from `[0, n)`.
fn uniform_pair<R: Rng>(rng: &mut R, n: u32) -> (u32, u32) {
    let a = rng.gen_range(0..n);
    let mut b = rng.gen_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    (a, b)
}

fn require_pairs(data: &Dataset) -> Result<()> {
    if data.n() < 2 {
        return Err(Error::InvalidInput("need at least two vectors".into()));
    }
    Ok(())
}

fn clamp_estimate(raw: f64, m: f64, report: &mut EstimateReport) -> f64 {
    if raw < 0.0 {
        report.clamped = true;
        0.0
    } else if raw > m {
        report.clamped = true;
        m
    } else {
        raw
    }
}

/// Uniform pair sampling over the whole cross product, scaled by `M / m`.
pub fn rs_pop(data: &Dataset, params: &EstimatorParams) -> Result<EstimateReport> {
    require_pairs(data)?;
    params.validate()?;
    let mut report = EstimateReport::new(Estimator::RsPop, params.tau_cos, params.tau_angular()?);
    let mut rng = rng_for(params.seed);
    let n = data.n() as u32;
    let mut hits = 0u64;
    for _ in 0..params.m_r {
        let (u, v) = uniform_pair(&mut rng, n);
        if cosine(data.get(u), data.get(v)) >= params.tau_cos {
            hits += 1;
        }
    }
    report.samples_used = params.m_r;
    report.sim_evals = params.m_r;
    report.n_true_sampled = hits;
    report.j_hat = hits as f64 * data.pair_count() as f64 / params.m_r as f64;
    Ok(report)
}

/// Samples `ceil(sqrt(m_r))` distinct records and compares every pair
/// within the sample.
pub fn rs_cross(data: &Dataset, params: &EstimatorParams) -> Result<EstimateReport> {
    require_pairs(data)?;
    params.validate()?;
    let mut report = EstimateReport::new(Estimator::RsCross, params.tau_cos, params.tau_angular()?);
    let r = ((params.m_r as f64).sqrt().ceil() as usize).min(data.n());
    if r < 2 {
        return Err(Error::InvalidInput(format!(
            "record sample of {r} cannot form a pair; increase m_r"
        )));
    }
    let mut rng = rng_for(params.seed);
    let ids = rand::seq::index::sample(&mut rng, data.n(), r).into_vec();
    let mut hits = 0u64;
    let mut compared = 0u64;
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            compared += 1;
            if cosine(data.get(a as u32), data.get(b as u32)) >= params.tau_cos {
                hits += 1;
            }
        }
    }
    report.samples_used = compared;
    report.sim_evals = compared;
    report.n_true_sampled = hits;
    report.j_hat = hits as f64 * data.pair_count() as f64 / compared as f64;
    Ok(report)
}

/// Closed-form conditional collision probabilities under the uniform
/// similarity assumption: `P(same bucket | true)` and
/// `P(same bucket | false)` for an angular threshold and `k` bits.
pub fn closed_form_probs(tau_ang: f64, k: u32) -> (f64, f64) {
    let kp1 = (k + 1) as f64;
    let mut geom = 0.0; // sum of tau^i for i in 0..=k
    let mut pow = 1.0;
    for _ in 0..=k {
        geom += pow;
        pow *= tau_ang;
    }
    // pow is now tau^(k+1); recover tau^k.
    let tau_k = if tau_ang == 0.0 {
        if k == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        pow / tau_ang
    };
    (geom / kp1, tau_k / kp1)
}

/// The generic estimator in the same-bucket pair count and two
/// conditional probabilities. Unclamped.
pub fn conditional_prob_estimate(pairs_h: f64, m: f64, p_h_true: f64, p_h_false: f64) -> f64 {
    (pairs_h - m * p_h_false) / (p_h_true - p_h_false)
}

/// Closed form of the uniformity estimator, unclamped:
/// `((k+1) N_H - tau^k M) / sum_{i<k} tau^i`.
pub fn j_uniform_raw(pairs_h: f64, m: f64, tau_ang: f64, k: u32) -> f64 {
    let mut denom = 0.0;
    let mut pow = 1.0;
    for _ in 0..k {
        denom += pow;
        pow *= tau_ang;
    }
    // pow is now tau^k.
    ((k + 1) as f64 * pairs_h - pow * m) / denom
}

/// Uniformity estimator over one table, clamped to `[0, M]`.
pub fn j_uniform(table: &LshTable, data: &Dataset, tau_ang: f64) -> f64 {
    let m = data.pair_count() as f64;
    j_uniform_raw(table.same_bucket_pairs() as f64, m, tau_ang, table.k()).clamp(0.0, m)
}

pub fn j_uniform_report(
    table: &LshTable,
    data: &Dataset,
    params: &EstimatorParams,
) -> Result<EstimateReport> {
    require_pairs(data)?;
    params.validate()?;
    let tau_ang = params.tau_angular()?;
    let mut report = EstimateReport::new(Estimator::JUniform, params.tau_cos, tau_ang);
    let m = data.pair_count() as f64;
    let raw = j_uniform_raw(table.same_bucket_pairs() as f64, m, tau_ang, table.k());
    report.j_hat = clamp_estimate(raw, m, &mut report);
    Ok(report)
}

/// Mean of `s^k` over a sample of angular similarities.
pub(crate) fn mean_collision_weight(sims_ang: &[f64], k: u32) -> f64 {
    sims_ang.iter().map(|&s| s.powi(k as i32)).sum::<f64>() / sims_ang.len() as f64
}

/// Sampling estimator that weighs conditional probabilities by the
/// observed similarity distribution instead of assuming uniformity.
pub fn lsh_s(table: &LshTable, data: &Dataset, params: &EstimatorParams) -> Result<EstimateReport> {
    require_pairs(data)?;
    params.validate()?;
    let tau_ang = params.tau_angular()?;
    let mut report = EstimateReport::new(Estimator::LshS, params.tau_cos, tau_ang);
    let mut rng = rng_for(params.seed);
    let n = data.n() as u32;
    let k = table.k();

    let mut true_sims = Vec::new();
    let mut false_sims = Vec::new();
    for _ in 0..params.m_r {
        let (u, v) = uniform_pair(&mut rng, n);
        let c = cosine(data.get(u), data.get(v));
        if c >= params.tau_cos {
            true_sims.push(cosine_to_angular(c));
        } else {
            false_sims.push(cosine_to_angular(c));
        }
    }
    report.samples_used = params.m_r;
    report.sim_evals = params.m_r;
    report.n_true_sampled = true_sims.len() as u64;

    let (cf_true, cf_false) = closed_form_probs(tau_ang, k);
    let p_h_true = if true_sims.is_empty() {
        report.closed_form_fallback = true;
        cf_true
    } else {
        mean_collision_weight(&true_sims, k)
    };
    let p_h_false = if false_sims.is_empty() {
        report.closed_form_fallback = true;
        cf_false
    } else {
        mean_collision_weight(&false_sims, k)
    };

    if p_h_true <= p_h_false {
        report.degenerate = true;
        report.j_hat = 0.0;
        return Ok(report);
    }
    let m = data.pair_count() as f64;
    let raw = conditional_prob_estimate(table.same_bucket_pairs() as f64, m, p_h_true, p_h_false);
    report.j_hat = clamp_estimate(raw, m, &mut report);
    Ok(report)
}

fn sample_h_core<R: Rng>(
    table: &LshTable,
    data: &Dataset,
    tau_cos: f64,
    m_h: u64,
    rng: &mut R,
    costs: &mut Costs,
) -> Result<(f64, u64)> {
    let pairs_h = table.same_bucket_pairs();
    if pairs_h == 0 {
        return Ok((0.0, 0));
    }
    let mut hits = 0u64;
    for _ in 0..m_h {
        let (u, v) = table.sample_pair(rng)?;
        costs.samples += 1;
        costs.sim_evals += 1;
        if cosine(data.get(u), data.get(v)) >= tau_cos {
            hits += 1;
        }
    }
    costs.n_true += hits;
    Ok((hits as f64 * pairs_h as f64 / m_h as f64, hits))
}

/// Final scale-up of the adaptive stage. `found` true pairs were seen in
/// `accepted` stratum draws out of `pairs_l` stratum pairs. On an
/// exhausted budget the estimate is the raw count, or a dampened
/// fraction of the full `pairs_l / m_l` factor.
fn scale_up_l(
    found: u64,
    accepted: u64,
    pairs_l: f64,
    m_l: u64,
    delta: u64,
    dampening: Dampening,
    exhausted: bool,
) -> (f64, bool) {
    if !exhausted {
        return (found as f64 * pairs_l / accepted as f64, false);
    }
    let j = match dampening {
        Dampening::None => found as f64,
        Dampening::Adaptive => found as f64 * (found as f64 / delta as f64) * pairs_l / m_l as f64,
        Dampening::Fixed(c) => found as f64 * c * pairs_l / m_l as f64,
    };
    (j, true)
}

/// Adaptive sampling in the cross-bucket stratum, generic in the
/// same-bucket predicate so plain and virtual strata share it.
/// `pairs_l` is the stratum size used for scale-up; it may be an
/// estimate for virtual buckets.
fn sample_l_core<R: Rng, F: Fn(u32, u32) -> bool>(
    data: &Dataset,
    tau_cos: f64,
    params: &EstimatorParams,
    pairs_l: f64,
    in_stratum_h: F,
    rng: &mut R,
    costs: &mut Costs,
) -> (f64, bool) {
    if pairs_l < 1.0 {
        return (0.0, false);
    }
    let n = data.n() as u32;
    let mut accepted = 0u64;
    let mut found = 0u64;
    while found < params.delta && accepted < params.m_l {
        let (u, v) = uniform_pair(rng, n);
        costs.samples += 1;
        if in_stratum_h(u, v) {
            if params.count_rejected {
                accepted += 1;
            }
            continue;
        }
        accepted += 1;
        costs.sim_evals += 1;
        if cosine(data.get(u), data.get(v)) >= tau_cos {
            found += 1;
        }
    }
    costs.n_true += found;
    let exhausted = accepted >= params.m_l;
    scale_up_l(
        found,
        accepted,
        pairs_l,
        params.m_l,
        params.delta,
        params.dampening,
        exhausted,
    )
}

/// Uniform sampling in the same-bucket stratum of one table.
pub fn sample_h(
    table: &LshTable,
    data: &Dataset,
    params: &EstimatorParams,
) -> Result<(f64, u64)> {
    require_pairs(data)?;
    params.validate()?;
    let mut costs = Costs::default();
    sample_h_core(
        table,
        data,
        params.tau_cos,
        params.m_h,
        &mut rng_for(params.seed),
        &mut costs,
    )
}

/// Adaptive sampling in the cross-bucket stratum of one table. Returns
/// the stratum estimate and whether the budget was exhausted (in which
/// case the estimate is not scaled up, or only partially under a
/// dampened mode).
pub fn sample_l(
    table: &LshTable,
    data: &Dataset,
    params: &EstimatorParams,
) -> Result<(f64, bool)> {
    require_pairs(data)?;
    params.validate()?;
    let pairs_l = data.pair_count() - table.same_bucket_pairs();
    let mut costs = Costs::default();
    Ok(sample_l_core(
        data,
        params.tau_cos,
        params,
        pairs_l as f64,
        |u, v| table.same_bucket(u, v).unwrap_or(false),
        &mut rng_for(params.seed),
        &mut costs,
    ))
}

fn lsh_ss_on_table(
    estimator: Estimator,
    table: &LshTable,
    data: &Dataset,
    params: &EstimatorParams,
) -> Result<EstimateReport> {
    let tau_ang = params.tau_angular()?;
    let mut report = EstimateReport::new(estimator, params.tau_cos, tau_ang);
    let mut rng = rng_for(params.seed);
    let mut costs = Costs::default();
    let (j_h, _) = sample_h_core(table, data, params.tau_cos, params.m_h, &mut rng, &mut costs)?;
    let pairs_l = data.pair_count() - table.same_bucket_pairs();
    let (j_l, safe) = sample_l_core(
        data,
        params.tau_cos,
        params,
        pairs_l as f64,
        |u, v| table.same_bucket(u, v).unwrap_or(false),
        &mut rng,
        &mut costs,
    );
    report.j_hat = j_h + j_l;
    report.j_h_hat = Some(j_h);
    report.j_l_hat = Some(j_l);
    report.safe_lower_bound = safe;
    report.samples_used = costs.samples;
    report.sim_evals = costs.sim_evals;
    report.n_true_sampled = costs.n_true;
    Ok(report)
}

/// Stratified estimator over a single-table index: a uniform stage in
/// the same-bucket stratum plus an adaptive stage in the rest.
pub fn lsh_ss(index: &LshIndex, data: &Dataset, params: &EstimatorParams) -> Result<EstimateReport> {
    require_pairs(data)?;
    params.validate()?;
    let estimator = if matches!(params.dampening, Dampening::None) {
        Estimator::LshSs
    } else {
        Estimator::LshSsD
    };
    lsh_ss_on_table(estimator, index.single_table()?, data, params)
}

/// Runs the stratified estimator on every table independently (seeds
/// derived per table) and returns the median estimate, lower-middle for
/// an even table count. Cost fields sum over all tables; the safe flag
/// is taken from the run whose estimate was selected.
pub fn lsh_ss_median(
    index: &LshIndex,
    data: &Dataset,
    params: &EstimatorParams,
) -> Result<EstimateReport> {
    require_pairs(data)?;
    params.validate()?;
    let mut runs = Vec::with_capacity(index.tables().len());
    for (t, table) in index.tables().iter().enumerate() {
        let mut per_table = params.clone();
        per_table.seed = derive_seed(params.seed, t as u64);
        runs.push(lsh_ss_on_table(Estimator::LshSsMedian, table, data, &per_table)?);
    }
    let mut order: Vec<usize> = (0..runs.len()).collect();
    order.sort_by(|&a, &b| runs[a].j_hat.total_cmp(&runs[b].j_hat).then(a.cmp(&b)));
    let picked = order[(runs.len() - 1) / 2];

    let mut report = runs[picked].clone();
    report.samples_used = runs.iter().map(|r| r.samples_used).sum();
    report.sim_evals = runs.iter().map(|r| r.sim_evals).sum();
    report.n_true_sampled = runs.iter().map(|r| r.n_true_sampled).sum();
    report.j_h_hat = None;
    report.j_l_hat = None;
    Ok(report)
}

/// Attempt budget for rejection sampling into virtual buckets.
fn virtual_attempt_budget(m_h: u64) -> u64 {
    m_h.saturating_mul(256).max(65_536)
}

/// Stratified estimator over virtual buckets: a pair is in the
/// same-bucket stratum when it collides in any table. The stratum is
/// sampled by rejection from all pairs; its size is enumerated exactly
/// for small datasets and otherwise estimated from the acceptance rate
/// of the rejection stream.
pub fn lsh_ss_virtual(
    index: &LshIndex,
    data: &Dataset,
    params: &EstimatorParams,
) -> Result<EstimateReport> {
    require_pairs(data)?;
    params.validate()?;
    let tau_ang = params.tau_angular()?;
    let mut report = EstimateReport::new(Estimator::LshSsVirtual, params.tau_cos, tau_ang);
    let mut rng = rng_for(params.seed);
    let mut costs = Costs::default();
    let m = data.pair_count();
    let n = data.n() as u32;

    let exact = data.n() <= params.virtual_exact_limit;
    let exact_pairs_h = if exact { Some(index.virtual_pair_count()) } else { None };
    report.virtual_pairs_estimated = !exact;

    // Same-bucket stage by rejection from all pairs.
    let mut j_h = 0.0;
    let pairs_h_for_l: f64;
    if exact_pairs_h == Some(0) {
        pairs_h_for_l = 0.0;
    } else {
        let budget = virtual_attempt_budget(params.m_h);
        let mut attempts = 0u64;
        let mut accepted = 0u64;
        let mut hits = 0u64;
        while accepted < params.m_h && attempts < budget {
            let (u, v) = uniform_pair(&mut rng, n);
            attempts += 1;
            costs.samples += 1;
            if index.same_virtual_bucket(u, v)? {
                accepted += 1;
                costs.sim_evals += 1;
                if cosine(data.get(u), data.get(v)) >= params.tau_cos {
                    hits += 1;
                }
            }
        }
        costs.n_true += hits;
        match exact_pairs_h {
            Some(pairs_h) => {
                pairs_h_for_l = pairs_h as f64;
                if accepted > 0 {
                    j_h = hits as f64 * pairs_h as f64 / accepted as f64;
                } else {
                    report.degenerate = true;
                }
            }
            None => {
                if accepted > 0 {
                    // N_H estimated as M * accept rate; the scale-up
                    // collapses to hits * M / attempts.
                    pairs_h_for_l = m as f64 * accepted as f64 / attempts as f64;
                    j_h = hits as f64 * m as f64 / attempts as f64;
                } else {
                    pairs_h_for_l = 0.0;
                    report.degenerate = true;
                }
            }
        }
    }

    let pairs_l = (m as f64 - pairs_h_for_l).max(0.0);
    let (j_l, safe) = sample_l_core(
        data,
        params.tau_cos,
        params,
        pairs_l,
        |u, v| index.same_virtual_bucket(u, v).unwrap_or(false),
        &mut rng,
        &mut costs,
    );

    report.j_hat = j_h + j_l;
    report.j_h_hat = Some(j_h);
    report.j_l_hat = Some(j_l);
    report.safe_lower_bound = safe;
    report.samples_used = costs.samples;
    report.sim_evals = costs.sim_evals;
    report.n_true_sampled = costs.n_true;
    Ok(report)
}

/// Dispatches an estimator by name over a prebuilt index.
pub fn run_estimator(
    estimator: Estimator,
    index: &LshIndex,
    data: &Dataset,
    params: &EstimatorParams,
) -> Result<EstimateReport> {
    match estimator {
        Estimator::RsPop => rs_pop(data, params),
        Estimator::RsCross => rs_cross(data, params),
        Estimator::JUniform => j_uniform_report(index.single_table()?, data, params),
        Estimator::LshS => lsh_s(index.single_table()?, data, params),
        Estimator::LshSs => {
            let mut p = params.clone();
            p.dampening = Dampening::None;
            lsh_ss(index, data, &p)
        }
        Estimator::LshSsD => {
            let mut p = params.clone();
            if matches!(p.dampening, Dampening::None) {
                p.dampening = Dampening::Adaptive;
            }
            lsh_ss(index, data, &p)
        }
        Estimator::LshSsMedian => lsh_ss_median(index, data, params),
        Estimator::LshSsVirtual => lsh_ss_virtual(index, data, params),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsh::HashFamily;
    use crate::vector::SparseVector;
    use approx::assert_relative_eq;

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

    fn identical(n: usize) -> Dataset {
        let rows: Vec<&[(u32, f64)]> = (0..n).map(|_| &[(0u32, 1.0), (1u32, 2.0)][..]).collect();
        dataset(&rows)
    }

    #[test]
    fn closed_form_probs_k2_tau_half() {
        let (p_ht, p_hf) = closed_form_probs(0.5, 2);
        assert_relative_eq!(p_ht, 1.75 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(p_hf, 0.25 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn closed_form_probs_small_tau_limit() {
        let (p_ht, p_hf) = closed_form_probs(1e-12, 8);
        assert_relative_eq!(p_ht, 1.0 / 9.0, epsilon = 1e-9);
        assert!(p_hf < 1e-60);
    }

    #[test]
    fn closed_form_probs_tau_one() {
        let (p_ht, p_hf) = closed_form_probs(1.0, 5);
        assert_relative_eq!(p_ht, 1.0, epsilon = 1e-12);
        assert_relative_eq!(p_hf, 1.0 / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn j_uniform_direct_substitution() {
        // k=2, tau=0.5, N_H=10, M=100: (3*10 - 0.25*100) / 1.5 = 10/3
        assert_relative_eq!(
            j_uniform_raw(10.0, 100.0, 0.5, 2),
            10.0 / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn j_uniform_tau_one_reduces_to_simple_form() {
        let k = 7u32;
        let (pairs_h, m) = (123.0, 10_000.0);
        assert_relative_eq!(
            j_uniform_raw(pairs_h, m, 1.0, k),
            ((k + 1) as f64 * pairs_h - m) / k as f64,
            epsilon = 1e-12
        );
    }

    #[test]
    fn closed_form_equals_conditional_composition() {
        // The uniformity closed form is the conditional-probability
        // estimator evaluated at the closed-form probabilities.
        let cases = [
            (2u32, 0.5f64, 10.0f64, 100.0f64),
            (20, 0.93, 4321.0, 1_999_000.0),
            (5, 0.6, 0.0, 500.0),
            (30, 0.99, 777.0, 1e8),
        ];
        for (k, tau, pairs_h, m) in cases {
            let (p_ht, p_hf) = closed_form_probs(tau, k);
            let via_probs = conditional_prob_estimate(pairs_h, m, p_ht, p_hf);
            let direct = j_uniform_raw(pairs_h, m, tau, k);
            assert_relative_eq!(via_probs, direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn collision_weight_example() {
        // Similarities {1.0, 0.8} at k=2: (1 + 0.64) / 2 = 0.82
        assert_relative_eq!(
            mean_collision_weight(&[1.0, 0.8], 2),
            0.82,
            epsilon = 1e-12
        );
    }

    #[test]
    fn rs_pop_extremes() {
        let data = identical(6);
        let mut params = EstimatorParams::new(0.5, 6, 7);
        params.m_r = 50;
        let r = rs_pop(&data, &params).unwrap();
        assert_eq!(r.j_hat, data.pair_count() as f64);

        // Orthogonal vectors: nothing passes a positive threshold.
        let data = dataset(&[&[(0, 1.0)], &[(1, 1.0)], &[(2, 1.0)]]);
        let r = rs_pop(&data, &EstimatorParams::new(0.5, 3, 7)).unwrap();
        assert_eq!(r.j_hat, 0.0);
    }

    #[test]
    fn rs_pop_scale_up_arithmetic() {
        // 3 hits out of 1000 samples on 1000 vectors: 3 * 499500 / 1000.
        assert_relative_eq!(3.0 * 499_500.0 / 1000.0, 1498.5, epsilon = 1e-12);
    }

    #[test]
    fn rs_cross_record_count() {
        let data = identical(20);
        let mut params = EstimatorParams::new(0.5, 20, 3);
        params.m_r = 9; // ceil(sqrt(9)) = 3 records, 3 pairs
        let r = rs_cross(&data, &params).unwrap();
        assert_eq!(r.samples_used, 3);
        assert_eq!(r.j_hat, data.pair_count() as f64);
    }

    #[test]
    fn rs_cross_too_small_budget_errors() {
        let data = identical(5);
        let mut params = EstimatorParams::new(0.5, 5, 3);
        params.m_r = 1;
        assert!(rs_cross(&data, &params).is_err());
    }

    #[test]
    fn scale_up_l_branches() {
        // Answer threshold reached at accepted=200 with 10000 stratum
        // pairs: 4 * 10000 / 200 = 200.
        let (j, safe) = scale_up_l(4, 200, 10_000.0, 1000, 4, Dampening::None, false);
        assert_relative_eq!(j, 200.0, epsilon = 1e-12);
        assert!(!safe);

        // Exhausted without dampening: the raw count, flagged safe.
        let (j, safe) = scale_up_l(2, 1000, 10_000.0, 1000, 4, Dampening::None, true);
        assert_relative_eq!(j, 2.0, epsilon = 1e-12);
        assert!(safe);

        // Exhausted with the adaptive factor 2/4: 2 * 0.5 * 10 = 10.
        let (j, safe) = scale_up_l(2, 1000, 10_000.0, 1000, 4, Dampening::Adaptive, true);
        assert_relative_eq!(j, 10.0, epsilon = 1e-12);
        assert!(safe);

        // Fixed dampening works the same way with a constant factor.
        let (j, safe) = scale_up_l(2, 1000, 10_000.0, 1000, 4, Dampening::Fixed(0.5), true);
        assert_relative_eq!(j, 10.0, epsilon = 1e-12);
        assert!(safe);
    }

    #[test]
    fn lsh_s_falls_back_to_closed_form_without_true_samples() {
        // Orthogonal vectors: no pair passes a high threshold, so the
        // true-side probability comes from the closed form.
        let rows: Vec<Vec<(u32, f64)>> = (0..30).map(|i| vec![(i as u32, 1.0)]).collect();
        let data = Dataset::new(
            rows.iter()
                .enumerate()
                .map(|(i, e)| SparseVector::new(i as u32, e.clone()).unwrap())
                .collect(),
        )
        .unwrap();
        let family = HashFamily::new(15, 6, 1).unwrap();
        let index = LshIndex::build(&data, &family).unwrap();
        let r = lsh_s(index.single_table().unwrap(), &data, &EstimatorParams::new(0.95, 30, 2)).unwrap();
        assert!(r.closed_form_fallback);
        assert_eq!(r.n_true_sampled, 0);
        assert!(r.j_hat >= 0.0);
    }

    #[test]
    fn j_uniform_report_clamps_negative_estimates() {
        // No collisions and a high threshold push the raw closed form
        // negative; the report clamps to zero and says so.
        let rows: Vec<Vec<(u32, f64)>> = (0..20).map(|i| vec![(i as u32, 1.0)]).collect();
        let data = Dataset::new(
            rows.iter()
                .enumerate()
                .map(|(i, e)| SparseVector::new(i as u32, e.clone()).unwrap())
                .collect(),
        )
        .unwrap();
        let family = HashFamily::new(15, 12, 1).unwrap();
        let index = LshIndex::build(&data, &family).unwrap();
        let table = index.single_table().unwrap();
        assert_eq!(table.same_bucket_pairs(), 0);
        let r = j_uniform_report(table, &data, &EstimatorParams::new(0.9, 20, 2)).unwrap();
        assert_eq!(r.j_hat, 0.0);
        assert!(r.clamped);
    }

    #[test]
    fn lsh_ss_identical_vectors_returns_all_pairs() {
        let data = identical(30);
        let family = HashFamily::new(3, 12, 1).unwrap();
        let index = LshIndex::build(&data, &family).unwrap();
        let r = lsh_ss(&index, &data, &EstimatorParams::new(0.9, 30, 5)).unwrap();
        assert_eq!(r.j_hat, data.pair_count() as f64);
        assert_eq!(r.j_l_hat, Some(0.0));
        assert!(!r.safe_lower_bound);
    }

    #[test]
    fn lsh_ss_disjoint_vectors_returns_zero() {
        let rows: Vec<Vec<(u32, f64)>> = (0..40).map(|i| vec![(i as u32, 1.0)]).collect();
        let data = Dataset::new(
            rows.iter()
                .enumerate()
                .map(|(i, e)| SparseVector::new(i as u32, e.clone()).unwrap())
                .collect(),
        )
        .unwrap();
        let family = HashFamily::new(4, 20, 1).unwrap();
        let index = LshIndex::build(&data, &family).unwrap();
        let r = lsh_ss(&index, &data, &EstimatorParams::new(0.9, 40, 5)).unwrap();
        assert_eq!(r.j_hat, 0.0);
    }

    #[test]
    fn lsh_ss_requires_single_table() {
        let data = identical(4);
        let family = HashFamily::new(3, 8, 2).unwrap();
        let index = LshIndex::build(&data, &family).unwrap();
        assert!(lsh_ss(&index, &data, &EstimatorParams::new(0.5, 4, 1)).is_err());
    }

    #[test]
    fn median_single_table_matches_lsh_ss() {
        let data = identical(10);
        let family = HashFamily::new(9, 10, 1).unwrap();
        let index = LshIndex::build(&data, &family).unwrap();
        let params = EstimatorParams::new(0.5, 10, 11);
        let med = lsh_ss_median(&index, &data, &params).unwrap();
        let mut p = params.clone();
        p.seed = derive_seed(params.seed, 0);
        let single = lsh_ss(&index, &data, &p).unwrap();
        assert_eq!(med.j_hat, single.j_hat);
    }

    #[test]
    fn median_selection_rules() {
        fn median_of(vals: &[f64]) -> f64 {
            let mut order: Vec<usize> = (0..vals.len()).collect();
            order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
            vals[order[(vals.len() - 1) / 2]]
        }
        assert_eq!(median_of(&[10.0, 1000.0, 12.0]), 12.0);
        assert_eq!(median_of(&[10.0, 20.0, 30.0, 1000.0]), 20.0);
    }

    #[test]
    fn virtual_single_table_matches_strata_of_plain_index() {
        let data = identical(12);
        let family = HashFamily::new(21, 10, 1).unwrap();
        let index = LshIndex::build(&data, &family).unwrap();
        assert_eq!(
            index.virtual_pair_count(),
            index.tables()[0].same_bucket_pairs()
        );
        let r = lsh_ss_virtual(&index, &data, &EstimatorParams::new(0.5, 12, 3)).unwrap();
        assert_eq!(r.j_hat, data.pair_count() as f64);
        assert!(!r.virtual_pairs_estimated);
    }

    #[test]
    fn determinism_same_seed_same_report() {
        let data = dataset(&[
            &[(0, 1.0), (1, 0.2)],
            &[(0, 1.0), (1, 0.25)],
            &[(2, 1.0)],
            &[(3, 1.0), (4, -0.4)],
            &[(0, 0.5), (4, 0.9)],
            &[(1, 1.0), (3, 0.3)],
        ]);
        let family = HashFamily::new(8, 8, 1).unwrap();
        let index = LshIndex::build(&data, &family).unwrap();
        let params = EstimatorParams::new(0.6, 6, 99);
        for est in Estimator::ALL {
            let a = run_estimator(est, &index, &data, &params).unwrap();
            let b = run_estimator(est, &index, &data, &params).unwrap();
            assert_eq!(a, b, "{est} not deterministic");
        }
    }

    #[test]
    fn params_validation() {
        let mut p = EstimatorParams::new(0.5, 100, 1);
        assert!(p.validate().is_ok());
        p.tau_cos = 0.0;
        assert!(p.validate().is_err());
        p.tau_cos = 1.5;
        assert!(p.validate().is_err());
        p.tau_cos = 0.5;
        p.delta = p.m_l + 1;
        assert!(p.validate().is_err());
        p.delta = 1;
        p.dampening = Dampening::Fixed(1.5);
        assert!(p.validate().is_err());
    }

    #[test]
    fn delta_defaults() {
        assert_eq!(default_delta(2), 1);
        assert_eq!(default_delta(1024), 10);
        assert_eq!(default_delta(2000), 11);
        assert_eq!(heuristic_delta(2000, 0.9), 4);
        assert_eq!(heuristic_delta(2000, 0.2), 22);
        assert_eq!(heuristic_delta(2000, 0.5), 11);
    }

    #[test]
    fn estimator_names_round_trip() {
        for est in Estimator::ALL {
            assert_eq!(est.name().parse::<Estimator>().unwrap(), est);
        }
        assert!("nope".parse::<Estimator>().is_err());
    }
}
