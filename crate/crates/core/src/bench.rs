//! Benchmark harness: threshold sweeps with repeated trials against the
//! exact oracle, aggregated into per-cell statistics, plus parameter
//! studies along one axis.
//!
//! Trial `t` runs with seed `base_seed + t`. Trials are independent and
//! run in parallel; aggregation is ordered, so two runs of the same
//! config produce identical output. Wall-clock timing is off by default
//! to keep emitted CSV byte-stable; enable `measure_time` to record it.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{
    run_estimator, Dampening, Estimator, EstimatorParams,
};
use crate::general::{general_join_build, general_lsh_ss};
use crate::lsh::{HashFamily, LshIndex};
use crate::oracle::{exact_cross_join_sizes, exact_join_sizes, DEFAULT_EXACT_LIMIT};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub estimators: Vec<Estimator>,
    /// Ascending thresholds in (0, 1].
    pub taus: Vec<f64>,
    pub trials: u32,
    pub k: u32,
    pub ell: u32,
    pub m_h: Option<u64>,
    pub m_l: Option<u64>,
    pub delta: Option<u64>,
    /// Dampening for the dampened stratified estimator.
    pub dampening: Dampening,
    pub m_r: Option<u64>,
    pub base_seed: u64,
    pub count_rejected: bool,
    pub measure_time: bool,
    pub exact_limit: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            estimators: vec![Estimator::RsPop, Estimator::RsCross, Estimator::LshSs, Estimator::LshSsD],
            taus: (1..10).map(|i| i as f64 / 10.0).collect(),
            trials: 100,
            k: 20,
            ell: 1,
            m_h: None,
            m_l: None,
            delta: None,
            dampening: Dampening::Adaptive,
            m_r: None,
            base_seed: 42,
            count_rejected: false,
            measure_time: false,
            exact_limit: DEFAULT_EXACT_LIMIT,
        }
    }
}

impl BenchConfig {
    fn validate(&self) -> Result<()> {
        if self.estimators.is_empty() {
            return Err(Error::InvalidInput("no estimators selected".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be at least 1".into()));
        }
        if self.ell != 1 && self.estimators.iter().any(|e| e.single_table_only()) {
            return Err(Error::InvalidInput(
                "single-table estimators require ell = 1".into(),
            ));
        }
        Ok(())
    }

    fn params_for(&self, n: usize, tau: f64, seed: u64) -> EstimatorParams {
        let mut p = EstimatorParams::new(tau, n, seed);
        if let Some(v) = self.m_h {
            p.m_h = v;
        }
        if let Some(v) = self.m_l {
            p.m_l = v;
        }
        if let Some(v) = self.delta {
            p.delta = v;
        }
        if let Some(v) = self.m_r {
            p.m_r = v;
        }
        p.dampening = self.dampening;
        p.count_rejected = self.count_rejected;
        p
    }
}

/// One estimator invocation inside a sweep.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub estimator: Estimator,
    pub tau: f64,
    pub trial: u32,
    pub seed: u64,
    pub j_hat: f64,
    pub j_h_hat: Option<f64>,
    pub j_l_hat: Option<f64>,
    pub safe: bool,
    pub samples: u64,
    pub sim_evals: u64,
    pub runtime_ms: f64,
}

/// Aggregate statistics for one `(estimator, tau)` cell.
#[derive(Debug, Clone)]
pub struct BenchCell {
    pub estimator: Estimator,
    pub tau: f64,
    pub trials: u32,
    /// Mean signed relative error over overestimating trials.
    pub mean_over_err: Option<f64>,
    /// Mean signed relative error over underestimating trials.
    pub mean_under_err: Option<f64>,
    pub over_count: u32,
    pub under_count: u32,
    pub exact_count: u32,
    /// Sample standard deviation of the estimates.
    pub std_j: f64,
    pub mean_j: f64,
    pub mean_runtime_ms: f64,
    /// Trials at least 10x off in either direction.
    pub big_over: u32,
    pub big_under: u32,
    pub safe_lb_frac: f64,
    pub oracle_j: u64,
    /// True join size is zero; relative statistics are undefined.
    pub oracle_is_zero: bool,
}

#[derive(Debug)]
pub struct SweepOutput {
    pub cells: Vec<BenchCell>,
    pub trial_log: Vec<TrialRecord>,
    pub index_build_ms: f64,
    pub oracle_ms: f64,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn aggregate(records: &[TrialRecord], oracle_j: u64) -> BenchCell {
    let estimator = records[0].estimator;
    let tau = records[0].tau;
    let js: Vec<f64> = records.iter().map(|r| r.j_hat).collect();
    let j = oracle_j as f64;
    let mut cell = BenchCell {
        estimator,
        tau,
        trials: records.len() as u32,
        mean_over_err: None,
        mean_under_err: None,
        over_count: 0,
        under_count: 0,
        exact_count: 0,
        std_j: sample_std(&js),
        mean_j: mean(&js),
        mean_runtime_ms: mean(&records.iter().map(|r| r.runtime_ms).collect::<Vec<_>>()),
        big_over: 0,
        big_under: 0,
        safe_lb_frac: records.iter().filter(|r| r.safe).count() as f64 / records.len() as f64,
        oracle_j,
        oracle_is_zero: oracle_j == 0,
    };
    if oracle_j == 0 {
        return cell;
    }
    let mut over = Vec::new();
    let mut under = Vec::new();
    for &est in &js {
        if est > j {
            over.push((est - j) / j);
            if est / j >= 10.0 {
                cell.big_over += 1;
            }
        } else if est < j {
            under.push((est - j) / j);
            if est <= j / 10.0 {
                cell.big_under += 1;
            }
        } else {
            cell.exact_count += 1;
        }
    }
    cell.over_count = over.len() as u32;
    cell.under_count = under.len() as u32;
    cell.mean_over_err = (!over.is_empty()).then(|| mean(&over));
    cell.mean_under_err = (!under.is_empty()).then(|| mean(&under));
    cell
}

/// Runs every selected estimator over the threshold grid, `trials`
/// times each, and aggregates against the exact oracle.
pub fn run_sweep(data: &Dataset, config: &BenchConfig) -> Result<SweepOutput> {
    config.validate()?;
    let family = HashFamily::new(config.base_seed, config.k, config.ell)?;
    let t0 = Instant::now();
    let index = LshIndex::build(data, &family)?;
    let index_build_ms = t0.elapsed().as_secs_f64() * 1e3;

    let t1 = Instant::now();
    let oracle_js = exact_join_sizes(data, &config.taus, config.exact_limit)?;
    let oracle_ms = t1.elapsed().as_secs_f64() * 1e3;

    let mut cells = Vec::new();
    let mut trial_log = Vec::new();
    for &est in &config.estimators {
        for (ti, &tau) in config.taus.iter().enumerate() {
            let records: Vec<TrialRecord> = (0..config.trials)
                .into_par_iter()
                .map(|t| {
                    let seed = config.base_seed + t as u64;
                    let params = config.params_for(data.n(), tau, seed);
                    let start = config.measure_time.then(Instant::now);
                    let report = run_estimator(est, &index, data, &params)?;
                    let runtime_ms = start.map_or(0.0, |s| s.elapsed().as_secs_f64() * 1e3);
                    Ok(TrialRecord {
                        estimator: est,
                        tau,
                        trial: t,
                        seed,
                        j_hat: report.j_hat,
                        j_h_hat: report.j_h_hat,
                        j_l_hat: report.j_l_hat,
                        safe: report.safe_lower_bound,
                        samples: report.samples_used,
                        sim_evals: report.sim_evals,
                        runtime_ms,
                    })
                })
                .collect::<Result<_>>()?;
            cells.push(aggregate(&records, oracle_js[ti]));
            trial_log.extend(records);
        }
    }
    Ok(SweepOutput {
        cells,
        trial_log,
        index_build_ms,
        oracle_ms,
    })
}

/// Sweep for a join between two collections. Only the stratified
/// estimator is defined there.
pub fn run_sweep_general(
    left: &Dataset,
    right: &Dataset,
    config: &BenchConfig,
) -> Result<SweepOutput> {
    config.validate()?;
    if config
        .estimators
        .iter()
        .any(|e| !matches!(e, Estimator::LshSs | Estimator::LshSsD))
    {
        return Err(Error::InvalidInput(
            "general joins support lsh_ss and lsh_ss_d only".into(),
        ));
    }
    let family = HashFamily::new(config.base_seed, config.k, 1)?;
    let t0 = Instant::now();
    let gj = general_join_build(left, right, &family)?;
    let index_build_ms = t0.elapsed().as_secs_f64() * 1e3;

    let t1 = Instant::now();
    let oracle_js = exact_cross_join_sizes(left, right, &config.taus, config.exact_limit)?;
    let oracle_ms = t1.elapsed().as_secs_f64() * 1e3;

    let n_basis = left.n().max(right.n());
    let mut cells = Vec::new();
    let mut trial_log = Vec::new();
    for &est in &config.estimators {
        for (ti, &tau) in config.taus.iter().enumerate() {
            let records: Vec<TrialRecord> = (0..config.trials)
                .into_par_iter()
                .map(|t| {
                    let seed = config.base_seed + t as u64;
                    let mut params = config.params_for(n_basis, tau, seed);
                    params.dampening = if est == Estimator::LshSs {
                        Dampening::None
                    } else {
                        config.dampening
                    };
                    let start = config.measure_time.then(Instant::now);
                    let report = general_lsh_ss(&gj, left, right, &params)?;
                    let runtime_ms = start.map_or(0.0, |s| s.elapsed().as_secs_f64() * 1e3);
                    Ok(TrialRecord {
                        estimator: est,
                        tau,
                        trial: t,
                        seed,
                        j_hat: report.j_hat,
                        j_h_hat: report.j_h_hat,
                        j_l_hat: report.j_l_hat,
                        safe: report.safe_lower_bound,
                        samples: report.samples_used,
                        sim_evals: report.sim_evals,
                        runtime_ms,
                    })
                })
                .collect::<Result<_>>()?;
            cells.push(aggregate(&records, oracle_js[ti]));
            trial_log.extend(records);
        }
    }
    Ok(SweepOutput {
        cells,
        trial_log,
        index_build_ms,
        oracle_ms,
    })
}

/// Axes of the parameter studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyAxis {
    /// Answer-size threshold of the adaptive stage.
    Delta,
    /// Per-stratum sample size; the baseline budget follows as 1.5x.
    SampleSize,
    /// Fixed dampened scale-up factor.
    Cs,
    /// Bits per table.
    K,
}

impl StudyAxis {
    pub fn name(self) -> &'static str {
        match self {
            StudyAxis::Delta => "delta",
            StudyAxis::SampleSize => "m",
            StudyAxis::Cs => "c_s",
            StudyAxis::K => "k",
        }
    }
}

impl std::str::FromStr for StudyAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta" => Ok(StudyAxis::Delta),
            "m" => Ok(StudyAxis::SampleSize),
            "c_s" | "cs" => Ok(StudyAxis::Cs),
            "k" => Ok(StudyAxis::K),
            other => Err(Error::InvalidInput(format!("unknown study axis {other:?}"))),
        }
    }
}

/// Answer-size grid `{0.5 log2 n, log2 n, 2 log2 n, sqrt(n)}`.
pub fn delta_grid(n: usize) -> Vec<f64> {
    let lg = (n as f64).log2();
    vec![0.5 * lg, lg, 2.0 * lg, (n as f64).sqrt()]
}

/// Sample-size grid `{sqrt(n), n/log2 n, 0.5n, n, 2n, n log2 n}`.
pub fn sample_size_grid(n: usize) -> Vec<f64> {
    let nf = n as f64;
    let lg = nf.log2();
    vec![nf.sqrt(), nf / lg, 0.5 * nf, nf, 2.0 * nf, nf * lg]
}

/// One sweep per value along the chosen axis.
pub fn parameter_study(
    data: &Dataset,
    axis: StudyAxis,
    values: &[f64],
    config: &BenchConfig,
) -> Result<Vec<(f64, SweepOutput)>> {
    if values.is_empty() {
        return Err(Error::InvalidInput("no study values given".into()));
    }
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        let mut cfg = config.clone();
        match axis {
            StudyAxis::Delta => cfg.delta = Some((v.round() as u64).max(1)),
            StudyAxis::SampleSize => {
                let m = (v.round() as u64).max(1);
                cfg.m_h = Some(m);
                cfg.m_l = Some(m);
                cfg.m_r = Some(((m as f64) * 1.5).ceil() as u64);
            }
            StudyAxis::Cs => cfg.dampening = Dampening::Fixed(v),
            StudyAxis::K => cfg.k = v.round() as u32,
        }
        out.push((v, run_sweep(data, &cfg)?));
    }
    Ok(out)
}

pub const SUMMARY_HEADER: &str =
    "estimator,tau,trials,mean_over_err,mean_under_err,std,mean_runtime_ms,big_over,big_under,safe_lb_frac,oracle_J";

pub const TRIALS_HEADER: &str =
    "estimator,tau,trial,seed,j_hat,j_h_hat,j_l_hat,safe,samples,sim_evals";

fn opt(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

fn write_cell<W: Write>(w: &mut W, c: &BenchCell) -> Result<()> {
    writeln!(
        w,
        "{},{},{},{},{},{},{:.3},{},{},{},{}",
        c.estimator,
        c.tau,
        c.trials,
        opt(c.mean_over_err),
        opt(c.mean_under_err),
        c.std_j,
        c.mean_runtime_ms,
        c.big_over,
        c.big_under,
        c.safe_lb_frac,
        c.oracle_j
    )?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(mut w: W, cells: &[BenchCell]) -> Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for c in cells {
        write_cell(&mut w, c)?;
    }
    Ok(())
}

pub fn write_trials_csv<W: Write>(mut w: W, records: &[TrialRecord]) -> Result<()> {
    writeln!(w, "{TRIALS_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.estimator,
            r.tau,
            r.trial,
            r.seed,
            r.j_hat,
            opt(r.j_h_hat),
            opt(r.j_l_hat),
            r.safe,
            r.samples,
            r.sim_evals
        )?;
    }
    Ok(())
}

pub fn write_study_csv<W: Write>(
    mut w: W,
    axis: StudyAxis,
    results: &[(f64, SweepOutput)],
) -> Result<()> {
    writeln!(w, "axis,value,{SUMMARY_HEADER}")?;
    for (value, sweep) in results {
        for c in &sweep.cells {
            write!(w, "{},{},", axis.name(), value)?;
            write_cell(&mut w, c)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn record(j_hat: f64) -> TrialRecord {
        TrialRecord {
            estimator: Estimator::LshSs,
            tau: 0.5,
            trial: 0,
            seed: 0,
            j_hat,
            j_h_hat: None,
            j_l_hat: None,
            safe: false,
            samples: 1,
            sim_evals: 1,
            runtime_ms: 0.0,
        }
    }

    #[test]
    fn exact_estimator_aggregates_to_zero_error() {
        let records: Vec<TrialRecord> = (0..5).map(|_| record(100.0)).collect();
        let cell = aggregate(&records, 100);
        assert_eq!(cell.exact_count, 5);
        assert_eq!(cell.over_count + cell.under_count, 0);
        assert_eq!(cell.std_j, 0.0);
        assert_eq!(cell.mean_over_err, None);
        assert_eq!(cell.big_over + cell.big_under, 0);
    }

    #[test]
    fn zero_estimator_is_a_full_underestimate() {
        let records: Vec<TrialRecord> = (0..4).map(|_| record(0.0)).collect();
        let cell = aggregate(&records, 50);
        assert_eq!(cell.under_count, 4);
        assert_relative_eq!(cell.mean_under_err.unwrap(), -1.0, epsilon = 1e-12);
        assert_eq!(cell.big_under, 4);
    }

    #[test]
    fn partitions_sum_to_trials() {
        let records = vec![record(10.0), record(2000.0), record(100.0), record(0.1)];
        let cell = aggregate(&records, 100);
        assert_eq!(
            cell.over_count + cell.under_count + cell.exact_count,
            cell.trials
        );
        assert_eq!(cell.big_over, 1); // 2000/100
        assert_eq!(cell.big_under, 2); // 10 and 0.1
    }

    #[test]
    fn zero_oracle_skips_relative_stats() {
        let records = vec![record(3.0), record(0.0)];
        let cell = aggregate(&records, 0);
        assert!(cell.oracle_is_zero);
        assert_eq!(cell.mean_over_err, None);
        assert_eq!(cell.big_over + cell.big_under, 0);
        assert_relative_eq!(cell.mean_j, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn grids_match_the_documented_shapes() {
        let d = delta_grid(1024);
        assert_eq!(d, vec![5.0, 10.0, 20.0, 32.0]);
        let m = sample_size_grid(1024);
        assert_relative_eq!(m[0], 32.0, epsilon = 1e-9);
        assert_relative_eq!(m[3], 1024.0, epsilon = 1e-9);
        assert_relative_eq!(m[5], 10240.0, epsilon = 1e-9);
    }
}
