//! Command-line surface: corpus generation, index build and inspection,
//! single estimates, exact oracle profiles, and benchmark sweeps.
//!
//! Exit codes: 0 on success, 2 on invalid input, 3 when the exact
//! oracle refuses an oversized O(n^2) pass. All randomness derives from
//! `--seed`; trial `t` of a sweep uses `seed + t`, so identical
//! invocations produce identical output files.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use simjoin::bench::{
    parameter_study, run_sweep, run_sweep_general, write_study_csv, write_summary_csv,
    write_trials_csv, BenchConfig, StudyAxis,
};
use simjoin::estimators::{heuristic_delta, run_estimator, Dampening, EstimateReport, Estimator};
use simjoin::general::{general_join_build, general_lsh_ss};
use simjoin::oracle::{profile_sweep, write_profile_csv, DEFAULT_EXACT_LIMIT};
use simjoin::synth::{generate, SyntheticSpec};
use simjoin::{Dataset, Error, EstimatorParams, HashFamily, LshIndex};

#[derive(Parser)]
#[command(
    name = "simjoin",
    about = "Estimate cosine-similarity join sizes with an LSH-backed sampler",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus in the sparse-vector text format.
    Gen(GenArgs),
    /// Build an index and print its bucket statistics.
    Index(IndexArgs),
    /// Run one estimator at one threshold.
    Estimate(EstimateArgs),
    /// Emit the exact oracle profile as CSV.
    Oracle(OracleArgs),
    /// Run a benchmark sweep and emit summary and per-trial CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Output path for the corpus; a manifest is written next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 5000)]
    dims: u32,
    /// Planted near-duplicate clusters.
    #[arg(long, default_value_t = 10)]
    clusters: usize,
    #[arg(long, default_value_t = 15)]
    cluster_size: usize,
    /// Perturbation norm for cluster members; 0 plants exact copies.
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    /// Background topics; 0 leaves the background unstructured.
    #[arg(long, default_value_t = 0)]
    bg_topics: usize,
    #[arg(long, default_value_t = 0.3)]
    bg_weight_lo: f64,
    #[arg(long, default_value_t = 0.9)]
    bg_weight_hi: f64,
    /// Entries per generated direction.
    #[arg(long, default_value_t = 20)]
    nnz: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct IndexArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 20)]
    k: u32,
    #[arg(long, default_value_t = 1)]
    ell: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Write an index snapshot here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the statistics here instead of stdout.
    #[arg(long)]
    stats_out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    /// Second collection; switches to the two-collection join estimator.
    #[arg(long)]
    input2: Option<PathBuf>,
    #[arg(long)]
    est: Estimator,
    #[arg(long)]
    tau: f64,
    #[arg(long, default_value_t = 20)]
    k: u32,
    #[arg(long, default_value_t = 1)]
    ell: u32,
    /// Sample size in the same-bucket stratum; defaults to n.
    #[arg(long)]
    mh: Option<u64>,
    /// Sample budget in the split stratum; defaults to n.
    #[arg(long)]
    ml: Option<u64>,
    /// Answer-size threshold; defaults to ceil(log2 n).
    #[arg(long)]
    delta: Option<u64>,
    /// Pick delta from the threshold (smaller at high thresholds).
    #[arg(long, default_value_t = false)]
    delta_heuristic: bool,
    /// Dampened scale-up: none, adaptive, or a factor in (0, 1].
    #[arg(long, default_value = "none")]
    cs: Dampening,
    /// Baseline sample size; defaults to ceil(1.5 n).
    #[arg(long)]
    mr: Option<u64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Count rejected same-bucket draws against the adaptive budget.
    #[arg(long, default_value_t = false)]
    count_rejected: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    input: PathBuf,
    /// One threshold, or use --taus for a grid.
    #[arg(long)]
    tau: Option<f64>,
    /// Comma-separated ascending thresholds.
    #[arg(long, value_delimiter = ',')]
    taus: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    k: u32,
    #[arg(long, default_value_t = 1)]
    ell: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Define the same-bucket stratum across all tables.
    #[arg(long, default_value_t = false)]
    r#virtual: bool,
    #[arg(long, default_value_t = DEFAULT_EXACT_LIMIT)]
    exact_limit: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    input: PathBuf,
    /// Second collection; restricts estimators to lsh_ss / lsh_ss_d.
    #[arg(long)]
    input2: Option<PathBuf>,
    /// Comma-separated estimator names.
    #[arg(long, value_delimiter = ',', default_value = "rs_pop,rs_cross,lsh_ss,lsh_ss_d")]
    est: Vec<Estimator>,
    /// Comma-separated ascending thresholds.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    taus: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    trials: u32,
    #[arg(long, default_value_t = 20)]
    k: u32,
    #[arg(long, default_value_t = 1)]
    ell: u32,
    #[arg(long)]
    mh: Option<u64>,
    #[arg(long)]
    ml: Option<u64>,
    #[arg(long)]
    delta: Option<u64>,
    #[arg(long, default_value = "adaptive")]
    cs: Dampening,
    #[arg(long)]
    mr: Option<u64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = false)]
    count_rejected: bool,
    /// Record wall-clock runtimes; off by default so output files are
    /// byte-identical across runs.
    #[arg(long, default_value_t = false)]
    measure_time: bool,
    #[arg(long, default_value_t = DEFAULT_EXACT_LIMIT)]
    exact_limit: u64,
    /// Prefix for output files: <out>.summary.csv and <out>.trials.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run a parameter study along this axis instead of a plain sweep.
    #[arg(long)]
    study: Option<StudyAxisArg>,
    /// Values for the study axis.
    #[arg(long, value_delimiter = ',')]
    study_values: Vec<f64>,
}

#[derive(Clone, Copy)]
struct StudyAxisArg(StudyAxis);

impl std::str::FromStr for StudyAxisArg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(StudyAxisArg(s.parse()?))
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::OracleLimit { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run() -> Result<(), Error> {
    match Cli::parse().command {
        Command::Gen(args) => cmd_gen(args),
        Command::Index(args) => cmd_index(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn write_output(path: Option<&Path>, contents: &[u8]) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, contents)?,
        None => std::io::stdout().write_all(contents)?,
    }
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<(), Error> {
    let spec = SyntheticSpec {
        n: args.n,
        dims: args.dims,
        cluster_count: args.clusters,
        cluster_size: args.cluster_size,
        noise: args.noise,
        bg_topics: args.bg_topics,
        bg_weight_lo: args.bg_weight_lo,
        bg_weight_hi: args.bg_weight_hi,
        nnz: args.nnz,
        seed: args.seed,
    };
    let (data, manifest) = generate(&spec)?;
    data.write_path(&args.out)?;
    let manifest_path = manifest_path_for(&args.out);
    std::fs::write(&manifest_path, manifest.to_json())?;
    println!(
        "wrote {} vectors to {} (manifest: {})",
        data.n(),
        args.out.display(),
        manifest_path.display()
    );
    Ok(())
}

fn manifest_path_for(out: &Path) -> PathBuf {
    let mut os = out.as_os_str().to_owned();
    os.push(".manifest.json");
    PathBuf::from(os)
}

fn cmd_index(args: IndexArgs) -> Result<(), Error> {
    let data = Dataset::read_path(&args.input)?;
    let family = HashFamily::new(args.seed, args.k, args.ell)?;
    let index = LshIndex::build(&data, &family)?;

    let mut stats = String::new();
    stats.push_str(&format!(
        "n={} k={} ell={} seed={}\n",
        data.n(),
        args.k,
        args.ell,
        args.seed
    ));
    for (t, table) in index.tables().iter().enumerate() {
        stats.push_str(&format!(
            "table={t} n_buckets={} same_bucket_pairs={}\n",
            table.bucket_count(),
            table.same_bucket_pairs()
        ));
        let mut hist = std::collections::BTreeMap::new();
        for b in table.buckets() {
            *hist.entry(b.count()).or_insert(0u64) += 1;
        }
        stats.push_str(&format!("bucket_size_hist table={t}:"));
        for (size, count) in hist {
            stats.push_str(&format!(" {size}:{count}"));
        }
        stats.push('\n');
    }
    write_output(args.stats_out.as_deref(), stats.as_bytes())?;

    if let Some(snap) = &args.out {
        index.save_snapshot_path(snap)?;
    }
    Ok(())
}

fn format_report(report: &EstimateReport) -> String {
    let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| x.to_string());
    format!(
        "estimator={}\ntau_cos={}\ntau_ang={}\nj_hat={}\nj_h_hat={}\nj_l_hat={}\n\
         n_true_sampled={}\nsamples_used={}\nsim_evals={}\nsafe_lower_bound={}\n\
         clamped={}\ndegenerate={}\nclosed_form_fallback={}\nvirtual_pairs_estimated={}\n",
        report.estimator,
        report.tau_cos,
        report.tau_ang,
        report.j_hat,
        opt(report.j_h_hat),
        opt(report.j_l_hat),
        report.n_true_sampled,
        report.samples_used,
        report.sim_evals,
        report.safe_lower_bound,
        report.clamped,
        report.degenerate,
        report.closed_form_fallback,
        report.virtual_pairs_estimated
    )
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), Error> {
    let data = Dataset::read_path(&args.input)?;
    let n_basis = match &args.input2 {
        Some(p) => data.n().max(Dataset::read_path(p)?.n()),
        None => data.n(),
    };
    let mut params = EstimatorParams::new(args.tau, n_basis, args.seed);
    if let Some(v) = args.mh {
        params.m_h = v;
    }
    if let Some(v) = args.ml {
        params.m_l = v;
    }
    if let Some(v) = args.delta {
        params.delta = v;
    } else if args.delta_heuristic {
        params.delta = heuristic_delta(n_basis, args.tau);
    }
    if let Some(v) = args.mr {
        params.m_r = v;
    }
    params.dampening = args.cs;
    params.count_rejected = args.count_rejected;

    let report = match &args.input2 {
        Some(p) => {
            if !matches!(args.est, Estimator::LshSs | Estimator::LshSsD) {
                return Err(Error::InvalidInput(format!(
                    "estimator {} does not support two-collection joins",
                    args.est
                )));
            }
            let right = Dataset::read_path(p)?;
            let family = HashFamily::new(args.seed, args.k, 1)?;
            let gj = general_join_build(&data, &right, &family)?;
            if args.est == Estimator::LshSsD && matches!(params.dampening, Dampening::None) {
                params.dampening = Dampening::Adaptive;
            }
            general_lsh_ss(&gj, &data, &right, &params)?
        }
        None => {
            let family = HashFamily::new(args.seed, args.k, args.ell)?;
            let index = LshIndex::build(&data, &family)?;
            run_estimator(args.est, &index, &data, &params)?
        }
    };
    write_output(args.out.as_deref(), format_report(&report).as_bytes())
}

fn cmd_oracle(args: OracleArgs) -> Result<(), Error> {
    let data = Dataset::read_path(&args.input)?;
    let taus: Vec<f64> = match (args.tau, args.taus.is_empty()) {
        (Some(t), true) => vec![t],
        (None, false) => args.taus.clone(),
        _ => {
            return Err(Error::InvalidInput(
                "give exactly one of --tau or --taus".into(),
            ))
        }
    };
    let family = HashFamily::new(args.seed, args.k, args.ell)?;
    let index = LshIndex::build(&data, &family)?;
    let profiles = profile_sweep(&index, &data, &taus, args.r#virtual, args.exact_limit)?;
    let mut buf = Vec::new();
    write_profile_csv(&mut buf, &profiles)?;
    write_output(args.out.as_deref(), &buf)
}

fn cmd_bench(args: BenchArgs) -> Result<(), Error> {
    let config = BenchConfig {
        estimators: args.est.clone(),
        taus: args.taus.clone(),
        trials: args.trials,
        k: args.k,
        ell: args.ell,
        m_h: args.mh,
        m_l: args.ml,
        delta: args.delta,
        dampening: args.cs,
        m_r: args.mr,
        base_seed: args.seed,
        count_rejected: args.count_rejected,
        measure_time: args.measure_time,
        exact_limit: args.exact_limit,
    };

    if let Some(axis) = args.study {
        if args.input2.is_some() {
            return Err(Error::InvalidInput(
                "parameter studies run on a single collection".into(),
            ));
        }
        if args.study_values.is_empty() {
            return Err(Error::InvalidInput("--study needs --study-values".into()));
        }
        let data = Dataset::read_path(&args.input)?;
        let results = parameter_study(&data, axis.0, &args.study_values, &config)?;
        let mut buf = Vec::new();
        write_study_csv(&mut buf, axis.0, &results)?;
        let path = args
            .out
            .as_ref()
            .map(|p| suffixed(p, ".study.csv"));
        write_output(path.as_deref(), &buf)?;
        for (value, sweep) in &results {
            eprintln!(
                "study {}={value}: index build {:.1} ms, oracle {:.1} ms",
                axis.0.name(),
                sweep.index_build_ms,
                sweep.oracle_ms
            );
        }
        return Ok(());
    }

    let data = Dataset::read_path(&args.input)?;
    let sweep = match &args.input2 {
        Some(p) => {
            let right = Dataset::read_path(p)?;
            run_sweep_general(&data, &right, &config)?
        }
        None => run_sweep(&data, &config)?,
    };
    eprintln!(
        "index build {:.1} ms, oracle {:.1} ms",
        sweep.index_build_ms, sweep.oracle_ms
    );

    let mut summary = Vec::new();
    write_summary_csv(&mut summary, &sweep.cells)?;
    match &args.out {
        Some(prefix) => {
            std::fs::write(suffixed(prefix, ".summary.csv"), &summary)?;
            let mut trials = Vec::new();
            write_trials_csv(&mut trials, &sweep.trial_log)?;
            std::fs::write(suffixed(prefix, ".trials.csv"), &trials)?;
        }
        None => std::io::stdout().write_all(&summary)?,
    }
    Ok(())
}

fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut os = prefix.as_os_str().to_owned();
    os.push(suffix);
    PathBuf::from(os)
}
