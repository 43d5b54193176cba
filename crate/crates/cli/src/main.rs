//! `cnss` command-line frontend.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cnss::signals::SignalKind;
use cnss::statistics::Statistic;

/// Offsets added to the master seed for each independent random source.
pub const CALIBRATION_SEED_OFFSET: u64 = 1 << 32;
pub const SIGNIFICANCE_SEED_OFFSET: u64 = 2 << 32;

#[derive(Parser, Debug)]
#[command(name = "cnss", version, about = "Calibrated nonparametric scan statistics on graphs")]
struct Cli {
    /// Master seed; every other seed is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads [env: CNSS_THREADS]; defaults to available parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a graph, node p-values and (with --signal) the true subgraph.
    Generate(GenerateArgs),
    /// Build a calibration table by randomization.
    Calibrate(CalibrateArgs),
    /// Build a calibration table from closed-form lower bounds.
    Bounds(BoundsArgs),
    /// Find the highest-scoring connected subgraph.
    Scan(ScanArgs),
    /// Precision, recall and F-score of detections.
    Evaluate(EvaluateArgs),
    /// Detection power against null replicas.
    Power(PowerArgs),
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct GraphSource {
    /// Edge list, one `u v` pair per line.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Erdos-Renyi graph `n,p` generated from the master seed.
    #[arg(long, value_parser = parse_er)]
    er: Option<(usize, f64)>,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Comma-separated significance levels.
    #[arg(long, conflicts_with = "alpha_max")]
    alpha_grid: Option<String>,
    /// Keep only default grid levels up to this value.
    #[arg(long)]
    alpha_max: Option<f64>,
}

#[derive(Args, Debug)]
struct SearchArgs {
    /// Compress tree-like periphery first; optional width `d` (default 1).
    #[arg(long, num_args = 0..=1, default_missing_value = "1", value_name = "D")]
    coretree: Option<usize>,
}

#[derive(Args, Debug)]
#[group(multiple = false)]
struct CalibrationSource {
    /// Load a calibration table saved by `calibrate` or `bounds`.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Calibrate by randomization (the default).
    #[arg(long)]
    randomize: bool,
    /// Calibrate with closed-form lower bounds.
    #[arg(long)]
    bounds: bool,
    /// Score against alpha itself.
    #[arg(long)]
    no_calibration: bool,
}

#[derive(Args, Debug)]
struct ScoringArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    search: SearchArgs,
    #[command(flatten)]
    calibration: CalibrationSource,
    /// Null replicas used when calibrating by randomization.
    #[arg(long, default_value_t = 200)]
    k_replicas: usize,
    #[arg(long, default_value = "cbj", value_parser = parse_statistic)]
    statistic: Statistic,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    source: GraphSource,
    /// `gaussian:MU` or `piecewise:Q`; omit for null p-values only.
    #[arg(long, value_parser = parse_signal)]
    signal: Option<SignalKind>,
    /// Size of the random-walk true subgraph.
    #[arg(long, default_value_t = 10)]
    true_size: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[command(flatten)]
    source: GraphSource,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, default_value_t = 200)]
    k_replicas: usize,
    /// Table file to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write the surface as CSV `N,alpha,alpha_prime,source`.
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[command(flatten)]
    source: GraphSource,
    #[command(flatten)]
    grid: GridArgs,
    /// Table file to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write the surface as CSV `N,alpha,alpha_prime,source`.
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[command(flatten)]
    source: GraphSource,
    /// Node p-values, `label p` per line.
    #[arg(long)]
    pvalues: PathBuf,
    #[command(flatten)]
    scoring: ScoringArgs,
    /// Null replicas for the significance test; 0 skips it.
    #[arg(long, default_value_t = 0)]
    replicas: usize,
    /// Report up to this many clusters, each significant at --threshold.
    #[arg(long, default_value_t = 1)]
    max_clusters: usize,
    #[arg(long, default_value_t = 0.05)]
    threshold: f64,
    /// JSON result file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    source: GraphSource,
    /// Score one saved result against this truth file instead of simulating.
    #[arg(long, requires = "result")]
    truth: Option<PathBuf>,
    #[arg(long, requires = "truth")]
    result: Option<PathBuf>,
    #[arg(long, value_parser = parse_signal, conflicts_with = "result")]
    signal: Option<SignalKind>,
    #[arg(long, default_value_t = 10)]
    true_size: usize,
    #[arg(long, default_value_t = 20)]
    runs: usize,
    #[command(flatten)]
    scoring: ScoringArgs,
    /// CSV `run,precision,recall,fscore`; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PowerArgs {
    #[command(flatten)]
    source: GraphSource,
    #[arg(long, value_parser = parse_signal)]
    signal: SignalKind,
    #[arg(long, default_value_t = 10)]
    true_size: usize,
    /// Signal-bearing runs.
    #[arg(long, default_value_t = 20)]
    runs: usize,
    /// Null replicas.
    #[arg(long, default_value_t = 100)]
    replicas: usize,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    #[command(flatten)]
    scoring: ScoringArgs,
    /// CSV `kind,index,score`; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_er(s: &str) -> Result<(usize, f64), String> {
    let (n, p) = s.split_once(',').ok_or("expected n,p")?;
    let n: usize = n.trim().parse().map_err(|e| format!("bad n: {e}"))?;
    let p: f64 = p.trim().parse().map_err(|e| format!("bad p: {e}"))?;
    if n == 0 || !(0.0..=1.0).contains(&p) {
        return Err(format!("need n >= 1 and 0 <= p <= 1, got {n},{p}"));
    }
    Ok((n, p))
}

fn parse_signal(s: &str) -> Result<SignalKind, String> {
    s.parse().map_err(|e: cnss::Error| e.to_string())
}

fn parse_statistic(s: &str) -> Result<Statistic, String> {
    s.parse().map_err(|e: cnss::Error| e.to_string())
}

/// Why a command failed; decides the exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let threads = match cli.threads {
        Some(t) => Some(t),
        None => match std::env::var("CNSS_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse()
                    .map_err(|_| Failure::Usage(format!("CNSS_THREADS={v:?} is not a count")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(Failure::Usage("thread count must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let ctx = commands::Context {
        seed: cli.seed,
        force: cli.force,
    };
    match cli.command {
        Command::Generate(a) => commands::generate(&ctx, a),
        Command::Calibrate(a) => commands::calibrate(&ctx, a),
        Command::Bounds(a) => commands::bounds(&ctx, a),
        Command::Scan(a) => commands::scan(&ctx, a),
        Command::Evaluate(a) => commands::evaluate(&ctx, a),
        Command::Power(a) => commands::power(&ctx, a),
    }
}
