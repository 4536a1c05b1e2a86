//! Command-line surface for the ordered-conditional Gaussian process
//! toolkit.
//!
//! Exit codes: 0 success, 2 configuration/input error, 3 numerical failure.

mod commands;
mod data;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Classified errors so the shell sees meaningful exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable files, malformed data: exit 2.
    Config(String),
    /// Factorization failures, overflow, non-convergence: exit 3.
    Numeric(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        CliError::Numeric(msg.into())
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<vecchia::Error> for CliError {
    fn from(e: vecchia::Error) -> Self {
        use vecchia::Error::*;
        match e {
            Factorization { .. }
            | Overflow(_)
            | NonConvergence { .. }
            | RankDeficient(_)
            | OracleTooLarge { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    pub fn is_on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderName {
    Coord,
    Sum,
    Middle,
    Random,
    Mmd,
    Ammd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyName {
    Matern,
    Spacetime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricName {
    Auto,
    Full,
    Spatial,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Synthetic regular grid on the unit square, e.g. 30x30 (alternative
    /// to --input for location-only commands).
    #[arg(long)]
    pub grid: Option<String>,
    /// Comma-separated coordinate column names.
    #[arg(long, default_value = "x,y")]
    pub coords: String,
    /// Time column name (presence switches to space-time layout).
    #[arg(long)]
    pub time: Option<String>,
    /// Response column name.
    #[arg(long, default_value = "y")]
    pub response: String,
    /// Comma-separated covariate column names for a linear mean.
    #[arg(long)]
    pub covariates: Option<String>,
    /// Prepend an intercept column to the covariates.
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub intercept: Switch,
    /// Treat coordinates as (lon, lat) degrees on the sphere.
    #[arg(long, value_enum, default_value_t = Switch::Off)]
    pub sphere_time: Switch,
    /// Skip malformed rows (reported) instead of failing.
    #[arg(long, value_enum, default_value_t = Switch::Off)]
    pub skip_bad: Switch,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value_t = FamilyName::Matern)]
    pub family: FamilyName,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 0.1)]
    pub range: f64,
    /// Temporal range (space-time family).
    #[arg(long, default_value_t = 1.0)]
    pub time_range: f64,
    #[arg(long, default_value_t = 0.5)]
    pub smoothness: f64,
    #[arg(long, default_value_t = 0.0)]
    pub nugget: f64,
    /// Constant mean, used when no covariates are given.
    #[arg(long, default_value_t = 0.0)]
    pub mu: f64,
    /// Diagonal jitter for near-duplicate locations.
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,
}

#[derive(Debug, Args)]
pub struct ApproxArgs {
    #[arg(long, value_enum, default_value_t = OrderName::Ammd)]
    pub order: OrderName,
    /// Coordinate axis for --order coord.
    #[arg(long, default_value_t = 0)]
    pub axis: usize,
    #[arg(long, default_value_t = 30)]
    pub neighbors: usize,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub group: Switch,
    /// Distance used by orderings and neighbor search: auto = spatial when a
    /// time column is present, full otherwise.
    #[arg(long, value_enum, default_value_t = MetricName::Auto)]
    pub nn_metric: MetricName,
    /// Grid-box occupancy target for the approximate MMD ordering.
    #[arg(long, default_value_t = 16)]
    pub points_per_box: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Parser)]
#[command(
    name = "vecchia",
    version,
    about = "Ordered-conditional (Vecchia) approximations to Gaussian process likelihoods"
)]
struct Cli {
    /// Key-value config file supplying defaults for any long flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: VECCHIA_THREADS or all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a permutation of the input locations.
    Order(commands::OrderCmd),
    /// Write ordered nearest-neighbor pairs.
    Neighbors(commands::NeighborsCmd),
    /// Write the automatic block partition and its statistics.
    Group(commands::GroupCmd),
    /// Evaluate the approximate log-likelihood (optionally vs. the dense one).
    Loglik(commands::LoglikCmd),
    /// Maximum approximate-likelihood estimation with neighbor escalation.
    Fit(commands::FitCmd),
    /// Kriging predictions at new locations (optional ensemble spread).
    Predict(commands::PredictCmd),
    /// Conditional simulation ensembles at new locations.
    Sim(commands::SimCmd),
    /// KL/efficiency sweep over orderings and neighbor counts on a grid.
    Benchmark(commands::BenchmarkCmd),
    /// Per-phase wall times on a synthetic grid.
    Timing(commands::TimingCmd),
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match expand_config_args(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    };
    let cli = Cli::parse_from(&args);
    if let Err(e) = run(&cli, &args) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: &Cli, resolved_args: &[String]) -> Result<(), CliError> {
    let threads = cli.threads.or_else(|| {
        std::env::var("VECCHIA_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }
    let stamp = commands::Stamp::new(resolved_args);
    match &cli.command {
        Command::Order(c) => c.run(&stamp),
        Command::Neighbors(c) => c.run(&stamp),
        Command::Group(c) => c.run(&stamp),
        Command::Loglik(c) => c.run(&stamp),
        Command::Fit(c) => c.run(&stamp),
        Command::Predict(c) => c.run(&stamp),
        Command::Sim(c) => c.run(&stamp),
        Command::Benchmark(c) => c.run(&stamp),
        Command::Timing(c) => c.run(&stamp),
    }
}

/// Merge a `--config FILE` of `key value` (or `key=value`) lines into the
/// argument list. Flags given on the command line win; config entries are
/// appended only when their flag is absent.
fn expand_config_args(mut args: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(pos) = args.iter().position(|a| a == "--config") else {
        return Ok(args);
    };
    let path = args
        .get(pos + 1)
        .filter(|p| !p.starts_with("--"))
        .cloned()
        .ok_or_else(|| CliError::config("--config requires a file path"))?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::config(format!("cannot read config {path}: {e}")))?;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = match line.split_once('=') {
            Some((k, v)) => (k.trim(), v.trim()),
            None => line
                .split_once(char::is_whitespace)
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| {
                    CliError::config(format!(
                        "{path}:{}: expected 'key value' or 'key=value'",
                        lineno + 1
                    ))
                })?,
        };
        if key.is_empty() || value.is_empty() {
            return Err(CliError::config(format!(
                "{path}:{}: empty key or value",
                lineno + 1
            )));
        }
        let flag = format!("--{key}");
        if !args.contains(&flag) {
            args.push(flag);
            args.push(value.to_string());
        }
    }
    Ok(args)
}
