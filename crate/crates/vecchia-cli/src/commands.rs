//! Subcommand implementations and machine-readable outputs.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde::Serialize;
use sha2::{Digest, Sha256};

use vecchia::covariance::{CovarianceModel, LocationSet, Metric};
use vecchia::grouping::{group_blocks, BlockPartition};
use vecchia::inference::{fit, FitConfig, OrderingChoice};
use vecchia::likelihood::{build_gamma_tilde, loglik, profile_beta, Conditioning, MeanSpec};
use vecchia::neighbor::{nn_ordered_brute, nn_ordered_fast};
use vecchia::ordering::Permutation;
use vecchia::quality::{godambe_information, kl_divergence_vecchia_given, DenseGaussian};
use vecchia::simulate::{unconditional_draw, PredOrdering, PredictionConfig, PredictionSetup};

use crate::data::{ingest_csv, ColumnSpec, Dataset};
use crate::{
    ApproxArgs, CliError, FamilyName, InputArgs, MetricName, ModelArgs, OrderName, Switch,
};

/// Reproducibility stamp written next to every output file: the fully
/// resolved argument vector (config entries folded in), its hash, and the
/// binary version. A run is reproducible from this file alone.
pub struct Stamp {
    args: Vec<String>,
    hash: String,
}

#[derive(Serialize)]
struct StampRecord<'a> {
    version: &'a str,
    args: &'a [String],
    config_hash: &'a str,
}

impl Stamp {
    pub fn new(resolved_args: &[String]) -> Self {
        let mut hasher = Sha256::new();
        for a in resolved_args {
            hasher.update(a.as_bytes());
            hasher.update([0u8]);
        }
        let hash: String = hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        Self {
            args: resolved_args.to_vec(),
            hash,
        }
    }

    fn write_next_to(&self, out: &Path) -> Result<(), CliError> {
        let stamp_path = out.with_extension(format!(
            "{}stamp.json",
            out.extension()
                .map(|e| format!("{}.", e.to_string_lossy()))
                .unwrap_or_default()
        ));
        let record = StampRecord {
            version: env!("CARGO_PKG_VERSION"),
            args: &self.args,
            config_hash: &self.hash,
        };
        std::fs::write(
            &stamp_path,
            serde_json::to_string_pretty(&record).unwrap() + "\n",
        )?;
        Ok(())
    }
}

fn parse_grid(spec: &str) -> Result<Vec<usize>, CliError> {
    let dims: Vec<usize> = spec
        .split(['x', 'X'])
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::config(format!("bad grid spec '{spec}', expected e.g. 30x30")))?;
    if dims.is_empty() || dims.contains(&0) {
        return Err(CliError::config(format!("bad grid spec '{spec}'")));
    }
    Ok(dims)
}

fn load_locations(input: &InputArgs, need_response: bool) -> Result<Dataset, CliError> {
    match (&input.input, &input.grid) {
        (Some(path), None) => {
            let coords: Vec<&str> = input.coords.split(',').map(str::trim).collect();
            let covs: Vec<&str> = input
                .covariates
                .as_deref()
                .map(|s| s.split(',').map(str::trim).collect())
                .unwrap_or_default();
            let spec = ColumnSpec {
                coords,
                time: input.time.as_deref(),
                response: need_response.then_some(input.response.as_str()),
                covariates: covs,
                sphere_time: input.sphere_time.is_on(),
                skip_bad: input.skip_bad.is_on(),
                intercept: input.intercept.is_on(),
            };
            ingest_csv(path, &spec)
        }
        (None, Some(grid)) => {
            if need_response {
                return Err(CliError::config(
                    "this command needs observed data; --grid provides locations only",
                ));
            }
            let locs = LocationSet::regular_grid(&parse_grid(grid)?)?;
            Ok(Dataset {
                n: locs.len(),
                locs,
                response: None,
                covariates: None,
            })
        }
        (Some(_), Some(_)) => Err(CliError::config("give either --input or --grid, not both")),
        (None, None) => Err(CliError::config("one of --input or --grid is required")),
    }
}

fn build_model(args: &ModelArgs) -> Result<CovarianceModel, CliError> {
    let model = match args.family {
        FamilyName::Matern => {
            CovarianceModel::matern(args.sigma2, args.range, args.smoothness, args.nugget)
        }
        FamilyName::Spacetime => CovarianceModel::matern_spacetime(
            args.sigma2,
            args.range,
            args.time_range,
            args.smoothness,
            args.nugget,
        ),
    }
    .with_mean(args.mu)
    .with_jitter(args.jitter);
    model.validate()?;
    Ok(model)
}

fn resolve_metric(choice: MetricName, locs: &LocationSet) -> Metric {
    match choice {
        MetricName::Full => Metric::Full,
        MetricName::Spatial => Metric::Spatial,
        MetricName::Auto => {
            if locs.time_axis().is_some() {
                Metric::Spatial
            } else {
                Metric::Full
            }
        }
    }
}

fn ordering_choice(name: OrderName, axis: usize) -> OrderingChoice {
    match name {
        OrderName::Coord => OrderingChoice::Coordinate(axis),
        OrderName::Sum => OrderingChoice::CoordinateSum,
        OrderName::Middle => OrderingChoice::MiddleOut,
        OrderName::Random => OrderingChoice::Random,
        OrderName::Mmd => OrderingChoice::MmdExact,
        OrderName::Ammd => OrderingChoice::Ammd,
    }
}

fn build_ordering(
    approx: &ApproxArgs,
    locs: &LocationSet,
    metric: Metric,
) -> Result<Permutation, CliError> {
    ordering_choice(approx.order, approx.axis)
        .build(locs, metric, approx.seed, approx.points_per_box)
        .map_err(CliError::from)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::Writer::from_path(path)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

fn order_label(name: OrderName) -> &'static str {
    match name {
        OrderName::Coord => "coord",
        OrderName::Sum => "sum",
        OrderName::Middle => "middle",
        OrderName::Random => "random",
        OrderName::Mmd => "mmd",
        OrderName::Ammd => "ammd",
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct OrderCmd {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    approx: ApproxArgs,
    /// Output CSV (position,index).
    #[arg(long)]
    out: PathBuf,
}

impl OrderCmd {
    pub fn run(&self, stamp: &Stamp) -> Result<(), CliError> {
        let data = load_locations(&self.input, false)?;
        let metric = resolve_metric(self.approx.nn_metric, &data.locs);
        let perm = build_ordering(&self.approx, &data.locs, metric)?;
        let mut w = csv_writer(&self.out)?;
        w.write_record(["position", "index"])
            .map_err(|e| CliError::config(e.to_string()))?;
        for (pos, &orig) in perm.forward().iter().enumerate() {
            w.write_record([pos.to_string(), orig.to_string()])
                .map_err(|e| CliError::config(e.to_string()))?;
        }
        w.flush()?;
        stamp.write_next_to(&self.out)?;
        eprintln!("wrote {} positions to {}", perm.len(), self.out.display());
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct NeighborsCmd {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    approx: ApproxArgs,
    /// Cross-check against the brute-force oracle (small inputs only).
    #[arg(long, value_enum, default_value_t = Switch::Off)]
    nn_check: Switch,
    /// Output CSV (position,neighbor), one row per ordered pair.
    #[arg(long)]
    out: PathBuf,
}

impl NeighborsCmd {
    pub fn run(&self, stamp: &Stamp) -> Result<(), CliError> {
        let data = load_locations(&self.input, false)?;
        let metric = resolve_metric(self.approx.nn_metric, &data.locs);
        let perm = build_ordering(&self.approx, &data.locs, metric)?;
        let sets = nn_ordered_fast(&data.locs, &perm, self.approx.neighbors, metric)?;
        if self.nn_check.is_on() {
            let brute = nn_ordered_brute(&data.locs, &perm, self.approx.neighbors, metric)?;
            if sets != brute {
                return Err(CliError::numeric(
                    "fast neighbor search disagrees with the brute-force oracle",
                ));
            }
            eprintln!("nn-check passed: fast search equals the brute-force oracle");
        }
        let mut w = csv_writer(&self.out)?;
        w.write_record(["position", "neighbor"])
            .map_err(|e| CliError::config(e.to_string()))?;
        for i in 0..sets.n() {
            for &j in sets.set(i) {
                w.write_record([i.to_string(), j.to_string()])
                    .map_err(|e| CliError::config(e.to_string()))?;
            }
        }
        w.flush()?;
        stamp.write_next_to(&self.out)?;
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct GroupCmd {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    approx: ApproxArgs,
    /// Output CSV (block,position).
    #[arg(long)]
    out: PathBuf,
    /// Also emit a one-row statistics CSV in the style of the grouped-size
    /// tables: ordering, m, blocks, mean/max union, mean/max expanded.
    #[arg(long, value_enum, default_value_t = Switch::Off)]
    group_stats: Switch,
    #[arg(long)]
    stats_out: Option<PathBuf>,
}

impl GroupCmd {
    pub fn run(&self, stamp: &Stamp) -> Result<(), CliError> {
        let data = load_locations(&self.input, false)?;
        let metric = resolve_metric(self.approx.nn_metric, &data.locs);
        let perm = build_ordering(&self.approx, &data.locs, metric)?;
        let sets = nn_ordered_fast(&data.locs, &perm, self.approx.neighbors, metric)?;
        let part = group_blocks(&sets, self.approx.neighbors);
        let mut w = csv_writer(&self.out)?;
        w.write_record(["block", "position"])
            .map_err(|e| CliError::config(e.to_string()))?;
        for (k, block) in part.blocks().iter().enumerate() {
            for &i in block {
                w.write_record([k.to_string(), i.to_string()])
                    .map_err(|e| CliError::config(e.to_string()))?;
            }
        }
        w.flush()?;
        stamp.write_next_to(&self.out)?;
        if self.group_stats.is_on() {
            let stats = part.stats();
            let path = self
                .stats_out
                .clone()
                .unwrap_or_else(|| self.out.with_extension("stats.csv"));
            let mut w = csv_writer(&path)?;
            w.write_record([
                "ordering",
                "m",
                "blocks",
                "mean_union",
                "max_union",
                "mean_expanded",
                "max_expanded",
            ])
            .map_err(|e| CliError::config(e.to_string()))?;
            w.write_record([
                order_label(self.approx.order).to_string(),
                self.approx.neighbors.to_string(),
                stats.num_blocks.to_string(),
                format!("{:.2}", stats.mean_union),
                stats.max_union.to_string(),
                format!("{:.2}", stats.mean_expanded),
                stats.max_expanded.to_string(),
            ])
            .map_err(|e| CliError::config(e.to_string()))?;
            w.flush()?;
            stamp.write_next_to(&path)?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct LoglikRecord {
    n: usize,
    m: usize,
    ordering: String,
    grouped: bool,
    loglik: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    loglik_exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    abs_error: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LoglikCmd {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    approx: ApproxArgs,
    /// Also evaluate the dense log-likelihood (n capped by --oracle-cap).
    #[arg(long, value_enum, default_value_t = Switch::Off)]
    exact: Switch,
    #[arg(long, default_value_t = vecchia::quality::DEFAULT_ORACLE_CAP)]
    oracle_cap: usize,
    /// Output JSON file.
    #[arg(long)]
    out: PathBuf,
}

impl LoglikCmd {
    pub fn run(&self, stamp: &Stamp) -> Result<(), CliError> {
        let data = load_locations(&self.input, true)?;
        let y = data.response.as_ref().expect("response requested");
        let model = build_model(&self.model)?;
        let metric = resolve_metric(self.approx.nn_metric, &data.locs);
        let perm = build_ordering(&self.approx, &data.locs, metric)?;
        let sets = nn_ordered_fast(&data.locs, &perm, self.approx.neighbors, metric)?;
        let part = self
            .approx
            .group
            .is_on()
            .then(|| group_blocks(&sets, self.approx.neighbors));
        let cond = match &part {
            Some(p) => Conditioning::Grouped(p),
            None => Conditioning::Ungrouped(&sets),
        };
        let gamma = build_gamma_tilde(&model, &data.locs, &perm, cond)?;
        let (ll, beta) = match &data.covariates {
            Some(x) => {
                let (b, ll) = profile_beta(&gamma, &perm, x, y)?;
                (ll, Some(b))
            }
            None => (
                loglik(&gamma, &perm, y, &MeanSpec::Constant(model.mean))?,
                None,
            ),
        };
        let (loglik_exact, abs_error) = if self.exact.is_on() {
            let dense = DenseGaussian::from_model(&model, &data.locs, Some(self.oracle_cap))?;
            let exact = match (&data.covariates, &beta) {
                (Some(x), Some(b)) => dense.loglik(y, &MeanSpec::Linear(x, b))?,
                _ => dense.loglik(y, &MeanSpec::Constant(model.mean))?,
            };
            (Some(exact), Some((ll - exact).abs()))
        } else {
            (None, None)
        };
        let record = LoglikRecord {
            n: data.n,
            m: self.approx.neighbors,
            ordering: order_label(self.approx.order).to_string(),
            grouped: self.approx.group.is_on(),
            loglik: ll,
            beta,
            loglik_exact,
            abs_error,
        };
        std::fs::write(
            &self.out,
            serde_json::to_string_pretty(&record).unwrap() + "\n",
        )?;
        stamp.write_next_to(&self.out)?;
        println!("{}", serde_json::to_string(&record).unwrap());
        Ok(())
    }
}

#[derive(Serialize)]
struct FitStageRecord {
    m: usize,
    theta: serde_json::Map<String, serde_json::Value>,
    loglik: f64,
    evals: usize,
    seconds: f64,
}

#[derive(Debug, Args)]
pub struct FitCmd {
    #[command(flatten)]
    input: InputArgs,
    /// Initial / fixed parameter values.
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    approx: ApproxArgs,
    /// Comma-separated names of parameters to estimate
    /// (variance,range,time_range,smoothness,nugget).
    #[arg(long, default_value = "variance,range,nugget")]
    free: String,
    /// Comma-separated neighbor schedule.
    #[arg(long, default_value = "10,20,30,40,50,60,70,80,90,100")]
    schedule: String,
    /// Stop when successive estimates change less than this (relative).
    #[arg(long, default_value_t = 0.02)]
    stage_tol: f64,
    /// Simplex evaluation budget per stage.
    #[arg(long, default_value_t = 2000)]
    max_evals: usize,
    /// Use the command-line parameter values as the starting point instead
    /// of data-driven heuristics.
    #[arg(long, value_enum, default_value_t = Switch::Off)]
    init_from_args: Switch,
    /// Output JSON-lines file (one record per stage, then a summary).
    #[arg(long)]
    out: PathBuf,
}

impl FitCmd {
    pub fn run(&self, stamp: &Stamp) -> Result<(), CliError> {
        let data = load_locations(&self.input, true)?;
        let y = data.response.as_ref().expect("response requested");
        let template = build_model(&self.model)?;
        let metric = resolve_metric(self.approx.nn_metric, &data.locs);
        let names = template.param_names();
        let free: Vec<usize> = self
            .free
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|name| {
                names.iter().position(|n| *n == name).ok_or_else(|| {
                    CliError::config(format!(
                        "unknown parameter '{name}' (family has: {})",
                        names.join(",")
                    ))
                })
            })
            .collect::<Result<_, _>>()?;
        let schedule: Vec<usize> = self
            .schedule
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::config(format!("bad schedule '{}'", self.schedule)))?;
        // drop schedule entries at or above n rather than failing: short
        // inputs should still fit with what is feasible
        let schedule: Vec<usize> = schedule.into_iter().filter(|&m| m < data.n).collect();

        let mut config = FitConfig::new(ordering_choice(self.approx.order, self.approx.axis), free);
        config.seed = self.approx.seed;
        config.schedule = schedule;
        config.grouping = self.approx.group.is_on();
        config.metric = metric;
        config.stage_tol = self.stage_tol;
        config.optimizer.max_evals = self.max_evals;
        config.points_per_box = self.approx.points_per_box;
        if self.init_from_args.is_on() {
            config.init = Some(template.params());
        }
        let result = fit(&data.locs, y, data.covariates.as_ref(), &template, &config)?;

        let mut out = std::fs::File::create(&self.out)?;
        for stage in &result.stages {
            let mut theta = serde_json::Map::new();
            for (name, value) in result.param_names.iter().zip(&stage.theta) {
                theta.insert(name.to_string(), serde_json::json!(value));
            }
            let record = FitStageRecord {
                m: stage.m,
                theta,
                loglik: stage.loglik,
                evals: stage.evals,
                seconds: stage.seconds,
            };
            writeln!(out, "{}", serde_json::to_string(&record).unwrap())?;
        }
        let summary = serde_json::json!({
            "converged": result.converged,
            "boundary": result.boundary,
            "loglik": result.loglik,
            "theta": result.param_names.iter().zip(&result.theta)
                .map(|(n, v)| (n.to_string(), serde_json::json!(v)))
                .collect::<serde_json::Map<_, _>>(),
            "beta": result.beta,
        });
        writeln!(out, "{summary}")?;
        stamp.write_next_to(&self.out)?;
        println!("{summary}");
        if result.boundary {
            eprintln!("warning: an estimate sits on the parameter boundary");
        }
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct PredictCmd {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    approx: ApproxArgs,
    /// CSV of prediction coordinates (same column names as the input).
    #[arg(long)]
    pred_input: PathBuf,
    /// Neighbors for prediction points (default: same as --neighbors).
    #[arg(long)]
    pred_neighbors: Option<usize>,
    /// Ordering among the prediction points.
    #[arg(long, value_enum, default_value_t = PredOrderName::Random)]
    pred_order: PredOrderName,
    /// Ensemble size for prediction standard deviations (0 = mean only).
    #[arg(long, default_value_t = 0)]
    ensemble: usize,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PredOrderName {
    Random,
    Ammd,
}

fn prediction_setup(
    input: &InputArgs,
    model_args: &ModelArgs,
    approx: &ApproxArgs,
    pred_input: &Path,
    pred_neighbors: Option<usize>,
    pred_order: PredOrderName,
) -> Result<(Dataset, PredictionSetup, LocationSet), CliError> {
    let data = load_locations(input, true)?;
    let model = build_model(model_args)?;
    let metric = resolve_metric(approx.nn_metric, &data.locs);
    let coords: Vec<&str> = input.coords.split(',').map(str::trim).collect();
    let pred_spec = ColumnSpec {
        coords,
        time: input.time.as_deref(),
        response: None,
        covariates: Vec::new(),
        sphere_time: input.sphere_time.is_on(),
        skip_bad: input.skip_bad.is_on(),
        intercept: false,
    };
    let preds = ingest_csv(pred_input, &pred_spec)?.locs;
    let obs_perm = build_ordering(approx, &data.locs, metric)?;
    let config = PredictionConfig {
        m_obs: approx.neighbors,
        m_pred: pred_neighbors.unwrap_or(approx.neighbors),
        grouping: approx.group.is_on(),
        pred_ordering: match pred_order {
            PredOrderName::Random => PredOrdering::Random,
            PredOrderName::Ammd => PredOrdering::Ammd,
        },
        seed: approx.seed,
        metric,
        points_per_box: approx.points_per_box,
    };
    let setup = PredictionSetup::new(&model, &data.locs, &obs_perm, &preds, &config)?;
    Ok((data, setup, preds))
}

fn write_prediction_csv(
    path: &Path,
    preds: &LocationSet,
    mean: &[f64],
    sd: Option<&[f64]>,
) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = (0..preds.dim()).map(|k| format!("c{k}")).collect();
    header.push("mean".into());
    if sd.is_some() {
        header.push("sd".into());
    }
    w.write_record(&header)
        .map_err(|e| CliError::config(e.to_string()))?;
    for i in 0..preds.len() {
        let mut row: Vec<String> = preds.point(i).iter().map(|v| format!("{v}")).collect();
        row.push(format!("{}", mean[i]));
        if let Some(sd) = sd {
            row.push(format!("{}", sd[i]));
        }
        w.write_record(&row)
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

impl PredictCmd {
    pub fn run(&self, stamp: &Stamp) -> Result<(), CliError> {
        let (data, setup, preds) = prediction_setup(
            &self.input,
            &self.model,
            &self.approx,
            &self.pred_input,
            self.pred_neighbors,
            self.pred_order,
        )?;
        let y = data.response.as_ref().expect("response requested");
        let mean = setup.conditional_expectation(y)?;
        let sd = if self.ensemble > 1 {
            Some(
                setup
                    .conditional_ensemble(y, self.ensemble, self.approx.seed, false)?
                    .sd,
            )
        } else {
            None
        };
        write_prediction_csv(&self.out, &preds, &mean, sd.as_deref())?;
        stamp.write_next_to(&self.out)?;
        eprintln!(
            "wrote {} predictions to {}",
            preds.len(),
            self.out.display()
        );
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct SimCmd {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    approx: ApproxArgs,
    #[arg(long)]
    pred_input: PathBuf,
    #[arg(long)]
    pred_neighbors: Option<usize>,
    #[arg(long, value_enum, default_value_t = PredOrderName::Random)]
    pred_order: PredOrderName,
    /// Number of conditional draws.
    #[arg(long, default_value_t = 1000)]
    ensemble: usize,
    /// Output CSV (ensemble mean and sd per prediction point).
    #[arg(long)]
    out: PathBuf,
    /// Optional long-format CSV of every draw (member,point,value).
    #[arg(long)]
    draws_out: Option<PathBuf>,
    /// Emit the empirical conditional correlation of this prediction point
    /// with every other one (CSV: point,correlation).
    #[arg(long)]
    corr_point: Option<usize>,
    /// Output CSV for --corr-point.
    #[arg(long)]
    corr_out: Option<PathBuf>,
}

impl SimCmd {
    pub fn run(&self, stamp: &Stamp) -> Result<(), CliError> {
        let (data, setup, preds) = prediction_setup(
            &self.input,
            &self.model,
            &self.approx,
            &self.pred_input,
            self.pred_neighbors,
            self.pred_order,
        )?;
        let y = data.response.as_ref().expect("response requested");
        let keep = self.draws_out.is_some() || self.corr_point.is_some();
        let summary = setup.conditional_ensemble(y, self.ensemble, self.approx.seed, keep)?;
        write_prediction_csv(&self.out, &preds, &summary.mean, Some(&summary.sd))?;
        stamp.write_next_to(&self.out)?;
        if let Some(anchor) = self.corr_point {
            if anchor >= preds.len() {
                return Err(CliError::config(format!(
                    "--corr-point {anchor} out of range for {} prediction points",
                    preds.len()
                )));
            }
            let draws = summary.draws.as_ref().unwrap();
            let path = self
                .corr_out
                .clone()
                .unwrap_or_else(|| self.out.with_extension("corr.csv"));
            let mut w = csv_writer(&path)?;
            w.write_record(["point", "correlation"])
                .map_err(|e| CliError::config(e.to_string()))?;
            let mf = draws.len() as f64;
            for i in 0..preds.len() {
                let mut cov = 0.0;
                for d in draws {
                    cov += (d[anchor] - summary.mean[anchor]) * (d[i] - summary.mean[i]);
                }
                cov /= mf - 1.0;
                let corr = cov / (summary.sd[anchor] * summary.sd[i]);
                w.write_record([i.to_string(), format!("{corr}")])
                    .map_err(|e| CliError::config(e.to_string()))?;
            }
            w.flush()?;
            stamp.write_next_to(&path)?;
        }
        if let Some(path) = &self.draws_out {
            let mut w = csv_writer(path)?;
            w.write_record(["member", "point", "value"])
                .map_err(|e| CliError::config(e.to_string()))?;
            for (k, draw) in summary.draws.as_ref().unwrap().iter().enumerate() {
                for (i, v) in draw.iter().enumerate() {
                    w.write_record([k.to_string(), i.to_string(), format!("{v}")])
                        .map_err(|e| CliError::config(e.to_string()))?;
                }
            }
            w.flush()?;
            stamp.write_next_to(path)?;
        }
        eprintln!(
            "simulated {} members at {} prediction points",
            self.ensemble,
            preds.len()
        );
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct BenchmarkCmd {
    /// Grid spec, e.g. 30x30.
    #[arg(long, default_value = "30x30")]
    grid: String,
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated orderings to sweep.
    #[arg(long, default_value = "coord,middle,random,ammd")]
    orderings: String,
    /// Comma-separated neighbor counts to sweep.
    #[arg(long, default_value = "10,30")]
    neighbors: String,
    /// Sweep grouped, ungrouped, or both.
    #[arg(long, default_value = "both")]
    group: String,
    /// Also compute per-parameter relative efficiencies (slower).
    #[arg(long, value_enum, default_value_t = Switch::Off)]
    releff: Switch,
    #[arg(long, default_value_t = vecchia::quality::DEFAULT_ORACLE_CAP)]
    oracle_cap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    points_per_box: usize,
    /// Output CSV, one row per (ordering x m x grouped) cell.
    #[arg(long)]
    out: PathBuf,
}

impl BenchmarkCmd {
    pub fn run(&self, stamp: &Stamp) -> Result<(), CliError> {
        let locs = LocationSet::regular_grid(&parse_grid(&self.grid)?)?;
        let model = build_model(&self.model)?;
        let dense = DenseGaussian::from_model(&model, &locs, Some(self.oracle_cap))?;
        let order_names: Vec<OrderName> = self
            .orderings
            .split(',')
            .map(|s| match s.trim() {
                "coord" => Ok(OrderName::Coord),
                "sum" => Ok(OrderName::Sum),
                "middle" => Ok(OrderName::Middle),
                "random" => Ok(OrderName::Random),
                "mmd" => Ok(OrderName::Mmd),
                "ammd" => Ok(OrderName::Ammd),
                other => Err(CliError::config(format!("unknown ordering '{other}'"))),
            })
            .collect::<Result<_, _>>()?;
        let ms: Vec<usize> = self
            .neighbors
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::config(format!("bad neighbor list '{}'", self.neighbors)))?;
        let grouped_options: Vec<bool> = match self.group.as_str() {
            "on" => vec![true],
            "off" => vec![false],
            "both" => vec![false, true],
            other => {
                return Err(CliError::config(format!(
                    "--group must be on/off/both, got '{other}'"
                )))
            }
        };
        let releff_params: &[usize] = &[0, 1, 2];

        let mut w = csv_writer(&self.out)?;
        w.write_record([
            "family",
            "sigma2",
            "range",
            "smoothness",
            "nugget",
            "ordering",
            "m",
            "grouped",
            "blocks",
            "mean_union",
            "kl",
            "seconds",
            "releff_variance",
            "releff_range",
            "releff_smoothness",
        ])
        .map_err(|e| CliError::config(e.to_string()))?;
        for &name in &order_names {
            let metric = Metric::Full;
            let perm =
                ordering_choice(name, 0).build(&locs, metric, self.seed, self.points_per_box)?;
            for &m in &ms {
                let sets = nn_ordered_fast(&locs, &perm, m, metric)?;
                for &grouped in &grouped_options {
                    let start = Instant::now();
                    let part: Option<BlockPartition> = grouped.then(|| group_blocks(&sets, m));
                    let cond = match &part {
                        Some(p) => Conditioning::Grouped(p),
                        None => Conditioning::Ungrouped(&sets),
                    };
                    let kl = kl_divergence_vecchia_given(&dense, &model, &locs, &perm, cond)?;
                    let seconds = start.elapsed().as_secs_f64();
                    let (blocks, mean_union) = match &part {
                        Some(p) => {
                            let s = p.stats();
                            (s.num_blocks, s.mean_union)
                        }
                        None => (
                            locs.len(),
                            sets.sets().iter().map(Vec::len).sum::<usize>() as f64
                                / locs.len() as f64,
                        ),
                    };
                    let re = if self.releff.is_on() {
                        let info = godambe_information(
                            &model,
                            &locs,
                            &perm,
                            cond,
                            releff_params,
                            Some(self.oracle_cap),
                        )?;
                        info.relative_efficiency
                            .iter()
                            .map(|v| format!("{v:.6}"))
                            .collect()
                    } else {
                        vec![String::new(); 3]
                    };
                    w.write_record([
                        format!("{:?}", model.family),
                        model.variance.to_string(),
                        model.range.to_string(),
                        model.smoothness.to_string(),
                        model.nugget.to_string(),
                        order_label(name).to_string(),
                        m.to_string(),
                        grouped.to_string(),
                        blocks.to_string(),
                        format!("{mean_union:.2}"),
                        format!("{kl:.6e}"),
                        format!("{seconds:.3}"),
                        re[0].clone(),
                        re[1].clone(),
                        re[2].clone(),
                    ])
                    .map_err(|e| CliError::config(e.to_string()))?;
                }
            }
        }
        w.flush()?;
        stamp.write_next_to(&self.out)?;
        Ok(())
    }
}

#[derive(Serialize)]
struct TimingRecord {
    n: usize,
    m: usize,
    ordering: String,
    grouped: bool,
    seconds: TimingPhases,
}

#[derive(Serialize)]
struct TimingPhases {
    order: f64,
    neighbors: f64,
    group: f64,
    loglik: f64,
}

#[derive(Debug, Args)]
pub struct TimingCmd {
    /// Grid spec, e.g. 100x100.
    #[arg(long, default_value = "100x100")]
    grid: String,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    approx: ApproxArgs,
    /// Output JSON file.
    #[arg(long)]
    out: PathBuf,
}

impl TimingCmd {
    pub fn run(&self, stamp: &Stamp) -> Result<(), CliError> {
        let locs = LocationSet::regular_grid(&parse_grid(&self.grid)?)?;
        let model = build_model(&self.model)?;
        let metric = resolve_metric(self.approx.nn_metric, &locs);
        let m = self.approx.neighbors;

        let t0 = Instant::now();
        let perm = build_ordering(&self.approx, &locs, metric)?;
        let t_order = t0.elapsed().as_secs_f64();

        let t0 = Instant::now();
        let sets = nn_ordered_fast(&locs, &perm, m, metric)?;
        let t_neighbors = t0.elapsed().as_secs_f64();

        let t0 = Instant::now();
        let part = self.approx.group.is_on().then(|| group_blocks(&sets, m));
        let t_group = t0.elapsed().as_secs_f64();

        let cond = match &part {
            Some(p) => Conditioning::Grouped(p),
            None => Conditioning::Ungrouped(&sets),
        };
        // synthetic data drawn from the approximation itself
        let warm = build_gamma_tilde(&model, &locs, &perm, cond)?;
        let y = perm.unpermute(&unconditional_draw(&warm, self.approx.seed));

        let t0 = Instant::now();
        let gamma = build_gamma_tilde(&model, &locs, &perm, cond)?;
        let ll = loglik(&gamma, &perm, &y, &MeanSpec::Constant(model.mean))?;
        let t_loglik = t0.elapsed().as_secs_f64();
        if !ll.is_finite() {
            return Err(CliError::numeric("non-finite likelihood"));
        }

        let record = TimingRecord {
            n: locs.len(),
            m,
            ordering: order_label(self.approx.order).to_string(),
            grouped: self.approx.group.is_on(),
            seconds: TimingPhases {
                order: t_order,
                neighbors: t_neighbors,
                group: t_group,
                loglik: t_loglik,
            },
        };
        std::fs::write(
            &self.out,
            serde_json::to_string_pretty(&record).unwrap() + "\n",
        )?;
        stamp.write_next_to(&self.out)?;
        println!("{}", serde_json::to_string(&record).unwrap());
        Ok(())
    }
}
