//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use log::warn;
use mgpch::backtest::{run_covariance_backtest, run_volatility_backtest, BacktestReport, Target};
use mgpch::copula::{predictive_covariance, train_all_pairs, CopulaFamily};
use mgpch::data_io::{load_price_csv, to_log_returns, write_price_csv, PriceSeries, ReturnSeries};
use mgpch::mgpch::{fit, simulate, simulate_with_weights, Dataset};
use mgpch::persist::ModelFile;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::RunConfig;
use crate::{BacktestArgs, Command, CommonArgs, CovBacktestArgs, FitArgs, ModelArgs, PredictArgs, SimulateArgs, WindowArgs};

pub enum CliError {
    /// Bad flags or configuration; exit status 2.
    Usage(String),
    /// Data, model or numerical failure; exit status 1.
    Failure(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Failure(e)
    }
}

impl From<mgpch::Error> for CliError {
    fn from(e: mgpch::Error) -> Self {
        CliError::Failure(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Fit(a) => run_fit(a),
        Command::Predict(a) => run_predict(a),
        Command::Backtest(a) => run_backtest(a),
        Command::CovBacktest(a) => run_cov_backtest(a),
        Command::Simulate(a) => run_simulate(a),
    }
}

/// Loads the configuration file and applies the shared flags.
fn prepare(common: &CommonArgs, model: Option<&ModelArgs>) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path).map_err(|e| CliError::Usage(format!("config {}: {e:#}", path.display())))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed.or(cfg.seed) {
        cfg.seed = Some(seed);
        cfg.mgpch.seed = seed;
    }
    if let Some(t) = model.and_then(|m| m.truncation) {
        cfg.mgpch.pyp.truncation = t as usize;
    }
    if let Some(n) = common.threads.map(|n| n as usize).or(cfg.threads) {
        if n == 0 {
            return Err(CliError::Usage("threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Failure(anyhow::anyhow!("thread pool: {e}")))?;
    }
    cfg.mgpch.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn required(flag: Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> CliResult<PathBuf> {
    flag.or_else(|| fallback.clone()).ok_or_else(|| CliError::Usage(format!("--{name} is required (or set '{name}' in the config file)")))
}

fn load_returns(path: &Path) -> CliResult<ReturnSeries> {
    let loaded = load_price_csv(path).with_context(|| format!("reading {}", path.display()))?;
    if !loaded.warnings.is_empty() {
        warn!("{}: dropped {} row(s) with missing or non-positive prices", path.display(), loaded.warnings.len());
    }
    Ok(to_log_returns(&loaded.series)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).context("serializing output")?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn run_fit(args: FitArgs) -> CliResult<()> {
    let cfg = prepare(&args.common, Some(&args.model_args))?;
    let data_path = required(args.data, &cfg.data, "data")?;
    let out = required(args.out, &cfg.out, "out")?;
    let family: Option<CopulaFamily> = args.family.map(Into::into).or(cfg.family);
    let returns = load_returns(&data_path)?;
    let data = Dataset::from_lagged_returns(&returns.returns)?;
    let model = fit(&data, &cfg.mgpch)?;
    let copulas = match family {
        Some(f) if returns.dim() >= 2 => train_all_pairs(&model, f, cfg.backtest.basis_fraction)?,
        Some(_) => {
            warn!("a single asset has no pairs; no copulas trained");
            Vec::new()
        }
        None => Vec::new(),
    };
    let file = ModelFile::new(model, returns.asset_names.clone(), copulas)?;
    file.save(&out).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

#[derive(Serialize)]
struct PairForecast {
    assets: (String, String),
    covariance: f64,
    precision_warning: bool,
}

#[derive(Serialize)]
struct HorizonForecast {
    horizon: usize,
    mean: Vec<f64>,
    variance: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    covariances: Vec<PairForecast>,
}

#[derive(Serialize)]
struct ForecastFile {
    asset_names: Vec<String>,
    /// Return vector the forecasts are conditioned on.
    input: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    input_date: Option<String>,
    forecasts: Vec<HorizonForecast>,
}

fn run_predict(args: PredictArgs) -> CliResult<()> {
    let cfg = prepare(&args.common, None)?;
    let model_path = required(args.model, &cfg.model, "model")?;
    let out = required(args.out, &cfg.out, "out")?;
    let horizons = args.horizons.unwrap_or_else(|| cfg.backtest.horizons.clone());
    if horizons.is_empty() || horizons.contains(&0) {
        return Err(CliError::Usage("horizons must be positive integers".into()));
    }
    let file = ModelFile::load(&model_path).with_context(|| format!("reading {}", model_path.display()))?;
    let (input, input_date) = match args.data.or(cfg.data.clone()) {
        Some(path) => {
            let r = load_returns(&path)?;
            let last = r.len() - 1;
            let row: Vec<f64> = r.returns.row(last).iter().copied().collect();
            (row, Some(r.dates[last].format("%Y-%m-%d").to_string()))
        }
        None => {
            let y = file.model.data.outputs();
            (y.row(y.nrows() - 1).iter().copied().collect(), None)
        }
    };
    if input.len() != file.model.data.output_dim() {
        return Err(CliError::Failure(anyhow::anyhow!(
            "data has {} assets but the model was fitted on {}",
            input.len(),
            file.model.data.output_dim()
        )));
    }
    let moments = file.model.predict(&input)?;
    let mut covariances = Vec::new();
    for c in &file.copulas {
        let est = predictive_covariance(c, &moments, &input)?;
        covariances.push(PairForecast {
            assets: (file.asset_names[c.pair.0].clone(), file.asset_names[c.pair.1].clone()),
            covariance: est.value,
            precision_warning: est.precision_warning,
        });
    }
    let forecasts = horizons
        .iter()
        .map(|&h| HorizonForecast {
            horizon: h,
            mean: moments.mean.clone(),
            variance: moments.variance.clone(),
            covariances: covariances
                .iter()
                .map(|p| PairForecast { assets: p.assets.clone(), covariance: p.covariance, precision_warning: p.precision_warning })
                .collect(),
        })
        .collect();
    write_json(&out, &ForecastFile { asset_names: file.asset_names.clone(), input, input_date, forecasts })
}

fn apply_window_args(cfg: &mut RunConfig, w: &WindowArgs) {
    if let Some(h) = &w.horizons {
        cfg.backtest.horizons = h.clone();
    }
    if let Some(v) = w.window {
        cfg.backtest.window = v;
    }
    if let Some(v) = w.retrain_every {
        cfg.backtest.retrain_every = v;
    }
}

fn write_plot_data(path: &Path, report: &BacktestReport, names: &[String]) -> CliResult<()> {
    let mut text = String::from("target_date,target_row,origin,fitted_at,horizon,series,predicted,realized,hist_vol\n");
    for r in &report.forecast_log {
        let series = match r.target {
            Target::Asset(d) => names[d].clone(),
            Target::Pair(i, j) => format!("{}:{}", names[i], names[j]),
        };
        let hv = r.hist_vol.map(|v| v.to_string()).unwrap_or_default();
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.target_date, r.target_row, r.origin, r.fitted_at, r.horizon, series, r.predicted, r.realized, hv
        ));
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn run_backtest(args: BacktestArgs) -> CliResult<()> {
    let mut cfg = prepare(&args.common, Some(&args.model_args))?;
    apply_window_args(&mut cfg, &args.window);
    if let Some(m) = args.method {
        cfg.backtest.method = m;
    }
    let data_path = required(args.window.data.clone(), &cfg.data, "data")?;
    let out = required(args.window.out.clone(), &cfg.out, "out")?;
    let bt = cfg.backtest.to_config(&cfg.mgpch);
    bt.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let returns = load_returns(&data_path)?;
    let report = run_volatility_backtest(&returns, &bt)?;
    write_json(&out, &report)?;
    if let Some(p) = args.window.plot_data.clone().or(cfg.plot_data.clone()) {
        write_plot_data(&p, &report, &returns.asset_names)?;
    }
    Ok(())
}

fn run_cov_backtest(args: CovBacktestArgs) -> CliResult<()> {
    let mut cfg = prepare(&args.common, Some(&args.model_args))?;
    apply_window_args(&mut cfg, &args.window);
    cfg.backtest.method = crate::config::Method::Mgpch;
    let family: CopulaFamily = args
        .family
        .map(Into::into)
        .or(cfg.family)
        .ok_or_else(|| CliError::Usage("--family is required (or set 'family' in the config file)".into()))?;
    let data_path = required(args.window.data.clone(), &cfg.data, "data")?;
    let out = required(args.window.out.clone(), &cfg.out, "out")?;
    let bt = cfg.backtest.to_config(&cfg.mgpch);
    bt.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let returns = load_returns(&data_path)?;
    let report = run_covariance_backtest(&returns, &bt, family)?;
    write_json(&out, &report)?;
    if let Some(p) = args.window.plot_data.clone().or(cfg.plot_data.clone()) {
        write_plot_data(&p, &report, &returns.asset_names)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TruthFile {
    seed: u64,
    weights: Vec<f64>,
    dates: Vec<String>,
    assignments: Vec<usize>,
    /// Variance each return was drawn with, one row per date.
    noise_variances: Vec<Vec<f64>>,
    /// Variance of each return given the previous one, mixing over components.
    conditional_variances: Vec<Vec<f64>>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// `<dir>/<stem>.truth.json` for an output path `<dir>/<stem>.<ext>`.
pub fn truth_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "simulated".into());
    out.with_file_name(format!("{stem}.truth.json"))
}

fn run_simulate(args: SimulateArgs) -> CliResult<()> {
    let cfg = prepare(&args.common, Some(&args.model_args))?;
    let out = required(args.out, &cfg.out, "out")?;
    let length = args.length.unwrap_or(cfg.simulate.length);
    let assets = args.assets.unwrap_or(cfg.simulate.assets);
    if length < 1 || assets < 1 {
        return Err(CliError::Usage("--length and --assets must be at least 1".into()));
    }
    let seed = cfg.seed.unwrap_or(0);
    let sim = match &cfg.simulate.weights {
        Some(w) => simulate_with_weights(&cfg.mgpch, w, length, assets, seed),
        None => simulate(&cfg.mgpch, length, assets, seed),
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let returns = ReturnSeries::from_matrix(sim.returns())?;
    let prices = PriceSeries::from_returns(&returns, cfg.simulate.initial_price)?;
    let mut buf = Vec::new();
    write_price_csv(&prices, &mut buf)?;
    fs::write(&out, buf).with_context(|| format!("writing {}", out.display()))?;
    let truth = TruthFile {
        seed,
        weights: sim.weights.clone(),
        dates: returns.dates.iter().map(|d| d.format("%Y-%m-%d").to_string()).collect(),
        assignments: sim.assignments.clone(),
        noise_variances: rows(&sim.noise_variances),
        conditional_variances: rows(&sim.conditional_variances),
    };
    write_json(&truth_path(&out), &truth)
}
