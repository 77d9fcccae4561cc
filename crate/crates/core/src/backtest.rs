//! Rolling-window forecast evaluation.
//!
//! Models are refit on the most recent `window` returns every
//! `retrain_every` days. At each forecast origin `t` the model predicts the
//! variance (or pair covariance) of the return on day `t + h`, and the
//! prediction is scored against the squared return (or return product) on
//! that day and against the historical volatility of the `hist_vol_window`
//! returns ending there.
//!
//! Forecasters only ever see the returns up to and including the origin, and
//! every record in the forecast log carries the origin and the day the model
//! in use was fitted, so the absence of look-ahead can be audited.

use log::{info, warn};
use nalgebra::{DMatrix, DMatrixView};
use serde::{Deserialize, Serialize};

use crate::copula::{predictive_covariance, train_all_pairs, CopulaFamily, PairwiseCopulaModel, DEFAULT_BASIS_FRACTION};
use crate::data_io::ReturnSeries;
use crate::error::{Error, Result};
use crate::garch::{garch_filter, garch_fit, garch_forecast, GarchParams};
use crate::mgpch::{fit, Dataset, MgpchConfig, MgpchModel};

/// Model evaluated by a backtest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BacktestModel {
    Mgpch(MgpchConfig),
    Garch,
}

impl Default for BacktestModel {
    fn default() -> Self {
        BacktestModel::Mgpch(MgpchConfig::default())
    }
}

/// Which days receive forecasts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastMode {
    /// Every day from the first fit on, using the latest model.
    #[default]
    EveryDay,
    /// Only the days on which the model is refit.
    RetrainDaysOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BacktestConfig {
    pub window: usize,
    pub retrain_every: usize,
    pub horizons: Vec<usize>,
    pub hist_vol_window: usize,
    pub mode: ForecastMode,
    pub model: BacktestModel,
    /// Share of training points used as copula basis centres.
    pub basis_fraction: f64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            window: 120,
            retrain_every: 7,
            horizons: vec![1, 7, 30],
            hist_vol_window: 10,
            mode: ForecastMode::EveryDay,
            model: BacktestModel::default(),
            basis_fraction: DEFAULT_BASIS_FRACTION,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::invalid("horizons must be a non-empty list of positive integers"));
        }
        if self.retrain_every == 0 {
            return Err(Error::invalid("retrain_every must be at least 1"));
        }
        if self.hist_vol_window == 0 || self.window < self.hist_vol_window {
            return Err(Error::invalid(format!(
                "window ({}) must be at least the historical volatility window ({}), which must be positive",
                self.window, self.hist_vol_window
            )));
        }
        if self.window < 2 {
            return Err(Error::invalid("window must hold at least two returns"));
        }
        if !(self.basis_fraction > 0.0 && self.basis_fraction <= 1.0) {
            return Err(Error::invalid("basis_fraction must lie in (0, 1]"));
        }
        if let BacktestModel::Mgpch(c) = &self.model {
            c.validate()?;
        }
        Ok(())
    }

    pub fn max_horizon(&self) -> usize {
        self.horizons.iter().copied().max().unwrap_or(1)
    }

    /// Shortest series the backtest accepts.
    pub fn min_length(&self) -> usize {
        self.window + self.max_horizon() + 1
    }
}

/// One forecast origin of the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Origin {
    /// Index of the last observed return.
    pub t: usize,
    /// Whether the model is refit here.
    pub refit: bool,
}

/// Forecast origins for a series of `len` returns: `t` runs from
/// `window − 1` while `t + min(horizons)` is still observed, with refits at
/// `window − 1 + k · retrain_every`.
pub fn schedule(len: usize, config: &BacktestConfig) -> Result<Vec<Origin>> {
    config.validate()?;
    let required = config.min_length();
    if len < required {
        return Err(Error::InsufficientData { required, actual: len });
    }
    let first = config.window - 1;
    let min_h = config.horizons.iter().copied().min().unwrap_or(1);
    let last = len - 1 - min_h;
    Ok((first..=last)
        .map(|t| Origin { t, refit: (t - first) % config.retrain_every == 0 })
        .filter(|o| o.refit || config.mode == ForecastMode::EveryDay)
        .collect())
}

/// Population variance of every run of `window` consecutive returns.
pub fn historical_volatility(returns: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || returns.len() < window {
        return Err(Error::invalid(format!(
            "historical volatility needs at least {window} returns and a positive window, got {}",
            returns.len()
        )));
    }
    Ok(returns
        .windows(window)
        .map(|w| {
            let n = window as f64;
            let shift = w[0];
            let mean = w.iter().map(|r| r - shift).sum::<f64>() / n;
            w.iter().map(|r| (r - shift - mean).powi(2)).sum::<f64>() / n
        })
        .collect())
}

/// Variance forecaster driven by the backtest harness.
pub trait VarianceForecaster {
    fn name(&self) -> String;

    /// Refits on the last `window` rows of `observed`, which ends at the
    /// fit origin.
    fn refit(&mut self, observed: DMatrixView<'_, f64>, window: usize) -> Result<()>;

    /// Forecasts from the origin `observed.nrows() − 1`, returning one
    /// variance per asset for each horizon.
    fn forecast(&mut self, observed: DMatrixView<'_, f64>, horizons: &[usize]) -> Result<Vec<Vec<f64>>>;
}

/// Covariance forecaster driven by the backtest harness. Pairs are ordered
/// `(0, 1), (0, 2), …, (1, 2), …`.
pub trait CovarianceForecaster {
    fn name(&self) -> String;

    fn refit(&mut self, observed: DMatrixView<'_, f64>, window: usize) -> Result<()>;

    /// One covariance per pair for each horizon.
    fn forecast(&mut self, observed: DMatrixView<'_, f64>, horizons: &[usize]) -> Result<Vec<Vec<f64>>>;

    /// Number of covariance values flagged by the quadrature check so far.
    fn precision_warnings(&self) -> usize {
        0
    }
}

/// Per-asset GARCH(1,1). Between refits the conditional variance is filtered
/// forward with the fitted parameters.
#[derive(Debug, Clone, Default)]
pub struct GarchForecaster {
    params: Vec<GarchParams>,
    /// `σ²` of the last processed return, per asset.
    last_var: Vec<f64>,
    last_row: usize,
}

impl VarianceForecaster for GarchForecaster {
    fn name(&self) -> String {
        "garch".into()
    }

    fn refit(&mut self, observed: DMatrixView<'_, f64>, window: usize) -> Result<()> {
        let t = observed.nrows();
        let start = t.checked_sub(window).ok_or(Error::InsufficientData { required: window, actual: t })?;
        self.params.clear();
        self.last_var.clear();
        for d in 0..observed.ncols() {
            let r: Vec<f64> = observed.view((start, d), (window, 1)).iter().copied().collect();
            let params = match garch_fit(&r) {
                Ok(f) => f.params,
                Err(Error::GarchNotConverged { omega, a, b }) => {
                    warn!("GARCH fit for asset {d} at row {} did not converge; using best parameters", t - 1);
                    GarchParams::new(omega, a, b)?
                }
                Err(e) => return Err(e),
            };
            let n = r.len() as f64;
            let mean = r.iter().sum::<f64>() / n;
            let var0 = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let vars = garch_filter(&params, &r, var0);
            self.params.push(params);
            self.last_var.push(vars[window - 1]);
        }
        self.last_row = t - 1;
        Ok(())
    }

    fn forecast(&mut self, observed: DMatrixView<'_, f64>, horizons: &[usize]) -> Result<Vec<Vec<f64>>> {
        let origin = observed.nrows() - 1;
        if self.params.is_empty() || origin < self.last_row {
            return Err(Error::invalid("GARCH forecaster used before fitting"));
        }
        for (d, p) in self.params.iter().enumerate() {
            for s in self.last_row + 1..=origin {
                let r = observed[(s - 1, d)];
                self.last_var[d] = p.omega + p.a * r * r + p.b * self.last_var[d];
            }
        }
        self.last_row = origin;
        horizons
            .iter()
            .map(|&h| {
                self.params
                    .iter()
                    .enumerate()
                    .map(|(d, p)| garch_forecast(p, observed[(origin, d)].powi(2), self.last_var[d], h))
                    .collect()
            })
            .collect()
    }
}

fn fit_window(config: &MgpchConfig, observed: DMatrixView<'_, f64>, window: usize) -> Result<MgpchModel> {
    let t = observed.nrows();
    let start = t.checked_sub(window).ok_or(Error::InsufficientData { required: window, actual: t })?;
    let data = Dataset::from_lagged_returns(&observed.rows(start, window).into_owned())?;
    fit(&data, config)
}

fn last_row(observed: DMatrixView<'_, f64>) -> Vec<f64> {
    observed.row(observed.nrows() - 1).iter().copied().collect()
}

/// MGPCH trained on lagged pairs `(r(s), r(s + 1))` inside the window and
/// queried at `x* = r(t)` for every horizon.
#[derive(Debug, Clone)]
pub struct MgpchForecaster {
    pub config: MgpchConfig,
    model: Option<MgpchModel>,
}

impl MgpchForecaster {
    pub fn new(config: MgpchConfig) -> Self {
        Self { config, model: None }
    }
}

impl VarianceForecaster for MgpchForecaster {
    fn name(&self) -> String {
        "mgpch".into()
    }

    fn refit(&mut self, observed: DMatrixView<'_, f64>, window: usize) -> Result<()> {
        self.model = Some(fit_window(&self.config, observed, window)?);
        Ok(())
    }

    fn forecast(&mut self, observed: DMatrixView<'_, f64>, horizons: &[usize]) -> Result<Vec<Vec<f64>>> {
        let model = self.model.as_ref().ok_or_else(|| Error::invalid("MGPCH forecaster used before fitting"))?;
        let moments = model.predict(&last_row(observed))?;
        Ok(vec![moments.variance; horizons.len()])
    }
}

/// MGPCH marginals joined by conditional copulas for every asset pair.
#[derive(Debug, Clone)]
pub struct MgpchCopulaForecaster {
    pub config: MgpchConfig,
    pub family: CopulaFamily,
    pub basis_fraction: f64,
    fitted: Option<(MgpchModel, Vec<PairwiseCopulaModel>)>,
    warnings: usize,
}

impl MgpchCopulaForecaster {
    pub fn new(config: MgpchConfig, family: CopulaFamily, basis_fraction: f64) -> Self {
        Self { config, family, basis_fraction, fitted: None, warnings: 0 }
    }
}

impl CovarianceForecaster for MgpchCopulaForecaster {
    fn name(&self) -> String {
        format!("mgpch+{}", self.family)
    }

    fn refit(&mut self, observed: DMatrixView<'_, f64>, window: usize) -> Result<()> {
        let model = fit_window(&self.config, observed, window)?;
        let copulas = train_all_pairs(&model, self.family, self.basis_fraction)?;
        self.fitted = Some((model, copulas));
        Ok(())
    }

    fn forecast(&mut self, observed: DMatrixView<'_, f64>, horizons: &[usize]) -> Result<Vec<Vec<f64>>> {
        let (model, copulas) = self.fitted.as_ref().ok_or_else(|| Error::invalid("copula forecaster used before fitting"))?;
        let x = last_row(observed);
        let moments = model.predict(&x)?;
        let mut values = Vec::with_capacity(copulas.len());
        for c in copulas {
            let est = predictive_covariance(c, &moments, &x)?;
            if est.precision_warning {
                self.warnings += 1;
            }
            values.push(est.value);
        }
        Ok(vec![values; horizons.len()])
    }

    fn precision_warnings(&self) -> usize {
        self.warnings
    }
}

/// What a forecast record refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Asset(usize),
    Pair(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    /// Last observed row when the forecast was made.
    pub origin: usize,
    /// Last row of the data the model in use was fitted on.
    pub fitted_at: usize,
    pub horizon: usize,
    /// Row being forecast, `origin + horizon`.
    pub target_row: usize,
    pub target_date: String,
    pub target: Target,
    pub predicted: f64,
    /// Squared return, or return product for pairs.
    pub realized: f64,
    /// Historical volatility ending at the target row (assets only).
    pub hist_vol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetMetrics {
    pub asset: String,
    pub horizon: usize,
    pub forecasts: usize,
    pub mse_sq_returns: f64,
    pub mse_hist_vol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub pair: (usize, usize),
    pub assets: (String, String),
    pub horizon: usize,
    pub forecasts: usize,
    pub mse_pair_products: f64,
}

/// Means over assets (or pairs) for one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonAverage {
    pub horizon: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse_sq_returns: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse_hist_vol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse_pair_products: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub model: String,
    pub config: BacktestConfig,
    pub series_length: usize,
    /// Origins at which the model was refit.
    pub refits: Vec<usize>,
    pub assets: Vec<AssetMetrics>,
    pub pairs: Vec<PairMetrics>,
    pub averages: Vec<HorizonAverage>,
    pub precision_warnings: usize,
    pub forecast_log: Vec<ForecastRecord>,
}

struct Accumulator {
    n: usize,
    a: f64,
    b: f64,
}

/// Runs the configured volatility model.
pub fn run_volatility_backtest(series: &ReturnSeries, config: &BacktestConfig) -> Result<BacktestReport> {
    match &config.model {
        BacktestModel::Garch => run_volatility_backtest_with(series, config, &mut GarchForecaster::default()),
        BacktestModel::Mgpch(c) => run_volatility_backtest_with(series, config, &mut MgpchForecaster::new(c.clone())),
    }
}

/// Runs the covariance backtest with MGPCH marginals and `family` copulas.
pub fn run_covariance_backtest(series: &ReturnSeries, config: &BacktestConfig, family: CopulaFamily) -> Result<BacktestReport> {
    match &config.model {
        BacktestModel::Mgpch(c) => {
            let mut f = MgpchCopulaForecaster::new(c.clone(), family, config.basis_fraction);
            run_covariance_backtest_with(series, config, &mut f)
        }
        BacktestModel::Garch => Err(Error::invalid("the covariance backtest needs an MGPCH model")),
    }
}

fn check_forecast(values: &[Vec<f64>], horizons: usize, width: usize) -> Result<()> {
    if values.len() != horizons || values.iter().any(|v| v.len() != width) {
        return Err(Error::invalid(format!("forecaster returned a malformed table (expected {horizons} × {width})")));
    }
    Ok(())
}

fn date_string(series: &ReturnSeries, row: usize) -> String {
    series.dates[row].format("%Y-%m-%d").to_string()
}

pub fn run_volatility_backtest_with<F: VarianceForecaster>(
    series: &ReturnSeries,
    config: &BacktestConfig,
    forecaster: &mut F,
) -> Result<BacktestReport> {
    let returns = &series.returns;
    let (len, dim) = returns.shape();
    let origins = schedule(len, config)?;
    let hv: Vec<Vec<f64>> = (0..dim)
        .map(|d| historical_volatility(returns.column(d).as_slice(), config.hist_vol_window))
        .collect::<Result<_>>()?;
    let hz = &config.horizons;
    let mut acc: Vec<Vec<Accumulator>> =
        (0..dim).map(|_| hz.iter().map(|_| Accumulator { n: 0, a: 0.0, b: 0.0 }).collect()).collect();
    let mut log = Vec::new();
    let mut refits = Vec::new();
    let mut fitted_at = 0;
    for origin in &origins {
        let t = origin.t;
        let observed = returns.rows(0, t + 1);
        if origin.refit {
            info!("{}: refitting at row {t}", forecaster.name());
            forecaster.refit(observed, config.window)?;
            refits.push(t);
            fitted_at = t;
        }
        let active: Vec<usize> = hz.iter().copied().filter(|h| t + h < len).collect();
        let values = forecaster.forecast(observed, &active)?;
        check_forecast(&values, active.len(), dim)?;
        for (k, &h) in active.iter().enumerate() {
            let slot = hz.iter().position(|&x| x == h).expect("active horizons come from the config");
            let row = t + h;
            for d in 0..dim {
                let predicted = values[k][d];
                let realized = returns[(row, d)].powi(2);
                let hist = hv[d][row + 1 - config.hist_vol_window];
                let a = &mut acc[d][slot];
                a.n += 1;
                a.a += (predicted - realized).powi(2);
                a.b += (predicted - hist).powi(2);
                log.push(ForecastRecord {
                    origin: t,
                    fitted_at,
                    horizon: h,
                    target_row: row,
                    target_date: date_string(series, row),
                    target: Target::Asset(d),
                    predicted,
                    realized,
                    hist_vol: Some(hist),
                });
            }
        }
    }

    let mut assets = Vec::new();
    let mut averages = Vec::new();
    for (slot, &h) in hz.iter().enumerate() {
        let mut sum_a = 0.0;
        let mut sum_b = 0.0;
        for d in 0..dim {
            let a = &acc[d][slot];
            let n = a.n.max(1) as f64;
            let m = AssetMetrics {
                asset: series.asset_names[d].clone(),
                horizon: h,
                forecasts: a.n,
                mse_sq_returns: a.a / n,
                mse_hist_vol: a.b / n,
            };
            sum_a += m.mse_sq_returns;
            sum_b += m.mse_hist_vol;
            assets.push(m);
        }
        averages.push(HorizonAverage {
            horizon: h,
            mse_sq_returns: Some(sum_a / dim as f64),
            mse_hist_vol: Some(sum_b / dim as f64),
            mse_pair_products: None,
        });
    }
    Ok(BacktestReport {
        model: forecaster.name(),
        config: config.clone(),
        series_length: len,
        refits,
        assets,
        pairs: Vec::new(),
        averages,
        precision_warnings: 0,
        forecast_log: log,
    })
}

/// Unordered asset pairs in report order.
pub fn asset_pairs(dim: usize) -> Vec<(usize, usize)> {
    (0..dim).flat_map(|i| (i + 1..dim).map(move |j| (i, j))).collect()
}

pub fn run_covariance_backtest_with<F: CovarianceForecaster>(
    series: &ReturnSeries,
    config: &BacktestConfig,
    forecaster: &mut F,
) -> Result<BacktestReport> {
    let returns: &DMatrix<f64> = &series.returns;
    let (len, dim) = returns.shape();
    if dim < 2 {
        return Err(Error::invalid("the covariance backtest needs at least two assets"));
    }
    let origins = schedule(len, config)?;
    let pairs = asset_pairs(dim);
    let hz = &config.horizons;
    let mut acc: Vec<Vec<Accumulator>> =
        pairs.iter().map(|_| hz.iter().map(|_| Accumulator { n: 0, a: 0.0, b: 0.0 }).collect()).collect();
    let mut log = Vec::new();
    let mut refits = Vec::new();
    let mut fitted_at = 0;
    for origin in &origins {
        let t = origin.t;
        let observed = returns.rows(0, t + 1);
        if origin.refit {
            info!("{}: refitting at row {t}", forecaster.name());
            forecaster.refit(observed, config.window)?;
            refits.push(t);
            fitted_at = t;
        }
        let active: Vec<usize> = hz.iter().copied().filter(|h| t + h < len).collect();
        let values = forecaster.forecast(observed, &active)?;
        check_forecast(&values, active.len(), pairs.len())?;
        for (k, &h) in active.iter().enumerate() {
            let slot = hz.iter().position(|&x| x == h).expect("active horizons come from the config");
            let row = t + h;
            for (p, &(i, j)) in pairs.iter().enumerate() {
                let predicted = values[k][p];
                let realized = returns[(row, i)] * returns[(row, j)];
                let a = &mut acc[p][slot];
                a.n += 1;
                a.a += (predicted - realized).powi(2);
                log.push(ForecastRecord {
                    origin: t,
                    fitted_at,
                    horizon: h,
                    target_row: row,
                    target_date: date_string(series, row),
                    target: Target::Pair(i, j),
                    predicted,
                    realized,
                    hist_vol: None,
                });
            }
        }
    }

    let mut metrics = Vec::new();
    let mut averages = Vec::new();
    for (slot, &h) in hz.iter().enumerate() {
        let mut sum = 0.0;
        for (p, &(i, j)) in pairs.iter().enumerate() {
            let a = &acc[p][slot];
            let m = PairMetrics {
                pair: (i, j),
                assets: (series.asset_names[i].clone(), series.asset_names[j].clone()),
                horizon: h,
                forecasts: a.n,
                mse_pair_products: a.a / a.n.max(1) as f64,
            };
            sum += m.mse_pair_products;
            metrics.push(m);
        }
        averages.push(HorizonAverage {
            horizon: h,
            mse_sq_returns: None,
            mse_hist_vol: None,
            mse_pair_products: Some(sum / pairs.len() as f64),
        });
    }
    Ok(BacktestReport {
        model: forecaster.name(),
        config: config.clone(),
        series_length: len,
        refits,
        assets: Vec::new(),
        pairs: metrics,
        averages,
        precision_warnings: forecaster.precision_warnings(),
        forecast_log: log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(window: usize, retrain: usize, horizons: Vec<usize>) -> BacktestConfig {
        BacktestConfig { window, retrain_every: retrain, horizons, model: BacktestModel::Garch, ..Default::default() }
    }

    #[test]
    fn historical_volatility_examples() {
        assert!(historical_volatility(&[0.3; 12], 10).unwrap().iter().all(|v| *v == 0.0));
        assert_eq!(historical_volatility(&[1.0, -1.0], 2).unwrap(), vec![1.0]);
        let r = [0.1, -0.2, 0.4, 0.0];
        let all = historical_volatility(&r, 4).unwrap();
        let mean = 0.075;
        let var = r.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
        assert_eq!(all.len(), 1);
        assert!((all[0] - var).abs() < 1e-16);
        assert!(historical_volatility(&r, 5).is_err());
    }

    #[test]
    fn schedule_counts_refits() {
        let c = cfg(120, 7, vec![1, 7, 30]);
        let s = schedule(120 + 31, &c).unwrap();
        assert_eq!(s.len(), 31);
        assert_eq!(s.iter().filter(|o| o.refit).count(), 5);
        assert_eq!(s[0].t, 119);
        assert_eq!(s.last().unwrap().t, 149);
        let sparse = BacktestConfig { mode: ForecastMode::RetrainDaysOnly, ..c.clone() };
        let s = schedule(151, &sparse).unwrap();
        assert_eq!(s.iter().map(|o| o.t).collect::<Vec<_>>(), vec![119, 126, 133, 140, 147]);
    }

    #[test]
    fn short_series_names_the_minimum() {
        let c = cfg(120, 7, vec![1, 7, 30]);
        match schedule(150, &c) {
            Err(Error::InsufficientData { required, actual }) => assert_eq!((required, actual), (151, 150)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(cfg(5, 7, vec![1]).validate().is_err());
        assert!(cfg(120, 0, vec![1]).validate().is_err());
        assert!(cfg(120, 7, vec![]).validate().is_err());
        assert!(cfg(120, 7, vec![0, 1]).validate().is_err());
    }
}
