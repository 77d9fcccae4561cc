//! Run configuration file.
//!
//! An optional TOML file whose values are overridden by command-line flags.
//! Every table and key is optional and unknown keys are rejected:
//!
//! ```toml
//! seed = 7
//! threads = 2
//! data = "prices.csv"
//! model = "model.json"
//! out = "report.json"
//! plot_data = "forecasts.csv"
//! family = "frank"
//!
//! [mgpch]            # model settings, see `MgpchConfig`
//! max_iters = 200
//! [mgpch.pyp]
//! truncation = 5
//!
//! [backtest]
//! method = "mgpch"   # or "garch"
//! window = 120
//! retrain_every = 7
//! horizons = [1, 7, 30]
//! hist_vol_window = 10
//! mode = "every_day" # or "retrain_days_only"
//! basis_fraction = 0.1
//!
//! [simulate]
//! length = 500
//! assets = 2
//! weights = [0.5, 0.5]
//! initial_price = 100.0
//! ```

use std::path::{Path, PathBuf};

use mgpch::backtest::{BacktestConfig, BacktestModel, ForecastMode};
use mgpch::copula::{CopulaFamily, DEFAULT_BASIS_FRACTION};
use mgpch::mgpch::MgpchConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Mgpch,
    Garch,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub plot_data: Option<PathBuf>,
    pub family: Option<CopulaFamily>,
    pub mgpch: MgpchConfig,
    pub backtest: BacktestSection,
    pub simulate: SimulateSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BacktestSection {
    pub method: Method,
    pub window: usize,
    pub retrain_every: usize,
    pub horizons: Vec<usize>,
    pub hist_vol_window: usize,
    pub mode: ForecastMode,
    pub basis_fraction: f64,
}

impl Default for BacktestSection {
    fn default() -> Self {
        let d = BacktestConfig::default();
        Self {
            method: Method::Mgpch,
            window: d.window,
            retrain_every: d.retrain_every,
            horizons: d.horizons,
            hist_vol_window: d.hist_vol_window,
            mode: d.mode,
            basis_fraction: DEFAULT_BASIS_FRACTION,
        }
    }
}

impl BacktestSection {
    pub fn to_config(&self, mgpch: &MgpchConfig) -> BacktestConfig {
        BacktestConfig {
            window: self.window,
            retrain_every: self.retrain_every,
            horizons: self.horizons.clone(),
            hist_vol_window: self.hist_vol_window,
            mode: self.mode,
            model: match self.method {
                Method::Mgpch => BacktestModel::Mgpch(mgpch.clone()),
                Method::Garch => BacktestModel::Garch,
            },
            basis_fraction: self.basis_fraction,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub length: usize,
    pub assets: usize,
    /// Fixed mixture weights; drawn from the stick-breaking prior when absent.
    pub weights: Option<Vec<f64>>,
    pub initial_price: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { length: 500, assets: 2, weights: None, initial_price: 100.0 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(toml::from_str(&text)?)
    }
}
