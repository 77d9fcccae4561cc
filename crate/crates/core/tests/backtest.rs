use mgpch::backtest::{
    run_covariance_backtest, run_volatility_backtest, run_volatility_backtest_with, BacktestConfig, BacktestModel,
    Target, VarianceForecaster,
};
use mgpch::copula::CopulaFamily;
use mgpch::data_io::ReturnSeries;
use mgpch::mgpch::MgpchConfig;
use mgpch::pyp::PypConfig;
use mgpch::Result;
use nalgebra::{DMatrix, DMatrixView};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian_returns(len: usize, dim: usize, sd: f64, seed: u64) -> ReturnSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ReturnSeries::from_matrix(DMatrix::from_fn(len, dim, |_, _| sd * rng.sample::<f64, _>(StandardNormal))).unwrap()
}

fn small_mgpch() -> MgpchConfig {
    MgpchConfig { pyp: PypConfig { truncation: 2, ..Default::default() }, max_iters: 20, hyperopt_every: 0, ..Default::default() }
}

#[test]
fn garch_on_constant_variance_matches_the_squared_return_noise() {
    let sd = 0.01;
    let series = gaussian_returns(5000, 1, sd, 21);
    let cfg = BacktestConfig { retrain_every: 50, horizons: vec![1], model: BacktestModel::Garch, ..Default::default() };
    let report = run_volatility_backtest(&series, &cfg).unwrap();
    let expected = 2.0 * sd.powi(4);
    let mse = report.assets[0].mse_sq_returns;
    assert!((mse - expected).abs() < 0.1 * expected, "MSE {mse:e} vs 2σ⁴ = {expected:e}");
}

#[test]
fn default_schedule_on_window_plus_31_refits_five_times() {
    let series = gaussian_returns(151, 1, 0.01, 2);
    let cfg = BacktestConfig { model: BacktestModel::Garch, ..Default::default() };
    let report = run_volatility_backtest(&series, &cfg).unwrap();
    assert_eq!(report.refits, vec![119, 126, 133, 140, 147]);
    let counts: Vec<usize> = report.assets.iter().map(|a| a.forecasts).collect();
    // origins 119..=149 for h = 1, 119..=143 for h = 7 and 119..=120 for h = 30
    assert_eq!(counts, vec![31, 25, 2]);
}

/// Reads the realised squared return of the target row from a stored copy.
struct Oracle {
    squares: DMatrix<f64>,
}

impl VarianceForecaster for Oracle {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn refit(&mut self, _: DMatrixView<'_, f64>, _: usize) -> Result<()> {
        Ok(())
    }

    fn forecast(&mut self, observed: DMatrixView<'_, f64>, horizons: &[usize]) -> Result<Vec<Vec<f64>>> {
        let t = observed.nrows() - 1;
        Ok(horizons.iter().map(|h| self.squares.row(t + h).iter().copied().collect()).collect())
    }
}

#[test]
fn perfect_foresight_scores_zero() {
    let series = gaussian_returns(200, 2, 0.02, 3);
    let cfg = BacktestConfig { horizons: vec![1, 5], model: BacktestModel::Garch, ..Default::default() };
    let mut oracle = Oracle { squares: series.returns.map(|r| r * r) };
    let report = run_volatility_backtest_with(&series, &cfg, &mut oracle).unwrap();
    assert!(report.assets.iter().all(|a| a.mse_sq_returns == 0.0 && a.forecasts > 0));
}

#[test]
fn report_averages_are_exact_means() {
    let series = gaussian_returns(160, 3, 0.01, 4);
    let cfg = BacktestConfig { horizons: vec![1, 2], model: BacktestModel::Garch, ..Default::default() };
    let report = run_volatility_backtest(&series, &cfg).unwrap();
    for avg in &report.averages {
        let rows: Vec<_> = report.assets.iter().filter(|a| a.horizon == avg.horizon).collect();
        assert_eq!(rows.len(), 3);
        let mean = rows.iter().map(|a| a.mse_sq_returns).sum::<f64>() / 3.0;
        assert_eq!(avg.mse_sq_returns, Some(mean));
        for a in rows {
            let d = report.assets.iter().position(|x| x == a).unwrap() % 3;
            let log: Vec<_> = report
                .forecast_log
                .iter()
                .filter(|r| r.horizon == avg.horizon && r.target == Target::Asset(d))
                .collect();
            assert_eq!(log.len(), a.forecasts);
            let mse = log.iter().map(|r| (r.predicted - r.realized).powi(2)).sum::<f64>() / log.len() as f64;
            assert!((mse - a.mse_sq_returns).abs() <= 1e-12 * mse);
        }
    }
}

#[test]
fn covariance_backtest_on_independent_assets() {
    let series = gaussian_returns(170, 2, 0.01, 5);
    let cfg = BacktestConfig {
        retrain_every: 25,
        horizons: vec![1],
        model: BacktestModel::Mgpch(small_mgpch()),
        ..Default::default()
    };
    let report = run_covariance_backtest(&series, &cfg, CopulaFamily::Frank).unwrap();
    assert_eq!(report.pairs.len(), 1);
    assert_eq!(report.pairs[0].pair, (0, 1));
    let log = &report.forecast_log;
    let n = log.len() as f64;
    let mean_abs = log.iter().map(|r| r.predicted.abs()).sum::<f64>() / n;
    let mean = log.iter().map(|r| r.realized).sum::<f64>() / n;
    let sd = (log.iter().map(|r| (r.realized - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean_abs < sd / n.sqrt(), "mean |cov| {mean_abs:e} vs standard error {:e}", sd / n.sqrt());
}

#[test]
fn backtests_are_deterministic() {
    let series = gaussian_returns(135, 1, 0.01, 6);
    let cfg = BacktestConfig {
        retrain_every: 10,
        horizons: vec![1, 3],
        model: BacktestModel::Mgpch(small_mgpch()),
        ..Default::default()
    };
    let a = run_volatility_backtest(&series, &cfg).unwrap();
    let b = run_volatility_backtest(&series, &cfg).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
