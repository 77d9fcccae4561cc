use std::path::Path;
use std::process::{Command, Output};

fn mgpch(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mgpch")).current_dir(dir).args(args).output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SMALL: &str = "[mgpch]\nmax_iters = 20\nhyperopt_every = 0\n[mgpch.pyp]\ntruncation = 2\n";

fn simulated(dir: &Path, length: &str) {
    std::fs::write(dir.join("run.toml"), SMALL).unwrap();
    let out = mgpch(dir, &["simulate", "--config", "run.toml", "--seed", "4", "--out", "prices.csv", "--length", length]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn simulate_fit_predict_chain_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d, "80");
    assert!(d.join("prices.truth.json").exists());
    let out = mgpch(d, &["fit", "--config", "run.toml", "--data", "prices.csv", "--out", "model.json", "--family", "clayton"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let out = mgpch(d, &["predict", "--model", "model.json", "--out", "forecast.json", "--horizons", "1,7,30"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let forecast: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("forecast.json")).unwrap()).unwrap();
    let horizons = forecast["forecasts"].as_array().unwrap();
    assert_eq!(horizons.len(), 3);
    for h in horizons {
        assert_eq!(h["variance"].as_array().unwrap().len(), 2);
        assert!(h["variance"][0].as_f64().unwrap() > 0.0);
        assert_eq!(h["covariances"].as_array().unwrap().len(), 1);
    }
}

#[test]
fn backtest_on_too_short_data_names_the_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d, "60");
    let out = mgpch(d, &["backtest", "--data", "prices.csv", "--out", "r.json", "--window", "100", "--method", "garch"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("131"), "message should name window + max horizon + 1: {err}");
    assert_eq!(err.trim().lines().count(), 1);
    assert!(!d.join("r.json").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(mgpch(d, &["fit", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(mgpch(d, &["fit", "--out", "m.json"]).status.code(), Some(2));
    assert_eq!(mgpch(d, &["simulate", "--out", "p.csv", "--truncation", "0"]).status.code(), Some(2));
    std::fs::write(d.join("bad.toml"), "[backtest]\nwindoww = 3\n").unwrap();
    let out = mgpch(d, &["simulate", "--config", "bad.toml", "--out", "p.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("windoww"));
    simulated(d, "60");
    let out = mgpch(d, &["cov-backtest", "--data", "prices.csv", "--out", "c.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--family"));
}

#[test]
fn missing_data_file_is_a_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = mgpch(dir.path(), &["fit", "--data", "absent.csv", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("absent.csv"));
}

#[test]
fn repeated_fits_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d, "70");
    for name in ["a.json", "b.json"] {
        let out = mgpch(d, &["fit", "--config", "run.toml", "--seed", "9", "--data", "prices.csv", "--out", name]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    assert_eq!(std::fs::read(d.join("a.json")).unwrap(), std::fs::read(d.join("b.json")).unwrap());
}

#[test]
fn help_lists_subcommands_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = mgpch(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["fit", "predict", "backtest", "cov-backtest", "simulate"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
    let out = mgpch(dir.path(), &["backtest", "--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for flag in ["--config", "--seed", "--threads", "--truncation", "--window", "--retrain-every", "--horizons", "--plot-data", "--method"] {
        assert!(text.contains(flag), "{flag} missing from backtest help");
    }
}

#[test]
fn plot_data_has_one_row_per_forecast() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d, "70");
    let out = mgpch(
        d,
        &["backtest", "--method", "garch", "--data", "prices.csv", "--out", "r.json", "--window", "40", "--horizons", "1,2", "--plot-data", "p.csv"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("r.json")).unwrap()).unwrap();
    let records = report["forecast_log"].as_array().unwrap().len();
    let csv = std::fs::read_to_string(d.join("p.csv")).unwrap();
    assert_eq!(csv.lines().count(), records + 1);
    assert!(csv.starts_with("target_date,"));
}
