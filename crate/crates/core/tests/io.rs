use mgpch::copula::{train_all_pairs, CopulaFamily};
use mgpch::data_io::{read_price_csv, to_log_returns, write_price_csv, PriceSeries, ReturnSeries};
use mgpch::mgpch::{fit, simulate, MgpchConfig};
use mgpch::persist::ModelFile;
use mgpch::pyp::PypConfig;
use mgpch::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn prices_survive_returns_and_csv(
        rows in 2usize..40, cols in 1usize..4, seed in prop::collection::vec(-0.2f64..0.2, 160), p0 in 0.5f64..500.0,
    ) {
        let returns = DMatrix::from_fn(rows, cols, |i, j| seed[(i * cols + j) % seed.len()]);
        let series = ReturnSeries::from_matrix(returns).unwrap();
        let prices = PriceSeries::from_returns(&series, p0).unwrap();
        let mut buf = Vec::new();
        write_price_csv(&prices, &mut buf).unwrap();
        let loaded = read_price_csv(buf.as_slice()).unwrap();
        prop_assert!(loaded.warnings.is_empty());
        prop_assert_eq!(&loaded.series, &prices);
        let back = to_log_returns(&loaded.series).unwrap();
        prop_assert_eq!(&back.dates, &series.dates);
        prop_assert!((&back.returns - &series.returns).abs().max() < 1e-10);
        let rebuilt = PriceSeries::from_returns(&back, p0).unwrap();
        for (a, b) in rebuilt.prices.iter().zip(prices.prices.iter()) {
            prop_assert!((a - b).abs() <= 1e-10 * b);
        }
    }
}

fn fitted_file() -> ModelFile {
    let cfg = MgpchConfig { pyp: PypConfig { truncation: 2, ..Default::default() }, max_iters: 15, ..Default::default() };
    let sim = simulate(&cfg, 50, 2, 8).unwrap();
    let model = fit(&sim.dataset().unwrap(), &cfg).unwrap();
    let copulas = train_all_pairs(&model, CopulaFamily::Gumbel, 0.2).unwrap();
    ModelFile::new(model, vec!["a".into(), "b".into()], copulas).unwrap()
}

#[test]
fn model_files_round_trip_losslessly() {
    let file = fitted_file();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    file.save(&path).unwrap();
    let loaded = ModelFile::load(&path).unwrap();
    assert_eq!(loaded.to_json().unwrap(), file.to_json().unwrap());
    assert_eq!(loaded.copulas, file.copulas);
    for x in [[0.01, -0.02], [0.0, 0.0], [-0.03, 0.005]] {
        let a = file.model.predict(&x).unwrap();
        let b = loaded.model.predict(&x).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.variance, b.variance);
    }
}

#[test]
fn model_files_reject_unknown_keys_and_versions() {
    let text = fitted_file().to_json().unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let mut extra = value.clone();
    extra["surprise"] = serde_json::json!(1);
    assert!(matches!(ModelFile::from_json(&extra.to_string()), Err(Error::ModelFile(_))));
    let mut nested = value.clone();
    nested["model"]["hyper"]["surprise"] = serde_json::json!(1);
    assert!(ModelFile::from_json(&nested.to_string()).is_err());
    value["version"] = serde_json::json!(99);
    match ModelFile::from_json(&value.to_string()) {
        Err(Error::ModelFile(msg)) => assert!(msg.contains("99")),
        other => panic!("{other:?}"),
    }
}
