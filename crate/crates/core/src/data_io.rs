//! Price files and log returns.
//!
//! A price file is UTF-8 CSV with a header row: a `date` column holding
//! ISO-8601 dates, then one column of decimal prices per asset. Dates must be
//! strictly increasing. Rows with a missing or non-positive price are dropped
//! and reported as warnings.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Days, NaiveDate};
use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub dates: Vec<NaiveDate>,
    /// T × D positive prices.
    pub prices: DMatrix<f64>,
    pub asset_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    /// Date of the later price of each difference.
    pub dates: Vec<NaiveDate>,
    /// (T − 1) × D log returns.
    pub returns: DMatrix<f64>,
    pub asset_names: Vec<String>,
}

/// A data row skipped while loading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowWarning {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedPrices {
    pub series: PriceSeries,
    pub warnings: Vec<RowWarning>,
}

impl PriceSeries {
    pub fn new(dates: Vec<NaiveDate>, prices: DMatrix<f64>, asset_names: Vec<String>) -> Result<Self> {
        if dates.len() != prices.nrows() || asset_names.len() != prices.ncols() {
            return Err(Error::invalid("price series dimensions do not match"));
        }
        if prices.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::invalid("prices must be positive and finite"));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("dates must be strictly increasing"));
        }
        Ok(Self { dates, prices, asset_names })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Prices `p₀ exp(r₁ + … + r_t)` for the given returns, one row per date,
    /// with `p₀` on the day before the first return.
    pub fn from_returns(returns: &ReturnSeries, initial: f64) -> Result<Self> {
        if !(initial > 0.0 && initial.is_finite()) {
            return Err(Error::invalid("initial price must be positive"));
        }
        let (t, d) = returns.returns.shape();
        let first = match returns.dates.first() {
            Some(day) => day.checked_sub_days(Days::new(1)).ok_or_else(|| Error::invalid("date out of range"))?,
            None => return Err(Error::InsufficientData { required: 1, actual: 0 }),
        };
        let mut prices = DMatrix::zeros(t + 1, d);
        for j in 0..d {
            let mut log_p = initial.ln();
            prices[(0, j)] = initial;
            for i in 0..t {
                log_p += returns.returns[(i, j)];
                prices[(i + 1, j)] = log_p.exp();
            }
        }
        let mut dates = vec![first];
        dates.extend(returns.dates.iter().copied());
        Self::new(dates, prices, returns.asset_names.clone())
    }
}

impl ReturnSeries {
    pub fn new(dates: Vec<NaiveDate>, returns: DMatrix<f64>, asset_names: Vec<String>) -> Result<Self> {
        if dates.len() != returns.nrows() || asset_names.len() != returns.ncols() {
            return Err(Error::invalid("return series dimensions do not match"));
        }
        if returns.iter().any(|r| !r.is_finite()) {
            return Err(Error::invalid("returns must be finite"));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("dates must be strictly increasing"));
        }
        Ok(Self { dates, returns, asset_names })
    }

    /// Wraps a bare return matrix with consecutive daily dates from
    /// 2000-01-01 and names `asset1 … assetD`.
    pub fn from_matrix(returns: DMatrix<f64>) -> Result<Self> {
        let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid constant date");
        let dates = consecutive_dates(start, returns.nrows())?;
        let names = (1..=returns.ncols()).map(|i| format!("asset{i}")).collect();
        Self::new(dates, returns, names)
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.returns.ncols()
    }
}

/// `n` consecutive calendar days starting at `start`.
pub fn consecutive_dates(start: NaiveDate, n: usize) -> Result<Vec<NaiveDate>> {
    (0..n)
        .map(|i| start.checked_add_days(Days::new(i as u64)).ok_or_else(|| Error::invalid("date out of range")))
        .collect()
}

pub fn load_price_csv(path: impl AsRef<Path>) -> Result<LoadedPrices> {
    read_price_csv(File::open(path)?)
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.to_ascii_lowercase().as_str(), "" | "na" | "nan" | "null" | "n/a")
}

/// Parses a price file from any reader; see the module docs for the format.
pub fn read_price_csv<R: Read>(reader: R) -> Result<LoadedPrices> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let format_err = |line: usize, message: String| Error::Format { line, message };
    let headers = rdr.headers().map_err(|e| format_err(1, e.to_string()))?.clone();
    if headers.is_empty() || !headers[0].eq_ignore_ascii_case("date") {
        return Err(format_err(1, "first column must be 'date'".into()));
    }
    let asset_names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    if asset_names.is_empty() {
        return Err(format_err(1, "no asset columns".into()));
    }

    let mut dates = Vec::new();
    let mut values = Vec::new();
    let mut warnings = Vec::new();
    let mut last_date: Option<NaiveDate> = None;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            format_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let date = NaiveDate::parse_from_str(&record[0], DATE_FORMAT)
            .map_err(|e| format_err(line, format!("bad date '{}': {e}", &record[0])))?;
        if let Some(prev) = last_date {
            if date <= prev {
                return Err(format_err(line, format!("date {date} does not follow {prev}")));
            }
        }
        last_date = Some(date);

        let mut row = Vec::with_capacity(asset_names.len());
        let mut problem = None;
        for (k, cell) in record.iter().skip(1).enumerate() {
            if is_missing(cell) {
                problem.get_or_insert_with(|| format!("missing price for {}", asset_names[k]));
                continue;
            }
            let p: f64 = cell.parse().map_err(|_| format_err(line, format!("bad price '{cell}'")))?;
            if !(p > 0.0 && p.is_finite()) {
                problem.get_or_insert_with(|| format!("non-positive price {p} for {}", asset_names[k]));
            }
            row.push(p);
        }
        match problem {
            Some(message) => {
                warn!("line {line}: dropping row: {message}");
                warnings.push(RowWarning { line, message });
            }
            None => {
                dates.push(date);
                values.extend(row);
            }
        }
    }
    if dates.len() < 2 {
        return Err(Error::InsufficientData { required: 2, actual: dates.len() });
    }
    let prices = DMatrix::from_row_slice(dates.len(), asset_names.len(), &values);
    Ok(LoadedPrices { series: PriceSeries::new(dates, prices, asset_names)?, warnings })
}

/// Writes a price file readable by [`read_price_csv`]. Prices are written in
/// shortest round-trip form.
pub fn write_price_csv<W: Write>(series: &PriceSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let mut header = vec!["date".to_string()];
    header.extend(series.asset_names.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (i, date) in series.dates.iter().enumerate() {
        let mut rec = vec![date.format(DATE_FORMAT).to_string()];
        rec.extend(series.prices.row(i).iter().map(|p| p.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `r_t = log p_{t+1} − log p_t` for every asset.
pub fn to_log_returns(prices: &PriceSeries) -> Result<ReturnSeries> {
    let t = prices.len();
    if t < 2 {
        return Err(Error::InsufficientData { required: 2, actual: t });
    }
    let d = prices.prices.ncols();
    let returns = DMatrix::from_fn(t - 1, d, |i, j| prices.prices[(i + 1, j)].ln() - prices.prices[(i, j)].ln());
    ReturnSeries::new(prices.dates[1..].to_vec(), returns, prices.asset_names.clone())
}
