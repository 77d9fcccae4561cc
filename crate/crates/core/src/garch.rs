//! GARCH(1,1) baseline: Gaussian maximum likelihood and variance forecasts.
//!
//! Parameters are optimized in the unconstrained coordinates
//! `(log ω, u₁, u₂)` with `a + b = logistic(u₁)` and
//! `a / (a + b) = logistic(u₂)`, which keeps every iterate stationary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{minimize, LbfgsOptions};
use crate::special::{logistic, logit};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Minimum series length accepted by [`garch_fit`].
pub const MIN_GARCH_LENGTH: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GarchParams {
    pub omega: f64,
    pub a: f64,
    pub b: f64,
}

impl GarchParams {
    pub fn new(omega: f64, a: f64, b: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::invalid(format!("GARCH omega must be positive, got {omega}")));
        }
        if !(a >= 0.0 && b >= 0.0 && a + b < 1.0) {
            return Err(Error::invalid(format!("GARCH needs a, b ≥ 0 and a + b < 1, got a={a}, b={b}")));
        }
        Ok(Self { omega, a, b })
    }

    /// Long-run variance `ω / (1 − a − b)`.
    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.a - self.b)
    }

    fn from_unconstrained(theta: &[f64]) -> Self {
        let p = logistic(theta[1]);
        let s = logistic(theta[2]);
        Self { omega: theta[0].exp(), a: p * s, b: p * (1.0 - s) }
    }
}

/// Result of a maximum-likelihood fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchFit {
    pub params: GarchParams,
    pub log_likelihood: f64,
    /// Conditional variance forecast for the step after the last return.
    pub next_variance: f64,
}

fn sample_variance(returns: &[f64]) -> f64 {
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n
}

/// Conditional variances `σ²₁ … σ²_{T+1}` for the given returns, starting
/// from `initial_var`. The last entry is the one-step-ahead forecast.
pub fn garch_filter(params: &GarchParams, returns: &[f64], initial_var: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(returns.len() + 1);
    let mut var = initial_var;
    out.push(var);
    for r in returns {
        var = params.omega + params.a * r * r + params.b * var;
        out.push(var);
    }
    out
}

/// Gaussian log-likelihood with `σ²₁` equal to the sample variance.
pub fn garch_log_likelihood(params: &GarchParams, returns: &[f64]) -> f64 {
    let vars = garch_filter(params, returns, sample_variance(returns));
    returns.iter().zip(&vars).map(|(r, v)| -0.5 * (LN_2PI + v.ln() + r * r / v)).sum()
}

/// Negative log-likelihood and its gradient in unconstrained coordinates.
fn objective(theta: &[f64], returns: &[f64], var0: f64) -> (f64, Vec<f64>) {
    let p = logistic(theta[1]);
    let s = logistic(theta[2]);
    let GarchParams { omega, a, b } = GarchParams::from_unconstrained(theta);
    let mut var = var0;
    let (mut dw, mut da, mut db) = (0.0, 0.0, 0.0);
    let mut ll = 0.0;
    let (mut gw, mut ga, mut gb) = (0.0, 0.0, 0.0);
    for (t, r) in returns.iter().enumerate() {
        if t > 0 {
            let prev_r2 = returns[t - 1] * returns[t - 1];
            let prev_var = var;
            var = omega + a * prev_r2 + b * prev_var;
            dw = 1.0 + b * dw;
            da = prev_r2 + b * da;
            db = prev_var + b * db;
        }
        if !(var > 0.0) {
            return (f64::NAN, vec![f64::NAN; 3]);
        }
        let r2 = r * r;
        ll -= 0.5 * (LN_2PI + var.ln() + r2 / var);
        let dl = -0.5 * (1.0 / var - r2 / (var * var));
        gw += dl * dw;
        ga += dl * da;
        gb += dl * db;
    }
    let dp = p * (1.0 - p);
    let ds = s * (1.0 - s);
    let g = vec![
        -gw * omega,
        -(ga * dp * s + gb * dp * (1.0 - s)),
        -(ga * p * ds - gb * p * ds),
    ];
    (-ll, g)
}

/// Maximum-likelihood GARCH(1,1) fit from several starting points.
///
/// Fails with [`Error::GarchNotConverged`], carrying the best parameters
/// found, when no start converges.
pub fn garch_fit(returns: &[f64]) -> Result<GarchFit> {
    if returns.len() < MIN_GARCH_LENGTH {
        return Err(Error::InsufficientData { required: MIN_GARCH_LENGTH, actual: returns.len() });
    }
    if returns.iter().any(|r| !r.is_finite()) {
        return Err(Error::invalid("returns contain non-finite values"));
    }
    let var0 = sample_variance(returns);
    if !(var0 > 0.0) {
        return Err(Error::invalid("GARCH needs returns with positive variance"));
    }
    let starts = [(0.05, 0.9, 0.1), (0.5, 0.5, 0.5), (0.9, 0.1, 0.5), (0.02, 0.97, 0.05)];
    let opts = LbfgsOptions { max_iters: 300, grad_tol: 1e-6, rel_tol: 1e-12, ..Default::default() };
    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    for (frac, persistence, share) in starts {
        let x0 = [(frac * var0).ln(), logit(persistence), logit(share)];
        let res = minimize(|x| objective(x, returns, var0), &x0, &opts);
        if res.value.is_finite() && best.as_ref().is_none_or(|b| res.value < b.0) {
            best = Some((res.value, res.x, res.converged));
        }
    }
    let Some((nll, theta, converged)) = best else {
        return Err(Error::NumericalDomain("GARCH likelihood is not finite at any start".into()));
    };
    let params = GarchParams::from_unconstrained(&theta);
    if !converged {
        return Err(Error::GarchNotConverged { omega: params.omega, a: params.a, b: params.b });
    }
    let next_variance = *garch_filter(&params, returns, var0).last().expect("filter output is non-empty");
    Ok(GarchFit { params, log_likelihood: -nll, next_variance })
}

/// `h`-step variance forecast: `σ²_{t+1} = ω + a r_t² + b σ_t²` and
/// `σ²_{t+h} = ω + (a + b) σ²_{t+h−1}` beyond.
pub fn garch_forecast(params: &GarchParams, last_r_sq: f64, last_var: f64, h: usize) -> Result<f64> {
    if h == 0 {
        return Err(Error::invalid("forecast horizon must be at least 1"));
    }
    if !(last_r_sq >= 0.0 && last_var >= 0.0) {
        return Err(Error::invalid("forecast inputs must be non-negative"));
    }
    let mut var = params.omega + params.a * last_r_sq + params.b * last_var;
    let persistence = params.a + params.b;
    for _ in 1..h {
        var = params.omega + persistence * var;
    }
    Ok(var)
}
