//! Conditional pairwise Archimedean copulas.
//!
//! Each output pair `(i, j)` gets a copula whose parameter depends on the
//! input through `θ(x) = ξ(b + wᵀh(x))`, where `h` is a vector of Gaussian
//! radial basis functions centred on a subset of the training inputs and `ξ`
//! is the family's link. The intercept `b` and weights `w` maximize the
//! copula log-likelihood of the pseudo-observations
//! `(F_i(y_i | x), F_j(y_j | x))` under a zero-mean Gaussian prior on `w`.
//! Covariances follow from Hoeffding's identity
//! `Cov = ∫∫ [C(F_i(s), F_j(t)) − F_i(s) F_j(t)] ds dt`.

use std::fmt;
use std::str::FromStr;

use log::debug;
use rand::distr::Open01;
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::euclidean_distance;
use crate::mgpch::{MgpchModel, PredictiveMoments};
use crate::optim::{minimize, LbfgsOptions};
use crate::quadrature::GaussLegendre;
use crate::special::normal_cdf;

/// Frank parameters with smaller magnitude use the first-order expansion
/// around independence.
const FRANK_SMALL: f64 = 1e-6;

/// Precision of the zero-mean Gaussian prior on the basis weights.
pub const WEIGHT_PENALTY: f64 = 100.0;

/// Pseudo-observations are clamped into `[U_CLAMP, 1 − U_CLAMP]`.
pub const U_CLAMP: f64 = 1e-10;

/// Default share of the training points used as basis centres.
pub const DEFAULT_BASIS_FRACTION: f64 = 0.1;

const QUAD_NODES: usize = 64;
const QUAD_HALF_WIDTH: f64 = 8.0;
const QUAD_REL_TOL: f64 = 1e-6;
const GAMMA_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopulaFamily {
    /// `θ > 0`, link `exp`.
    Clayton,
    /// `θ ≠ 0`, identity link.
    Frank,
    /// `θ ≥ 1`, link `1 + exp`.
    Gumbel,
}

impl fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CopulaFamily::Clayton => "clayton",
            CopulaFamily::Frank => "frank",
            CopulaFamily::Gumbel => "gumbel",
        })
    }
}

impl FromStr for CopulaFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clayton" => Ok(CopulaFamily::Clayton),
            "frank" => Ok(CopulaFamily::Frank),
            "gumbel" => Ok(CopulaFamily::Gumbel),
            other => Err(Error::invalid(format!("unknown copula family '{other}'"))),
        }
    }
}

impl CopulaFamily {
    pub const ALL: [CopulaFamily; 3] = [CopulaFamily::Clayton, CopulaFamily::Frank, CopulaFamily::Gumbel];

    /// Maps an unconstrained value into the parameter domain.
    pub fn link(self, gamma: f64) -> f64 {
        match self {
            CopulaFamily::Clayton => gamma.exp(),
            CopulaFamily::Frank => gamma,
            CopulaFamily::Gumbel => 1.0 + gamma.exp(),
        }
    }

    /// Inverse of [`link`](Self::link).
    pub fn inverse_link(self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(match self {
            CopulaFamily::Clayton => theta.ln(),
            CopulaFamily::Frank => theta,
            CopulaFamily::Gumbel => (theta - 1.0).ln(),
        })
    }

    /// Parameter giving (or, for Clayton, approaching) independence.
    pub fn independence_theta(self) -> f64 {
        match self {
            CopulaFamily::Clayton => 0.0,
            CopulaFamily::Frank => 0.0,
            CopulaFamily::Gumbel => 1.0,
        }
    }

    /// Frank accepts `θ = 0` as its independence limit.
    fn check_theta(self, theta: f64) -> Result<()> {
        let ok = match self {
            CopulaFamily::Clayton => theta > 0.0 && theta.is_finite(),
            CopulaFamily::Frank => theta.is_finite(),
            CopulaFamily::Gumbel => theta >= 1.0 && theta.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("theta {theta} is outside the {self} domain")))
        }
    }

    /// Copula distribution function `C(u, v)`.
    pub fn cdf(self, theta: f64, u: f64, v: f64) -> Result<f64> {
        self.check_theta(theta)?;
        if !((0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v)) {
            return Err(Error::invalid(format!("copula arguments must lie in [0, 1], got ({u}, {v})")));
        }
        if u == 0.0 || v == 0.0 {
            return Ok(0.0);
        }
        if u == 1.0 {
            return Ok(v);
        }
        if v == 1.0 {
            return Ok(u);
        }
        Ok(match self {
            CopulaFamily::Clayton => {
                let s = (-theta * u.ln()).exp_m1() + (-theta * v.ln()).exp_m1();
                (-s.ln_1p() / theta).exp()
            }
            CopulaFamily::Frank => frank_cdf(theta, u, v),
            CopulaFamily::Gumbel => {
                if theta == 1.0 {
                    return Ok(u * v);
                }
                let (x, y) = (-u.ln(), -v.ln());
                (-(log_power_sum(x, y, theta) / theta).exp()).exp()
            }
        })
    }

    /// Log of the copula density `∂²C/∂u∂v` at an interior point.
    pub fn log_density(self, theta: f64, u: f64, v: f64) -> Result<f64> {
        self.check_theta(theta)?;
        if !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0) {
            return Err(Error::invalid(format!("copula density needs interior arguments, got ({u}, {v})")));
        }
        Ok(match self {
            CopulaFamily::Clayton => {
                let (lu, lv) = (u.ln(), v.ln());
                let s = (-theta * lu).exp_m1() + (-theta * lv).exp_m1();
                theta.ln_1p() - (1.0 + theta) * (lu + lv) - (2.0 + 1.0 / theta) * s.ln_1p()
            }
            CopulaFamily::Frank => frank_log_density(theta, u, v),
            CopulaFamily::Gumbel => {
                if theta == 1.0 {
                    return Ok(0.0);
                }
                let (x, y) = (-u.ln(), -v.ln());
                let ln_s = log_power_sum(x, y, theta);
                let w = (ln_s / theta).exp();
                -w + (theta - 1.0) * (x.ln() + y.ln()) + x + y + (1.0 / theta - 2.0) * ln_s + (w + theta - 1.0).ln()
            }
        })
    }

    /// Draws one pair `(u, v)` from the copula.
    pub fn sample<R: Rng + ?Sized>(self, theta: f64, rng: &mut R) -> Result<(f64, f64)> {
        self.check_theta(theta)?;
        Ok(match self {
            CopulaFamily::Clayton => {
                let u: f64 = rng.sample(Open01);
                let w: f64 = rng.sample(Open01);
                let t = (-theta * u.ln()).exp() * (-theta / (1.0 + theta) * w.ln()).exp_m1();
                (u, (-t.ln_1p() / theta).exp())
            }
            CopulaFamily::Frank => {
                let u: f64 = rng.sample(Open01);
                let w: f64 = rng.sample(Open01);
                let a = theta.abs();
                let v = if a < FRANK_SMALL {
                    w
                } else {
                    let ratio = w * (-a).exp_m1() / (w + (1.0 - w) * (-a * u).exp());
                    -ratio.ln_1p() / a
                };
                (u, if theta < 0.0 { 1.0 - v } else { v })
            }
            CopulaFamily::Gumbel => {
                // Marshall–Olkin with a positive stable frailty (Kanter's representation)
                let alpha = 1.0 / theta;
                let s = if theta == 1.0 {
                    1.0
                } else {
                    let a: f64 = std::f64::consts::PI * rng.sample::<f64, _>(Open01);
                    let e: f64 = rng.sample(Exp1);
                    ((alpha * a).sin() / a.sin().powf(1.0 / alpha))
                        * (((1.0 - alpha) * a).sin() / e).powf((1.0 - alpha) / alpha)
                };
                let e1: f64 = rng.sample(Exp1);
                let e2: f64 = rng.sample(Exp1);
                ((-(e1 / s).powf(alpha)).exp(), (-(e2 / s).powf(alpha)).exp())
            }
        })
    }
}

/// `ln(x^θ + y^θ)` for `x, y ≥ 0`, not both zero.
fn log_power_sum(x: f64, y: f64, theta: f64) -> f64 {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    theta * hi.ln() + (theta * (lo / hi).ln()).exp().ln_1p()
}

fn frank_cdf(theta: f64, u: f64, v: f64) -> f64 {
    if theta < 0.0 {
        return u - frank_cdf(-theta, u, 1.0 - v);
    }
    if theta < FRANK_SMALL {
        return u * v * (1.0 + 0.5 * theta * (1.0 - u) * (1.0 - v));
    }
    let ratio = (-theta * u).exp_m1() * (-theta * v).exp_m1() / (-theta).exp_m1();
    -ratio.ln_1p() / theta
}

fn frank_log_density(theta: f64, u: f64, v: f64) -> f64 {
    if theta < 0.0 {
        return frank_log_density(-theta, u, 1.0 - v);
    }
    if theta < FRANK_SMALL {
        return (0.5 * theta * (1.0 - 2.0 * u) * (1.0 - 2.0 * v)).ln_1p();
    }
    let d = if theta <= 1.0 {
        -(-theta).exp_m1() - (-theta * u).exp_m1() * (-theta * v).exp_m1()
    } else {
        (-theta * u).exp() + (-theta * v).exp() - (-theta * (u + v)).exp() - (-theta).exp()
    };
    theta.ln() + (-(-theta).exp_m1()).ln() - theta * (u + v) - 2.0 * d.ln()
}

/// Gaussian predictive cdf of output `d`.
pub fn marginal_cdf(moments: &PredictiveMoments, d: usize, y: f64) -> f64 {
    normal_cdf((y - moments.mean[d]) / moments.variance[d].sqrt())
}

/// Gaussian radial basis `exp(−‖x − c‖² / 2ℓ²)` around fixed centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialBasis {
    pub centres: Vec<Vec<f64>>,
    pub lengthscale: f64,
}

impl RadialBasis {
    /// Uses the median pairwise distance between centres as the lengthscale,
    /// falling back to 1 when it is zero or undefined.
    pub fn with_median_lengthscale(centres: Vec<Vec<f64>>) -> Self {
        let mut dists = Vec::new();
        for i in 0..centres.len() {
            for j in i + 1..centres.len() {
                if let Ok(d) = euclidean_distance(&centres[i], &centres[j]) {
                    dists.push(d);
                }
            }
        }
        dists.sort_by(f64::total_cmp);
        let median = match dists.len() {
            0 => 0.0,
            n if n % 2 == 1 => dists[n / 2],
            n => 0.5 * (dists[n / 2 - 1] + dists[n / 2]),
        };
        let lengthscale = if median > 0.0 && median.is_finite() { median } else { 1.0 };
        Self { centres, lengthscale }
    }

    pub fn len(&self) -> usize {
        self.centres.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centres.is_empty()
    }

    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        let scale = 2.0 * self.lengthscale * self.lengthscale;
        self.centres
            .iter()
            .map(|c| {
                let d = euclidean_distance(x, c)?;
                Ok((-d * d / scale).exp())
            })
            .collect()
    }
}

/// Trained conditional copula for one output pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairwiseCopulaModel {
    pub family: CopulaFamily,
    pub pair: (usize, usize),
    pub basis: RadialBasis,
    /// Unpenalized offset added to `wᵀh(x)`.
    #[serde(default)]
    pub intercept: f64,
    pub weights: Vec<f64>,
    /// Copula log-likelihood of the training pseudo-observations.
    pub log_likelihood: f64,
}

impl PairwiseCopulaModel {
    /// Copula parameter at input `x`.
    pub fn theta(&self, x: &[f64]) -> Result<f64> {
        let h = self.basis.features(x)?;
        Ok(self.family.link(self.intercept + h.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>()))
    }
}

/// Covariance value and whether the quadrature check flagged it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub value: f64,
    pub precision_warning: bool,
}

/// Fits the conditional copula of `pair` using the in-sample predictive
/// marginals of a fitted MGPCH model.
pub fn train_pairwise(
    model: &MgpchModel,
    pair: (usize, usize),
    family: CopulaFamily,
    basis_fraction: f64,
) -> Result<PairwiseCopulaModel> {
    let (i, j) = pair;
    let dim = model.data.output_dim();
    if i == j || i >= dim || j >= dim {
        return Err(Error::invalid(format!("invalid output pair ({i}, {j}) for {dim} outputs")));
    }
    let predictor = model.predictor()?;
    let inputs = model.data.inputs();
    let y = model.data.outputs();
    let mut u = Vec::with_capacity(inputs.len());
    let mut v = Vec::with_capacity(inputs.len());
    for (n, x) in inputs.iter().enumerate() {
        let m = predictor.predict(x)?;
        u.push(marginal_cdf(&m, i, y[(n, i)]));
        v.push(marginal_cdf(&m, j, y[(n, j)]));
    }
    train_pairwise_with_marginals(inputs, &u, &v, pair, family, basis_fraction)
}

/// Fits every unordered output pair independently.
pub fn train_all_pairs(model: &MgpchModel, family: CopulaFamily, basis_fraction: f64) -> Result<Vec<PairwiseCopulaModel>> {
    let dim = model.data.output_dim();
    let pairs: Vec<(usize, usize)> = (0..dim).flat_map(|i| (i + 1..dim).map(move |j| (i, j))).collect();
    pairs.into_par_iter().map(|p| train_pairwise(model, p, family, basis_fraction)).collect()
}

/// Maximum copula likelihood for given pseudo-observations `u`, `v`.
///
/// The basis centres are `⌈basis_fraction · N⌉` inputs taken at regular
/// intervals, and the intercept and weights start from zero.
pub fn train_pairwise_with_marginals(
    inputs: &[Vec<f64>],
    u: &[f64],
    v: &[f64],
    pair: (usize, usize),
    family: CopulaFamily,
    basis_fraction: f64,
) -> Result<PairwiseCopulaModel> {
    let n = inputs.len();
    if n == 0 || u.len() != n || v.len() != n {
        return Err(Error::invalid("copula training needs equally long, non-empty inputs and marginals"));
    }
    if !(basis_fraction > 0.0 && basis_fraction <= 1.0) {
        return Err(Error::invalid(format!("basis fraction must lie in (0, 1], got {basis_fraction}")));
    }
    let count = ((basis_fraction * n as f64).ceil() as usize).clamp(1, n);
    let centres: Vec<Vec<f64>> = (0..count).map(|k| inputs[k * n / count].clone()).collect();
    let basis = RadialBasis::with_median_lengthscale(centres);
    let features: Vec<Vec<f64>> = inputs.iter().map(|x| basis.features(x)).collect::<Result<_>>()?;
    let clamp = |p: f64| if p.is_nan() { p } else { p.clamp(U_CLAMP, 1.0 - U_CLAMP) };
    let obs: Vec<(f64, f64)> = u.iter().zip(v).map(|(a, b)| (clamp(*a), clamp(*b))).collect();

    let log_c = |gamma: f64, (a, b): (f64, f64)| family.log_density(family.link(gamma), a, b).unwrap_or(f64::NAN);
    let ridge = WEIGHT_PENALTY;
    // Parameters are `[intercept, w_1, ..., w_I]`.
    let penalized = |p: &[f64]| -> (f64, Vec<f64>) {
        let mut value = 0.5 * ridge * p[1..].iter().map(|x| x * x).sum::<f64>();
        let mut grad: Vec<f64> = p.iter().map(|x| ridge * x).collect();
        grad[0] = 0.0;
        for (h, &o) in features.iter().zip(&obs) {
            let gamma: f64 = p[0] + h.iter().zip(&p[1..]).map(|(a, b)| a * b).sum::<f64>();
            value -= log_c(gamma, o);
            let slope = (log_c(gamma + GAMMA_STEP, o) - log_c(gamma - GAMMA_STEP, o)) / (2.0 * GAMMA_STEP);
            grad[0] -= slope;
            for (g, hk) in grad[1..].iter_mut().zip(h) {
                *g -= slope * hk;
            }
        }
        (value, grad)
    };

    let p0 = vec![0.0; basis.len() + 1];
    let (f0, _) = penalized(&p0);
    if !f0.is_finite() {
        return Err(Error::DegenerateMarginals(format!(
            "copula log-likelihood is not finite at the starting weights for pair {pair:?}"
        )));
    }
    let opts = LbfgsOptions { max_iters: 200, grad_tol: 1e-6, ..Default::default() };
    let result = minimize(penalized, &p0, &opts);
    let params = if result.value.is_finite() && result.value <= f0 { result.x } else { p0 };
    let (intercept, weights) = (params[0], params[1..].to_vec());
    let log_likelihood: f64 = features
        .iter()
        .zip(&obs)
        .map(|(h, &o)| log_c(intercept + h.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>(), o))
        .sum();
    debug!("{family} copula for pair {pair:?}: log-likelihood {log_likelihood:.6} after {} iterations", result.iterations);
    Ok(PairwiseCopulaModel { family, pair, basis, intercept, weights, log_likelihood })
}

/// `Cov(Y_i, Y_j)` for Gaussian marginals `(mean, variance)` coupled by the
/// copula, by tensor Gauss–Legendre quadrature over `mean ± 8 sd`. The
/// 64-node result is checked against a 128-node one, which is returned.
pub fn hoeffding_covariance(
    family: CopulaFamily,
    theta: f64,
    (mean_i, var_i): (f64, f64),
    (mean_j, var_j): (f64, f64),
) -> Result<CovarianceEstimate> {
    family.check_theta(theta)?;
    if !(var_i > 0.0 && var_j > 0.0 && var_i.is_finite() && var_j.is_finite()) {
        return Err(Error::invalid("marginal variances must be positive and finite"));
    }
    let (sd_i, sd_j) = (var_i.sqrt(), var_j.sqrt());
    let integrate = |nodes: usize| -> Result<f64> {
        let rule = GaussLegendre::new(nodes);
        let xs = rule.mapped(mean_i - QUAD_HALF_WIDTH * sd_i, mean_i + QUAD_HALF_WIDTH * sd_i);
        let ys = rule.mapped(mean_j - QUAD_HALF_WIDTH * sd_j, mean_j + QUAD_HALF_WIDTH * sd_j);
        let fu: Vec<f64> = xs.iter().map(|(x, _)| normal_cdf((x - mean_i) / sd_i)).collect();
        let fv: Vec<f64> = ys.iter().map(|(y, _)| normal_cdf((y - mean_j) / sd_j)).collect();
        let mut total = 0.0;
        for ((_, wx), &a) in xs.iter().zip(&fu) {
            let mut row = 0.0;
            for ((_, wy), &b) in ys.iter().zip(&fv) {
                row += wy * (family.cdf(theta, a, b)? - a * b);
            }
            total += wx * row;
        }
        Ok(total)
    };
    let coarse = integrate(QUAD_NODES)?;
    let fine = integrate(2 * QUAD_NODES)?;
    let scale = fine.abs().max(1e-12 * sd_i * sd_j);
    let precision_warning = (fine - coarse).abs() > QUAD_REL_TOL * scale || !fine.is_finite();
    Ok(CovarianceEstimate { value: fine, precision_warning })
}

/// Predictive covariance of the model's output pair at `xstar`.
pub fn predictive_covariance(
    pairmodel: &PairwiseCopulaModel,
    moments: &PredictiveMoments,
    xstar: &[f64],
) -> Result<CovarianceEstimate> {
    let (i, j) = pairmodel.pair;
    if i >= moments.mean.len() || j >= moments.mean.len() {
        return Err(Error::invalid(format!("pair ({i}, {j}) does not fit {} outputs", moments.mean.len())));
    }
    let theta = pairmodel.theta(xstar)?;
    hoeffding_covariance(
        pairmodel.family,
        theta,
        (moments.mean[i], moments.variance[i]),
        (moments.mean[j], moments.variance[j]),
    )
}
