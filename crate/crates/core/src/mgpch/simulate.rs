//! Synthetic series drawn from the MGPCH generative model.
//!
//! The sampler produces an autoregressive series: the input at step `n` is
//! the previous output vector (`x₁ = 0`). Each latent process is sampled
//! sequentially from its GP conditional on the values already drawn.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Ar1KernelParams, KernelKind};

use super::{Dataset, MgpchConfig};

/// Log-noise prior mean used when the configuration gives none.
pub const DEFAULT_SIM_LOG_NOISE: f64 = -9.210_340_371_976_184; // ln 1e-4

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedData {
    pub inputs: Vec<Vec<f64>>,
    /// N × D outputs.
    pub outputs: DMatrix<f64>,
    /// Noise variance `exp(g_{z_n}(x_n))` each output was drawn with.
    pub noise_variances: DMatrix<f64>,
    /// Variance of `y_n` given `x_n`, mixing over the components.
    pub conditional_variances: DMatrix<f64>,
    pub assignments: Vec<usize>,
    /// Mixture weights used for the draw.
    pub weights: Vec<f64>,
}

impl SimulatedData {
    pub fn dataset(&self) -> Result<Dataset> {
        Dataset::new(self.inputs.clone(), self.outputs.clone())
    }

    /// The outputs as a return matrix whose lagged pairs reproduce the inputs.
    pub fn returns(&self) -> DMatrix<f64> {
        self.outputs.clone()
    }
}

/// Sequential GP sampler: keeps the Cholesky factor of the covariance of all
/// points drawn so far, so that each new value is an exact conditional draw.
struct SequentialGp {
    kernel: KernelKind,
    points: Vec<Vec<f64>>,
    rows: Vec<Vec<f64>>,
    whitened: Vec<f64>,
}

impl SequentialGp {
    fn new(kernel: KernelKind) -> Self {
        Self { kernel, points: Vec::new(), rows: Vec::new(), whitened: Vec::new() }
    }

    fn draw(&mut self, x: &[f64], rng: &mut ChaCha8Rng) -> Result<f64> {
        if self.kernel.is_zero() {
            return Ok(0.0);
        }
        let m = self.points.len();
        let mut l = Vec::with_capacity(m + 1);
        for j in 0..m {
            let k = self.kernel.eval(&self.points[j], x)?;
            let s: f64 = (0..j).map(|i| self.rows[j][i] * l[i]).sum();
            l.push((k - s) / self.rows[j][j]);
        }
        let jitter = self.kernel.jitter();
        let kss = self.kernel.eval(x, x)? + jitter;
        let diag = (kss - l.iter().map(|v| v * v).sum::<f64>()).max(jitter).sqrt();
        let eps: f64 = rng.sample(StandardNormal);
        let value = l.iter().zip(&self.whitened).map(|(a, b)| a * b).sum::<f64>() + diag * eps;
        l.push(diag);
        self.rows.push(l);
        self.whitened.push(eps);
        self.points.push(x.to_vec());
        Ok(value)
    }
}

/// Draws stick weights from the prior, then a series of length `n` with `d` outputs.
pub fn simulate(config: &MgpchConfig, n: usize, d: usize, seed: u64) -> Result<SimulatedData> {
    config.validate()?;
    let pyp = config.pyp;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = Gamma::new(pyp.eta1, 1.0 / pyp.eta2).map_err(|e| Error::invalid(e.to_string()))?;
    let alpha: f64 = gamma.sample(&mut rng).max(1e-300);
    let c_total = pyp.truncation;
    let mut weights = Vec::with_capacity(c_total);
    let mut remaining = 1.0;
    for c in 0..c_total {
        let v = if c + 1 == c_total {
            1.0
        } else {
            let beta = Beta::new(1.0 - pyp.delta, alpha + (c + 1) as f64 * pyp.delta)
                .map_err(|e| Error::invalid(e.to_string()))?;
            let v: f64 = beta.sample(&mut rng);
            if v.is_finite() {
                v
            } else {
                1.0
            }
        };
        weights.push(remaining * v);
        remaining *= 1.0 - v;
    }
    simulate_inner(config, &weights, n, d, &mut rng)
}

/// Like [`simulate`] but with fixed mixture weights.
pub fn simulate_with_weights(
    config: &MgpchConfig,
    weights: &[f64],
    n: usize,
    d: usize,
    seed: u64,
) -> Result<SimulatedData> {
    config.validate()?;
    if weights.len() != config.truncation() {
        return Err(Error::invalid(format!("expected {} weights, got {}", config.truncation(), weights.len())));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("weights must be non-negative and sum to one"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_inner(config, weights, n, d, &mut rng)
}

fn simulate_inner(
    config: &MgpchConfig,
    weights: &[f64],
    n: usize,
    d_total: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SimulatedData> {
    if n == 0 || d_total == 0 {
        return Err(Error::invalid("simulation needs n ≥ 1 and d ≥ 1"));
    }
    let c_total = config.truncation();
    if config.m_tilde.iter().any(|row| row.len() != d_total) {
        return Err(Error::invalid(format!("m_tilde rows must have {d_total} entries")));
    }
    let default_kernel = Ar1KernelParams::new(0.5, 0.75)?;
    let mut noise_gps = Vec::with_capacity(c_total * d_total);
    let mut mean_gps = Vec::with_capacity(c_total * d_total);
    for c in 0..c_total {
        let nk = config.noise_kernels.get(c).copied().unwrap_or(default_kernel);
        for _ in 0..d_total {
            noise_gps.push(SequentialGp::new(KernelKind::Ar1(nk)));
            mean_gps.push(SequentialGp::new(config.mean_kernel(c)));
        }
    }
    let m_tilde = |c: usize, d: usize| config.m_tilde.get(c).map_or(DEFAULT_SIM_LOG_NOISE, |row| row[d]);

    let mut inputs = Vec::with_capacity(n);
    let mut outputs = DMatrix::zeros(n, d_total);
    let mut noise_variances = DMatrix::zeros(n, d_total);
    let mut conditional_variances = DMatrix::zeros(n, d_total);
    let mut assignments = Vec::with_capacity(n);
    let mut x = vec![0.0; d_total];
    for i in 0..n {
        let u: f64 = rng.random();
        let mut z = c_total - 1;
        let mut acc = 0.0;
        for (c, w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                z = c;
                break;
            }
        }
        let mut f = DMatrix::zeros(c_total, d_total);
        let mut var = DMatrix::zeros(c_total, d_total);
        for c in 0..c_total {
            for d in 0..d_total {
                let idx = c * d_total + d;
                var[(c, d)] = (m_tilde(c, d) + noise_gps[idx].draw(&x, rng)?).exp();
                f[(c, d)] = mean_gps[idx].draw(&x, rng)?;
            }
        }
        inputs.push(x.clone());
        for d in 0..d_total {
            let eps: f64 = rng.sample(StandardNormal);
            outputs[(i, d)] = f[(z, d)] + var[(z, d)].sqrt() * eps;
            noise_variances[(i, d)] = var[(z, d)];
            let mean: f64 = (0..c_total).map(|c| weights[c] * f[(c, d)]).sum();
            let second: f64 = (0..c_total).map(|c| weights[c] * (var[(c, d)] + f[(c, d)].powi(2))).sum();
            conditional_variances[(i, d)] = second - mean * mean;
        }
        assignments.push(z);
        x = outputs.row(i).iter().copied().collect();
    }
    Ok(SimulatedData {
        inputs,
        outputs,
        noise_variances,
        conditional_variances,
        assignments,
        weights: weights.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pyp::PypConfig;

    fn cfg(c: usize) -> MgpchConfig {
        MgpchConfig { pyp: PypConfig { truncation: c, ..Default::default() }, ..Default::default() }
    }

    #[test]
    fn same_seed_same_draw() {
        let a = simulate(&cfg(3), 50, 2, 9).unwrap();
        let b = simulate(&cfg(3), 50, 2, 9).unwrap();
        assert_eq!(a, b);
        let c = simulate(&cfg(3), 50, 2, 10).unwrap();
        assert_ne!(a.outputs, c.outputs);
    }

    #[test]
    fn inputs_lag_outputs() {
        let s = simulate(&cfg(2), 20, 2, 1).unwrap();
        assert_eq!(s.inputs[0], vec![0.0, 0.0]);
        for i in 1..20 {
            assert_eq!(s.inputs[i], s.outputs.row(i - 1).iter().copied().collect::<Vec<_>>());
        }
    }

    #[test]
    fn zero_mean_outputs_average_to_zero() {
        let s = simulate(&cfg(2), 400, 1, 4).unwrap();
        let y = s.outputs.column(0);
        let n = y.len() as f64;
        let mean = y.sum() / n;
        let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() < 3.0 * sd / n.sqrt());
    }

    #[test]
    fn vanishing_innovation_collapses_to_first_component() {
        let mut c = cfg(4);
        c.pyp.delta = 0.0;
        c.pyp.eta1 = 1e-3;
        c.pyp.eta2 = 1e6;
        let s = simulate(&c, 100, 1, 2).unwrap();
        assert!(s.assignments.iter().all(|&z| z == 0), "{:?}", s.weights);
    }

    #[test]
    fn fixed_weights_are_validated() {
        assert!(simulate_with_weights(&cfg(2), &[0.5, 0.6], 10, 1, 0).is_err());
        assert!(simulate_with_weights(&cfg(2), &[1.0], 10, 1, 0).is_err());
        let s = simulate_with_weights(&cfg(2), &[1.0, 0.0], 10, 1, 0).unwrap();
        assert!(s.assignments.iter().all(|&z| z == 0));
        for i in 0..10 {
            assert!((s.conditional_variances[(i, 0)] - s.noise_variances[(i, 0)]).abs() < 1e-18);
        }
    }
}
