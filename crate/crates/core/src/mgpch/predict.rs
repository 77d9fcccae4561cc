//! Mixture predictive moments at a query input.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelKind;
use crate::linalg::regularized_inverse;
use crate::pyp::expected_weights;

use super::{MgpchModel, TauForm, VarianceForm};

/// Predictive constituents of one component for one output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentMoments {
    /// Mean of the latent function, `a = k*ᵀ (K + B⁻¹)⁻¹ y`.
    pub a: f64,
    /// Variance of the latent function.
    pub sigma_sq: f64,
    /// Mean of the log-noise process.
    pub tau: f64,
    /// Variance of the log-noise process.
    pub phi: f64,
    /// Expected noise variance `exp(τ + ½φ)`.
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveMoments {
    /// Predictive mean per output.
    pub mean: Vec<f64>,
    /// Predictive variance per output.
    pub variance: Vec<f64>,
    /// Expected mixture weights `⟨ϖ_c⟩`.
    pub weights: Vec<f64>,
    /// `components[c][d]`.
    pub components: Vec<Vec<ComponentMoments>>,
}

impl PredictiveMoments {
    pub fn output_dim(&self) -> usize {
        self.mean.len()
    }
}

/// Precomputed factorizations for repeated predictions from one model.
#[derive(Debug)]
pub struct Predictor<'a> {
    model: &'a MgpchModel,
    weights: DVector<f64>,
    /// `(K + B⁻¹)⁻¹` per block, absent for zero mean kernels.
    latent_inv: Vec<Option<DMatrix<f64>>>,
    /// `(Λ + Q⁻¹)⁻¹` per block.
    noise_inv: Vec<DMatrix<f64>>,
}

impl<'a> Predictor<'a> {
    pub fn new(model: &'a MgpchModel) -> Result<Self> {
        let c_total = model.truncation();
        let d_total = model.data.output_dim();
        let xs = model.data.inputs();
        let noise_cov: Vec<DMatrix<f64>> = (0..c_total)
            .map(|c| KernelKind::Ar1(model.hyper.noise_kernels[c]).prior_covariance(xs))
            .collect::<Result<_>>()?;
        let mean_cov: Vec<Option<DMatrix<f64>>> = (0..c_total)
            .map(|c| {
                let k = model.hyper.mean_kernels[c];
                if k.is_zero() {
                    Ok(None)
                } else {
                    k.prior_covariance(xs).map(Some)
                }
            })
            .collect::<Result<_>>()?;
        let blocks: Vec<Result<(Option<DMatrix<f64>>, DMatrix<f64>)>> = (0..c_total * d_total)
            .into_par_iter()
            .map(|idx| {
                let (c, d) = (idx / d_total, idx % d_total);
                let latent = match &mean_cov[c] {
                    Some(k) => Some(regularized_inverse(k, &model.state.latent_block(c, d).prec)?),
                    None => None,
                };
                let noise = regularized_inverse(&noise_cov[c], &model.state.noise_block(c, d).q_prec)?;
                Ok((latent, noise))
            })
            .collect();
        let mut latent_inv = Vec::with_capacity(blocks.len());
        let mut noise_inv = Vec::with_capacity(blocks.len());
        for b in blocks {
            let (l, n) = b?;
            latent_inv.push(l);
            noise_inv.push(n);
        }
        Ok(Self { model, weights: expected_weights(&model.state.sticks), latent_inv, noise_inv })
    }

    pub fn predict(&self, xstar: &[f64]) -> Result<PredictiveMoments> {
        let model = self.model;
        if xstar.len() != model.data.input_dim() {
            return Err(Error::invalid(format!(
                "query has dimension {}, model inputs have {}",
                xstar.len(),
                model.data.input_dim()
            )));
        }
        let c_total = model.truncation();
        let d_total = model.data.output_dim();
        let xs = model.data.inputs();
        let mut components = Vec::with_capacity(c_total);
        for c in 0..c_total {
            let noise_kernel = KernelKind::Ar1(model.hyper.noise_kernels[c]);
            let lambda = noise_kernel.cross_vector(xs, xstar)?;
            let lambda_ss = noise_kernel.eval(xstar, xstar)?;
            let mean_kernel = model.hyper.mean_kernels[c];
            let k = (!mean_kernel.is_zero()).then(|| mean_kernel.cross_vector(xs, xstar)).transpose()?;
            let k_ss = mean_kernel.eval(xstar, xstar)?;
            let mut row = Vec::with_capacity(d_total);
            for d in 0..d_total {
                let idx = c * d_total + d;
                let (a, sigma_sq) = match (&k, &self.latent_inv[idx]) {
                    (Some(k), Some(inv)) => {
                        let a = k.dot(&model.state.latent_block(c, d).site);
                        (a, (k_ss - k.dot(&(inv * k))).max(0.0))
                    }
                    _ => (0.0, 0.0),
                };
                let nb = model.state.noise_block(c, d);
                let m_tilde = model.hyper.m_tilde[(c, d)];
                let tau = match model.config.tau_form {
                    TauForm::Site => lambda.dot(&nb.site) + m_tilde,
                    TauForm::Unweighted => lambda.dot(&nb.q_prec.add_scalar(-0.5)) + m_tilde,
                };
                let phi = (lambda_ss - lambda.dot(&(&self.noise_inv[idx] * &lambda))).max(0.0);
                let psi = (tau + 0.5 * phi).exp();
                row.push(ComponentMoments { a, sigma_sq, tau, phi, psi });
            }
            components.push(row);
        }

        let w = &self.weights;
        let mut mean = vec![0.0; d_total];
        let mut variance = vec![0.0; d_total];
        for d in 0..d_total {
            mean[d] = (0..c_total).map(|c| w[c] * components[c][d].a).sum();
            variance[d] = match model.config.variance_form {
                VarianceForm::SquaredWeights => {
                    (0..c_total).map(|c| w[c] * w[c] * (components[c][d].sigma_sq + components[c][d].psi)).sum()
                }
                VarianceForm::Mixture => {
                    let second: f64 = (0..c_total)
                        .map(|c| {
                            let m = &components[c][d];
                            w[c] * (m.sigma_sq + m.psi + m.a * m.a)
                        })
                        .sum();
                    (second - mean[d] * mean[d]).max(f64::MIN_POSITIVE)
                }
            };
        }
        Ok(PredictiveMoments { mean, variance, weights: w.iter().copied().collect(), components })
    }
}
