//! Homoscedastic GP regression with a zero mean function.
//!
//! Serves as a baseline and as a cross-check for the kernel and linear
//! algebra code used by the mixture model.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::kernels::{pairwise_distances, KernelKind};
use crate::linalg::cholesky;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone)]
pub struct GpModel {
    kernel: KernelKind,
    noise_var: f64,
    inputs: Vec<Vec<f64>>,
    targets: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    /// (K + σ²I)⁻¹ y
    alpha: DVector<f64>,
}

impl GpModel {
    pub fn fit(kernel: KernelKind, noise_var: f64, inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if !(noise_var > 0.0) {
            return Err(Error::invalid(format!("noise variance must be positive, got {noise_var}")));
        }
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(Error::invalid("GP needs at least one input with a matching target"));
        }
        let mut cov = kernel.prior_covariance(&inputs)?;
        for i in 0..cov.nrows() {
            cov[(i, i)] += noise_var;
        }
        let chol = cholesky(cov, "GP covariance K + noise")?;
        let targets = DVector::from_vec(targets);
        let alpha = chol.solve(&targets);
        Ok(Self { kernel, noise_var, inputs, targets, chol, alpha })
    }

    pub fn kernel(&self) -> &KernelKind {
        &self.kernel
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Predictive mean and variance of a noisy observation at `xstar`.
    pub fn predict(&self, xstar: &[f64]) -> Result<(f64, f64)> {
        let kstar = self.kernel.cross_vector(&self.inputs, xstar)?;
        let mean = kstar.dot(&self.alpha);
        let v = self.chol.solve(&kstar);
        let kss = self.kernel.eval(xstar, xstar)?;
        let var = self.noise_var - kstar.dot(&v) + kss;
        Ok((mean, var.max(f64::MIN_POSITIVE)))
    }

    /// Log marginal likelihood of the training targets.
    pub fn log_evidence(&self) -> f64 {
        let n = self.targets.len() as f64;
        let log_det: f64 = 2.0 * self.chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        -0.5 * n * LN_2PI - 0.5 * log_det - 0.5 * self.targets.dot(&self.alpha)
    }

    /// Gradient of the log evidence with respect to
    /// `(logit φ, log σ₀², log σ²)`. Only defined for the AR(1) kernel.
    pub fn log_evidence_gradient(&self) -> Result<[f64; 3]> {
        let KernelKind::Ar1(p) = self.kernel else {
            return Err(Error::invalid("evidence gradient requires an AR(1) kernel"));
        };
        let n = self.inputs.len();
        let dist = pairwise_distances(&self.inputs)?;
        let phi = p.phi();
        let kmat = self.kernel.prior_covariance_from_distances(&dist);
        // ∂K/∂logit φ, jitter included since it scales with the variance
        let dvar = 2.0 * phi * phi / (1.0 + phi);
        let dk_dlogit = DMatrix::from_fn(n, n, |i, j| {
            let k = kmat[(i, j)];
            if i == j {
                k * dvar
            } else {
                k * (dvar + dist[(i, j)] * (1.0 - phi))
            }
        });
        let kinv = self.chol.inverse();
        let aat = &self.alpha * self.alpha.transpose();
        let w = aat - kinv;
        let contract = |d: &DMatrix<f64>| 0.5 * w.component_mul(d).sum();
        let g_logit = contract(&dk_dlogit);
        let g_sigma0 = contract(&kmat);
        let g_noise = 0.5 * self.noise_var * w.trace();
        Ok([g_logit, g_sigma0, g_noise])
    }
}
