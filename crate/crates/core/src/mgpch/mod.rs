//! The MGPCH model: a truncated Pitman-Yor mixture of GP regressions whose
//! noise variances are latent log-GPs, fitted by variational inference.
//!
//! The pieces are split across submodules:
//!
//! * [`state`] holds the variational posterior and every coordinate update,
//! * [`fit`] drives the coordinate ascent and hyperparameter search,
//! * [`predict`] computes the mixture predictive moments,
//! * [`simulate`] draws synthetic series from the generative model.

pub mod fit;
pub mod predict;
pub mod simulate;
pub mod state;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{pairwise_distances, Ar1KernelParams, KernelKind};
use crate::pyp::PypConfig;

pub use fit::{fit, fit_with_observer, FitEvent, FitStep};
pub use predict::{ComponentMoments, PredictiveMoments, Predictor};
pub use simulate::{simulate, simulate_with_weights, SimulatedData};
pub use state::{
    expected_noise_variance, noise_posterior, noise_precision, FreeEnergyTerms, LatentBlock, NoiseBlock,
    NoisePosterior, Problem, VariationalState,
};

/// How the predictive log-noise mean `τ` is formed from the noise sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauForm {
    /// `λᵀ b + m̃`, using the site vector that actually defines the
    /// posterior mean `m = Λ b + m̃`.
    #[default]
    Site,
    /// `λᵀ (Q − ½) 1 + m̃`, ignoring the responsibilities.
    Unweighted,
}

/// How the component moments are combined into the predictive variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceForm {
    /// `Σ_c ⟨ϖ_c⟩² (σ²_c + ψ_c)`, the variance of a weighted sum of
    /// independent component predictions.
    SquaredWeights,
    /// The variance of the Gaussian mixture,
    /// `Σ_c ⟨ϖ_c⟩ (σ²_c + ψ_c + a_c²) − ŷ²`.
    #[default]
    Mixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MgpchConfig {
    pub pyp: PypConfig,
    /// Mean-process kernel per component. Empty means zero kernels.
    pub mean_kernels: Vec<KernelKind>,
    /// Initial noise kernel per component. Empty means a data-driven choice.
    pub noise_kernels: Vec<Ar1KernelParams>,
    /// Initial `m̃` as C rows of D values. Empty means `log var(y_d)`.
    pub m_tilde: Vec<Vec<f64>>,
    pub max_iters: usize,
    pub free_energy_rel_tol: f64,
    /// Run the hyperparameter search every this many iterations; 0 disables it.
    pub hyperopt_every: usize,
    /// L-BFGS iterations per hyperparameter search.
    pub hyperopt_iters: usize,
    /// Damped fixed-point steps per noise-process update.
    pub noise_inner_iters: usize,
    pub seed: u64,
    pub tau_form: TauForm,
    pub variance_form: VarianceForm,
}

impl Default for MgpchConfig {
    fn default() -> Self {
        Self {
            pyp: PypConfig::default(),
            mean_kernels: Vec::new(),
            noise_kernels: Vec::new(),
            m_tilde: Vec::new(),
            max_iters: 200,
            free_energy_rel_tol: 1e-6,
            hyperopt_every: 10,
            hyperopt_iters: 10,
            noise_inner_iters: 1,
            seed: 0,
            tau_form: TauForm::default(),
            variance_form: VarianceForm::default(),
        }
    }
}

impl MgpchConfig {
    pub fn truncation(&self) -> usize {
        self.pyp.truncation
    }

    pub fn validate(&self) -> Result<()> {
        self.pyp.validate()?;
        let c = self.truncation();
        if !(self.free_energy_rel_tol > 0.0) {
            return Err(Error::invalid("free_energy_rel_tol must be positive"));
        }
        if !self.mean_kernels.is_empty() && self.mean_kernels.len() != c {
            return Err(Error::invalid(format!("expected {c} mean kernels, got {}", self.mean_kernels.len())));
        }
        if !self.noise_kernels.is_empty() && self.noise_kernels.len() != c {
            return Err(Error::invalid(format!("expected {c} noise kernels, got {}", self.noise_kernels.len())));
        }
        if !self.m_tilde.is_empty() && self.m_tilde.len() != c {
            return Err(Error::invalid(format!("expected {c} rows of m_tilde, got {}", self.m_tilde.len())));
        }
        if self.m_tilde.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("m_tilde entries must be finite"));
        }
        Ok(())
    }

    pub fn mean_kernel(&self, c: usize) -> KernelKind {
        self.mean_kernels.get(c).copied().unwrap_or_default()
    }
}

/// Aligned training inputs and outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    /// N × D output matrix.
    outputs: DMatrix<f64>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, outputs: DMatrix<f64>) -> Result<Self> {
        if inputs.len() != outputs.nrows() {
            return Err(Error::invalid(format!(
                "{} inputs but {} output rows",
                inputs.len(),
                outputs.nrows()
            )));
        }
        if outputs.ncols() == 0 {
            return Err(Error::invalid("outputs need at least one column"));
        }
        if let Some(first) = inputs.first() {
            if first.is_empty() || inputs.iter().any(|x| x.len() != first.len()) {
                return Err(Error::invalid("inputs must share a non-zero dimension"));
            }
        }
        if inputs.iter().flatten().chain(outputs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("data contain non-finite values"));
        }
        Ok(Self { inputs, outputs })
    }

    /// Lagged regression pairs from a T × D return matrix: `x_n = r_n`,
    /// `y_n = r_{n+1}`.
    pub fn from_lagged_returns(returns: &DMatrix<f64>) -> Result<Self> {
        let t = returns.nrows();
        if t < 2 {
            return Err(Error::InsufficientData { required: 2, actual: t });
        }
        let inputs = (0..t - 1).map(|n| returns.row(n).iter().copied().collect()).collect();
        let outputs = returns.rows(1, t - 1).into_owned();
        Self::new(inputs, outputs)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &DMatrix<f64> {
        &self.outputs
    }
}

/// Kernel hyperparameters and prior log-noise means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparameters {
    pub mean_kernels: Vec<KernelKind>,
    pub noise_kernels: Vec<Ar1KernelParams>,
    /// C × D prior means of the log-noise processes.
    pub m_tilde: DMatrix<f64>,
}

impl Hyperparameters {
    /// Initial values: configured ones where given, otherwise `m̃ = log var(y_d)`
    /// and an AR(1) kernel with unit variance whose correlation halves at the
    /// median pairwise input distance.
    pub fn initial(data: &Dataset, config: &MgpchConfig) -> Result<Self> {
        config.validate()?;
        let c_total = config.truncation();
        let d_total = data.output_dim();
        let m_tilde = if config.m_tilde.is_empty() {
            let mut m = DMatrix::zeros(c_total, d_total);
            for d in 0..d_total {
                let col = data.outputs().column(d);
                let n = col.len() as f64;
                let mean = col.sum() / n;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                if !(var > 0.0) {
                    return Err(Error::invalid(format!("output {d} has zero variance")));
                }
                m.column_mut(d).fill(var.ln());
            }
            m
        } else {
            if config.m_tilde.iter().any(|row| row.len() != d_total) {
                return Err(Error::invalid(format!("m_tilde rows must have {d_total} entries")));
            }
            DMatrix::from_fn(c_total, d_total, |c, d| config.m_tilde[c][d])
        };
        let noise_kernels = if config.noise_kernels.is_empty() {
            vec![default_noise_kernel(data)?; c_total]
        } else {
            config.noise_kernels.clone()
        };
        let mean_kernels = (0..c_total).map(|c| config.mean_kernel(c)).collect();
        Ok(Self { mean_kernels, noise_kernels, m_tilde })
    }
}

fn default_noise_kernel(data: &Dataset) -> Result<Ar1KernelParams> {
    let dist = pairwise_distances(data.inputs())?;
    let n = dist.nrows();
    let mut off: Vec<f64> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| dist[(i, j)]).collect();
    off.retain(|d| *d > 0.0);
    let ln_phi = if off.is_empty() {
        0.5f64.ln()
    } else {
        off.sort_by(f64::total_cmp);
        let med = off[off.len() / 2];
        (0.5f64.ln() / med).max(-700.0)
    };
    let phi = ln_phi.exp();
    Ar1KernelParams::new(phi, -(2.0 * ln_phi).exp_m1())
}

/// A fitted model together with its training data and free-energy trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MgpchModel {
    pub config: MgpchConfig,
    pub hyper: Hyperparameters,
    pub data: Dataset,
    pub state: VariationalState,
    pub free_energy_trace: Vec<f64>,
}

impl MgpchModel {
    pub fn truncation(&self) -> usize {
        self.config.truncation()
    }

    /// Builds the reusable predictor. This factorizes every block once.
    pub fn predictor(&self) -> Result<Predictor<'_>> {
        Predictor::new(self)
    }

    /// Predictive moments at a single query input.
    pub fn predict(&self, xstar: &[f64]) -> Result<PredictiveMoments> {
        self.predictor()?.predict(xstar)
    }

    /// Expected noise variance of every training point under component `c`
    /// and output `d`, in the form used by the updates.
    pub fn fitted_noise_variances(&self, c: usize, d: usize) -> Vec<f64> {
        let b = self.state.noise_block(c, d);
        b.m.iter().zip(b.s_diag.iter()).map(|(&m, &s)| expected_noise_variance(m, s)).collect()
    }

    /// Total responsibility mass of each component.
    pub fn component_mass(&self) -> Vec<f64> {
        let r = &self.state.responsibilities;
        (0..r.ncols()).map(|c| r.column(c).sum()).collect()
    }
}
