//! Variational posterior of the MGPCH model and its coordinate updates.
//!
//! Every Gaussian factor is stored in site form. For a component `c` and
//! output `d` the latent function posterior is
//! `q(f) = N(K a, (K⁻¹ + diag p)⁻¹)` and the log-noise posterior is
//! `q(g) = N(Λ b + m̃ 1, (Λ⁻¹ + diag Q)⁻¹)`. Only the sites, the posterior
//! means, the marginal variances and the KL divergences are kept; full
//! covariances are rebuilt on demand.
//!
//! The expected inverse noise `⟨σ²⟩⁻¹ = exp(−m + ½S)` is shared by the
//! likelihood term of the free energy, the latent-function precisions and
//! the responsibilities, which makes every closed-form update an exact
//! coordinate maximizer.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{pairwise_distances, Ar1KernelParams, KernelKind};
use crate::linalg::{regularized_inverse, site_posterior};
use crate::pyp::{
    expected_log_weights, update_innovation_posterior, update_stick_posteriors, InnovationPosterior, StickPosterior,
};
use crate::special::{digamma, ln_beta, ln_gamma, log_sum_exp};

use super::{Dataset, Hyperparameters, MgpchConfig};

/// Expected noise variance `exp(m − ½S)` of a log-noise marginal `N(m, S)`.
pub fn expected_noise_variance(m: f64, s: f64) -> f64 {
    (m - 0.5 * s).exp()
}

/// Reciprocal of [`expected_noise_variance`], `exp(−m + ½S) = E[exp(−g)]`.
pub fn noise_precision(m: f64, s: f64) -> f64 {
    (0.5 * s - m).exp()
}

/// Data, configuration and the prior covariance matrices they imply.
#[derive(Debug, Clone)]
pub struct Problem {
    data: Dataset,
    config: MgpchConfig,
    hyper: Hyperparameters,
    distances: DMatrix<f64>,
    mean_cov: Vec<Option<DMatrix<f64>>>,
    noise_cov: Vec<DMatrix<f64>>,
}

impl Problem {
    pub fn new(data: Dataset, config: MgpchConfig, hyper: Hyperparameters) -> Result<Self> {
        config.validate()?;
        let c_total = config.truncation();
        if hyper.noise_kernels.len() != c_total
            || hyper.mean_kernels.len() != c_total
            || hyper.m_tilde.shape() != (c_total, data.output_dim())
        {
            return Err(Error::invalid("hyperparameter shapes do not match the truncation and output dimension"));
        }
        let distances = pairwise_distances(data.inputs())?;
        let mean_cov = hyper
            .mean_kernels
            .iter()
            .map(|k| (!k.is_zero()).then(|| k.prior_covariance_from_distances(&distances)))
            .collect();
        let noise_cov = hyper
            .noise_kernels
            .iter()
            .map(|k| KernelKind::Ar1(*k).prior_covariance_from_distances(&distances))
            .collect();
        Ok(Self { data, config, hyper, distances, mean_cov, noise_cov })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn config(&self) -> &MgpchConfig {
        &self.config
    }

    pub fn hyper(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn into_parts(self) -> (Dataset, MgpchConfig, Hyperparameters) {
        (self.data, self.config, self.hyper)
    }

    pub fn truncation(&self) -> usize {
        self.config.truncation()
    }

    pub fn distances(&self) -> &DMatrix<f64> {
        &self.distances
    }

    /// Prior covariance of the mean process of component `c`, or `None` for
    /// the zero kernel.
    pub fn mean_covariance(&self, c: usize) -> Option<&DMatrix<f64>> {
        self.mean_cov[c].as_ref()
    }

    /// Prior covariance `Λ^c(X, X)` of the log-noise processes of component `c`.
    pub fn noise_covariance(&self, c: usize) -> &DMatrix<f64> {
        &self.noise_cov[c]
    }

    pub(crate) fn set_noise_hyper(&mut self, c: usize, kernel: Ar1KernelParams, m_tilde: &[f64]) {
        self.hyper.noise_kernels[c] = kernel;
        for (d, v) in m_tilde.iter().enumerate() {
            self.hyper.m_tilde[(c, d)] = *v;
        }
        self.noise_cov[c] = KernelKind::Ar1(kernel).prior_covariance_from_distances(&self.distances);
    }
}

/// Posterior over one latent mean function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatentBlock {
    pub site: DVector<f64>,
    pub prec: DVector<f64>,
    pub mu: DVector<f64>,
    pub sigma_diag: DVector<f64>,
    pub kl: f64,
}

impl LatentBlock {
    fn prior(cov: Option<&DMatrix<f64>>, n: usize) -> Self {
        Self {
            site: DVector::zeros(n),
            prec: DVector::zeros(n),
            mu: DVector::zeros(n),
            sigma_diag: cov.map_or_else(|| DVector::zeros(n), |k| k.diagonal()),
            kl: 0.0,
        }
    }
}

/// Posterior over one log-noise process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBlock {
    /// Diagonal site precisions `Q`.
    pub q_prec: DVector<f64>,
    /// Site vector `b` with `m = Λ b + m̃ 1`.
    pub site: DVector<f64>,
    pub m: DVector<f64>,
    pub s_diag: DVector<f64>,
    pub kl: f64,
}

impl NoiseBlock {
    pub fn from_sites(lambda: &DMatrix<f64>, m_tilde: f64, q_prec: DVector<f64>, site: DVector<f64>) -> Result<Self> {
        let post = site_posterior(lambda, m_tilde, &q_prec, &site, false)?;
        Ok(Self { q_prec, site, m: post.mean, s_diag: post.cov_diag, kl: post.kl })
    }

    fn prior(lambda: &DMatrix<f64>, m_tilde: f64) -> Self {
        let n = lambda.nrows();
        Self {
            q_prec: DVector::zeros(n),
            site: DVector::zeros(n),
            m: DVector::from_element(n, m_tilde),
            s_diag: lambda.diagonal(),
            kl: 0.0,
        }
    }

    /// The part of the free energy that depends on this block:
    /// `−½ Σₙ qₙ (Aₙ ⟨σ²⟩ₙ⁻¹ + mₙ) − KL`.
    pub fn objective(&self, resp: &DVector<f64>, sq_resid: &DVector<f64>) -> f64 {
        let mut total = 0.0;
        for n in 0..self.m.len() {
            let q = resp[n];
            if q > 0.0 {
                total -= 0.5 * q * (sq_resid[n] * noise_precision(self.m[n], self.s_diag[n]) + self.m[n]);
            }
        }
        total - self.kl
    }
}

/// Posterior `N(m, S)` of one log-noise process with its expected noise variances.
#[derive(Debug, Clone)]
pub struct NoisePosterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub expected_noise_var: DVector<f64>,
}

/// `S = (Λ⁻¹ + Q)⁻¹`, `m = Λ(Q − ½ diag q)1 + m̃1` and
/// `⟨σ²⟩ₙ = exp(mₙ − ½Sₙₙ)`.
pub fn noise_posterior(
    lambda: &DMatrix<f64>,
    q_prec: &DVector<f64>,
    resp: &DVector<f64>,
    m_tilde: f64,
) -> Result<NoisePosterior> {
    let site = q_prec - resp * 0.5;
    let post = site_posterior(lambda, m_tilde, q_prec, &site, true)?;
    let cov = post.cov.expect("full covariance requested");
    let expected_noise_var = DVector::from_fn(post.mean.len(), |n, _| expected_noise_variance(post.mean[n], cov[(n, n)]));
    Ok(NoisePosterior { mean: post.mean, cov, expected_noise_var })
}

/// Individual terms of the free energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeEnergyTerms {
    /// `Σ_{c,d} KL(q(f) ‖ p(f))`.
    pub kl_latent: f64,
    /// `Σ_{c,d} KL(q(g) ‖ p(g))`.
    pub kl_noise: f64,
    /// `KL(q(α) ‖ p(α))`.
    pub kl_innovation: f64,
    /// Expected log stick prior plus stick entropies.
    pub sticks: f64,
    /// `Σ_{n,c} q(z_nc) ⟨log ϖ_c⟩`.
    pub assignment: f64,
    /// `Σ_{n,c} q(z_nc) r_nc`.
    pub likelihood: f64,
    /// `−Σ_{n,c} q(z_nc) log q(z_nc)`.
    pub entropy: f64,
}

impl FreeEnergyTerms {
    pub fn total(&self) -> f64 {
        -self.kl_latent - self.kl_noise - self.kl_innovation + self.sticks + self.assignment + self.likelihood
            + self.entropy
    }
}

fn beta_entropy(a: f64, b: f64) -> f64 {
    ln_beta(a, b) - (a - 1.0) * digamma(a) - (b - 1.0) * digamma(b) + (a + b - 2.0) * digamma(a + b)
}

fn gamma_kl(shape_q: f64, rate_q: f64, shape_p: f64, rate_p: f64) -> f64 {
    (shape_q - shape_p) * digamma(shape_q) - ln_gamma(shape_q) + ln_gamma(shape_p)
        + shape_p * (rate_q.ln() - rate_p.ln())
        + shape_q * (rate_p - rate_q) / rate_q
}

/// The variational posterior `q(W)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationalState {
    n_outputs: usize,
    /// Blocks indexed by `c · D + d`.
    latent: Vec<LatentBlock>,
    noise: Vec<NoiseBlock>,
    /// N × C responsibilities `q(z_nc = 1)`.
    pub responsibilities: DMatrix<f64>,
    pub sticks: StickPosterior,
    pub innovation: InnovationPosterior,
}

impl VariationalState {
    /// Initial state for given responsibilities: latent functions at their
    /// priors, noise sites `Q = q/2`, `b = 0`, sticks from the
    /// responsibilities and the innovation parameter at its prior.
    pub fn from_responsibilities(problem: &Problem, responsibilities: DMatrix<f64>) -> Result<Self> {
        let n = problem.data().len();
        let c_total = problem.truncation();
        let d_total = problem.data().output_dim();
        if responsibilities.shape() != (n, c_total) {
            return Err(Error::invalid(format!("responsibilities must be {n}×{c_total}")));
        }
        let pyp = problem.config().pyp;
        let sticks = update_stick_posteriors(&responsibilities, pyp.delta, pyp.prior_alpha_mean())?;
        let innovation = InnovationPosterior { eta1_hat: pyp.eta1, eta2_hat: pyp.eta2 };
        let mut latent = Vec::with_capacity(c_total * d_total);
        let mut noise = Vec::with_capacity(c_total * d_total);
        for c in 0..c_total {
            let q = responsibilities.column(c).into_owned();
            for d in 0..d_total {
                latent.push(LatentBlock::prior(problem.mean_covariance(c), n));
                let m_tilde = problem.hyper().m_tilde[(c, d)];
                noise.push(NoiseBlock::from_sites(problem.noise_covariance(c), m_tilde, &q * 0.5, DVector::zeros(n))?);
            }
        }
        Ok(Self { n_outputs: d_total, latent, noise, responsibilities, sticks, innovation })
    }

    pub fn truncation(&self) -> usize {
        self.responsibilities.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.n_outputs
    }

    pub fn latent_block(&self, c: usize, d: usize) -> &LatentBlock {
        &self.latent[c * self.n_outputs + d]
    }

    pub fn noise_block(&self, c: usize, d: usize) -> &NoiseBlock {
        &self.noise[c * self.n_outputs + d]
    }

    /// Replaces the noise sites of one block and recomputes its posterior.
    pub fn set_noise_sites(
        &mut self,
        problem: &Problem,
        c: usize,
        d: usize,
        q_prec: DVector<f64>,
        site: DVector<f64>,
    ) -> Result<()> {
        let m_tilde = problem.hyper().m_tilde[(c, d)];
        self.noise[c * self.n_outputs + d] = NoiseBlock::from_sites(problem.noise_covariance(c), m_tilde, q_prec, site)?;
        Ok(())
    }

    /// `⟨σ_d^c(x_n)²⟩⁻¹`, the single accessor used by every update.
    pub fn noise_precision(&self, c: usize, d: usize, n: usize) -> f64 {
        let b = self.noise_block(c, d);
        noise_precision(b.m[n], b.s_diag[n])
    }

    /// `⟨σ_d^c(x_n)²⟩ = exp(m − ½S)`.
    pub fn expected_noise_variance(&self, c: usize, d: usize, n: usize) -> f64 {
        let b = self.noise_block(c, d);
        expected_noise_variance(b.m[n], b.s_diag[n])
    }

    /// Expected squared residuals `(y − μ)² + Σₙₙ` of one block.
    pub fn squared_residuals(&self, problem: &Problem, c: usize, d: usize) -> DVector<f64> {
        let lb = self.latent_block(c, d);
        let y = problem.data().outputs().column(d);
        DVector::from_fn(y.len(), |n, _| (y[n] - lb.mu[n]).powi(2) + lb.sigma_diag[n])
    }

    /// Full posterior covariance `Σ_d^c` of a latent function.
    pub fn latent_covariance(&self, problem: &Problem, c: usize, d: usize) -> Result<DMatrix<f64>> {
        let n = problem.data().len();
        match problem.mean_covariance(c) {
            None => Ok(DMatrix::zeros(n, n)),
            Some(k) => {
                let b = self.latent_block(c, d);
                Ok(site_posterior(k, 0.0, &b.prec, &b.site, true)?.cov.expect("full covariance requested"))
            }
        }
    }

    /// Full posterior covariance `S_d^c` of a log-noise process.
    pub fn noise_covariance(&self, problem: &Problem, c: usize, d: usize) -> Result<DMatrix<f64>> {
        let b = self.noise_block(c, d);
        let m_tilde = problem.hyper().m_tilde[(c, d)];
        Ok(site_posterior(problem.noise_covariance(c), m_tilde, &b.q_prec, &b.site, true)?
            .cov
            .expect("full covariance requested"))
    }

    /// Updates every log-noise posterior.
    ///
    /// The optimum for fixed responsibilities and latent functions lies in
    /// the family `Q = ½w`, `b = ½(w − q)` with `wₙ = qₙ Aₙ ⟨σ²⟩ₙ⁻¹`. The
    /// update moves the sites toward that point with a backtracking step,
    /// which is an ascent direction, and never lowers the free energy.
    pub fn update_noise_processes(&mut self, problem: &Problem) -> Result<()> {
        let d_total = self.n_outputs;
        let inner = problem.config().noise_inner_iters;
        let updated: Vec<Result<NoiseBlock>> = (0..self.noise.len())
            .into_par_iter()
            .map(|idx| {
                let (c, d) = (idx / d_total, idx % d_total);
                let q = self.responsibilities.column(c).into_owned();
                let a = self.squared_residuals(problem, c, d);
                optimize_noise_block(
                    problem.noise_covariance(c),
                    problem.hyper().m_tilde[(c, d)],
                    &q,
                    &a,
                    &self.noise[idx],
                    inner,
                )
            })
            .collect();
        for (slot, block) in self.noise.iter_mut().zip(updated) {
            *slot = block?;
        }
        Ok(())
    }

    /// Updates every latent-function posterior in closed form:
    /// `Σ = (K⁻¹ + B)⁻¹`, `μ = Σ B y` with `B = diag(q / ⟨σ²⟩)`. Zero-kernel
    /// components keep `μ = 0`, `Σ = 0`.
    pub fn update_latent_functions(&mut self, problem: &Problem) -> Result<()> {
        let d_total = self.n_outputs;
        let updated: Vec<Option<Result<LatentBlock>>> = (0..self.latent.len())
            .into_par_iter()
            .map(|idx| {
                let (c, d) = (idx / d_total, idx % d_total);
                let k = problem.mean_covariance(c)?;
                Some(self.latent_update(problem, k, c, d))
            })
            .collect();
        for (slot, block) in self.latent.iter_mut().zip(updated) {
            if let Some(block) = block {
                *slot = block?;
            }
        }
        Ok(())
    }

    fn latent_update(&self, problem: &Problem, k: &DMatrix<f64>, c: usize, d: usize) -> Result<LatentBlock> {
        let n = problem.data().len();
        let prec = DVector::from_fn(n, |i, _| self.responsibilities[(i, c)] * self.noise_precision(c, d, i));
        let y = problem.data().outputs().column(d).into_owned();
        let site = regularized_inverse(k, &prec)? * y;
        let post = site_posterior(k, 0.0, &prec, &site, false)?;
        Ok(LatentBlock { site, prec, mu: post.mean, sigma_diag: post.cov_diag, kl: post.kl })
    }

    /// `r_nc = −½ Σ_d [((y − μ)² + Σₙₙ) / ⟨σ²⟩ₙ + mₙ]`.
    pub fn log_likelihood_terms(&self, problem: &Problem) -> DMatrix<f64> {
        let n = problem.data().len();
        let c_total = self.truncation();
        let y = problem.data().outputs();
        DMatrix::from_fn(n, c_total, |i, c| {
            let mut r = 0.0;
            for d in 0..self.n_outputs {
                let lb = self.latent_block(c, d);
                let a = (y[(i, d)] - lb.mu[i]).powi(2) + lb.sigma_diag[i];
                r -= 0.5 * (a * self.noise_precision(c, d, i) + self.noise_block(c, d).m[i]);
            }
            r
        })
    }

    /// `q(z_nc = 1) ∝ exp(⟨log ϖ_c⟩ + r_nc)`, normalized per row.
    pub fn update_responsibilities(&mut self, problem: &Problem) -> Result<()> {
        let elog = expected_log_weights(&self.sticks);
        let r = self.log_likelihood_terms(problem);
        let c_total = self.truncation();
        let mut logits = vec![0.0; c_total];
        for i in 0..r.nrows() {
            for c in 0..c_total {
                logits[c] = elog[c] + r[(i, c)];
            }
            let norm = log_sum_exp(&logits);
            if !norm.is_finite() {
                return Err(Error::ResponsibilityUnderflow { row: i });
            }
            for c in 0..c_total {
                self.responsibilities[(i, c)] = (logits[c] - norm).exp();
            }
        }
        Ok(())
    }

    pub fn update_sticks(&mut self, problem: &Problem) -> Result<()> {
        self.sticks = update_stick_posteriors(&self.responsibilities, problem.config().pyp.delta, self.innovation.mean())?;
        Ok(())
    }

    pub fn update_innovation(&mut self, problem: &Problem) -> Result<()> {
        self.innovation = update_innovation_posterior(&self.sticks, &problem.config().pyp)?;
        Ok(())
    }

    pub fn free_energy_terms(&self, problem: &Problem) -> FreeEnergyTerms {
        let pyp = problem.config().pyp;
        let kl_latent = self.latent.iter().map(|b| b.kl).sum();
        let kl_noise = self.noise.iter().map(|b| b.kl).sum();
        let kl_innovation = gamma_kl(self.innovation.eta1_hat, self.innovation.eta2_hat, pyp.eta1, pyp.eta2);

        let elog_alpha = self.innovation.expected_log();
        let alpha = self.innovation.mean();
        let lv = self.sticks.expected_log_v();
        let l1v = self.sticks.expected_log_one_minus_v();
        let mut sticks = 0.0;
        for c in 0..lv.len() {
            let (b1, b2) = (self.sticks.beta1[c], self.sticks.beta2[c]);
            sticks += elog_alpha - pyp.delta * lv[c]
                + (alpha + (c + 1) as f64 * pyp.delta - 1.0) * l1v[c]
                + beta_entropy(b1, b2);
        }

        let elog_w = expected_log_weights(&self.sticks);
        let r = self.log_likelihood_terms(problem);
        let (mut assignment, mut likelihood, mut entropy) = (0.0, 0.0, 0.0);
        for i in 0..r.nrows() {
            for c in 0..r.ncols() {
                let q = self.responsibilities[(i, c)];
                if q > 0.0 {
                    assignment += q * elog_w[c];
                    likelihood += q * r[(i, c)];
                    entropy -= q * q.ln();
                }
            }
        }
        FreeEnergyTerms { kl_latent, kl_noise, kl_innovation, sticks, assignment, likelihood, entropy }
    }

    /// Variational free energy, up to additive constants.
    pub fn free_energy(&self, problem: &Problem) -> f64 {
        self.free_energy_terms(problem).total()
    }

    pub(crate) fn replace_noise_blocks(&mut self, c: usize, blocks: Vec<NoiseBlock>) {
        for (d, b) in blocks.into_iter().enumerate() {
            self.noise[c * self.n_outputs + d] = b;
        }
    }
}

const MAX_HALVINGS: usize = 12;

/// Damped fixed-point ascent on one log-noise block. Returns a block whose
/// objective is never below that of `current`.
fn optimize_noise_block(
    lambda: &DMatrix<f64>,
    m_tilde: f64,
    resp: &DVector<f64>,
    sq_resid: &DVector<f64>,
    current: &NoiseBlock,
    inner_iters: usize,
) -> Result<NoiseBlock> {
    let mut best = current.clone();
    let mut f_best = best.objective(resp, sq_resid);
    if resp.iter().all(|&q| q < 1e-10) {
        let prior = NoiseBlock::prior(lambda, m_tilde);
        if prior.objective(resp, sq_resid) >= f_best {
            return Ok(prior);
        }
    }
    for _ in 0..inner_iters {
        let n = resp.len();
        let w = DVector::from_fn(n, |i, _| {
            let q = resp[i];
            if q > 0.0 {
                q * sq_resid[i] * noise_precision(best.m[i], best.s_diag[i])
            } else {
                0.0
            }
        });
        let dq = &w * 0.5 - &best.q_prec;
        let db = (&w - resp) * 0.5 - &best.site;
        let scale = best.q_prec.amax().max(best.site.amax()).max(1e-300);
        if dq.amax().max(db.amax()) <= 1e-10 * scale {
            break;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let q_prec = (&best.q_prec + &dq * step).map(|v| v.max(0.0));
            let site = &best.site + &db * step;
            if let Ok(cand) = NoiseBlock::from_sites(lambda, m_tilde, q_prec, site) {
                let f = cand.objective(resp, sq_resid);
                if f.is_finite() && f >= f_best {
                    accepted = Some((cand, f));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((cand, f)) = accepted else { break };
        let gain = f - f_best;
        best = cand;
        f_best = f;
        if gain <= 1e-12 * f_best.abs().max(1.0) {
            break;
        }
    }
    Ok(best)
}
