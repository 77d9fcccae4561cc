//! Coordinate-ascent fitting of the MGPCH model.

use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernels::{Ar1KernelParams, KernelKind};
use crate::optim::{central_difference, minimize, LbfgsOptions};
use crate::special::log_sum_exp;

use super::state::{NoiseBlock, Problem, VariationalState};
use super::{Dataset, Hyperparameters, MgpchConfig, MgpchModel};

/// The coordinate step that produced a [`FitEvent`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStep {
    Initial,
    NoiseProcesses,
    LatentFunctions,
    Responsibilities,
    Sticks,
    Innovation,
    Hyperparameters,
}

/// Free energy after one coordinate step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitEvent {
    pub iteration: usize,
    pub step: FitStep,
    pub free_energy: f64,
}

const FD_STEP: f64 = 1e-5;

/// Fits the model by coordinate ascent on the free energy.
pub fn fit(data: &Dataset, config: &MgpchConfig) -> Result<MgpchModel> {
    fit_with_observer(data, config, |_| {})
}

/// Like [`fit`], calling `observer` with the free energy after every
/// coordinate step.
pub fn fit_with_observer<F: FnMut(&FitEvent)>(
    data: &Dataset,
    config: &MgpchConfig,
    mut observer: F,
) -> Result<MgpchModel> {
    if data.len() < 2 {
        return Err(Error::InsufficientData { required: 2, actual: data.len() });
    }
    let hyper = Hyperparameters::initial(data, config)?;
    let mut problem = Problem::new(data.clone(), config.clone(), hyper)?;
    let resp = kmeans_responsibilities(data, config.truncation(), config.seed);
    let mut state = VariationalState::from_responsibilities(&problem, resp)?;

    let mut emit = |state: &VariationalState, problem: &Problem, iteration: usize, step: FitStep| -> Result<f64> {
        let free_energy = state.free_energy(problem);
        if !free_energy.is_finite() {
            return Err(Error::Diverged { iteration, value: free_energy });
        }
        observer(&FitEvent { iteration, step, free_energy });
        Ok(free_energy)
    };

    let mut trace = vec![emit(&state, &problem, 0, FitStep::Initial)?];
    for it in 1..=config.max_iters {
        state.update_noise_processes(&problem)?;
        emit(&state, &problem, it, FitStep::NoiseProcesses)?;
        state.update_latent_functions(&problem)?;
        emit(&state, &problem, it, FitStep::LatentFunctions)?;
        state.update_responsibilities(&problem)?;
        emit(&state, &problem, it, FitStep::Responsibilities)?;
        state.update_sticks(&problem)?;
        emit(&state, &problem, it, FitStep::Sticks)?;
        state.update_innovation(&problem)?;
        let mut f = emit(&state, &problem, it, FitStep::Innovation)?;
        if config.hyperopt_every > 0 && it % config.hyperopt_every == 0 {
            optimize_hyperparameters(&mut problem, &mut state)?;
            f = emit(&state, &problem, it, FitStep::Hyperparameters)?;
        }
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(f);
        let rel = (f - prev).abs() / prev.abs().max(f64::MIN_POSITIVE);
        debug!("iteration {it}: free energy {f:.6}, relative change {rel:.3e}");
        if rel < config.free_energy_rel_tol {
            break;
        }
    }
    let (data, config, hyper) = problem.into_parts();
    Ok(MgpchModel { config, hyper, data, state, free_energy_trace: trace })
}

/// Hard k-means++ assignment on the concatenated `(x, y)` vectors, smoothed
/// to `0.9 · hard + 0.1 / C`.
pub fn kmeans_responsibilities(data: &Dataset, clusters: usize, seed: u64) -> DMatrix<f64> {
    let n = data.len();
    let points: Vec<Vec<f64>> = (0..n)
        .map(|i| data.inputs()[i].iter().copied().chain(data.outputs().row(i).iter().copied()).collect())
        .collect();
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let k = clusters.min(n).max(1);
    let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..n)].clone()];
    while centers.len() < k {
        let d2: Vec<f64> = points.iter().map(|p| centers.iter().map(|c| sq(p, c)).fold(f64::INFINITY, f64::min)).collect();
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, v) in d2.iter().enumerate() {
                if u < *v {
                    pick = i;
                    break;
                }
                u -= v;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[idx].clone());
    }

    let mut assign = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = (0..k).min_by(|&a, &b| sq(p, &centers[a]).total_cmp(&sq(p, &centers[b]))).unwrap_or(0);
            if best != assign[i] {
                assign[i] = best;
                changed = true;
            }
        }
        for (j, center) in centers.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = points.iter().zip(&assign).filter(|(_, a)| **a == j).map(|(p, _)| p).collect();
            if !members.is_empty() {
                for (dim, v) in center.iter_mut().enumerate() {
                    *v = members.iter().map(|m| m[dim]).sum::<f64>() / members.len() as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }

    // largest clusters first so that the stick-breaking order matches cluster size
    let mut sizes: Vec<(usize, usize)> = (0..k).map(|j| (assign.iter().filter(|a| **a == j).count(), j)).collect();
    sizes.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut rank = vec![0usize; k];
    for (r, (_, j)) in sizes.iter().enumerate() {
        rank[*j] = r;
    }
    let smooth = 0.1 / clusters as f64;
    DMatrix::from_fn(n, clusters, |i, c| if rank[assign[i]] == c { 0.9 + smooth } else { smooth })
}

/// The part of the free energy that depends on the noise kernel of
/// component `c`, with noise sites held fixed and each `m̃_d` set to its
/// closed-form optimum. Returns NaN for invalid kernels.
fn component_noise_objective(
    problem: &Problem,
    state: &VariationalState,
    c: usize,
    theta: &[f64],
) -> (f64, Option<(Vec<f64>, Vec<NoiseBlock>)>) {
    let Ok(kernel) = Ar1KernelParams::from_unconstrained(theta[0], theta[1]) else {
        return (f64::NAN, None);
    };
    let lambda = KernelKind::Ar1(kernel).prior_covariance_from_distances(problem.distances());
    let q: DVector<f64> = state.responsibilities.column(c).into_owned();
    let mut total = 0.0;
    let mut m_tilde = Vec::with_capacity(state.output_dim());
    let mut blocks = Vec::with_capacity(state.output_dim());
    for d in 0..state.output_dim() {
        let cur = state.noise_block(c, d);
        let Ok(mut block) = NoiseBlock::from_sites(&lambda, 0.0, cur.q_prec.clone(), cur.site.clone()) else {
            return (f64::NAN, None);
        };
        let a = state.squared_residuals(problem, c, d);
        let mt = optimal_m_tilde(&block, &q, &a).unwrap_or(problem.hyper().m_tilde[(c, d)]);
        block.m.add_scalar_mut(mt);
        total += block.objective(&q, &a);
        m_tilde.push(mt);
        blocks.push(block);
    }
    (total, Some((m_tilde, blocks)))
}

/// Maximizer of the block objective over a shift of the prior mean, for a
/// block built with `m̃ = 0`: `m̃ = log(Σ qₙ Aₙ exp(−mₙ + ½Sₙₙ) / Σ qₙ)`.
fn optimal_m_tilde(block: &NoiseBlock, resp: &DVector<f64>, sq_resid: &DVector<f64>) -> Option<f64> {
    let mass: f64 = resp.sum();
    let terms: Vec<f64> = (0..resp.len())
        .filter(|&n| resp[n] > 0.0 && sq_resid[n] > 0.0)
        .map(|n| (resp[n] * sq_resid[n]).ln() - block.m[n] + 0.5 * block.s_diag[n])
        .collect();
    let v = log_sum_exp(&terms) - mass.ln();
    (mass > 0.0 && v.is_finite()).then_some(v)
}

/// L-BFGS over `(logit φ_c, log σ₀²_c)` for each component with
/// finite-difference gradients and `m̃_c` profiled out. A result is kept only
/// if it raises the free energy.
fn optimize_hyperparameters(problem: &mut Problem, state: &mut VariationalState) -> Result<()> {
    let opts = LbfgsOptions { max_iters: problem.config().hyperopt_iters, max_line_search: 20, ..Default::default() };
    for c in 0..problem.truncation() {
        if state.responsibilities.column(c).iter().all(|&q| q < 1e-10) {
            continue;
        }
        let q: DVector<f64> = state.responsibilities.column(c).into_owned();
        let f0: f64 = (0..state.output_dim())
            .map(|d| state.noise_block(c, d).objective(&q, &state.squared_residuals(problem, c, d)))
            .sum();
        let (lp, ls) = problem.hyper().noise_kernels[c].to_unconstrained();
        let result = {
            let p: &Problem = problem;
            let s: &VariationalState = state;
            let mut neg = |x: &[f64]| -component_noise_objective(p, s, c, x).0;
            minimize(
                |x| {
                    let v = neg(x);
                    let g = central_difference(&mut neg, x, FD_STEP);
                    (v, g)
                },
                &[lp, ls],
                &opts,
            )
        };
        let (f1, found) = component_noise_objective(problem, state, c, &result.x);
        if let Some((m_tilde, blocks)) = found {
            if f1.is_finite() && f1 > f0 {
                let kernel = Ar1KernelParams::from_unconstrained(result.x[0], result.x[1])?;
                debug!("component {c}: hyperparameters improved {f0:.6} -> {f1:.6}");
                problem.set_noise_hyper(c, kernel, &m_tilde);
                state.replace_noise_blocks(c, blocks);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pyp::PypConfig;

    fn toy_data() -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40;
        let xs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>()]).collect();
        let ys = DMatrix::from_fn(n, 1, |i, _| {
            let scale = if i % 2 == 0 { 0.1 } else { 1.0 };
            scale * (rng.random::<f64>() - 0.5)
        });
        Dataset::new(xs, ys).unwrap()
    }

    #[test]
    fn kmeans_rows_sum_to_one() {
        let data = toy_data();
        let r = kmeans_responsibilities(&data, 4, 1);
        for row in r.row_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
            assert!(row.iter().any(|&v| v > 0.9));
        }
    }

    #[test]
    fn zero_iterations_leave_one_trace_entry() {
        let cfg = MgpchConfig { max_iters: 0, pyp: PypConfig { truncation: 3, ..Default::default() }, ..Default::default() };
        let model = fit(&toy_data(), &cfg).unwrap();
        assert_eq!(model.free_energy_trace.len(), 1);
    }

    #[test]
    fn observer_sees_monotone_free_energy() {
        let cfg = MgpchConfig {
            max_iters: 30,
            hyperopt_every: 5,
            pyp: PypConfig { truncation: 3, ..Default::default() },
            ..Default::default()
        };
        let mut last = f64::NEG_INFINITY;
        let mut steps = 0;
        fit_with_observer(&toy_data(), &cfg, |e| {
            assert!(e.free_energy >= last - 1e-8 * last.abs(), "{:?} fell from {last}", e);
            last = e.free_energy;
            steps += 1;
        })
        .unwrap();
        assert!(steps > 5);
    }

    #[test]
    fn too_little_data_is_rejected() {
        let data = Dataset::new(vec![vec![0.0]], DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert!(matches!(fit(&data, &MgpchConfig::default()), Err(Error::InsufficientData { .. })));
    }
}
