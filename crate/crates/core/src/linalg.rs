//! Dense linear algebra used by the GP machinery.
//!
//! Gaussian posteriors of the form `N(K a + m₀1, (K⁻¹ + diag(p))⁻¹)` are
//! handled through `B = I + P^½ K P^½`, which stays well conditioned even
//! when `K` is nearly singular and never requires `K⁻¹`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub fn cholesky(m: DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m).ok_or_else(|| Error::IllConditioned(format!("{what} is not positive definite")))
}

/// Summary of a Gaussian posterior in site form.
#[derive(Debug, Clone)]
pub struct SitePosterior {
    pub mean: DVector<f64>,
    pub cov_diag: DVector<f64>,
    /// Full covariance, present only when requested.
    pub cov: Option<DMatrix<f64>>,
    /// KL(q ‖ prior).
    pub kl: f64,
}

/// Posterior `q = N(K·site + prior_mean·1, (K⁻¹ + diag(prec))⁻¹)` for prior
/// `N(prior_mean·1, K)`, together with `KL(q ‖ prior)`.
///
/// `prec` must be non-negative. The KL is
/// `½[tr(B⁻¹) + siteᵀ K site − N + log|B|]` with `B = I + P^½ K P^½`.
pub fn site_posterior(
    prior_cov: &DMatrix<f64>,
    prior_mean: f64,
    prec: &DVector<f64>,
    site: &DVector<f64>,
    full_cov: bool,
) -> Result<SitePosterior> {
    let n = prior_cov.nrows();
    if prec.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::NumericalDomain("site precisions must be finite and non-negative".into()));
    }
    let sq = prec.map(f64::sqrt);
    let mut b = DMatrix::identity(n, n);
    for j in 0..n {
        for i in 0..n {
            b[(i, j)] += sq[i] * prior_cov[(i, j)] * sq[j];
        }
    }
    let chol = cholesky(b, "site matrix I + P^1/2 K P^1/2")?;
    let l = chol.l_dirty();
    let log_det_b: f64 = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();

    // V = L⁻¹ P^½ K, so that cov = K − VᵀV
    let mut v = prior_cov.clone();
    for i in 0..n {
        let s = sq[i];
        for j in 0..n {
            v[(i, j)] *= s;
        }
    }
    chol.l_dirty().solve_lower_triangular_mut(&mut v);
    let mut cov_diag = prior_cov.diagonal();
    for j in 0..n {
        let col = v.column(j);
        cov_diag[j] -= col.dot(&col);
    }
    // tr(B⁻¹) = N − Σ pₙ covₙₙ
    let trace_binv = n as f64 - prec.iter().zip(cov_diag.iter()).map(|(p, c)| p * c).sum::<f64>();
    let cov = if full_cov {
        let mut c = prior_cov - v.transpose() * &v;
        // symmetrize to remove rounding asymmetry
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (c[(i, j)] + c[(j, i)]);
                c[(i, j)] = avg;
                c[(j, i)] = avg;
            }
        }
        Some(c)
    } else {
        None
    };

    let k_site = prior_cov * site;
    let quad = site.dot(&k_site);
    let mean = k_site.add_scalar(prior_mean);
    let kl = 0.5 * (trace_binv + quad - n as f64 + log_det_b);
    Ok(SitePosterior { mean, cov_diag, cov, kl })
}

/// `(K + P⁻¹)⁻¹ = P^½ (I + P^½ K P^½)⁻¹ P^½`, well defined when some precisions are zero.
pub fn regularized_inverse(prior_cov: &DMatrix<f64>, prec: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = prior_cov.nrows();
    let sq = prec.map(|p| p.max(0.0).sqrt());
    let mut b = DMatrix::identity(n, n);
    for j in 0..n {
        for i in 0..n {
            b[(i, j)] += sq[i] * prior_cov[(i, j)] * sq[j];
        }
    }
    let chol = cholesky(b, "site matrix I + P^1/2 K P^1/2")?;
    let mut inv = chol.inverse();
    for j in 0..n {
        for i in 0..n {
            inv[(i, j)] *= sq[i] * sq[j];
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = DMatrix::from_fn(n, n, |_, _| next());
        &a * a.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn site_posterior_matches_direct_formulas() {
        let n = 5;
        let k = spd(n, 7);
        let prec = DVector::from_vec(vec![0.0, 0.3, 2.0, 0.7, 1.5]);
        let site = DVector::from_vec(vec![0.1, -0.4, 0.9, 0.0, 0.25]);
        let post = site_posterior(&k, 0.3, &prec, &site, true).unwrap();

        let kinv = k.clone().try_inverse().unwrap();
        let cov = (&kinv + DMatrix::from_diagonal(&prec)).try_inverse().unwrap();
        let mean = (&k * &site).add_scalar(0.3);
        let diff = &mean.add_scalar(-0.3);
        let kl = 0.5
            * ((&kinv * &cov).trace() + diff.dot(&(&kinv * diff)) - n as f64 + k.determinant().ln()
                - cov.determinant().ln());
        assert!((post.mean - mean).abs().max() < 1e-12);
        assert!((post.cov.unwrap() - &cov).abs().max() < 1e-12);
        assert!((post.cov_diag - cov.diagonal()).abs().max() < 1e-12);
        assert!((post.kl - kl).abs() < 1e-11);
    }

    #[test]
    fn zero_precision_recovers_prior() {
        let k = spd(4, 11);
        let zero = DVector::zeros(4);
        let post = site_posterior(&k, -2.0, &zero, &zero, true).unwrap();
        assert!((post.cov.unwrap() - &k).abs().max() < 1e-14);
        assert!(post.mean.iter().all(|&m| m == -2.0));
        assert!(post.kl.abs() < 1e-14);
    }

    #[test]
    fn regularized_inverse_matches() {
        let k = spd(4, 5);
        let prec = DVector::from_vec(vec![0.5, 1.0, 2.0, 4.0]);
        let direct = (&k + DMatrix::from_diagonal(&prec.map(|p| 1.0 / p))).try_inverse().unwrap();
        let ours = regularized_inverse(&k, &prec).unwrap();
        assert!((direct - ours).abs().max() < 1e-12);
    }
}
