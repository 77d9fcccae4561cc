//! Truncated Pitman–Yor stick-breaking prior.
//!
//! The variational posterior keeps `C − 1` Beta-distributed stick fractions;
//! the last stick is pinned at one so that all mass beyond the truncation
//! level is zero. The innovation (concentration) parameter has a Gamma
//! posterior in shape/rate form.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::digamma;

pub const DEFAULT_TRUNCATION: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PypConfig {
    /// Discount parameter δ ∈ [0, 1).
    pub delta: f64,
    /// Shape of the Gamma prior on the innovation parameter.
    pub eta1: f64,
    /// Rate of the Gamma prior on the innovation parameter.
    pub eta2: f64,
    /// Truncation level C.
    pub truncation: usize,
}

impl Default for PypConfig {
    fn default() -> Self {
        Self { delta: 0.1, eta1: 1.0, eta2: 1.0, truncation: DEFAULT_TRUNCATION }
    }
}

impl PypConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::invalid(format!("delta must lie in [0,1), got {}", self.delta)));
        }
        if !(self.eta1 > 0.0 && self.eta2 > 0.0) {
            return Err(Error::invalid("eta1 and eta2 must be positive"));
        }
        if self.truncation < 1 {
            return Err(Error::invalid("truncation level must be at least 1"));
        }
        Ok(())
    }

    pub fn prior_alpha_mean(&self) -> f64 {
        self.eta1 / self.eta2
    }
}

/// Beta posteriors `q(v_c) = Beta(β_{c,1}, β_{c,2})` for `c = 1..C−1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StickPosterior {
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
}

impl StickPosterior {
    pub fn new(beta1: Vec<f64>, beta2: Vec<f64>) -> Result<Self> {
        if beta1.len() != beta2.len() {
            return Err(Error::invalid("stick parameter vectors differ in length"));
        }
        if beta1.iter().chain(&beta2).any(|&b| !(b > 0.0) || !b.is_finite()) {
            return Err(Error::invalid("stick Beta parameters must be positive and finite"));
        }
        Ok(Self { beta1, beta2 })
    }

    /// Truncation level C (one more than the number of free sticks).
    pub fn truncation(&self) -> usize {
        self.beta1.len() + 1
    }

    /// `⟨log v_c⟩` for the free sticks.
    pub fn expected_log_v(&self) -> Vec<f64> {
        self.beta1.iter().zip(&self.beta2).map(|(a, b)| digamma(*a) - digamma(a + b)).collect()
    }

    /// `⟨log(1 − v_c)⟩` for the free sticks.
    pub fn expected_log_one_minus_v(&self) -> Vec<f64> {
        self.beta1.iter().zip(&self.beta2).map(|(a, b)| digamma(*b) - digamma(a + b)).collect()
    }
}

/// Gamma posterior `q(α) = Gamma(η̂₁, η̂₂)` (shape, rate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnovationPosterior {
    pub eta1_hat: f64,
    pub eta2_hat: f64,
}

impl InnovationPosterior {
    pub fn mean(&self) -> f64 {
        self.eta1_hat / self.eta2_hat
    }

    /// `⟨log α⟩ = ψ(η̂₁) − log η̂₂`.
    pub fn expected_log(&self) -> f64 {
        digamma(self.eta1_hat) - self.eta2_hat.ln()
    }
}

fn check_rows(resp: &DMatrix<f64>) -> Result<()> {
    for (n, row) in resp.row_iter().enumerate() {
        if row.iter().any(|&r| !(-1e-12..=1.0 + 1e-12).contains(&r)) {
            return Err(Error::invalid(format!("responsibility row {n} has entries outside [0,1]")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("responsibility row {n} sums to {s}, expected 1")));
        }
    }
    Ok(())
}

/// Closed-form Beta posteriors of the stick fractions given responsibilities.
///
/// `β_{c,1} = 1 − δ + Σₙ R[n,c]` and
/// `β_{c,2} = ⟨α⟩ + cδ + Σ_{c′>c} Σₙ R[n,c′]`, with `c` counted from one.
pub fn update_stick_posteriors(resp: &DMatrix<f64>, delta: f64, alpha_mean: f64) -> Result<StickPosterior> {
    check_rows(resp)?;
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::invalid(format!("delta must lie in [0,1), got {delta}")));
    }
    if !(alpha_mean > 0.0) {
        return Err(Error::invalid(format!("innovation mean must be positive, got {alpha_mean}")));
    }
    let c_total = resp.ncols();
    let counts: Vec<f64> = (0..c_total).map(|c| resp.column(c).sum()).collect();
    let mut beta1 = Vec::with_capacity(c_total.saturating_sub(1));
    let mut beta2 = Vec::with_capacity(c_total.saturating_sub(1));
    for c in 0..c_total.saturating_sub(1) {
        let tail: f64 = counts[c + 1..].iter().sum();
        beta1.push(1.0 - delta + counts[c]);
        beta2.push(alpha_mean + (c + 1) as f64 * delta + tail);
    }
    StickPosterior::new(beta1, beta2)
}

/// Gamma posterior of the innovation parameter given the stick posteriors.
pub fn update_innovation_posterior(sticks: &StickPosterior, config: &PypConfig) -> Result<InnovationPosterior> {
    let free = sticks.beta1.len();
    let eta1_hat = config.eta1 + free as f64;
    let eta2_hat = config.eta2 - sticks.expected_log_one_minus_v().iter().sum::<f64>();
    if !(eta2_hat > 0.0) || !eta2_hat.is_finite() {
        return Err(Error::NumericalDomain(format!("innovation rate became {eta2_hat}")));
    }
    Ok(InnovationPosterior { eta1_hat, eta2_hat })
}

/// `⟨log ϖ_c⟩ = Σ_{c′<c} ⟨log(1 − v_{c′})⟩ + ⟨log v_c⟩`, with `⟨log v_C⟩ = 0`.
pub fn expected_log_weights(sticks: &StickPosterior) -> DVector<f64> {
    let lv = sticks.expected_log_v();
    let l1v = sticks.expected_log_one_minus_v();
    let c_total = sticks.truncation();
    let mut out = DVector::zeros(c_total);
    let mut prefix = 0.0;
    for c in 0..c_total {
        out[c] = prefix + if c < lv.len() { lv[c] } else { 0.0 };
        if c < l1v.len() {
            prefix += l1v[c];
        }
    }
    out
}

/// `⟨ϖ_c⟩ = ⟨v_c⟩ Π_{j<c} (1 − ⟨v_j⟩)`, with `⟨v_C⟩ = 1`.
pub fn expected_weights(sticks: &StickPosterior) -> DVector<f64> {
    let c_total = sticks.truncation();
    let mut out = DVector::zeros(c_total);
    let mut remaining = 1.0;
    for c in 0..c_total {
        let v = if c < sticks.beta1.len() {
            sticks.beta1[c] / (sticks.beta1[c] + sticks.beta2[c])
        } else {
            1.0
        };
        out[c] = remaining * v;
        remaining *= 1.0 - v;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn stick_update_single_component_data() {
        let r = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let s = update_stick_posteriors(&r, 0.1, 1.0).unwrap();
        assert!((s.beta1[0] - 4.9).abs() < 1e-14);
        assert!((s.beta2[0] - 1.1).abs() < 1e-14);
    }

    #[test]
    fn stick_update_without_data_is_prior() {
        let r = DMatrix::<f64>::zeros(0, 3);
        let s = update_stick_posteriors(&r, 0.25, 2.0).unwrap();
        assert_eq!(s.beta1, vec![0.75, 0.75]);
        assert_eq!(s.beta2, vec![2.25, 2.5]);
    }

    #[test]
    fn stick_update_rejects_bad_rows() {
        let r = DMatrix::from_row_slice(1, 2, &[0.5, 0.4]);
        assert!(update_stick_posteriors(&r, 0.1, 1.0).is_err());
    }

    #[test]
    fn innovation_update_examples() {
        let cfg = PypConfig { delta: 0.0, eta1: 1.0, eta2: 1.0, truncation: 2 };
        let s = StickPosterior::new(vec![1.0], vec![1.0]).unwrap();
        let q = update_innovation_posterior(&s, &cfg).unwrap();
        assert_eq!(q.eta1_hat, 2.0);
        // ψ(1) − ψ(2) = −1
        assert!((q.eta2_hat - 2.0).abs() < 1e-13);
        assert!((q.mean() - 1.0).abs() < 1e-13);

        let cfg3 = PypConfig { truncation: 3, ..cfg };
        let s3 = StickPosterior::new(vec![2.0, 3.0], vec![1.5, 0.5]).unwrap();
        assert_eq!(update_innovation_posterior(&s3, &cfg3).unwrap().eta1_hat, 3.0);

        let single = StickPosterior::new(vec![], vec![]).unwrap();
        let cfg1 = PypConfig { eta1: 2.5, eta2: 0.7, truncation: 1, ..cfg };
        let q1 = update_innovation_posterior(&single, &cfg1).unwrap();
        assert_eq!((q1.eta1_hat, q1.eta2_hat), (2.5, 0.7));
    }

    #[test]
    fn expected_log_weight_examples() {
        let single = StickPosterior::new(vec![], vec![]).unwrap();
        assert_eq!(expected_log_weights(&single).as_slice(), &[0.0]);
        let s = StickPosterior::new(vec![1.0], vec![1.0]).unwrap();
        let lw = expected_log_weights(&s);
        assert!((lw[0] + 1.0).abs() < 1e-13);
        assert!((lw[1] + 1.0).abs() < 1e-13);
        let concentrated = StickPosterior::new(vec![1e12], vec![1.0]).unwrap();
        assert!(expected_log_weights(&concentrated)[0].abs() < 1e-10);
    }

    #[test]
    fn expected_weight_examples() {
        let single = StickPosterior::new(vec![], vec![]).unwrap();
        assert_eq!(expected_weights(&single).as_slice(), &[1.0]);
        let s = StickPosterior::new(vec![1.0], vec![1.0]).unwrap();
        assert_eq!(expected_weights(&s).as_slice(), &[0.5, 0.5]);
        let s3 = StickPosterior::new(vec![2.0, 3.0], vec![2.0, 3.0]).unwrap();
        assert_eq!(expected_weights(&s3).as_slice(), &[0.5, 0.25, 0.25]);
    }

    #[test]
    fn dp_special_case_prior() {
        // with δ = 0 and no data each stick prior is Beta(1, α)
        let r = DMatrix::<f64>::zeros(0, 4);
        let s = update_stick_posteriors(&r, 0.0, 1.7).unwrap();
        assert!(s.beta1.iter().all(|&b| b == 1.0));
        assert!(s.beta2.iter().all(|&b| b == 1.7));
    }

    fn responsibilities() -> impl Strategy<Value = DMatrix<f64>> {
        (1usize..6, 1usize..12).prop_flat_map(|(c, n)| {
            prop::collection::vec(0.001f64..1.0, c * n).prop_map(move |raw| {
                let mut m = DMatrix::from_row_slice(n, c, &raw);
                for mut row in m.row_iter_mut() {
                    let s: f64 = row.iter().sum();
                    row /= s;
                }
                m
            })
        })
    }

    proptest! {
        #[test]
        fn weights_sum_to_one(b1 in prop::collection::vec(0.01f64..50.0, 0..12),
                              b2 in prop::collection::vec(0.01f64..50.0, 12)) {
            let b2 = b2[..b1.len()].to_vec();
            let s = StickPosterior::new(b1, b2).unwrap();
            let w = expected_weights(&s);
            prop_assert!((w.sum() - 1.0).abs() < 1e-12);
            prop_assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }

        #[test]
        fn monotone_data_effect(r in responsibilities(), n_pick in 0usize..100, c_pick in 0usize..100,
                                bump in 0.0f64..0.5, delta in 0.0f64..0.9) {
            let (n, c) = (n_pick % r.nrows(), c_pick % r.ncols());
            let base = update_stick_posteriors(&r, delta, 1.3).unwrap();
            // move mass from other entries of the row into (n, c); the row sum is kept at one
            let mut r2 = r.clone();
            let add = bump * (1.0 - r2[(n, c)]);
            let others = 1.0 - r2[(n, c)];
            for j in 0..r2.ncols() {
                if j != c && others > 0.0 {
                    r2[(n, j)] -= add * r2[(n, j)] / others;
                }
            }
            r2[(n, c)] += add;
            let bumped = update_stick_posteriors(&r2, delta, 1.3).unwrap();
            if c < base.beta1.len() {
                prop_assert!(bumped.beta1[c] >= base.beta1[c] - 1e-12);
            }
            for cp in 0..c.min(base.beta2.len()) {
                prop_assert!(bumped.beta2[cp] >= base.beta2[cp] - 1e-12);
            }
        }

        #[test]
        fn dp_reduction_matches_independent_update(r in responsibilities(), alpha in 0.05f64..10.0) {
            let s = update_stick_posteriors(&r, 0.0, alpha).unwrap();
            let c_total = r.ncols();
            let counts: Vec<f64> = (0..c_total).map(|c| (0..r.nrows()).map(|n| r[(n, c)]).sum()).collect();
            for c in 0..c_total - 1 {
                let tail: f64 = counts[c + 1..].iter().sum();
                prop_assert_eq!(s.beta1[c], 1.0 + counts[c]);
                prop_assert_eq!(s.beta2[c], alpha + tail);
            }
        }
    }
}
