//! Kernel functions and design-matrix construction shared by all GP code.
//!
//! Two kernels exist: the zero kernel, used for the mean processes of the
//! finance configuration, and the first-order autoregressive kernel
//! `σ₀²/(1−φ²) · φ^‖x−x′‖` used for the log-noise processes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{log_logistic, logistic};

/// Relative diagonal jitter added to every AR(1) design matrix before it is factorized.
pub const JITTER: f64 = 1e-8;

/// Hyperparameters of the AR(1) kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ar1KernelParams {
    phi: f64,
    sigma0_sq: f64,
}

impl Ar1KernelParams {
    pub fn new(phi: f64, sigma0_sq: f64) -> Result<Self> {
        if !(phi > 0.0 && phi < 1.0) {
            return Err(Error::invalid(format!("AR(1) phi must lie in (0,1), got {phi}")));
        }
        if !(sigma0_sq > 0.0 && sigma0_sq.is_finite()) {
            return Err(Error::invalid(format!("AR(1) sigma0_sq must be positive, got {sigma0_sq}")));
        }
        Ok(Self { phi, sigma0_sq })
    }

    /// Builds parameters from `(logit φ, log σ₀²)`.
    pub fn from_unconstrained(logit_phi: f64, log_sigma0_sq: f64) -> Result<Self> {
        Self::new(logistic(logit_phi), log_sigma0_sq.exp())
    }

    /// Returns `(logit φ, log σ₀²)`.
    pub fn to_unconstrained(&self) -> (f64, f64) {
        ((self.phi / (1.0 - self.phi)).ln(), self.sigma0_sq.ln())
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn sigma0_sq(&self) -> f64 {
        self.sigma0_sq
    }

    pub fn ln_phi(&self) -> f64 {
        // phi is stored directly, but the logit route keeps precision when phi ~ 1
        let (l, _) = self.to_unconstrained();
        log_logistic(l)
    }

    /// Marginal variance `σ₀²/(1−φ²)`, the value at zero distance.
    pub fn variance(&self) -> f64 {
        self.sigma0_sq / -(2.0 * self.ln_phi()).exp_m1()
    }

    /// Kernel value at Euclidean distance `dist`.
    pub fn at_distance(&self, dist: f64) -> f64 {
        self.variance() * (dist * self.ln_phi()).exp()
    }
}

/// Kernel selector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    Zero,
    Ar1(Ar1KernelParams),
}

impl Default for KernelKind {
    fn default() -> Self {
        KernelKind::Zero
    }
}

pub fn euclidean_distance(x: &[f64], x2: &[f64]) -> Result<f64> {
    if x.len() != x2.len() {
        return Err(Error::invalid(format!(
            "input dimension mismatch: {} vs {}",
            x.len(),
            x2.len()
        )));
    }
    Ok(x.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

impl KernelKind {
    pub fn is_zero(&self) -> bool {
        matches!(self, KernelKind::Zero)
    }

    pub fn eval(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        let dist = euclidean_distance(x, x2)?;
        Ok(self.at_distance(dist))
    }

    pub fn at_distance(&self, dist: f64) -> f64 {
        match self {
            KernelKind::Zero => 0.0,
            KernelKind::Ar1(p) => p.at_distance(dist),
        }
    }

    /// Diagonal jitter for this kernel (zero for the zero kernel).
    pub fn jitter(&self) -> f64 {
        match self {
            KernelKind::Zero => 0.0,
            KernelKind::Ar1(p) => JITTER * p.variance(),
        }
    }

    /// Design matrix `[k(xᵢ, xⱼ)]` without jitter.
    pub fn design_matrix(&self, xs: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let distances = pairwise_distances(xs)?;
        Ok(self.design_from_distances(&distances))
    }

    /// Design matrix with the diagonal jitter applied; this is the prior
    /// covariance every factorization uses.
    pub fn prior_covariance(&self, xs: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let distances = pairwise_distances(xs)?;
        Ok(self.prior_covariance_from_distances(&distances))
    }

    pub fn design_from_distances(&self, distances: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            KernelKind::Zero => DMatrix::zeros(distances.nrows(), distances.ncols()),
            KernelKind::Ar1(p) => {
                let var = p.variance();
                let lp = p.ln_phi();
                distances.map(|d| var * (d * lp).exp())
            }
        }
    }

    pub fn prior_covariance_from_distances(&self, distances: &DMatrix<f64>) -> DMatrix<f64> {
        let mut m = self.design_from_distances(distances);
        let j = self.jitter();
        for i in 0..m.nrows() {
            m[(i, i)] += j;
        }
        m
    }

    /// Cross-covariance vector `[k(x₁, x*), …, k(x_N, x*)]`.
    pub fn cross_vector(&self, xs: &[Vec<f64>], xstar: &[f64]) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(xs.len());
        for (i, x) in xs.iter().enumerate() {
            out[i] = self.eval(x, xstar)?;
        }
        Ok(out)
    }
}

/// Symmetric matrix of Euclidean distances between inputs.
pub fn pairwise_distances(xs: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = xs.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = euclidean_distance(&xs[i], &xs[j])?;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ar1(phi: f64, s: f64) -> KernelKind {
        KernelKind::Ar1(Ar1KernelParams::new(phi, s).unwrap())
    }

    #[test]
    fn ar1_at_zero_distance() {
        let v = ar1(0.5, 1.0).eval(&[0.3, -1.0], &[0.3, -1.0]).unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn ar1_at_distance_two() {
        let v = ar1(0.5, 0.75).eval(&[0.0], &[2.0]).unwrap();
        assert!((v - 0.25).abs() < 1e-14);
    }

    #[test]
    fn zero_kernel_is_zero() {
        assert_eq!(KernelKind::Zero.eval(&[1.0, 2.0], &[-3.0, 4.0]).unwrap(), 0.0);
        let m = KernelKind::Zero.design_matrix(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(m, DMatrix::zeros(3, 3));
        let v = KernelKind::Zero.cross_vector(&[vec![0.0], vec![5.0]], &[1.0]).unwrap();
        assert_eq!(v, DVector::zeros(2));
    }

    #[test]
    fn design_matrix_examples() {
        let k = ar1(0.5, 1.0);
        let single = k.design_matrix(&[vec![0.7]]).unwrap();
        assert!((single[(0, 0)] - 4.0 / 3.0).abs() < 1e-14);
        let m = k.design_matrix(&[vec![0.0], vec![1.0]]).unwrap();
        assert!((m[(0, 0)] - 4.0 / 3.0).abs() < 1e-14);
        assert!((m[(0, 1)] - 2.0 / 3.0).abs() < 1e-14);
        assert!((m[(1, 0)] - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn cross_vector_examples() {
        let k = ar1(0.5, 1.0);
        let v = k.cross_vector(&[vec![0.0], vec![2.0]], &[1.0]).unwrap();
        assert!((v[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((v[1] - 2.0 / 3.0).abs() < 1e-14);
        let same = k.cross_vector(&[vec![3.0]], &[3.0]).unwrap();
        assert!((same[0] - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert!(ar1(0.5, 1.0).eval(&[0.0], &[0.0, 1.0]).is_err());
        assert!(ar1(0.5, 1.0).cross_vector(&[vec![0.0]], &[0.0, 1.0]).is_err());
        assert!(ar1(0.5, 1.0).design_matrix(&[vec![0.0], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn params_validate_domain() {
        assert!(Ar1KernelParams::new(0.0, 1.0).is_err());
        assert!(Ar1KernelParams::new(1.0, 1.0).is_err());
        assert!(Ar1KernelParams::new(0.5, 0.0).is_err());
        assert!(Ar1KernelParams::new(0.5, -1.0).is_err());
    }

    #[test]
    fn unconstrained_roundtrip() {
        let p = Ar1KernelParams::new(0.3, 2.5).unwrap();
        let (a, b) = p.to_unconstrained();
        let q = Ar1KernelParams::from_unconstrained(a, b).unwrap();
        assert!((q.phi() - 0.3).abs() < 1e-14);
        assert!((q.sigma0_sq() - 2.5).abs() < 1e-13);
    }

    #[test]
    fn tiny_phi_stays_finite() {
        let p = Ar1KernelParams::from_unconstrained(-80.0, 0.0).unwrap();
        assert!((p.variance() - 1.0).abs() < 1e-12);
        let v = p.at_distance(0.01);
        assert!((v - (-0.8f64).exp()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn symmetry(phi in 0.01f64..0.99, s in 0.01f64..10.0,
                    a in prop::collection::vec(-5.0f64..5.0, 3),
                    b in prop::collection::vec(-5.0f64..5.0, 3)) {
            let k = ar1(phi, s);
            prop_assert_eq!(k.eval(&a, &b).unwrap(), k.eval(&b, &a).unwrap());
            prop_assert_eq!(KernelKind::Zero.eval(&a, &b).unwrap(), 0.0);
        }

        #[test]
        fn stationarity(phi in 0.01f64..0.99, s in 0.01f64..10.0,
                        a in prop::collection::vec(-5.0f64..5.0, 2),
                        b in prop::collection::vec(-5.0f64..5.0, 2),
                        shift in prop::collection::vec(-3.0f64..3.0, 2)) {
            let k = ar1(phi, s);
            let a2: Vec<f64> = a.iter().zip(&shift).map(|(x, t)| x + t).collect();
            let b2: Vec<f64> = b.iter().zip(&shift).map(|(x, t)| x + t).collect();
            let v1 = k.eval(&a, &b).unwrap();
            let v2 = k.eval(&a2, &b2).unwrap();
            prop_assert!((v1 - v2).abs() <= 1e-12 * v1.abs().max(1e-300));
        }

        #[test]
        fn jittered_design_is_positive_definite(phi in 0.01f64..0.99, s in 0.01f64..10.0,
                                               xs in prop::collection::vec(-3.0f64..3.0, 1..20)) {
            let k = ar1(phi, s);
            let inputs: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
            let m = k.prior_covariance(&inputs).unwrap();
            let chol = nalgebra::Cholesky::new(m);
            prop_assert!(chol.is_some());
            let l = chol.unwrap().l();
            for i in 0..l.nrows() {
                prop_assert!(l[(i, i)] > 0.0);
            }
        }
    }
}
