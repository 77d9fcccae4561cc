//! Gauss–Legendre quadrature rules.

use std::f64::consts::PI;

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the rule by Newton iteration on the Legendre polynomial roots.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = (n + 1) / 2;
        for i in 0..m {
            // Tricomi initial guess
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// ∫ₐᵇ f.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
    }

    /// ∫ₐᵇ ∫ᶜᵈ f(x, y) dy dx on the tensor-product grid.
    pub fn integrate_2d<F: FnMut(f64, f64) -> f64>(&self, (a, b): (f64, f64), (c, d): (f64, f64), mut f: F) -> f64 {
        let hx = 0.5 * (b - a);
        let mx = 0.5 * (a + b);
        let hy = 0.5 * (d - c);
        let my = 0.5 * (c + d);
        let mut total = 0.0;
        for (xi, wi) in self.nodes.iter().zip(&self.weights) {
            let x = mx + hx * xi;
            let mut row = 0.0;
            for (yj, wj) in self.nodes.iter().zip(&self.weights) {
                row += wj * f(x, my + hy * yj);
            }
            total += wi * row;
        }
        total * hx * hy
    }

    /// Mapped nodes and weights on [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(|(x, w)| (mid + half * x, w * half)).collect()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite rule on (0, 1) with panels graded geometrically toward both
/// endpoints, for integrands with endpoint singularities.
pub fn graded_unit_interval(rule: &GaussLegendre, levels: usize) -> Vec<(f64, f64)> {
    let mut edges = vec![0.0];
    let mut left = Vec::new();
    for k in (1..=levels).rev() {
        left.push(0.5f64.powi(k as i32 + 1));
    }
    edges.extend(left.iter().copied());
    edges.push(0.5);
    edges.extend(left.iter().rev().map(|e| 1.0 - e));
    edges.push(1.0);
    let mut out = Vec::new();
    for w in edges.windows(2) {
        out.extend(rule.mapped(w[0], w[1]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 16, 64, 128] {
            let r = GaussLegendre::new(n);
            assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn exact_for_polynomials() {
        let r = GaussLegendre::new(5);
        // degree 9 is integrated exactly by 5 nodes
        let v = r.integrate(-1.0, 2.0, |x| x.powi(9) - 3.0 * x.powi(4) + 1.0);
        let exact = (2f64.powi(10) - 1.0) / 10.0 - 3.0 * (2f64.powi(5) + 1.0) / 5.0 + 3.0;
        assert!((v - exact).abs() < 1e-11);
    }

    #[test]
    fn two_point_nodes() {
        let r = GaussLegendre::new(2);
        assert!((r.nodes[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((r.weights[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_double_integral() {
        let r = GaussLegendre::new(64);
        let v = r.integrate_2d((-8.0, 8.0), (-8.0, 8.0), |x, y| (-(x * x + y * y) / 2.0).exp());
        assert!((v - 2.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn graded_rule_handles_endpoint_singularity() {
        let pts = graded_unit_interval(&GaussLegendre::new(16), 40);
        let v: f64 = pts.iter().map(|(x, w)| w / x.sqrt()).sum();
        assert!((v - 2.0).abs() < 1e-5, "{:e}", v - 2.0);
    }
}
