use mgpch::garch::{garch_filter, garch_fit, garch_forecast, garch_log_likelihood, GarchParams};
use mgpch::gp::GpModel;
use mgpch::kernels::{Ar1KernelParams, KernelKind};
use mgpch::pyp::update_stick_posteriors;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn points(dim: usize, max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-2.0f64..2.0, dim), 1..=max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_matrices_are_positive_semidefinite(
        phi in 0.01f64..0.99, s in 1e-4f64..10.0, dim in 1usize..4, seed in any::<u64>(), n in 1usize..15,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let k = KernelKind::Ar1(Ar1KernelParams::new(phi, s).unwrap());
        let m = k.design_matrix(&xs).unwrap();
        let scale = s / (1.0 - phi * phi);
        let min = SymmetricEigen::new(m).eigenvalues.min();
        prop_assert!(min >= -1e-10 * scale, "smallest eigenvalue {min}");
    }

    #[test]
    fn kernel_depends_only_on_the_difference(
        phi in 0.01f64..0.99, s in 1e-4f64..10.0, x in points(2, 2), shift in prop::collection::vec(-5.0f64..5.0, 2),
    ) {
        let k = KernelKind::Ar1(Ar1KernelParams::new(phi, s).unwrap());
        let a = &x[0];
        let b = x.last().unwrap();
        let moved = |p: &Vec<f64>| p.iter().zip(&shift).map(|(u, v)| u + v).collect::<Vec<_>>();
        let k0 = k.eval(a, b).unwrap();
        let k1 = k.eval(&moved(a), &moved(b)).unwrap();
        prop_assert!((k0 - k1).abs() <= 1e-12 * k0.abs().max(1e-300));
        prop_assert_eq!(k0, k.eval(b, a).unwrap());
        prop_assert!(k0 <= k.eval(a, a).unwrap());
    }

    #[test]
    fn more_data_in_a_component_raises_its_stick(
        seed in any::<u64>(), n in 1usize..20, c in 2usize..6, target in 0usize..5, delta in 0.0f64..0.9,
    ) {
        let target = target % (c - 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut r = DMatrix::from_fn(n, c, |_, _| rng.random_range(0.01..1.0));
        for mut row in r.row_iter_mut() {
            let s = row.sum();
            row /= s;
        }
        let before = update_stick_posteriors(&r, delta, 1.0).unwrap();
        // move half of the last component's mass onto `target`
        let mut moved = r.clone();
        for i in 0..n {
            let shift = 0.5 * moved[(i, c - 1)];
            moved[(i, c - 1)] -= shift;
            moved[(i, target)] += shift;
        }
        let after = update_stick_posteriors(&moved, delta, 1.0).unwrap();
        prop_assert!(after.beta1[target] > before.beta1[target]);
        let mean = |p: &mgpch::pyp::StickPosterior| p.beta1[target] / (p.beta1[target] + p.beta2[target]);
        prop_assert!(mean(&after) > mean(&before));
    }

    #[test]
    fn gp_evidence_gradient_matches_finite_differences(
        seed in any::<u64>(), n in 1usize..=10, logit in -2.0f64..2.0, log_s in -2.0f64..1.0, log_noise in -3.0f64..0.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-2.0..2.0)]).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let evidence = |t: [f64; 3]| {
            let k = KernelKind::Ar1(Ar1KernelParams::from_unconstrained(t[0], t[1]).unwrap());
            GpModel::fit(k, t[2].exp(), xs.clone(), ys.clone()).unwrap()
        };
        let theta = [logit, log_s, log_noise];
        let grad = evidence(theta).log_evidence_gradient().unwrap();
        let h = 1e-5;
        for i in 0..3 {
            let (mut up, mut down) = (theta, theta);
            up[i] += h;
            down[i] -= h;
            let fd = (evidence(up).log_evidence() - evidence(down).log_evidence()) / (2.0 * h);
            prop_assert!((fd - grad[i]).abs() <= 1e-4 * fd.abs().max(1.0), "component {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn garch_forecasts_are_positive_and_converge_monotonically(
        omega in 1e-8f64..1e-3, a in 0.0f64..0.5, share in 0.0f64..0.99, r2 in 0.0f64..1e-2, v in 0.0f64..1e-2,
    ) {
        let b = (1.0 - a) * share * 0.999;
        let p = GarchParams::new(omega, a, b).unwrap();
        let long_run = p.unconditional_variance();
        let path: Vec<f64> = (1..=60).map(|h| garch_forecast(&p, r2, v, h).unwrap()).collect();
        prop_assert!(path.iter().all(|x| *x > 0.0));
        for w in path.windows(2) {
            prop_assert!((w[1] - long_run).abs() <= (w[0] - long_run).abs() + 1e-14 * long_run);
        }
    }
}

#[test]
fn garch_fit_beats_the_constant_variance_baseline() {
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = GarchParams::new(1e-6, 0.1, 0.85).unwrap();
        let mut var = p.unconditional_variance();
        let mut r = Vec::new();
        for _ in 0..400 {
            let x = var.sqrt() * rng.sample::<f64, _>(StandardNormal);
            r.push(x);
            var = p.omega + p.a * x * x + p.b * var;
        }
        let fit = garch_fit(&r).unwrap();
        let n = r.len() as f64;
        let mean = r.iter().sum::<f64>() / n;
        let s2 = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let baseline = GarchParams::new(s2 * (1.0 - 1e-9), 1e-9, 0.0).unwrap();
        assert!(fit.log_likelihood >= garch_log_likelihood(&baseline, &r) - 1e-9);
        assert!((fit.log_likelihood - garch_log_likelihood(&fit.params, &r)).abs() < 1e-8 * fit.log_likelihood.abs());
        let filtered = garch_filter(&fit.params, &r, s2);
        assert_eq!(filtered.len(), r.len() + 1);
        assert_eq!(*filtered.last().unwrap(), fit.next_variance);
    }
}
