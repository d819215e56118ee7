//! Randomized invariants.

use proptest::prelude::*;

use dualfas::allocator::{gradient, objective, optimize, project_simplex, OptimizerConfig};
use dualfas::capacity::SnrSpec;
use dualfas::channel::{
    build_correlation, build_coupling, build_eigenbasis, CouplingKind, CouplingModel, PortGeometry,
};
use dualfas::experiment::{ExperimentConfig, ExperimentKind};
use dualfas::numerics::{hermitian_eigendecompose, logdet2_hpd, sample_cn01, CMatrix, RngStream};
use dualfas::permanent::{extended_permanent, permanent_exact, permanent_ryser, RealMatrix};

fn matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = RealMatrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(0.0f64..3.0, r * c)
            .prop_map(move |v| RealMatrix::new(r, c, v).unwrap())
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn extended_permanent_transpose_identity(a in matrix(5, 6)) {
        prop_assert!(close(extended_permanent(&a), extended_permanent(&a.transpose()), 1e-10));
    }

    #[test]
    fn extended_permanent_is_monotone(a in matrix(4, 4), i in 0usize..4, j in 0usize..4, bump in 0.0f64..2.0) {
        let (i, j) = (i % a.rows(), j % a.cols());
        let mut v = a.as_slice().to_vec();
        v[i * a.cols() + j] += bump;
        let b = RealMatrix::new(a.rows(), a.cols(), v).unwrap();
        prop_assert!(extended_permanent(&b) >= extended_permanent(&a) * (1.0 - 1e-12));
        prop_assert!(extended_permanent(&a) >= 1.0);
    }

    #[test]
    fn extended_permanent_is_affine_in_a_column(a in matrix(4, 4), j in 0usize..4) {
        let j = j % a.cols();
        let at = |t: f64| {
            let mut w = vec![1.0; a.cols()];
            w[j] = t;
            extended_permanent(&a.scale_columns(1.0, &w))
        };
        let (f0, f1, f2) = (at(0.0), at(1.0), at(2.0));
        prop_assert!(close(f2 - f1, f1 - f0, 1e-10));
    }

    #[test]
    fn ryser_agrees_with_exact(a in (1usize..=7).prop_flat_map(|n| {
        prop::collection::vec(0.0f64..2.0, n * n).prop_map(move |v| RealMatrix::new(n, n, v).unwrap())
    })) {
        prop_assert!(close(permanent_ryser(&a).unwrap(), permanent_exact(&a).unwrap(), 1e-12));
    }

    #[test]
    fn projection_is_feasible_and_idempotent(z in prop::collection::vec(-5.0f64..5.0, 1..10)) {
        let budget = z.len() as f64;
        let p = project_simplex(&z, budget);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - budget).abs() <= 1e-12);
        let q = project_simplex(&p, budget);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn projection_is_nearest(z in prop::collection::vec(-5.0f64..5.0, 2..8), seed in any::<u64>()) {
        let budget = z.len() as f64;
        let p = project_simplex(&z, budget);
        let dist = |y: &[f64]| z.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let mut rng = RngStream::new(seed, 0);
        for _ in 0..50 {
            let e: Vec<f64> = z.iter().map(|_| -(1.0 - rng.uniform()).ln()).collect();
            let s: f64 = e.iter().sum();
            let y: Vec<f64> = e.iter().map(|v| v / s * budget).collect();
            prop_assert!(dist(&p) <= dist(&y) + 1e-12);
        }
    }

    #[test]
    fn gradient_is_nonnegative(a in matrix(4, 4), gamma in 0.01f64..5.0) {
        let nt = a.cols();
        let g = gradient(&a, &vec![1.0; nt], gamma).unwrap();
        prop_assert!(g.iter().all(|&v| v >= 0.0));
        prop_assert!(objective(&a, &vec![1.0; nt], gamma).unwrap() >= 0.0);
    }

    #[test]
    fn scaling_coupling_matches_scaling_gamma(a in matrix(4, 4), c in 0.1f64..10.0, gamma in 0.1f64..3.0) {
        let lam = vec![1.0; a.cols()];
        let x = objective(&a.scaled(c), &lam, gamma).unwrap();
        let y = objective(&a, &lam, c * gamma).unwrap();
        prop_assert!(close(x, y, 1e-10));
    }

    #[test]
    fn logdet_of_scaled_identity(n in 1usize..8, c in 0.01f64..100.0) {
        let mut a = CMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = c.into();
        }
        prop_assert!((logdet2_hpd(&a).unwrap() - n as f64 * c.log2()).abs() < 1e-12 * n as f64 * c.log2().abs().max(1.0));
    }

    #[test]
    fn eigendecomposition_reconstructs(n in 1usize..7, seed in any::<u64>()) {
        let mut rng = RngStream::new(seed, 0);
        let b = sample_cn01(&mut rng, n, n);
        let a = b.adjoint().matmul(&b).unwrap();
        let eig = hermitian_eigendecompose(&a, 0.0).unwrap();
        let err = eig.reconstruct().sub(&a).unwrap().frobenius_norm();
        prop_assert!(err <= 1e-9 * a.frobenius_norm());
        let uu = eig.vectors.adjoint().matmul(&eig.vectors).unwrap();
        prop_assert!(uu.max_abs_diff(&CMatrix::identity(n)) < 1e-10);
        prop_assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn coupling_marginals_follow_profiles(
        n in 2usize..9,
        w in 0.3f64..4.0,
        kind in prop_oneof![
            Just(CouplingKind::SeparableRayleigh),
            Just(CouplingKind::SeparableRician),
            Just(CouplingKind::NonSeparableRayleigh),
        ],
        k_db in -10.0f64..15.0,
        seed in any::<u64>(),
    ) {
        let basis = build_eigenbasis(&build_correlation(&PortGeometry::symmetric(n, w).unwrap()).unwrap()).unwrap();
        let mut rng = RngStream::new(seed, 0);
        let k = (kind == CouplingKind::SeparableRician).then_some(k_db);
        let model = build_coupling(&basis, kind, k, Some(&mut rng)).unwrap();
        let total = (n * n) as f64;
        prop_assert!((model.omega.total() - total).abs() <= 1e-9 * total);
        let (rows, cols) = model.marginals();
        for (r, p) in rows.iter().zip(&basis.pi_r) {
            prop_assert!((r - p).abs() <= 1e-8);
        }
        for (c, p) in cols.iter().zip(&basis.pi_t) {
            prop_assert!((c - p).abs() <= 1e-8);
        }
        let back = CouplingModel::from_json(&model.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.omega.as_slice(), model.omega.as_slice());
    }

    #[test]
    fn config_round_trips(seed in any::<u64>(), trials in 1usize..1_000_000, w in 0.1f64..8.0, n in 2usize..16) {
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::SnrSweep);
        cfg.seed = seed;
        cfg.n_trials = trials;
        cfg.geometry = PortGeometry::symmetric(n, w).unwrap();
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn optimizer_stays_feasible_and_ascends(a in matrix(4, 4), rho in 0.01f64..100.0) {
        let nt = a.cols();
        let snr = SnrSpec::from_linear(rho, nt).unwrap();
        let res = optimize(&a, snr, &OptimizerConfig::default()).unwrap();
        let lam = res.allocation.lambda();
        prop_assert!(lam.iter().all(|&v| v >= 0.0));
        prop_assert!((lam.iter().sum::<f64>() - nt as f64).abs() <= 1e-9);
        prop_assert!(res.trace.windows(2).all(|w| w[1] >= w[0]));
        let equal = objective(&a, &vec![1.0; nt], snr.gamma).unwrap();
        prop_assert!(res.objective() >= equal - 1e-12);
    }
}
