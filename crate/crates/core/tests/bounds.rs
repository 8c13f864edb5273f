mod common;

use otafl::bounds::{
    bias_bound, csi_term, effective_rhs, mse_bound, noise_term, Branch, BoundsError, ConvergenceBudget, EffectiveRhs,
    RoundContext,
};
use otafl::C64;
use rand::Rng;

struct Instance {
    ctx: RoundContext,
    f: Vec<C64>,
    a: Vec<C64>,
}

fn instance(seed: u64, eps: f64) -> Instance {
    let mut r = common::rng(seed);
    let (m, n, d) = (r.random_range(1..8), r.random_range(1..6), r.random_range(1..50));
    let norms: Vec<f64> = (0..m).map(|_| r.random_range(0.0..2.0)).collect();
    let counts: Vec<u64> = (0..m).map(|_| r.random_range(1..100)).collect();
    let var: Vec<f64> = (0..m).map(|_| r.random_range(0.1..2.0)).collect();
    let h: Vec<Vec<C64>> = var.iter().map(|&s| (0..n).map(|_| common::cgauss(&mut r, s)).collect()).collect();
    let f: Vec<C64> = (0..n).map(|_| common::cgauss(&mut r, 1.0)).collect();
    let a: Vec<C64> = (0..m).map(|_| common::cgauss(&mut r, 100.0)).collect();
    let budget = ConvergenceBudget::new(0.5, 2.0, 0.1).unwrap();
    let ctx = RoundContext::new(norms, counts, d, h, var, eps, 0.3, 1.0, budget, seed).unwrap();
    Instance { ctx, f, a }
}

#[test]
fn bounds_match_their_definitions() {
    for seed in 0..50 {
        let eps = [0.0, 0.1, 0.2][seed as usize % 3];
        let Instance { ctx, f, a } = instance(seed, eps);
        let c = &ctx;
        let b = common::bias_bound_ref(&c.norms, &c.sample_counts, c.dim, &c.channels, &f, &a);
        let m = common::mse_bound_ref(
            &c.norms,
            &c.sample_counts,
            c.dim,
            &c.channels,
            &c.variances,
            eps,
            c.noise_var,
            &f,
            &a,
        );
        assert!((bias_bound(c, &f, &a) - b).abs() <= 1e-12 * (1.0 + b));
        assert!((mse_bound(c, &f, &a) - m).abs() <= 1e-12 * (1.0 + m));
        let v: f64 = (c.dim as f64).sqrt() / c.k() * (0..c.num_devices()).map(|i| c.lambda(i)).sum::<f64>();
        assert!((c.v_t - v).abs() <= 1e-14 * (1.0 + v));
    }
}

#[test]
fn mse_decomposes_into_bias_noise_and_csi() {
    let Instance { ctx, f, a } = instance(3, 0.2);
    let b = bias_bound(&ctx, &f, &a);
    let total = b * b + noise_term(&ctx, &f) + csi_term(&ctx, &f, &a);
    assert!((mse_bound(&ctx, &f, &a) - total).abs() <= 1e-12 * total);
    let Instance { ctx, f, a } = instance(3, 0.0);
    assert_eq!(csi_term(&ctx, &f, &a), 0.0);
}

#[test]
fn bias_bound_vanishes_under_zero_forcing() {
    let Instance { ctx, f, .. } = instance(7, 0.0);
    let a: Vec<C64> = (0..ctx.num_devices())
        .map(|m| ctx.lambda(m) / common::herm(&f, &ctx.channels[m]))
        .collect();
    assert!(bias_bound(&ctx, &f, &a) < 1e-12 * (1.0 + ctx.v_t));
}

#[test]
fn alpha_range_is_enforced() {
    let e = ConvergenceBudget::new(1.2, 1.0, 0.0).unwrap_err();
    assert_eq!(e, BoundsError::Alpha(1.2));
    assert!(e.to_string().starts_with("alpha must lie in [0,1)"));
    assert!(ConvergenceBudget::new(1.0, 1.0, 0.0).is_err());
    assert!(ConvergenceBudget::new(0.0, 1.0, 0.0).is_ok());
    assert!(matches!(ConvergenceBudget::new(0.5, -1.0, 0.0), Err(BoundsError::Delta(_))));
    assert!(matches!(ConvergenceBudget::new(0.5, 1.0, -1.0), Err(BoundsError::Beta(_))));
}

fn single(alpha: f64, delta: f64, beta: f64, noise: f64) -> RoundContext {
    // One device, D = 4, K = 1, v = 1 -> V = 2.
    let budget = ConvergenceBudget { alpha, delta, beta };
    RoundContext::new(vec![1.0], vec![1], 4, vec![vec![C64::new(1.0, 0.0)]], vec![1.0], 0.0, noise, 1.0, budget, 0)
        .unwrap()
}

#[test]
fn effective_rhs_picks_the_binding_budget() {
    let f = vec![C64::new(1.0, 0.0)];
    // noise term = D s2 ||f||^2 / (2K^2) = 2 s2.
    match effective_rhs(&single(0.5, 1.0, 0.0, 0.5), &f) {
        // alpha V = 1; sqrt(4 - 1) = 1.732
        EffectiveRhs::Feasible { value, branch } => {
            assert!((value - 1.0).abs() < 1e-15);
            assert_eq!(branch, Branch::Bias);
        }
        other => panic!("{other:?}"),
    }
    match effective_rhs(&single(0.9, 0.5, 0.0, 0.5), &f) {
        // alpha V = 1.8; sqrt(2 - 1) = 1
        EffectiveRhs::Feasible { value, branch } => {
            assert!((value - 1.0).abs() < 1e-15);
            assert_eq!(branch, Branch::Mse);
        }
        other => panic!("{other:?}"),
    }
    match effective_rhs(&single(0.5, 0.5, 0.0, 0.5), &f) {
        // both equal 1
        EffectiveRhs::Feasible { branch, .. } => assert_eq!(branch, Branch::Both),
        other => panic!("{other:?}"),
    }
    match effective_rhs(&single(0.5, 0.1, 0.0, 0.5), &f) {
        EffectiveRhs::Infeasible { radicand } => assert!((radicand - (0.4 - 1.0)).abs() < 1e-15),
        other => panic!("{other:?}"),
    }
}

#[test]
fn context_validation() {
    let budget = ConvergenceBudget::new(0.5, 1.0, 0.0).unwrap();
    let h = vec![vec![C64::new(1.0, 0.0)]];
    assert!(RoundContext::new(vec![1.0], vec![0], 4, h.clone(), vec![1.0], 0.0, 0.1, 1.0, budget, 0).is_err());
    assert!(RoundContext::new(vec![1.0], vec![1], 0, h.clone(), vec![1.0], 0.0, 0.1, 1.0, budget, 0).is_err());
    assert!(RoundContext::new(vec![-1.0], vec![1], 4, h.clone(), vec![1.0], 0.0, 0.1, 1.0, budget, 0).is_err());
    assert!(RoundContext::new(vec![1.0], vec![1], 4, h, vec![1.0], 1.0, 0.1, 1.0, budget, 0).is_err());
}
