//! Seeded random problem instances in the library's input types.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use otafl::solvers::{BoxLinQp, BoxLinQuadQcqp, DenseQp};
use rand::Rng;

use super::{dot, gauss, rng};

pub fn box_lin(seed: u64) -> BoxLinQp {
    let mut r = rng(seed);
    let n = r.random_range(1..=8);
    let c: Vec<f64> = (0..n)
        .map(|_| if r.random_bool(0.15) { 0.0 } else { r.random_range(0.05..2.0) })
        .collect();
    let lower: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..0.5)).collect();
    let upper: Vec<f64> = lower.iter().map(|l| l + r.random_range(0.1..2.0)).collect();
    let lo_val = dot(&c, &lower);
    let hi_val = dot(&c, &upper);
    let rhs = lo_val - 0.2 + r.random_range(0.0..1.0) * (hi_val - lo_val + 0.2) * 0.95;
    BoxLinQp {
        linear_coeffs: c,
        rhs,
        lower,
        upper,
    }
}

pub fn dense_qp(seed: u64) -> DenseQp {
    let mut r = rng(seed);
    let n = r.random_range(1..=8);
    let m = r.random_range(1..=6);
    let b = DMatrix::from_fn(n, n, |_, _| gauss(&mut r));
    let quad = b.transpose() * &b / n as f64 + DMatrix::identity(n, n) * 0.05;
    let lin = DVector::from_fn(n, |_, _| 2.0 * gauss(&mut r));
    let a = DMatrix::from_fn(m, n, |_, _| gauss(&mut r));
    let x0 = DVector::from_fn(n, |_, _| gauss(&mut r));
    let slack = DVector::from_fn(m, |_, _| r.random_range(0.0..1.0));
    let rhs = &a * x0 + slack;
    DenseQp {
        quad,
        lin,
        ineq_a: a,
        ineq_b: rhs,
    }
}

pub fn qcqp(seed: u64) -> BoxLinQuadQcqp {
    let mut r = rng(seed);
    let n = r.random_range(1..=8);
    let upper: Vec<f64> = (0..n).map(|_| r.random_range(0.5..2.0)).collect();
    let lower = vec![0.0; n];
    let c: Vec<f64> = (0..n).map(|_| r.random_range(0.1..1.0)).collect();
    let x0: Vec<f64> = upper.iter().map(|u| r.random_range(0.2..1.0) * u).collect();
    let rhs = dot(&c, &x0) * r.random_range(0.3..1.0);
    let quad = if r.random_bool(0.5) {
        DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| {
            if r.random_bool(0.2) { 0.0 } else { r.random_range(0.1..2.0) }
        }))
    } else {
        let k = r.random_range(1..=n);
        let b = DMatrix::from_fn(k, n, |_, _| gauss(&mut r));
        b.transpose() * b / k as f64
    };
    let quad_lin: Vec<f64> = (0..n).map(|_| -r.random_range(0.0..1.0)).collect();
    let value = |x: &[f64]| {
        let xv = DVector::from_column_slice(x);
        (xv.transpose() * &quad * &xv)[(0, 0)] + dot(&quad_lin, x)
    };
    let at_x0 = value(&x0);
    // Place the bound between x0 and the quadric-free optimum when that
    // optimum violates it, so most instances have an active quadric.
    let xb = super::box_lin_oracle(&c, rhs, &lower, &upper);
    let at_xb = value(&xb);
    let quad_bound = if at_xb > at_x0 && r.random_bool(0.8) {
        at_x0 + r.random_range(0.05..0.9) * (at_xb - at_x0)
    } else {
        at_x0 + r.random_range(0.0..0.3)
    };
    BoxLinQuadQcqp {
        linear_coeffs: c,
        linear_rhs: rhs,
        quad,
        quad_lin,
        quad_bound,
        lower,
        upper,
    }
}

/// A round at the evaluation scale: M = 10, N = 16, noise -74 dBm,
/// P0 = 21 dBm, heterogeneous gradient norms and sample counts. The
/// optimizer sees the estimates; `ch` keeps both.
pub struct Round {
    pub ctx: otafl::RoundContext,
    pub ch: otafl::ChannelSet,
}

pub fn sv_round(seed: u64, eps: f64, budget: otafl::ConvergenceBudget) -> Round {
    use otafl::channel::{dbm_to_watts, generate_round, ChannelConfig};
    let cfg = ChannelConfig {
        csi_error: eps,
        seed,
        ..ChannelConfig::default()
    };
    let ch = generate_round(&cfg, 0);
    let mut r = rng(seed ^ 0x5eed);
    let norms: Vec<f64> = (0..10).map(|_| r.random_range(0.005..0.05)).collect();
    let counts: Vec<u64> = (0..10).map(|_| r.random_range(200..800)).collect();
    let ctx = otafl::RoundContext::new(
        norms,
        counts,
        7850,
        ch.estimates.clone(),
        ch.variances.clone(),
        eps,
        cfg.noise_power_w(),
        dbm_to_watts(21.0),
        budget,
        seed,
    )
    .expect("valid round");
    Round { ctx, ch }
}
