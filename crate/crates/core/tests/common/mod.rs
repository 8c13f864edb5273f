//! Independent reference implementations shared by the integration tests.
//! Nothing here calls into the solver code under test.
#![allow(dead_code)]

pub mod instances;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss<R: Rng>(r: &mut R) -> f64 {
    // Box-Muller keeps the oracle free of the library's sampling code.
    let u1: f64 = r.random_range(f64::EPSILON..1.0);
    let u2: f64 = r.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn cgauss<R: Rng>(r: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    C64::new(s * gauss(r), s * gauss(r))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// `f^H h`.
pub fn herm(f: &[C64], h: &[C64]) -> C64 {
    f.iter().zip(h).map(|(a, b)| a.conj() * b).sum()
}

fn project_box(x: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    x.iter().zip(lo.iter().zip(hi)).map(|(v, (l, u))| v.clamp(*l, *u)).collect()
}

fn project_halfspace(x: &[f64], c: &[f64], rhs: f64) -> Vec<f64> {
    let gap = rhs - dot(c, x);
    let cc = sq(c);
    if gap <= 0.0 || cc == 0.0 {
        return x.to_vec();
    }
    x.iter().zip(c).map(|(v, ci)| v + gap * ci / cc).collect()
}

/// Euclidean projection onto `{x : x'Qx + q'x <= g}` by bisection on the
/// multiplier of the stationarity condition `(I + 2 mu Q) x = y - mu q`.
fn project_quadric(y: &[f64], q_mat: &DMatrix<f64>, q: &[f64], g: f64) -> Vec<f64> {
    let n = y.len();
    let val = |x: &DVector<f64>| (x.transpose() * q_mat * x)[(0, 0)] + dot(q, x.as_slice());
    let yv = DVector::from_column_slice(y);
    if val(&yv) <= g {
        return y.to_vec();
    }
    let qv = DVector::from_column_slice(q);
    let at = |mu: f64| {
        let m = DMatrix::identity(n, n) + q_mat * (2.0 * mu);
        m.lu().solve(&(&yv - &qv * mu)).expect("I + 2 mu Q is nonsingular for mu >= 0")
    };
    let mut hi = 1.0;
    while val(&at(hi)) > g {
        hi *= 2.0;
        assert!(hi < 1e30, "quadric set appears empty");
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if val(&at(mid)) > g {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(hi).as_slice().to_vec()
}

/// Dykstra's alternating projections of the origin onto an intersection
/// of closed convex sets, given their projection operators.
pub fn dykstra(n: usize, projections: &[&dyn Fn(&[f64]) -> Vec<f64>], max_iter: usize) -> Vec<f64> {
    let k = projections.len();
    let mut x = vec![0.0; n];
    let mut incr = vec![vec![0.0; n]; k];
    for _ in 0..max_iter {
        let prev = x.clone();
        let mut change: f64 = 0.0;
        for (i, p) in projections.iter().enumerate() {
            let y: Vec<f64> = x.iter().zip(&incr[i]).map(|(a, b)| a + b).collect();
            let z = p(&y);
            let next: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a - b).collect();
            // x can sit still for a sweep while the corrections still move.
            change = next.iter().zip(&incr[i]).map(|(a, b)| (a - b).abs()).fold(change, f64::max);
            incr[i] = next;
            x = z;
        }
        change = x.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(change, f64::max);
        if change < 1e-15 {
            break;
        }
    }
    x
}

/// Minimum-norm point of `{box} ∩ {c'x >= rhs}`.
pub fn box_lin_oracle(c: &[f64], rhs: f64, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let pb = |x: &[f64]| project_box(x, lo, hi);
    let ph = |x: &[f64]| project_halfspace(x, c, rhs);
    dykstra(c.len(), &[&pb, &ph], 500_000)
}

/// Minimum-norm point of `{box} ∩ {c'x >= rhs} ∩ {x'Qx + q'x <= g}`.
pub fn qcqp_oracle(c: &[f64], rhs: f64, q_mat: &DMatrix<f64>, q: &[f64], g: f64, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let pb = |x: &[f64]| project_box(x, lo, hi);
    let ph = |x: &[f64]| project_halfspace(x, c, rhs);
    let pq = |x: &[f64]| project_quadric(x, q_mat, q, g);
    dykstra(c.len(), &[&pb, &ph, &pq], 200_000)
}

/// Exact solution of `min x'Qx + lin'x s.t. A x <= b` (Q positive definite)
/// by enumerating active sets and keeping the best KKT point.
pub fn dense_qp_oracle(q: &DMatrix<f64>, lin: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = lin.len();
    let m = b.len();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << m) {
        let act: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        if act.len() > n {
            continue;
        }
        let k = act.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        let mut rhs = DVector::zeros(n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&(q * 2.0));
        for (j, &i) in act.iter().enumerate() {
            for c in 0..n {
                kkt[(c, n + j)] = a[(i, c)];
                kkt[(n + j, c)] = a[(i, c)];
            }
            rhs[n + j] = b[i];
        }
        for c in 0..n {
            rhs[c] = -lin[c];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let x = sol.rows(0, n).into_owned();
        let feasible = (0..m).all(|i| (a.row(i) * &x)[(0, 0)] <= b[i] + 1e-9 * (1.0 + b[i].abs()));
        let dual_ok = (0..k).all(|j| sol[n + j] >= -1e-9);
        if feasible && dual_ok {
            let obj = (x.transpose() * q * &x)[(0, 0)] + lin.dot(&x);
            if best.as_ref().is_none_or(|(o, _)| obj < *o) {
                best = Some((obj, x));
            }
        }
    }
    best.map(|(_, x)| x)
}

/// Bias bound written directly from its definition.
pub fn bias_bound_ref(norms: &[f64], counts: &[u64], dim: usize, h: &[Vec<C64>], f: &[C64], a: &[C64]) -> f64 {
    let k: f64 = counts.iter().map(|&c| c as f64).sum();
    let s: f64 = (0..norms.len())
        .map(|m| (counts[m] as f64 * norms[m] - (herm(f, &h[m]) * a[m]).re).abs())
        .sum();
    (dim as f64).sqrt() / k * s
}

/// MSE bound written directly from its definition.
#[allow(clippy::too_many_arguments)]
pub fn mse_bound_ref(
    norms: &[f64],
    counts: &[u64],
    dim: usize,
    h: &[Vec<C64>],
    var: &[f64],
    eps: f64,
    noise: f64,
    f: &[C64],
    a: &[C64],
) -> f64 {
    let k: f64 = counts.iter().map(|&c| c as f64).sum();
    let d = dim as f64;
    let fn2: f64 = f.iter().map(|z| z.norm_sqr()).sum();
    let s: f64 = (0..norms.len())
        .map(|m| (counts[m] as f64 * norms[m] - (herm(f, &h[m]) * a[m]).re).abs())
        .sum();
    let csi: f64 = (0..norms.len()).map(|m| var[m] * a[m].norm_sqr()).sum();
    d / (k * k) * s * s + d * noise * fn2 / (2.0 * k * k) + eps * d * fn2 / (2.0 * k * k) * csi
}
