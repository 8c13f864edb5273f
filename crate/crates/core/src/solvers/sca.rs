//! Successive convex approximation for the single-group multicast QoS
//! problem `min ||f||^2  s.t.  |f^H h_m|^2 >= t_m`.
//!
//! Each step replaces the nonconvex constraint by its tangent lower bound
//! `2 Re{c_m^* h_m^H f} - |c_m|^2 >= t_m` with `c_m = h_m^H f_k`, which makes
//! the subproblem a projection of the origin onto a polyhedron.

use nalgebra::{DMatrix, DVector};

use super::dense_qp::{solve_dense_qp_with, DenseQp};
use super::{SolveStatus, SolverError, SolverOptions};
use crate::cplx::{inner, norm_sqr, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaOptions {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub qp: SolverOptions,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            rel_tol: 1e-6,
            qp: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScaReport {
    pub f: Vec<C64>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Objective after each accepted iterate, starting with the scaled init.
    pub trace: Vec<f64>,
}

/// Scales `f` so that every constraint holds, with at least one tight.
/// Returns `None` when some device with a positive target sees `f^H h = 0`.
pub fn scale_to_feasible(channels: &[Vec<C64>], targets: &[f64], f: &[C64]) -> Option<Vec<C64>> {
    let mut s2: f64 = 0.0;
    for (h, &t) in channels.iter().zip(targets) {
        if t <= 0.0 {
            continue;
        }
        let g = inner(f, h).norm_sqr();
        if g <= 0.0 || !g.is_finite() {
            return None;
        }
        s2 = s2.max(t / g);
    }
    let s = s2.sqrt();
    Some(f.iter().map(|z| z * s).collect())
}

/// Picks the candidate with the smallest norm once scaled to feasibility.
pub fn best_scaled_start(channels: &[Vec<C64>], targets: &[f64], candidates: &[Vec<C64>]) -> Option<Vec<C64>> {
    candidates
        .iter()
        .filter_map(|c| scale_to_feasible(channels, targets, c))
        .min_by(|a, b| norm_sqr(a).total_cmp(&norm_sqr(b)))
}

pub fn sca_multicast_qos(
    channels: &[Vec<C64>],
    targets: &[f64],
    init: &[C64],
    opts: &ScaOptions,
) -> Result<ScaReport, SolverError> {
    let m = channels.len();
    let n = init.len();
    if targets.len() != m {
        return Err(SolverError::Dimension(format!("{} targets for {m} channels", targets.len())));
    }
    if channels.iter().any(|h| h.len() != n) {
        return Err(SolverError::Dimension("channel length differs from init".into()));
    }
    if targets.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(SolverError::Invalid("targets must be finite and >= 0".into()));
    }
    let t_max = targets.iter().cloned().fold(0.0, f64::max);
    if t_max == 0.0 {
        return Ok(ScaReport {
            f: vec![C64::new(0.0, 0.0); n],
            objective: 0.0,
            converged: true,
            iterations: 0,
            trace: vec![0.0],
        });
    }
    let active: Vec<usize> = (0..m).filter(|&i| targets[i] > 0.0).collect();
    let h_max = active.iter().map(|&i| norm_sqr(&channels[i]).sqrt()).fold(0.0, f64::max);
    if active.iter().any(|&i| norm_sqr(&channels[i]) == 0.0) {
        return Err(SolverError::Infeasible("zero channel with positive target".into()));
    }

    // Work in normalised units: h' = h / h_max, t' = t / t_max, f = f' sqrt(t_max) / h_max.
    let hs: Vec<Vec<C64>> = active
        .iter()
        .map(|&i| channels[i].iter().map(|z| z / h_max).collect())
        .collect();
    let ts: Vec<f64> = active.iter().map(|&i| targets[i] / t_max).collect();
    let unit = t_max.sqrt() / h_max;

    let start: Vec<C64> = init.iter().map(|z| z / unit).collect();
    let mut f = scale_to_feasible(&hs, &ts, &start)
        .ok_or_else(|| SolverError::Invalid("init orthogonal to a channel with positive target".into()))?;
    let mut obj = norm_sqr(&f);
    let mut trace = vec![obj * unit * unit];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..opts.max_iter {
        iterations += 1;
        let k = hs.len();
        let mut a = DMatrix::zeros(k, 2 * n);
        let mut b = DVector::zeros(k);
        for (row, (h, &t)) in hs.iter().zip(&ts).enumerate() {
            // c = h^H f_k; coefficient of (Re f_i, Im f_i) is 2 (Re, Im)(c h_i).
            let c = inner(h, &f);
            for i in 0..n {
                let ch = c * h[i];
                a[(row, i)] = -2.0 * ch.re;
                a[(row, n + i)] = -2.0 * ch.im;
            }
            b[row] = -(t + c.norm_sqr());
        }
        let qp = DenseQp {
            quad: DMatrix::identity(2 * n, 2 * n),
            lin: DVector::zeros(2 * n),
            ineq_a: a,
            ineq_b: b,
        };
        let rep = solve_dense_qp_with(&qp, &opts.qp)?;
        if rep.status == SolveStatus::Infeasible {
            return Err(SolverError::Infeasible("linearised multicast subproblem".into()));
        }
        let cand: Vec<C64> = (0..n).map(|i| C64::new(rep.x[i], rep.x[n + i])).collect();
        let Some(cand) = scale_to_feasible(&hs, &ts, &cand) else { break };
        let cand_obj = norm_sqr(&cand);
        if !(cand_obj < obj) {
            converged = true;
            break;
        }
        let rel = (obj - cand_obj) / obj;
        f = cand;
        obj = cand_obj;
        trace.push(obj * unit * unit);
        if rel < opts.rel_tol {
            converged = true;
            break;
        }
    }

    let f_out: Vec<C64> = f.iter().map(|z| z * unit).collect();
    Ok(ScaReport {
        objective: norm_sqr(&f_out),
        f: f_out,
        converged,
        iterations,
        trace,
    })
}
