//! `min ||x||^2` over a box, one linear lower bound and one convex
//! quadratic constraint `x'Qx + q'x <= g`.

use nalgebra::{DMatrix, DVector};

use super::boxlin::{solve_box_lin_qp_with, BoxLinQp};
use super::ip::{interior_point, phase_one, IpProblem, QuadConstraint};
use super::{check_len, sum_squares, SolveReport, SolveStatus, SolverError, SolverOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct BoxLinQuadQcqp {
    pub linear_coeffs: Vec<f64>,
    pub linear_rhs: f64,
    pub quad: DMatrix<f64>,
    pub quad_lin: Vec<f64>,
    /// `+inf` disables the quadratic constraint.
    pub quad_bound: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Which algorithm produced a [`solve_qcqp_with`] answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QcqpMethod {
    /// Quadratic constraint inactive; the box-linear solution was returned.
    BoxLin,
    Bisection,
    InteriorPoint,
}

impl BoxLinQuadQcqp {
    pub fn dim(&self) -> usize {
        self.linear_coeffs.len()
    }

    pub fn embedded(&self) -> BoxLinQp {
        BoxLinQp {
            linear_coeffs: self.linear_coeffs.clone(),
            rhs: self.linear_rhs,
            lower: self.lower.clone(),
            upper: self.upper.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.dim();
        self.embedded().validate()?;
        check_len("quad rows", self.quad.nrows(), n)?;
        check_len("quad cols", self.quad.ncols(), n)?;
        check_len("quad_lin", self.quad_lin.len(), n)?;
        if self.quad_bound.is_nan() {
            return Err(SolverError::Invalid("quadratic bound is NaN".into()));
        }
        let scale = self.quad.amax().max(1e-300);
        for i in 0..n {
            for j in 0..i {
                if (self.quad[(i, j)] - self.quad[(j, i)]).abs() > 1e-12 * scale {
                    return Err(SolverError::Invalid("quadratic matrix not symmetric".into()));
                }
            }
        }
        let min_eig = self.quad.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-10 * scale {
            return Err(SolverError::Invalid(format!("quadratic matrix not PSD (eig {min_eig})")));
        }
        Ok(())
    }

    pub fn quad_value(&self, x: &[f64]) -> f64 {
        let v = DVector::from_column_slice(x);
        v.dot(&(&self.quad * &v)) + self.quad_lin.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.quad[(i, j)] == 0.0))
    }

    fn quad_tol(&self) -> f64 {
        1e-12 * self.quad_bound.abs().max(1e-300)
    }
}

pub fn solve_qcqp(p: &BoxLinQuadQcqp) -> Result<SolveReport, SolverError> {
    solve_qcqp_with(p, &SolverOptions::default()).map(|(r, _)| r)
}

pub fn solve_qcqp_with(
    p: &BoxLinQuadQcqp,
    opts: &SolverOptions,
) -> Result<(SolveReport, QcqpMethod), SolverError> {
    p.validate()?;
    let base = solve_box_lin_qp_with(&p.embedded(), opts)?;
    if p.quad_bound == f64::INFINITY {
        return Ok((base, QcqpMethod::BoxLin));
    }
    if base.status == SolveStatus::Infeasible {
        return Ok((base, QcqpMethod::BoxLin));
    }
    if p.quad_value(&base.x) <= p.quad_bound {
        return Ok((base, QcqpMethod::BoxLin));
    }
    if p.is_diagonal() {
        if let Some(r) = nested_bisection(p, opts) {
            return Ok((r, QcqpMethod::Bisection));
        }
    }
    Ok((interior(p, opts), QcqpMethod::InteriorPoint))
}

/// Inner problem for fixed quadratic multiplier `lam`, diagonal `Q`:
/// `x_i = clip((nu c_i - lam q_i) / (2 (1 + lam Q_ii)))` with `nu` the
/// smallest multiplier meeting the linear constraint.
fn inner(p: &BoxLinQuadQcqp, lam: f64) -> Option<(Vec<f64>, f64)> {
    let n = p.dim();
    let point = |nu: f64| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let v = (nu * p.linear_coeffs[i] - lam * p.quad_lin[i]) / (2.0 * (1.0 + lam * p.quad[(i, i)]));
                v.clamp(p.lower[i], p.upper[i])
            })
            .collect()
    };
    let lhs = |x: &[f64]| -> f64 { p.linear_coeffs.iter().zip(x).map(|(c, v)| c * v).sum() };
    let x0 = point(0.0);
    if lhs(&x0) >= p.linear_rhs {
        return Some((x0, 0.0));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut k = 0;
    while lhs(&point(hi)) < p.linear_rhs {
        lo = hi;
        hi *= 2.0;
        k += 1;
        if k > 2000 {
            return None;
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if lhs(&point(mid)) < p.linear_rhs {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some((point(hi), hi))
}

fn nested_bisection(p: &BoxLinQuadQcqp, opts: &SolverOptions) -> Option<SolveReport> {
    let g = p.quad_bound;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut iters = 0;
    loop {
        let (x, _) = inner(p, hi)?;
        if p.quad_value(&x) <= g {
            break;
        }
        lo = hi;
        hi *= 4.0;
        iters += 1;
        if hi > 1e30 {
            return None;
        }
    }
    for _ in 0..4000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (x, _) = inner(p, mid)?;
        if p.quad_value(&x) <= g {
            hi = mid;
        } else {
            lo = mid;
        }
        iters += 1;
    }
    let (x, nu) = inner(p, hi)?;
    let lhs: f64 = p.linear_coeffs.iter().zip(&x).map(|(c, v)| c * v).sum();
    let qv = p.quad_value(&x);
    if lhs < p.linear_rhs - 1e-12 * p.linear_rhs.abs().max(1.0) || qv > g + p.quad_tol() {
        return None;
    }
    let scale = g.abs().max(1e-300);
    let comp_q = hi * (g - qv).abs() / (scale * (1.0 + hi));
    let comp_l = nu * (lhs - p.linear_rhs).abs() / (p.linear_rhs.abs().max(1.0) * (1.0 + nu));
    let kkt = comp_q.max(comp_l);
    if kkt > opts.kkt_tol {
        return None;
    }
    Some(SolveReport {
        status: SolveStatus::Optimal,
        objective: sum_squares(&x),
        x,
        kkt_residual: kkt,
        iterations: iters,
    })
}

/// Interior point on the variable-scaled problem `x = D y`.
fn interior(p: &BoxLinQuadQcqp, opts: &SolverOptions) -> SolveReport {
    let n = p.dim();
    let d: Vec<f64> = (0..n)
        .map(|i| p.lower[i].abs().max(p.upper[i].abs()).max(1e-300))
        .collect();
    let dmat = DMatrix::from_diagonal(&DVector::from_column_slice(&d));
    let obj_scale = d.iter().map(|v| v * v).fold(0.0, f64::max);
    let pmat = &dmat * &dmat / obj_scale;
    let c = DVector::zeros(n);

    // Rows: linear (-c'D y <= -rhs), upper, lower.
    let mut a = DMatrix::zeros(1 + 2 * n, n);
    let mut b = DVector::zeros(1 + 2 * n);
    let cn: f64 = (0..n).map(|i| (p.linear_coeffs[i] * d[i]).powi(2)).sum::<f64>().sqrt().max(1e-300);
    for i in 0..n {
        a[(0, i)] = -p.linear_coeffs[i] * d[i] / cn;
        a[(1 + i, i)] = 1.0;
        b[1 + i] = p.upper[i] / d[i];
        a[(1 + n + i, i)] = -1.0;
        b[1 + n + i] = -p.lower[i] / d[i];
    }
    b[0] = -p.linear_rhs / cn;
    let qs = &dmat * &p.quad * &dmat;
    let ql = DVector::from_iterator(n, (0..n).map(|i| p.quad_lin[i] * d[i]));
    let qscale = qs.amax().max(ql.amax()).max(p.quad_bound.abs()).max(1e-300);
    let qc = QuadConstraint {
        q: qs / qscale,
        lin: ql / qscale,
        bound: p.quad_bound / qscale,
    };
    let prob = IpProblem {
        p: &pmat,
        c: &c,
        a: &a,
        b: &b,
        quad: Some(&qc),
    };
    let res = interior_point(&prob, opts.kkt_tol, opts.max_iter);
    let x: Vec<f64> = (0..n).map(|i| (res.x[i] * d[i]).clamp(p.lower[i], p.upper[i])).collect();
    if res.converged {
        return SolveReport {
            status: SolveStatus::Optimal,
            objective: sum_squares(&x),
            x,
            kkt_residual: res.residual,
            iterations: res.iterations,
        };
    }
    let t = phase_one(&prob, 1e-10, opts.max_iter);
    let status = if t > 1e-8 {
        SolveStatus::Infeasible
    } else {
        SolveStatus::MaxIter
    };
    SolveReport {
        status,
        objective: sum_squares(&x),
        x,
        kkt_residual: res.residual,
        iterations: res.iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(quad: DMatrix<f64>, bound: f64) -> BoxLinQuadQcqp {
        BoxLinQuadQcqp {
            linear_coeffs: vec![1.0, 1.0],
            linear_rhs: 1.0,
            quad,
            quad_lin: vec![0.0, 0.0],
            quad_bound: bound,
            lower: vec![0.0, 0.0],
            upper: vec![2.0, 2.0],
        }
    }

    #[test]
    fn infinite_bound_matches_box_lin() {
        let p = problem(DMatrix::identity(2, 2), f64::INFINITY);
        let (r, m) = solve_qcqp_with(&p, &SolverOptions::default()).unwrap();
        let b = solve_box_lin_qp_with(&p.embedded(), &SolverOptions::default()).unwrap();
        assert_eq!(m, QcqpMethod::BoxLin);
        assert_eq!(r.x, b.x);
    }

    #[test]
    fn active_diagonal_constraint() {
        // Weighted constraint 4 x1^2 <= 0.04 pushes mass to x2.
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.0]));
        let p = problem(q, 0.04);
        let (r, m) = solve_qcqp_with(&p, &SolverOptions::default()).unwrap();
        assert_eq!(m, QcqpMethod::Bisection);
        assert!((r.x[0] - 0.1).abs() < 1e-7, "{:?}", r.x);
        assert!((r.x[1] - 0.9).abs() < 1e-7);
    }

    #[test]
    fn dense_constraint_uses_interior_point() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.3]);
        let p = problem(q, 0.35);
        let (r, m) = solve_qcqp_with(&p, &SolverOptions::default()).unwrap();
        assert_eq!(m, QcqpMethod::InteriorPoint);
        assert!(r.is_optimal());
        assert!(p.quad_value(&r.x) <= 0.35 * (1.0 + 1e-7));
        assert!(r.x[0] + r.x[1] >= 1.0 - 1e-8);
    }

    #[test]
    fn zero_box() {
        let mut p = problem(DMatrix::identity(2, 2), 1.0);
        p.upper = vec![0.0, 0.0];
        assert_eq!(solve_qcqp(&p).unwrap().status, SolveStatus::Infeasible);
        p.linear_rhs = 0.0;
        let r = solve_qcqp(&p).unwrap();
        assert!(r.is_optimal());
        assert_eq!(r.x, vec![0.0, 0.0]);
    }
}
