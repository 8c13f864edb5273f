//! Dense convex QP: `min x'Qx + lin'x  s.t.  A x <= b`.

use nalgebra::{DMatrix, DVector};

use super::ip::{interior_point, phase_one, IpProblem};
use super::{check_len, SolveReport, SolveStatus, SolverError, SolverOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseQp {
    pub quad: DMatrix<f64>,
    pub lin: DVector<f64>,
    pub ineq_a: DMatrix<f64>,
    pub ineq_b: DVector<f64>,
}

impl DenseQp {
    pub fn new(
        quad: DMatrix<f64>,
        lin: DVector<f64>,
        ineq_a: DMatrix<f64>,
        ineq_b: DVector<f64>,
    ) -> Result<Self, SolverError> {
        let p = Self {
            quad,
            lin,
            ineq_a,
            ineq_b,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.lin.len()
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.dim();
        check_len("quad rows", self.quad.nrows(), n)?;
        check_len("quad cols", self.quad.ncols(), n)?;
        check_len("ineq_a cols", self.ineq_a.ncols(), n)?;
        check_len("ineq_b", self.ineq_b.len(), self.ineq_a.nrows())?;
        let scale = self.quad.amax().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (self.quad[(i, j)] - self.quad[(j, i)]).abs() > 1e-12 * scale {
                    return Err(SolverError::Invalid(format!("quad not symmetric at ({i},{j})")));
                }
            }
        }
        let finite = self.quad.iter().chain(self.lin.iter()).chain(self.ineq_a.iter()).all(|v| v.is_finite())
            && self.ineq_b.iter().all(|v| v.is_finite());
        if !finite {
            return Err(SolverError::Invalid("non-finite problem data".into()));
        }
        Ok(())
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.quad * x)) + self.lin.dot(x)
    }

    /// Largest constraint violation `max_i (A x - b)_i`, or `-inf` without rows.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        (&self.ineq_a * x - &self.ineq_b).iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn solve_dense_qp(p: &DenseQp) -> Result<SolveReport, SolverError> {
    solve_dense_qp_with(p, &SolverOptions::default())
}

pub fn solve_dense_qp_with(p: &DenseQp, opts: &SolverOptions) -> Result<SolveReport, SolverError> {
    p.validate()?;
    let m = p.ineq_a.nrows();

    // Row-normalise constraints and scale the objective to unit size.
    let mut a = p.ineq_a.clone();
    let mut b = p.ineq_b.clone();
    for i in 0..m {
        let nrm = a.row(i).norm();
        if nrm > 0.0 {
            a.row_mut(i).scale_mut(1.0 / nrm);
            b[i] /= nrm;
        } else if b[i] < 0.0 {
            return Ok(infeasible(p, 0));
        }
    }
    let keep: Vec<usize> = (0..m).filter(|&i| a.row(i).norm() > 0.0).collect();
    let a = a.select_rows(keep.iter());
    let b = b.select_rows(keep.iter());
    let obj_scale = p.quad.amax().max(p.lin.amax()).max(1e-300);
    let quad = &p.quad / obj_scale;
    let lin = &p.lin / obj_scale;

    let prob = IpProblem {
        p: &quad,
        c: &lin,
        a: &a,
        b: &b,
        quad: None,
    };
    let res = interior_point(&prob, opts.kkt_tol, opts.max_iter);
    if res.converged {
        return Ok(SolveReport {
            status: SolveStatus::Optimal,
            objective: p.objective(&res.x),
            x: res.x.as_slice().to_vec(),
            kkt_residual: res.residual,
            iterations: res.iterations,
        });
    }
    let t = phase_one(&prob, 1e-10, opts.max_iter);
    if t > 1e-7 * (1.0 + b.amax()) {
        return Ok(infeasible(p, res.iterations));
    }
    Ok(SolveReport {
        status: SolveStatus::MaxIter,
        objective: p.objective(&res.x),
        x: res.x.as_slice().to_vec(),
        kkt_residual: res.residual,
        iterations: res.iterations,
    })
}

fn infeasible(p: &DenseQp, iterations: usize) -> SolveReport {
    SolveReport {
        status: SolveStatus::Infeasible,
        objective: f64::NAN,
        x: vec![0.0; p.dim()],
        kkt_residual: f64::INFINITY,
        iterations,
    }
}
