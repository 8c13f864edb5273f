//! Dense small-scale convex solvers.
//!
//! * [`solve_box_lin_qp`] - `min ||x||^2` over a box and one linear
//!   constraint, by water-filling on the single multiplier.
//! * [`solve_dense_qp`] - general dense convex QP with linear inequalities,
//!   primal-dual interior point with a phase-1 infeasibility check.
//! * [`solve_qcqp`] - `min ||x||^2` over a box, one linear and one convex
//!   quadratic constraint.
//! * [`sca_multicast_qos`] - successive convex approximation for the
//!   single-group multicast QoS problem.
//!
//! All entry points are pure functions of their inputs.

mod boxlin;
mod dense_qp;
mod ip;
mod qcqp;
mod sca;

pub use boxlin::{solve_box_lin_qp, solve_box_lin_qp_with, BoxLinQp};
pub use dense_qp::{solve_dense_qp, solve_dense_qp_with, DenseQp};
pub use qcqp::{solve_qcqp, solve_qcqp_with, BoxLinQuadQcqp, QcqpMethod};
pub use sca::{best_scaled_start, sca_multicast_qos, scale_to_feasible, ScaOptions, ScaReport};

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl SolveReport {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative KKT tolerance for declaring optimality.
    pub kkt_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            kkt_tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid problem data: {0}")]
    Invalid(String),
    #[error("subproblem infeasible: {0}")]
    Infeasible(String),
}

pub(crate) fn check_len(what: &str, got: usize, want: usize) -> Result<(), SolverError> {
    if got != want {
        return Err(SolverError::Dimension(format!("{what}: expected {want}, got {got}")));
    }
    Ok(())
}

pub(crate) fn sum_squares(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}
