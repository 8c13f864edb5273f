//! `min ||x||^2` over a box and one linear lower-bound constraint.

use super::{check_len, sum_squares, SolveReport, SolveStatus, SolverError, SolverOptions};

/// `min sum x_i^2  s.t.  c.x >= rhs,  lower <= x <= upper`, with `c >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxLinQp {
    pub linear_coeffs: Vec<f64>,
    pub rhs: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxLinQp {
    pub fn new(
        linear_coeffs: Vec<f64>,
        rhs: f64,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self, SolverError> {
        let p = Self {
            linear_coeffs,
            rhs,
            lower,
            upper,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.linear_coeffs.len()
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.dim();
        check_len("lower", self.lower.len(), n)?;
        check_len("upper", self.upper.len(), n)?;
        if !self.rhs.is_finite() && self.rhs != f64::NEG_INFINITY {
            return Err(SolverError::Invalid("rhs must be finite or -inf".into()));
        }
        for i in 0..n {
            let (c, l, u) = (self.linear_coeffs[i], self.lower[i], self.upper[i]);
            if !(c.is_finite() && c >= 0.0) {
                return Err(SolverError::Invalid(format!("coefficient {i} = {c} is not >= 0")));
            }
            if !(l.is_finite() && u.is_finite()) || l > u {
                return Err(SolverError::Invalid(format!("box [{l}, {u}] at index {i}")));
            }
        }
        Ok(())
    }

    fn point(&self, nu: f64) -> Vec<f64> {
        (0..self.dim())
            .map(|i| (0.5 * nu * self.linear_coeffs[i]).clamp(self.lower[i], self.upper[i]))
            .collect()
    }

    fn lhs(&self, x: &[f64]) -> f64 {
        self.linear_coeffs.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

pub fn solve_box_lin_qp(p: &BoxLinQp) -> Result<SolveReport, SolverError> {
    solve_box_lin_qp_with(p, &SolverOptions::default())
}

/// Water-filling on the single multiplier `nu`: `x_i(nu) = clip(nu c_i / 2)`.
pub fn solve_box_lin_qp_with(p: &BoxLinQp, opts: &SolverOptions) -> Result<SolveReport, SolverError> {
    p.validate()?;
    let n = p.dim();
    let scale = p.rhs.abs().max(1.0);

    let x0 = p.point(0.0);
    if p.lhs(&x0) >= p.rhs {
        return Ok(report(p, x0, 0.0, 0));
    }
    let reach = p.lhs(&p.upper);
    if reach < p.rhs - 1e-12 * scale {
        return Ok(SolveReport {
            status: SolveStatus::Infeasible,
            objective: sum_squares(&p.upper),
            x: p.upper.clone(),
            kkt_residual: p.rhs - reach,
            iterations: 0,
        });
    }
    if reach <= p.rhs {
        // Only the upper corner reaches the target.
        return Ok(report(p, p.upper.clone(), nu_at_corner(p), 0));
    }

    // Bracket the root of the monotone residual lhs(x(nu)) - rhs.
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut iters = 0;
    while p.lhs(&p.point(hi)) < p.rhs {
        lo = hi;
        hi *= 2.0;
        iters += 1;
        if iters > 4000 {
            return Err(SolverError::Invalid("multiplier bracket diverged".into()));
        }
    }
    while iters < opts.max_iter.max(200) + 4000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if p.lhs(&p.point(mid)) < p.rhs {
            lo = mid;
        } else {
            hi = mid;
        }
        iters += 1;
    }

    // Polish: recompute nu exactly on the identified free set.
    let nu_b = 0.5 * (lo + hi);
    let mut free_c2 = 0.0;
    let mut clamped = 0.0;
    for i in 0..n {
        let c = p.linear_coeffs[i];
        let v = 0.5 * nu_b * c;
        if c > 0.0 && v > p.lower[i] && v < p.upper[i] {
            free_c2 += c * c;
        } else {
            clamped += c * v.clamp(p.lower[i], p.upper[i]);
        }
    }
    let mut nu = hi;
    if free_c2 > 0.0 {
        let cand = 2.0 * (p.rhs - clamped) / free_c2;
        let x = p.point(cand);
        if cand.is_finite() && (p.lhs(&x) - p.rhs).abs() <= (p.lhs(&p.point(hi)) - p.rhs).abs() {
            nu = cand;
        }
    }
    let mut x = p.point(nu);
    if p.lhs(&x) < p.rhs {
        // Round-off left us a hair short; nudge the free coordinates up.
        let short = p.rhs - p.lhs(&x);
        if free_c2 > 0.0 {
            for i in 0..n {
                let c = p.linear_coeffs[i];
                if c > 0.0 && x[i] > p.lower[i] && x[i] < p.upper[i] {
                    x[i] = (x[i] + short * c / free_c2).min(p.upper[i]);
                }
            }
        }
    }
    Ok(report(p, x, nu, iters))
}

fn nu_at_corner(p: &BoxLinQp) -> f64 {
    (0..p.dim())
        .filter(|&i| p.linear_coeffs[i] > 0.0)
        .map(|i| 2.0 * p.upper[i] / p.linear_coeffs[i])
        .fold(0.0, f64::max)
}

fn report(p: &BoxLinQp, x: Vec<f64>, nu: f64, iterations: usize) -> SolveReport {
    let scale = p.rhs.abs().max(1.0);
    let g = p.lhs(&x) - p.rhs;
    let mut res: f64 = (-g).max(0.0) / scale;
    res = res.max((nu * g).abs() / (scale * (1.0 + nu)));
    for i in 0..p.dim() {
        let target = (0.5 * nu * p.linear_coeffs[i]).clamp(p.lower[i], p.upper[i]);
        res = res.max((x[i] - target).abs() / (1.0 + x[i].abs()));
    }
    SolveReport {
        status: SolveStatus::Optimal,
        objective: sum_squares(&x),
        x,
        kkt_residual: res,
        iterations,
    }
}
