//! Primal-dual interior point (Mehrotra predictor-corrector) for
//!
//! ```text
//! min  x'Px + c'x
//! s.t. Ax <= b
//!      x'Qx + q'x <= g      (optional, convex)
//! ```
//!
//! Callers are expected to hand in reasonably scaled data; no equilibration
//! happens here.

use nalgebra::{Cholesky, DMatrix, DVector};

pub(crate) struct QuadConstraint {
    pub q: DMatrix<f64>,
    pub lin: DVector<f64>,
    pub bound: f64,
}

pub(crate) struct IpProblem<'a> {
    pub p: &'a DMatrix<f64>,
    pub c: &'a DVector<f64>,
    pub a: &'a DMatrix<f64>,
    pub b: &'a DVector<f64>,
    pub quad: Option<&'a QuadConstraint>,
}

#[derive(Debug, Clone)]
pub(crate) struct IpResult {
    pub x: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Max of the scaled stationarity, primal and gap residuals.
    pub residual: f64,
}

impl IpProblem<'_> {
    fn n(&self) -> usize {
        self.c.len()
    }

    fn m(&self) -> usize {
        self.a.nrows() + usize::from(self.quad.is_some())
    }

    /// Constraint values `F(x)` (feasible iff `F <= 0`) and Jacobian.
    fn constraints(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let (n, m, ml) = (self.n(), self.m(), self.a.nrows());
        let mut f = DVector::zeros(m);
        let mut jac = DMatrix::zeros(m, n);
        if ml > 0 {
            let ax = self.a * x;
            for i in 0..ml {
                f[i] = ax[i] - self.b[i];
            }
            jac.rows_mut(0, ml).copy_from(self.a);
        }
        if let Some(qc) = self.quad {
            let qx = &qc.q * x;
            f[ml] = x.dot(&qx) + qc.lin.dot(x) - qc.bound;
            let g = qx * 2.0 + &qc.lin;
            jac.row_mut(ml).copy_from(&g.transpose());
        }
        (f, jac)
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(self.p * x)) + self.c.dot(x)
    }
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    let mut a = f64::INFINITY;
    for (vi, di) in v.iter().zip(dv.iter()) {
        if *di < 0.0 {
            a = a.min(-vi / di);
        }
    }
    a
}

fn factor(mut k: DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    let n = k.nrows();
    let scale = (0..n).map(|i| k[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..12 {
        if let Some(ch) = Cholesky::new(k.clone()) {
            return Some(ch);
        }
        let next = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
        for i in 0..n {
            k[(i, i)] += next - reg;
        }
        reg = next;
    }
    None
}

pub(crate) fn interior_point(prob: &IpProblem, tol: f64, max_iter: usize) -> IpResult {
    let n = prob.n();
    let m = prob.m();
    let ml = prob.a.nrows();

    if m == 0 {
        // Unconstrained: 2P x = -c.
        let x = match factor(prob.p * 2.0) {
            Some(ch) => ch.solve(&(-prob.c)),
            None => DVector::zeros(n),
        };
        let r = (prob.p * &x * 2.0 + prob.c).amax();
        return IpResult {
            x,
            converged: r <= tol * (1.0 + prob.c.amax()),
            iterations: 1,
            residual: r,
        };
    }

    let mut x = DVector::zeros(n);
    let (f0, _) = prob.constraints(&x);
    let mut s = f0.map(|v| (-v).max(1.0));
    let mut z = DVector::from_element(m, 1.0);
    let c_scale = 1.0 + prob.c.amax();
    let b_scale = 1.0 + if ml > 0 { prob.b.amax() } else { 0.0 };

    let mut residual = f64::INFINITY;
    for it in 0..max_iter {
        let (fx, jac) = prob.constraints(&x);
        let grad = prob.p * &x * 2.0 + prob.c;
        let rd = &grad + jac.transpose() * &z;
        let rp = &fx + &s;
        let gap = s.dot(&z);
        let mu = gap / m as f64;
        let obj = prob.objective(&x);
        residual = (rd.amax() / c_scale)
            .max(rp.amax() / b_scale)
            .max(gap / (1.0 + obj.abs()));
        if residual <= tol {
            return IpResult {
                x,
                converged: true,
                iterations: it,
                residual,
            };
        }
        if z.amax() > 1e14 || !residual.is_finite() {
            break;
        }

        let mut h = prob.p * 2.0;
        if let Some(qc) = prob.quad {
            h += &qc.q * (2.0 * z[ml]);
        }
        let w = z.component_div(&s);
        let mut jw = jac.clone();
        for i in 0..m {
            jw.row_mut(i).scale_mut(w[i]);
        }
        let k = h + jac.transpose() * jw;
        let Some(chol) = factor(k) else { break };

        let direction = |rc: &DVector<f64>| {
            let rc_s = rc.component_div(&s);
            let tmp = w.component_mul(&rp) - &rc_s;
            let rhs = -&rd - jac.transpose() * tmp;
            let dx = chol.solve(&rhs);
            let jdx = &jac * &dx;
            let dz = w.component_mul(&(&jdx + &rp)) - rc_s;
            let ds = -&rp - jdx;
            (dx, ds, dz)
        };

        let rc_aff = s.component_mul(&z);
        let (_, ds_a, dz_a) = direction(&rc_aff);
        let a_aff = max_step(&s, &ds_a).min(max_step(&z, &dz_a)).min(1.0);
        let mu_aff = (&s + &ds_a * a_aff).dot(&(&z + &dz_a * a_aff)) / m as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);
        let rc = rc_aff + ds_a.component_mul(&dz_a) - DVector::from_element(m, sigma * mu);
        let (dx, ds, dz) = direction(&rc);
        let alpha = (0.99 * max_step(&s, &ds).min(max_step(&z, &dz))).min(1.0);

        x += dx * alpha;
        s += ds * alpha;
        z += dz * alpha;
        s.apply(|v| *v = v.max(1e-300));
        z.apply(|v| *v = v.max(1e-300));
    }
    IpResult {
        x,
        converged: false,
        iterations: max_iter,
        residual,
    }
}

/// Phase-1: minimise the largest constraint violation `t` subject to
/// `F(x) <= t`, `t >= -1`. Returns the optimal `t`.
pub(crate) fn phase_one(prob: &IpProblem, tol: f64, max_iter: usize) -> f64 {
    let n = prob.n();
    let ml = prob.a.nrows();
    let reg = 1e-10;
    let mut p = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        p[(i, i)] = reg;
    }
    let mut c = DVector::zeros(n + 1);
    c[n] = 1.0;
    let mut a = DMatrix::zeros(ml + 1, n + 1);
    let mut b = DVector::zeros(ml + 1);
    for i in 0..ml {
        for j in 0..n {
            a[(i, j)] = prob.a[(i, j)];
        }
        a[(i, n)] = -1.0;
        b[i] = prob.b[i];
    }
    a[(ml, n)] = -1.0;
    b[ml] = 1.0;
    let quad = prob.quad.map(|qc| {
        let mut q = DMatrix::zeros(n + 1, n + 1);
        q.view_mut((0, 0), (n, n)).copy_from(&qc.q);
        let mut lin = DVector::zeros(n + 1);
        lin.rows_mut(0, n).copy_from(&qc.lin);
        lin[n] = -1.0;
        QuadConstraint {
            q,
            lin,
            bound: qc.bound,
        }
    });
    let ext = IpProblem {
        p: &p,
        c: &c,
        a: &a,
        b: &b,
        quad: quad.as_ref(),
    };
    let res = interior_point(&ext, tol, max_iter);
    // The max violation of the returned x is a valid upper bound on t*.
    let (fx, _) = prob.constraints(&res.x.rows(0, n).into_owned());
    let viol = fx.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    viol
}
