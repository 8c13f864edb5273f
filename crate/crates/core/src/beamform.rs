//! Per-round joint transmit/receive beamforming that minimises the sum
//! transmit power subject to the bias and MSE budgets.
//!
//! The problem is bi-convex: for fixed `f` the transmit weights solve a
//! water-filling QP (a QCQP under imperfect CSI), for fixed `a` the receive
//! vector solves a dense QP. [`optimize_round`] alternates the two starting
//! from a multicast-QoS receive vector and finishes with a closed-form
//! rescaling of `(f, a)` that spends any leftover MSE budget.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::airlink::BeamformingSolution;
use crate::bounds::{bias_bound, csi_term, mse_bound, noise_term, Branch, RoundContext};
use crate::cplx::{conj_phase, inner, norm_sqr, C64};
use crate::rng::{complex_gaussian_vec, stream, tags};
use crate::solvers::{
    best_scaled_start, sca_multicast_qos, scale_to_feasible, solve_box_lin_qp_with, solve_dense_qp_with,
    solve_qcqp_with, BoxLinQp, BoxLinQuadQcqp, DenseQp, ScaOptions, SolveReport, SolveStatus, SolverError,
    SolverOptions,
};

/// Number of seeded Gaussian candidates tried as SCA starting points.
const SCA_CANDIDATES: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoConfig {
    pub max_outer_iters: usize,
    pub rel_obj_tol: f64,
    pub scaling_enabled: bool,
    pub feasibility_retry_budget: usize,
    pub sca: ScaOptions,
    pub qp: SolverOptions,
}

impl Default for AoConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 30,
            rel_obj_tol: 1e-5,
            scaling_enabled: true,
            feasibility_retry_budget: 20,
            sca: ScaOptions::default(),
            qp: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeamformError {
    /// No feasible point found; `init_f` is the receive vector to fall back on.
    #[error("round infeasible at {stage}")]
    Infeasible { stage: &'static str, init_f: Vec<C64> },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoRecord {
    pub sum_power: f64,
    pub bias_bound: f64,
    pub mse_bound: f64,
    /// Budget constraint(s) active at this iterate, if any.
    pub branch: Option<Branch>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AoStatus {
    Converged,
    MaxIter,
    /// Stopped early because a subproblem failed or did not improve.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoTrace {
    /// One record after every transmit step.
    pub records: Vec<AoRecord>,
    pub p_scale: f64,
    pub status: AoStatus,
    pub sca_iterations: usize,
}

impl AoTrace {
    pub fn outer_iters(&self) -> usize {
        self.records.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitReport {
    pub f: Vec<C64>,
    pub feasible: bool,
    pub attempts: usize,
    pub sca_iterations: usize,
}

/// Constraint set shared by the power-minimising optimizer and the
/// bounded-MSE baseline.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Budgets {
    pub bias_cap: Option<f64>,
    pub mse_cap: f64,
}

impl Budgets {
    pub fn of(ctx: &RoundContext) -> Self {
        Self {
            bias_cap: Some(ctx.bias_budget()),
            mse_cap: ctx.mse_budget(),
        }
    }
}

fn active_devices(ctx: &RoundContext) -> Vec<usize> {
    (0..ctx.num_devices()).filter(|&m| ctx.norms[m] > 0.0).collect()
}

fn zeros(n: usize) -> Vec<C64> {
    vec![C64::new(0.0, 0.0); n]
}

/// Multicast QoS receive vector: `min ||f||^2 s.t. |f^H h_m|^2 >= lambda_m^2 / P0`.
pub fn qos_receive(ctx: &RoundContext, cfg: &AoConfig) -> Result<(Vec<C64>, usize), SolverError> {
    let n = ctx.num_antennas();
    let targets: Vec<f64> = (0..ctx.num_devices())
        .map(|m| ctx.lambda(m).powi(2) / ctx.power_cap)
        .collect();
    if targets.iter().all(|t| *t == 0.0) {
        return Ok((zeros(n), 0));
    }
    let candidates: Vec<Vec<C64>> = (0..SCA_CANDIDATES)
        .map(|i| complex_gaussian_vec(&mut stream(ctx.seed, tags::INIT, i), n, 1.0))
        .collect();
    let start = best_scaled_start(&ctx.channels, &targets, &candidates)
        .ok_or_else(|| SolverError::Infeasible("no usable SCA starting point".into()))?;
    let rep = sca_multicast_qos(&ctx.channels, &targets, &start, &cfg.sca)?;
    Ok((rep.f, rep.iterations))
}

/// Noise power seen by the init check; under imperfect CSI the estimation
/// term is bounded using `|a_m|^2 <= P0`.
fn init_noise_power(ctx: &RoundContext) -> f64 {
    ctx.noise_var + ctx.csi_error * ctx.power_cap * ctx.variances.iter().sum::<f64>()
}

fn init_ok(ctx: &RoundContext, f: &[C64], mse_cap: f64) -> bool {
    ctx.d_over_k2() * init_noise_power(ctx) * norm_sqr(f) / 2.0 <= mse_cap
}

pub(crate) fn init_receive_with(ctx: &RoundContext, cfg: &AoConfig, mse_cap: f64) -> Result<InitReport, SolverError> {
    let n = ctx.num_antennas();
    let (f, sca_iterations) = qos_receive(ctx, cfg)?;
    if init_ok(ctx, &f, mse_cap) {
        return Ok(InitReport {
            f,
            feasible: true,
            attempts: 0,
            sca_iterations,
        });
    }
    let targets: Vec<f64> = (0..ctx.num_devices())
        .map(|m| ctx.lambda(m).powi(2) / ctx.power_cap)
        .collect();
    let mut best = f;
    for attempt in 0..cfg.feasibility_retry_budget {
        let draw = complex_gaussian_vec(&mut stream(ctx.seed, tags::INIT, 1000 + attempt as u64), n, 1.0);
        let Some(cand) = scale_to_feasible(&ctx.channels, &targets, &draw) else {
            continue;
        };
        if init_ok(ctx, &cand, mse_cap) {
            return Ok(InitReport {
                f: cand,
                feasible: true,
                attempts: attempt + 1,
                sca_iterations,
            });
        }
        if norm_sqr(&cand) < norm_sqr(&best) {
            best = cand;
        }
    }
    Ok(InitReport {
        f: best,
        feasible: false,
        attempts: cfg.feasibility_retry_budget,
        sca_iterations,
    })
}

/// Initial receive vector plus a flag telling whether it admits a feasible
/// transmit design.
pub fn init_receive(ctx: &RoundContext, cfg: &AoConfig) -> Result<InitReport, SolverError> {
    init_receive_with(ctx, cfg, ctx.mse_budget())
}

#[derive(Debug, Clone)]
pub struct StepReport {
    pub solve: SolveReport,
}

fn infeasible(stage: &'static str, f: &[C64]) -> BeamformError {
    BeamformError::Infeasible {
        stage,
        init_f: f.to_vec(),
    }
}

pub(crate) fn transmit_core(
    ctx: &RoundContext,
    f: &[C64],
    budgets: Budgets,
    opts: &SolverOptions,
) -> Result<(Vec<C64>, StepReport), BeamformError> {
    let act = active_devices(ctx);
    let proj: Vec<C64> = ctx.channels.iter().map(|h| inner(f, h)).collect();
    let gains: Vec<f64> = act.iter().map(|&m| proj[m].norm()).collect();
    let lambdas: Vec<f64> = act.iter().map(|&m| ctx.lambda(m)).collect();
    let lambda_sum: f64 = lambdas.iter().sum();
    let sqrt_p0 = ctx.power_cap.sqrt();
    let upper: Vec<f64> = gains
        .iter()
        .zip(&lambdas)
        .map(|(&c, &l)| if c > 0.0 { sqrt_p0.min(l / c) } else { 0.0 })
        .collect();
    let lower = vec![0.0; act.len()];
    let k_over_sqrt_d = 1.0 / ctx.sqrt_d_over_k();
    let noise = noise_term(ctx, f);

    let solve = if ctx.csi_error == 0.0 {
        let radicand = budgets.mse_cap - noise;
        if radicand < 0.0 {
            return Err(infeasible("transmit", f));
        }
        let mse_side = radicand.sqrt();
        let r_t = budgets.bias_cap.map_or(mse_side, |b| b.min(mse_side));
        let qp = BoxLinQp {
            linear_coeffs: gains.clone(),
            rhs: lambda_sum - r_t * k_over_sqrt_d,
            lower,
            upper,
        };
        solve_box_lin_qp_with(&qp, opts)?
    } else {
        let dk2 = ctx.d_over_k2();
        let kappa = ctx.csi_error * dk2 * norm_sqr(f) / 2.0;
        let na = act.len();
        let mut quad = DMatrix::zeros(na, na);
        for i in 0..na {
            for j in 0..na {
                quad[(i, j)] = dk2 * gains[i] * gains[j];
            }
            quad[(i, i)] += kappa * ctx.variances[act[i]];
        }
        let qp = BoxLinQuadQcqp {
            linear_coeffs: gains.clone(),
            linear_rhs: budgets
                .bias_cap
                .map_or(f64::NEG_INFINITY, |b| lambda_sum - b * k_over_sqrt_d),
            quad,
            quad_lin: gains.iter().map(|c| -2.0 * dk2 * lambda_sum * c).collect(),
            quad_bound: budgets.mse_cap - noise - dk2 * lambda_sum * lambda_sum,
            lower,
            upper,
        };
        solve_qcqp_with(&qp, opts)?.0
    };
    match solve.status {
        SolveStatus::Optimal => {}
        SolveStatus::MaxIter if !solve.x.iter().any(|v| !v.is_finite()) => {}
        _ => return Err(infeasible("transmit", f)),
    }

    let mut a = zeros(ctx.num_devices());
    for (i, &m) in act.iter().enumerate() {
        let b = solve.x[i].clamp(0.0, sqrt_p0);
        if b > 0.0 {
            a[m] = conj_phase(proj[m]) * b;
        }
    }
    Ok((a, StepReport { solve }))
}

/// Transmit weights for fixed `f`: magnitudes from the water-filling QP
/// (QCQP when `eps > 0`), phases `-angle(f^H h_m)`.
pub fn transmit_step(ctx: &RoundContext, f: &[C64], cfg: &AoConfig) -> Result<(Vec<C64>, StepReport), BeamformError> {
    transmit_core(ctx, f, Budgets::of(ctx), &cfg.qp)
}

/// `s2 + eps * sum sigma_m^2 |a_m|^2`, the noise power the receive
/// objective weighs `||f||^2` with.
fn effective_noise(ctx: &RoundContext, a: &[C64]) -> f64 {
    let csi: f64 = ctx.variances.iter().zip(a).map(|(s, am)| s * am.norm_sqr()).sum();
    ctx.noise_var + ctx.csi_error * csi
}

pub(crate) fn receive_core(
    ctx: &RoundContext,
    a: &[C64],
    bias_cap: Option<f64>,
    opts: &SolverOptions,
) -> Result<(Vec<C64>, StepReport), BeamformError> {
    let n = ctx.num_antennas();
    let act = active_devices(ctx);
    let na = act.len();
    let lambda_sum: f64 = act.iter().map(|&m| ctx.lambda(m)).sum();
    let w: Vec<Vec<C64>> = act.iter().map(|&m| ctx.channels[m].iter().map(|h| h * a[m]).collect()).collect();
    let nonzero: Vec<f64> = w.iter().map(|v| norm_sqr(v)).filter(|v| *v > 0.0).collect();
    if nonzero.is_empty() {
        // Nothing is transmitted; f only adds noise.
        let bias = ctx.sqrt_d_over_k() * lambda_sum;
        if bias_cap.is_some_and(|cap| bias > cap) {
            return Err(infeasible("receive", &zeros(n)));
        }
        let solve = SolveReport {
            status: SolveStatus::Optimal,
            objective: 0.0,
            x: vec![],
            kkt_residual: 0.0,
            iterations: 0,
        };
        return Ok((zeros(n), StepReport { solve }));
    }
    let omega = (nonzero.iter().sum::<f64>() / nonzero.len() as f64).sqrt();

    // Variables y = [Re xi, Im xi, rho]; f = (Lambda / omega) xi, r = Lambda rho.
    let dim = 2 * n + na;
    let rows = 2 * na + usize::from(bias_cap.is_some());
    let mut quad = DMatrix::zeros(dim, dim);
    let weight = effective_noise(ctx, a) / (2.0 * omega * omega);
    for i in 0..2 * n {
        quad[(i, i)] = weight;
    }
    for i in 0..na {
        for j in 0..na {
            quad[(2 * n + i, 2 * n + j)] = 1.0;
        }
    }
    let mut ineq_a = DMatrix::zeros(rows, dim);
    let mut ineq_b = DVector::zeros(rows);
    for (i, &m) in act.iter().enumerate() {
        let lam = ctx.lambda(m) / lambda_sum;
        for j in 0..n {
            let (wr, wi) = (w[i][j].re / omega, w[i][j].im / omega);
            ineq_a[(2 * i, j)] = -wr;
            ineq_a[(2 * i, n + j)] = -wi;
            ineq_a[(2 * i + 1, j)] = wr;
            ineq_a[(2 * i + 1, n + j)] = wi;
        }
        ineq_a[(2 * i, 2 * n + i)] = -1.0;
        ineq_a[(2 * i + 1, 2 * n + i)] = -1.0;
        ineq_b[2 * i] = -lam;
        ineq_b[2 * i + 1] = lam;
    }
    if let Some(cap) = bias_cap {
        for i in 0..na {
            ineq_a[(2 * na, 2 * n + i)] = 1.0;
        }
        ineq_b[2 * na] = cap / (ctx.sqrt_d_over_k() * lambda_sum);
    }
    let qp = DenseQp {
        quad,
        lin: DVector::zeros(dim),
        ineq_a,
        ineq_b,
    };
    let solve = solve_dense_qp_with(&qp, opts)?;
    if solve.status == SolveStatus::Infeasible {
        return Err(infeasible("receive", &zeros(n)));
    }
    let unit = lambda_sum / omega;
    let f = (0..n).map(|j| C64::new(solve.x[j], solve.x[n + j]) * unit).collect();
    Ok((f, StepReport { solve }))
}

/// Receive vector for fixed `a`: minimise the MSE bound subject to the
/// bias budget.
pub fn receive_step(ctx: &RoundContext, a: &[C64], cfg: &AoConfig) -> Result<(Vec<C64>, StepReport), BeamformError> {
    receive_core(ctx, a, Some(ctx.bias_budget()), &cfg.qp)
}

/// Relative slack used to decide whether a budget constraint is active.
const ACTIVE_TOL: f64 = 1e-6;

pub(crate) fn record(ctx: &RoundContext, f: &[C64], a: &[C64], budgets: Budgets) -> AoRecord {
    let bias = bias_bound(ctx, f, a);
    let mse = mse_bound(ctx, f, a);
    let bias_active = budgets.bias_cap.is_some_and(|cap| bias >= cap * (1.0 - ACTIVE_TOL));
    let mse_active = mse >= budgets.mse_cap * (1.0 - ACTIVE_TOL);
    let branch = match (bias_active, mse_active) {
        (true, true) => Some(Branch::Both),
        (true, false) => Some(Branch::Bias),
        (false, true) => Some(Branch::Mse),
        _ => None,
    };
    AoRecord {
        sum_power: norm_sqr(a),
        bias_bound: bias,
        mse_bound: mse,
        branch,
    }
}

/// Closed-form rescaling `f <- p f`, `a <- a / p` that makes the MSE budget
/// tight when only the bias budget is active. Returns `p = 1` when it does
/// not apply.
pub fn final_scale(ctx: &RoundContext, f: &[C64], a: &[C64]) -> (Vec<C64>, Vec<C64>, f64) {
    let unchanged = || (f.to_vec(), a.to_vec(), 1.0);
    let b = ctx.budget;
    let noise = noise_term(ctx, f);
    if noise <= 0.0 {
        return unchanged();
    }
    // With perfect CSI this is the bias branch of R_t being the binding one.
    if bias_bound(ctx, f, a) < ctx.bias_budget() * (1.0 - ACTIVE_TOL) {
        return unchanged();
    }
    let zeta = csi_term(ctx, f, a);
    let radicand = (b.delta - b.alpha * b.alpha) * ctx.v_t * ctx.v_t + b.beta - zeta;
    if !(radicand > 0.0) {
        return unchanged();
    }
    let p = (radicand / noise).sqrt();
    if !(p > 1.0 && p.is_finite()) {
        return unchanged();
    }
    (f.iter().map(|z| z * p).collect(), a.iter().map(|z| z / p).collect(), p)
}

/// Alternating optimisation shared with the bounded-MSE baseline.
pub(crate) fn alternate(
    ctx: &RoundContext,
    cfg: &AoConfig,
    budgets: Budgets,
    f0: Vec<C64>,
) -> Result<(Vec<C64>, Vec<C64>, Vec<AoRecord>, AoStatus), BeamformError> {
    let (mut a, _) = transmit_core(ctx, &f0, budgets, &cfg.qp).map_err(|e| with_init(e, &f0))?;
    let mut f = f0;
    let mut records = vec![record(ctx, &f, &a, budgets)];
    let mut status = AoStatus::MaxIter;
    for _ in 1..cfg.max_outer_iters {
        let power = norm_sqr(&a);
        if power == 0.0 {
            status = AoStatus::Converged;
            break;
        }
        let Ok((f_new, _)) = receive_core(ctx, &a, budgets.bias_cap, &cfg.qp) else {
            status = AoStatus::Stalled;
            break;
        };
        let Ok((a_new, _)) = transmit_core(ctx, &f_new, budgets, &cfg.qp) else {
            status = AoStatus::Stalled;
            break;
        };
        let new_power = norm_sqr(&a_new);
        if !(new_power <= power) {
            status = AoStatus::Stalled;
            break;
        }
        f = f_new;
        a = a_new;
        records.push(record(ctx, &f, &a, budgets));
        if (power - new_power) / power < cfg.rel_obj_tol {
            status = AoStatus::Converged;
            break;
        }
    }
    Ok((f, a, records, status))
}

fn with_init(e: BeamformError, f0: &[C64]) -> BeamformError {
    match e {
        BeamformError::Infeasible { stage, .. } => BeamformError::Infeasible {
            stage,
            init_f: f0.to_vec(),
        },
        other => other,
    }
}

/// One round of the power-minimising design. With `ctx.csi_error > 0` the
/// imperfect-CSI variant is used; `ctx.channels` must then hold estimates.
pub fn optimize_round(ctx: &RoundContext, cfg: &AoConfig) -> Result<(BeamformingSolution, AoTrace), BeamformError> {
    let n = ctx.num_antennas();
    if active_devices(ctx).is_empty() {
        let sol = BeamformingSolution::new(zeros(n), zeros(ctx.num_devices()));
        let rec = record(ctx, &sol.receive, &sol.weights, Budgets::of(ctx));
        let trace = AoTrace {
            records: vec![rec],
            p_scale: 1.0,
            status: AoStatus::Converged,
            sca_iterations: 0,
        };
        return Ok((sol, trace));
    }
    let init = init_receive(ctx, cfg)?;
    if !init.feasible {
        return Err(infeasible("init", &init.f));
    }
    let (f, a, records, status) = alternate(ctx, cfg, Budgets::of(ctx), init.f)?;
    let (f, a, p_scale) = if cfg.scaling_enabled {
        final_scale(ctx, &f, &a)
    } else {
        (f, a, 1.0)
    };
    let trace = AoTrace {
        records,
        p_scale,
        status,
        sca_iterations: init.sca_iterations,
    };
    Ok((BeamformingSolution::new(f, a), trace))
}

/// Zero-forcing weights for `f`, magnitudes clipped to `sqrt(P0)`.
pub fn zero_forcing(ctx: &RoundContext, f: &[C64]) -> BeamformingSolution {
    let sqrt_p0 = ctx.power_cap.sqrt();
    let a = ctx
        .channels
        .iter()
        .enumerate()
        .map(|(m, h)| {
            let g = inner(f, h);
            let lam = ctx.lambda(m);
            if lam == 0.0 || g.norm() == 0.0 {
                return C64::new(0.0, 0.0);
            }
            let z = lam / g;
            if z.norm() > sqrt_p0 {
                z * (sqrt_p0 / z.norm())
            } else {
                z
            }
        })
        .collect();
    BeamformingSolution::new(f.to_vec(), a)
}
