//! Single-round design from a channel dump.

use std::fmt::Write as _;

use thiserror::Error;

use crate::airlink::BeamformingSolution;
use crate::baselines::{bounded_mse_round, mmse_round, BoundedMseConfig};
use crate::beamform::{optimize_round, AoConfig, AoTrace, BeamformError};
use crate::bounds::{bias_bound, mse_bound, ConvergenceBudget, RoundContext};
use crate::channel::{dbm_to_watts, ChannelSet};

use super::config::MethodName;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Beamform(#[from] BeamformError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveRequest {
    pub method: MethodName,
    pub budget: ConvergenceBudget,
    pub eta: f64,
    pub p0_dbm: f64,
    pub noise_dbm: f64,
    pub eps: f64,
    pub dim: usize,
    /// Per-device gradient norms; one value is broadcast to all devices.
    pub norms: Vec<f64>,
    /// Per-device sample counts; one value is broadcast to all devices.
    pub samples: Vec<u64>,
    pub seed: u64,
}

fn broadcast<T: Clone>(v: &[T], m: usize, what: &str) -> Result<Vec<T>, SolveError> {
    match v.len() {
        1 => Ok(vec![v[0].clone(); m]),
        n if n == m => Ok(v.to_vec()),
        n => Err(SolveError::Input(format!("{what}: expected 1 or {m} values, got {n}"))),
    }
}

/// Designs one round on the estimates in `ch` and renders the result.
pub fn solve_round(ch: &ChannelSet, req: &SolveRequest) -> Result<(BeamformingSolution, Option<AoTrace>, String), SolveError> {
    let m = ch.num_devices();
    let norms = broadcast(&req.norms, m, "norms")?;
    let samples = broadcast(&req.samples, m, "samples")?;
    let eps = if req.method == MethodName::PomflImcsi { req.eps } else { 0.0 };
    let ctx = RoundContext::new(
        norms,
        samples,
        req.dim,
        ch.estimates.clone(),
        ch.variances.clone(),
        eps,
        dbm_to_watts(req.noise_dbm),
        dbm_to_watts(req.p0_dbm),
        req.budget,
        req.seed,
    )
    .map_err(|e| SolveError::Input(e.to_string()))?;
    let ao = AoConfig::default();
    let (sol, trace) = match req.method {
        MethodName::Pomfl | MethodName::PomflImcsi => {
            let (s, t) = optimize_round(&ctx, &ao)?;
            (s, Some(t))
        }
        MethodName::BoundedMse => {
            let cfg = BoundedMseConfig { eta: req.eta, ao };
            let (s, t) = bounded_mse_round(&ctx, &cfg)?;
            (s, Some(t))
        }
        MethodName::Mmse => (mmse_round(&ctx, &ao).map_err(BeamformError::from)?.solution, None),
    };
    let mut out = String::new();
    let _ = writeln!(out, "method {}", req.method.as_str());
    let _ = writeln!(out, "sum_power_w {}", sol.sum_power);
    let _ = writeln!(out, "bias_bound {} (budget {})", bias_bound(&ctx, &sol.receive, &sol.weights), ctx.bias_budget());
    let _ = writeln!(out, "mse_bound {} (budget {})", mse_bound(&ctx, &sol.receive, &sol.weights), ctx.mse_budget());
    let _ = writeln!(out, "receive");
    for z in &sol.receive {
        let _ = writeln!(out, "  {} {}", z.re, z.im);
    }
    let _ = writeln!(out, "weights");
    for z in &sol.weights {
        let _ = writeln!(out, "  {} {}", z.re, z.im);
    }
    if let Some(t) = &trace {
        let _ = writeln!(out, "trace status {:?} p_scale {} sca_iterations {}", t.status, t.p_scale, t.sca_iterations);
        for (i, r) in t.records.iter().enumerate() {
            let branch = r.branch.map_or("-", |b| b.as_str());
            let _ = writeln!(out, "  {i} power {} bias {} mse {} branch {branch}", r.sum_power, r.bias_bound, r.mse_bound);
        }
    }
    Ok((sol, trace, out))
}
