//! FedSGD over the simulated uplink.
//!
//! Each round: devices compute full-batch gradients at `w_t`, the round
//! optimizer picks `(f, a)` from what it knows about the channels, the
//! gradients travel over the true channels, and the server steps
//! `w <- w - gamma_t s_t`.

mod mnist;
mod monitor;
mod task;

pub use mnist::{load_mnist_idx, partition_balanced, ImageSet, MnistError};
pub use monitor::{c1c2_monitor, MonitorEstimate};
pub use task::{
    local_gradients, Curvature, DeviceData, LogisticSpec, QuadraticSpec, SyntheticTask, TaskKind,
};

use nalgebra::DMatrix;

use crate::airlink::{transmit_receive, BeamformingSolution, UplinkFrame};
use crate::baselines::{bounded_mse_round, mmse_round, BoundedMseConfig};
use crate::beamform::{optimize_round, qos_receive, zero_forcing, AoConfig, BeamformError};
use crate::bounds::{bias_bound, mse_bound, ConvergenceBudget, RoundContext};
use crate::channel::{generate_round, ChannelConfig, ChannelSet};
use crate::cplx::{inner, C64};
use crate::rng::{derive_seed, gaussian, stream, tags};

/// `gamma_t = gamma0` for `t <= T`, then `gamma0 T / t`. Non-negative,
/// vanishing, and with a harmonic (divergent) sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub gamma0: f64,
    pub constant_rounds: u64,
}

impl LrSchedule {
    pub fn new(gamma0: f64, constant_rounds: u64) -> Self {
        Self {
            gamma0,
            constant_rounds,
        }
    }

    pub fn rate(&self, t: u64) -> f64 {
        let t_c = self.constant_rounds.max(1);
        if t <= t_c {
            self.gamma0
        } else {
            self.gamma0 * t_c as f64 / t as f64
        }
    }
}

/// Global model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub w: Vec<f64>,
    pub round: u64,
}

/// Round optimizer used over the air.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Perfect-CSI design fed with whatever channels the server has.
    Pomfl,
    /// Design that accounts for the channel-estimation error.
    PomflImcsi,
    Mmse,
    BoundedMse { eta: f64 },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Pomfl => "pomfl",
            Method::PomflImcsi => "pomfl_imcsi",
            Method::Mmse => "mmse",
            Method::BoundedMse { .. } => "bounded_mse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    /// Exact gradient.
    Ideal,
    /// Synthetic error meeting the budget's first two moment conditions
    /// with equality: `e = alpha Q grad + n`, `Q` a fixed random rotation,
    /// `E||n||^2 = (delta - alpha^2) ||grad||^2 + beta`.
    InjectedError,
    OverTheAir(Method),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    Rounds(u64),
    TargetAccuracy { target: f64, max_rounds: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub channel: ChannelConfig,
    pub power_cap_w: f64,
    pub lr: LrSchedule,
    pub budget: ConvergenceBudget,
    pub stop: StopRule,
    pub ao: AoConfig,
}

/// Per-round log record. Loss and accuracy refer to the model after the
/// round's update; `grad_norm` and `v_t_ratio` to the model before it.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundMetrics {
    pub round: u64,
    pub sum_power_w: f64,
    pub max_device_power_w: f64,
    pub bias_bound: f64,
    pub mse_bound: f64,
    /// `alpha V_t - bias_bound`.
    pub alpha_slack: f64,
    /// `delta V_t^2 + beta - mse_bound`.
    pub mse_slack: f64,
    pub ao_iters: usize,
    pub p_scale: f64,
    pub loss: f64,
    pub accuracy: Option<f64>,
    pub gap: Option<f64>,
    pub grad_norm: f64,
    pub v_t_ratio: f64,
    /// The optimizer failed and the fallback design was used.
    pub fallback: bool,
    /// Largest `|angle(a_m) + angle(f^H h_m)|` over transmitting devices.
    pub phase_error: f64,
    /// Largest `|a_m| |f^H h_m| - K_m v_m`.
    pub cap_excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub rounds: Vec<RoundMetrics>,
    pub final_model: ModelState,
    /// Round count at which the accuracy target was first met.
    pub rounds_to_target: Option<u64>,
    pub aborted: Option<String>,
}

impl RunLog {
    pub fn time_avg_sum_power_w(&self) -> f64 {
        if self.rounds.is_empty() {
            return 0.0;
        }
        self.rounds.iter().map(|r| r.sum_power_w).sum::<f64>() / self.rounds.len() as f64
    }

    pub fn time_avg_sum_power_dbm(&self) -> f64 {
        crate::channel::watts_to_dbm(self.time_avg_sum_power_w())
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.rounds.last().and_then(|r| r.accuracy)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Seeded random orthogonal matrix (QR of a Gaussian matrix).
fn rotation(seed: u64, d: usize) -> DMatrix<f64> {
    let mut rng = stream(seed, tags::INJECTED, u64::MAX);
    let g = DMatrix::from_fn(d, d, |_, _| gaussian(&mut rng));
    g.qr().q()
}

/// Context the optimizer of `method` sees: estimates always, with the
/// estimation-error model only for the imperfect-CSI design.
pub fn round_context(
    method: Method,
    frame: &UplinkFrame,
    ch: &ChannelSet,
    cfg: &TrainConfig,
    seed: u64,
) -> RoundContext {
    let eps = if method == Method::PomflImcsi { cfg.channel.csi_error } else { 0.0 };
    RoundContext::from_frame(
        frame,
        ch.estimates.clone(),
        ch.variances.clone(),
        eps,
        cfg.channel.noise_power_w(),
        cfg.power_cap_w,
        cfg.budget,
        seed,
    )
    .expect("validated training configuration")
}

/// Outcome of one round optimizer call.
#[derive(Debug, Clone)]
pub struct RoundDesign {
    pub solution: BeamformingSolution,
    pub ao_iters: usize,
    pub p_scale: f64,
    pub fallback: bool,
}

/// Runs `method` on `ctx`, falling back to clipped zero-forcing on the
/// initial receive vector when no feasible design is found.
pub fn design_round(method: Method, ctx: &RoundContext, ao: &AoConfig) -> RoundDesign {
    let optimized = match method {
        Method::Pomfl | Method::PomflImcsi => optimize_round(ctx, ao).map(|(s, t)| (s, t.outer_iters(), t.p_scale)),
        Method::BoundedMse { eta } => {
            let cfg = BoundedMseConfig { eta, ao: *ao };
            bounded_mse_round(ctx, &cfg).map(|(s, t)| (s, t.outer_iters(), 1.0))
        }
        Method::Mmse => mmse_round(ctx, ao)
            .map(|o| (o.solution, 0, 1.0))
            .map_err(BeamformError::from),
    };
    match optimized {
        Ok((solution, ao_iters, p_scale)) => RoundDesign {
            solution,
            ao_iters,
            p_scale,
            fallback: false,
        },
        Err(e) => {
            let f = match e {
                BeamformError::Infeasible { init_f, .. } => init_f,
                BeamformError::Solver(_) => qos_receive(ctx, ao)
                    .map(|(f, _)| f)
                    .unwrap_or_else(|_| vec![C64::new(0.0, 0.0); ctx.num_antennas()]),
            };
            RoundDesign {
                solution: zero_forcing(ctx, &f),
                ao_iters: 0,
                p_scale: 1.0,
                fallback: true,
            }
        }
    }
}

/// Phase-rule and per-device cap diagnostics of a design under `ctx`.
pub fn design_invariants(ctx: &RoundContext, sol: &BeamformingSolution) -> (f64, f64) {
    let mut phase: f64 = 0.0;
    let mut cap: f64 = f64::NEG_INFINITY;
    for (m, (h, a)) in ctx.channels.iter().zip(&sol.weights).enumerate() {
        let g = inner(&sol.receive, h);
        if a.norm() > 0.0 {
            phase = phase.max(crate::cplx::wrap_angle(a.arg() + g.arg()).abs());
        }
        cap = cap.max(a.norm() * g.norm() - ctx.lambda(m));
    }
    (phase, cap)
}

pub fn train(task: &SyntheticTask, policy: &Policy, cfg: &TrainConfig) -> RunLog {
    let d = task.dim();
    let seed = cfg.channel.seed;
    let mut state = ModelState {
        w: vec![0.0; d],
        round: 0,
    };
    let noise_var = cfg.channel.noise_power_w();
    let rot = matches!(policy, Policy::InjectedError).then(|| rotation(seed, d));
    let (max_rounds, target) = match cfg.stop {
        StopRule::Rounds(n) => (n, None),
        StopRule::TargetAccuracy { target, max_rounds } => (max_rounds, Some(target)),
    };
    let mut log = RunLog {
        rounds: Vec::new(),
        final_model: state.clone(),
        rounds_to_target: None,
        aborted: None,
    };

    for t in 0..max_rounds {
        let frame = local_gradients(task, &state.w);
        let grad = frame.global_gradient();
        let grad_norm = norm(&grad);
        if !grad_norm.is_finite() || frame.norms.iter().any(|v| !v.is_finite()) {
            log.aborted = Some(format!("round {t}: non-finite gradient"));
            break;
        }
        let mut rec = RoundMetrics {
            round: t,
            sum_power_w: 0.0,
            max_device_power_w: 0.0,
            bias_bound: 0.0,
            mse_bound: 0.0,
            alpha_slack: 0.0,
            mse_slack: 0.0,
            ao_iters: 0,
            p_scale: 1.0,
            loss: 0.0,
            accuracy: None,
            gap: None,
            grad_norm,
            v_t_ratio: f64::NAN,
            fallback: false,
            phase_error: 0.0,
            cap_excess: 0.0,
        };
        let update: Vec<f64> = match policy {
            Policy::Ideal => grad.clone(),
            Policy::InjectedError => {
                let b = cfg.budget;
                let q = rot.as_ref().expect("rotation drawn");
                let bias = q * nalgebra::DVector::from_column_slice(&grad) * b.alpha;
                let var = ((b.delta - b.alpha * b.alpha) * grad_norm * grad_norm + b.beta).max(0.0) / d as f64;
                let mut rng = stream(seed, tags::INJECTED, t);
                (0..d).map(|j| grad[j] + bias[j] + var.sqrt() * gaussian(&mut rng)).collect()
            }
            Policy::OverTheAir(method) => {
                let ch = generate_round(&cfg.channel, t);
                let ctx = round_context(*method, &frame, &ch, cfg, derive_seed(seed, tags::INIT, t));
                let design = design_round(*method, &ctx, &cfg.ao);
                let sol = &design.solution;
                let (phase, cap) = design_invariants(&ctx, sol);
                rec.sum_power_w = sol.sum_power;
                rec.max_device_power_w = sol.max_device_power();
                rec.bias_bound = bias_bound(&ctx, &sol.receive, &sol.weights);
                rec.mse_bound = mse_bound(&ctx, &sol.receive, &sol.weights);
                rec.alpha_slack = ctx.bias_budget() - rec.bias_bound;
                rec.mse_slack = ctx.mse_budget() - rec.mse_bound;
                rec.ao_iters = design.ao_iters;
                rec.p_scale = design.p_scale;
                rec.fallback = design.fallback;
                rec.v_t_ratio = ctx.v_t / grad_norm;
                rec.phase_error = phase;
                rec.cap_excess = cap;
                match transmit_receive(&frame, sol, &ch, derive_seed(seed, tags::NOISE, t), noise_var) {
                    Ok(s) => s,
                    Err(e) => {
                        log.aborted = Some(format!("round {t}: {e}"));
                        break;
                    }
                }
            }
        };
        let gamma = cfg.lr.rate(t);
        for (w, u) in state.w.iter_mut().zip(&update) {
            *w -= gamma * u;
        }
        state.round = t + 1;
        if state.w.iter().any(|v| !v.is_finite()) {
            log.aborted = Some(format!("round {t}: non-finite model"));
            log.rounds.push(rec);
            break;
        }
        rec.loss = task.loss(&state.w);
        rec.accuracy = task.accuracy(&state.w);
        rec.gap = task.gap(&state.w);
        let reached = matches!((target, rec.accuracy), (Some(tg), Some(acc)) if acc >= tg);
        log.rounds.push(rec);
        if reached {
            log.rounds_to_target = Some(t + 1);
            break;
        }
    }
    log.final_model = state;
    log
}
