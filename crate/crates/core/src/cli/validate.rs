//! Monte Carlo check of the closed-form error bounds on random rounds.

use rand::Rng;

use crate::airlink::{combined_noise, receive_with_noise, UplinkFrame};
use crate::beamform::{optimize_round, qos_receive, zero_forcing, AoConfig};
use crate::bounds::{bias_bound, mse_bound, ConvergenceBudget, RoundContext};
use crate::channel::{dbm_to_watts, generate_round, ChannelConfig};
use crate::cplx::C64;
use crate::rng::{complex_gaussian_vec, derive_seed, gaussian, stream, tags};

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateOptions {
    pub instances: usize,
    pub draws: usize,
    pub eps: Vec<f64>,
    pub seed: u64,
    pub num_devices: usize,
    pub num_antennas: usize,
    pub dim: usize,
    pub budget: ConvergenceBudget,
    pub p0_dbm: f64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            instances: 4,
            draws: 2000,
            eps: vec![0.0, 0.1],
            seed: 0,
            num_devices: 10,
            num_antennas: 16,
            dim: 20,
            budget: ConvergenceBudget {
                alpha: 0.55,
                delta: 6.0,
                beta: 0.0,
            },
            p0_dbm: 21.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub instance: usize,
    pub eps: f64,
    pub bias_bound: f64,
    /// `||mean(e)||` over the draws.
    pub bias_empirical: f64,
    pub bias_se: f64,
    pub mse_bound: f64,
    pub mse_empirical: f64,
    pub mse_se: f64,
}

impl BoundCheck {
    /// Both empirical moments below their bounds up to three standard errors.
    pub fn passed(&self) -> bool {
        self.bias_empirical <= self.bias_bound * (1.0 + 1e-9) + 3.0 * self.bias_se
            && self.mse_empirical <= self.mse_bound * (1.0 + 1e-9) + 3.0 * self.mse_se
    }
}

/// Random frame with heterogeneous gradient scales and sample counts.
fn random_frame(seed: u64, m: usize, d: usize) -> UplinkFrame {
    let mut rng = stream(seed, tags::DATA, 0);
    let mut grads = Vec::with_capacity(m);
    let mut counts = Vec::with_capacity(m);
    for _ in 0..m {
        let scale: f64 = rng.random_range(0.2..2.0);
        grads.push((0..d).map(|_| scale * gaussian(&mut rng)).collect());
        counts.push(rng.random_range(50..500));
    }
    UplinkFrame::new(grads, counts).expect("well-formed frame")
}

/// Designs one PoMFL round per instance on the estimated channels, then
/// draws channel errors (given the estimate) and receiver noise.
pub fn validate_bounds(opts: &ValidateOptions) -> Vec<BoundCheck> {
    let mut out = Vec::new();
    for &eps in &opts.eps {
        for i in 0..opts.instances {
            let inst_seed = derive_seed(opts.seed, tags::MONTE_CARLO, i as u64);
            let cfg = ChannelConfig {
                num_devices: opts.num_devices,
                num_antennas: opts.num_antennas,
                csi_error: eps,
                seed: inst_seed,
                ..ChannelConfig::default()
            };
            let ch = generate_round(&cfg, 0);
            let frame = random_frame(inst_seed, opts.num_devices, opts.dim);
            let noise_var = cfg.noise_power_w();
            let ctx = RoundContext::from_frame(
                &frame,
                ch.estimates.clone(),
                ch.variances.clone(),
                eps,
                noise_var,
                dbm_to_watts(opts.p0_dbm),
                opts.budget,
                inst_seed,
            )
            .expect("valid context");
            let ao = AoConfig::default();
            let sol = match optimize_round(&ctx, &ao) {
                Ok((s, _)) => s,
                Err(_) => {
                    let f = qos_receive(&ctx, &ao).map(|(f, _)| f).unwrap_or_else(|_| vec![C64::new(1.0, 0.0); opts.num_antennas]);
                    zero_forcing(&ctx, &f)
                }
            };
            out.push(monte_carlo(&ctx, &frame, &sol, opts.draws, inst_seed, i));
        }
    }
    out
}

fn monte_carlo(
    ctx: &RoundContext,
    frame: &UplinkFrame,
    sol: &crate::airlink::BeamformingSolution,
    draws: usize,
    seed: u64,
    instance: usize,
) -> BoundCheck {
    let d = frame.dim();
    let grad = frame.global_gradient();
    let mut rng = stream(seed, tags::MONTE_CARLO, 1);
    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    let (mut e2_sum, mut e2_sq) = (0.0, 0.0);
    for _ in 0..draws {
        let channels: Vec<Vec<C64>> = if ctx.csi_error > 0.0 {
            ctx.channels
                .iter()
                .zip(&ctx.variances)
                .map(|(h, &s)| {
                    let err = complex_gaussian_vec(&mut rng, h.len(), ctx.csi_error * s);
                    h.iter().zip(err).map(|(a, b)| a + b).collect()
                })
                .collect()
        } else {
            ctx.channels.clone()
        };
        let noise = combined_noise(&mut rng, &sol.receive, d, ctx.noise_var);
        let s = receive_with_noise(frame, sol, &channels, &noise).expect("consistent design");
        let mut e2 = 0.0;
        for j in 0..d {
            let e = s[j] - grad[j];
            sum[j] += e;
            sum_sq[j] += e * e;
            e2 += e * e;
        }
        e2_sum += e2;
        e2_sq += e2 * e2;
    }
    let n = draws.max(1) as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let var_of_mean: f64 = (0..d).map(|j| (sum_sq[j] / n - mean[j] * mean[j]).max(0.0) / n).sum();
    let mse = e2_sum / n;
    BoundCheck {
        instance,
        eps: ctx.csi_error,
        bias_bound: bias_bound(ctx, &sol.receive, &sol.weights),
        bias_empirical: mean.iter().map(|x| x * x).sum::<f64>().sqrt(),
        bias_se: var_of_mean.sqrt(),
        mse_bound: mse_bound(ctx, &sol.receive, &sol.weights),
        mse_empirical: mse,
        mse_se: ((e2_sq / n - mse * mse).max(0.0) / n).sqrt(),
    }
}
