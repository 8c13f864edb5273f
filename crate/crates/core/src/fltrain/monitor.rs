//! Monte Carlo estimates of the first two moments of the aggregation error
//! relative to the true gradient.

use crate::airlink::{combined_noise, receive_with_noise, BeamformingSolution, UplinkFrame};
use crate::rng::stream;
use crate::rng::tags;
use crate::cplx::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorEstimate {
    /// `||mean(e)|| / ||grad F||`.
    pub c1_ratio: f64,
    /// `(mean(||e||^2) - beta) / ||grad F||^2`.
    pub c2_ratio: f64,
    /// Standard error of `mean(||e||^2) / ||grad F||^2`.
    pub c2_se: f64,
    /// Per-coordinate standard error of the mean error, relative to `||grad F||`.
    pub c1_se: f64,
}

/// Draws `mc_draws` noise realisations for a fixed design and true channels.
pub fn c1c2_monitor(
    frame: &UplinkFrame,
    sol: &BeamformingSolution,
    true_channels: &[Vec<C64>],
    noise_var: f64,
    beta: f64,
    mc_draws: usize,
    seed: u64,
) -> MonitorEstimate {
    let d = frame.dim();
    let grad = frame.global_gradient();
    let gn2: f64 = grad.iter().map(|v| v * v).sum();
    let mut rng = stream(seed, tags::MONTE_CARLO, 0);
    let mut mean = vec![0.0; d];
    let mut sq_sum = 0.0;
    let mut sq_sq = 0.0;
    let mut coord_var = 0.0;
    for _ in 0..mc_draws {
        let noise = combined_noise(&mut rng, &sol.receive, d, noise_var);
        let s = receive_with_noise(frame, sol, true_channels, &noise).expect("consistent design");
        let mut e2 = 0.0;
        for j in 0..d {
            let e = s[j] - grad[j];
            mean[j] += e;
            e2 += e * e;
            coord_var += e * e;
        }
        sq_sum += e2;
        sq_sq += e2 * e2;
    }
    let n = mc_draws.max(1) as f64;
    mean.iter_mut().for_each(|v| *v /= n);
    let m2 = sq_sum / n;
    let var2 = (sq_sq / n - m2 * m2).max(0.0);
    let mean_norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
    let per_coord = (coord_var / n / d as f64 - mean_norm * mean_norm / d as f64).max(0.0);
    let gn = gn2.sqrt();
    MonitorEstimate {
        c1_ratio: mean_norm / gn,
        c2_ratio: (m2 - beta) / gn2,
        c2_se: (var2 / n).sqrt() / gn2,
        c1_se: (per_coord * d as f64 / n).sqrt() / gn,
    }
}
