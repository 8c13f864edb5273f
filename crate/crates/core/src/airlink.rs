//! The analog uplink.
//!
//! Device `m` normalises its gradient by `v_m = ||g_m|| / sqrt(D)`, scales it
//! by `a_m` and all devices transmit simultaneously. The server combines with
//! `f` and forms `s = Re(f^H y) / K`.

use rand::Rng;
use thiserror::Error;

use crate::channel::ChannelSet;
use crate::cplx::{inner, norm_sqr, C64};
use crate::rng::{complex_gaussian_vec, stream, tags};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AirlinkError {
    #[error("device {0} has a zero gradient but a nonzero transmit weight")]
    ZeroNormTransmit(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Local gradients of one round plus their normalisation data.
#[derive(Debug, Clone, PartialEq)]
pub struct UplinkFrame {
    pub gradients: Vec<Vec<f64>>,
    /// `v_m = ||g_m|| / sqrt(D)`.
    pub norms: Vec<f64>,
    pub sample_counts: Vec<u64>,
    pub total_samples: u64,
}

impl UplinkFrame {
    pub fn new(gradients: Vec<Vec<f64>>, sample_counts: Vec<u64>) -> Result<Self, AirlinkError> {
        if gradients.len() != sample_counts.len() || gradients.is_empty() {
            return Err(AirlinkError::Dimension(format!(
                "{} gradients for {} sample counts",
                gradients.len(),
                sample_counts.len()
            )));
        }
        let d = gradients[0].len();
        if d == 0 || gradients.iter().any(|g| g.len() != d) {
            return Err(AirlinkError::Dimension("gradients must share a positive length".into()));
        }
        let sd = (d as f64).sqrt();
        let norms = gradients.iter().map(|g| g.iter().map(|x| x * x).sum::<f64>().sqrt() / sd).collect();
        let total_samples = sample_counts.iter().sum();
        Ok(Self {
            gradients,
            norms,
            sample_counts,
            total_samples,
        })
    }

    pub fn dim(&self) -> usize {
        self.gradients[0].len()
    }

    pub fn num_devices(&self) -> usize {
        self.gradients.len()
    }

    /// `sum_m K_m g_m / K`.
    pub fn global_gradient(&self) -> Vec<f64> {
        let k = self.total_samples as f64;
        let mut out = vec![0.0; self.dim()];
        for (g, &km) in self.gradients.iter().zip(&self.sample_counts) {
            let w = km as f64 / k;
            for (o, x) in out.iter_mut().zip(g) {
                *o += w * x;
            }
        }
        out
    }
}

/// Receive vector, transmit weights and their total power.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingSolution {
    pub receive: Vec<C64>,
    pub weights: Vec<C64>,
    pub sum_power: f64,
}

impl BeamformingSolution {
    pub fn new(receive: Vec<C64>, weights: Vec<C64>) -> Self {
        let sum_power = norm_sqr(&weights);
        Self {
            receive,
            weights,
            sum_power,
        }
    }

    pub fn max_device_power(&self) -> f64 {
        self.weights.iter().map(|a| a.norm_sqr()).fold(0.0, f64::max)
    }
}

fn check(frame: &UplinkFrame, sol: &BeamformingSolution, channels: &[Vec<C64>]) -> Result<(), AirlinkError> {
    let m = frame.num_devices();
    if sol.weights.len() != m || channels.len() != m {
        return Err(AirlinkError::Dimension(format!(
            "{m} devices, {} weights, {} channels",
            sol.weights.len(),
            channels.len()
        )));
    }
    if channels.iter().any(|h| h.len() != sol.receive.len()) {
        return Err(AirlinkError::Dimension("channel length differs from receive vector".into()));
    }
    for (i, (a, v)) in sol.weights.iter().zip(&frame.norms).enumerate() {
        if *v == 0.0 && *a != C64::new(0.0, 0.0) {
            return Err(AirlinkError::ZeroNormTransmit(i));
        }
    }
    Ok(())
}

/// `Re(f^H n_d)` for `d = 0..dim`, with `n_d ~ CN(0, noise_var I)`.
pub fn combined_noise<R: Rng + ?Sized>(rng: &mut R, f: &[C64], dim: usize, noise_var: f64) -> Vec<f64> {
    if noise_var == 0.0 {
        return vec![0.0; dim];
    }
    (0..dim)
        .map(|_| inner(f, &complex_gaussian_vec(rng, f.len(), noise_var)).re)
        .collect()
}

/// `Re[f^H h_m a_m] / v_m` per device (0 for silent devices).
fn device_gains(frame: &UplinkFrame, sol: &BeamformingSolution, channels: &[Vec<C64>]) -> Vec<f64> {
    channels
        .iter()
        .zip(&sol.weights)
        .zip(&frame.norms)
        .map(|((h, a), v)| if *v > 0.0 { (inner(&sol.receive, h) * a).re / v } else { 0.0 })
        .collect()
}

/// Received update for given channels and an already combined noise vector.
pub fn receive_with_noise(
    frame: &UplinkFrame,
    sol: &BeamformingSolution,
    channels: &[Vec<C64>],
    noise: &[f64],
) -> Result<Vec<f64>, AirlinkError> {
    check(frame, sol, channels)?;
    if noise.len() != frame.dim() {
        return Err(AirlinkError::Dimension("noise length differs from D".into()));
    }
    let gains = device_gains(frame, sol, channels);
    let k = frame.total_samples as f64;
    let mut s = noise.to_vec();
    for (g, c) in frame.gradients.iter().zip(&gains) {
        if *c != 0.0 {
            for (o, x) in s.iter_mut().zip(g) {
                *o += c * x;
            }
        }
    }
    s.iter_mut().for_each(|x| *x /= k);
    Ok(s)
}

/// Simulates one uplink slot over the true channels; returns `s_t`.
pub fn transmit_receive(
    frame: &UplinkFrame,
    sol: &BeamformingSolution,
    ch: &ChannelSet,
    noise_seed: u64,
    noise_var: f64,
) -> Result<Vec<f64>, AirlinkError> {
    check(frame, sol, &ch.true_channels)?;
    let mut rng = stream(noise_seed, tags::NOISE, 0);
    let noise = combined_noise(&mut rng, &sol.receive, frame.dim(), noise_var);
    receive_with_noise(frame, sol, &ch.true_channels, &noise)
}

/// `e_t = s_t - grad F(w_t)`.
pub fn realized_error(frame: &UplinkFrame, s: &[f64]) -> Vec<f64> {
    s.iter().zip(frame.global_gradient()).map(|(a, b)| a - b).collect()
}

/// Per-device form of the error:
/// `e = (1/K) sum_m (Re[f^H h_m a_m] / v_m - K_m) g_m + noise / K`.
pub fn expanded_error(
    frame: &UplinkFrame,
    sol: &BeamformingSolution,
    channels: &[Vec<C64>],
    noise: &[f64],
) -> Result<Vec<f64>, AirlinkError> {
    check(frame, sol, channels)?;
    let k = frame.total_samples as f64;
    let gains = device_gains(frame, sol, channels);
    let mut e: Vec<f64> = noise.iter().map(|x| x / k).collect();
    for ((g, c), &km) in frame.gradients.iter().zip(&gains).zip(&frame.sample_counts) {
        let w = (c - km as f64) / k;
        for (o, x) in e.iter_mut().zip(g) {
            *o += w * x;
        }
    }
    Ok(e)
}
