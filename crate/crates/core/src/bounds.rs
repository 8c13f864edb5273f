//! Closed-form bounds on the aggregation error and the derived budgets.
//!
//! With `lambda_m = K_m v_m` and `c_m = Re[f^H h_m a_m]`:
//!
//! ```text
//! bias  = sqrt(D)/K * sum |lambda_m - c_m|
//! mse   = D/K^2 (sum |lambda_m - c_m|)^2 + D s2 ||f||^2 / (2K^2)
//!         + eps D ||f||^2 / (2K^2) * sum sigma_m^2 |a_m|^2
//! V_t   = sqrt(D)/K * sum lambda_m
//! ```

use thiserror::Error;

use crate::airlink::UplinkFrame;
use crate::cplx::{inner, norm_sqr, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("alpha must lie in [0,1), got {0}")]
    Alpha(f64),
    #[error("delta must be >= 0, got {0}")]
    Delta(f64),
    #[error("beta must be >= 0, got {0}")]
    Beta(f64),
    #[error("round context: {0}")]
    Context(String),
}

/// Convergence constants: `||E e|| <= alpha ||grad||`,
/// `E||e||^2 <= delta ||grad||^2 + beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceBudget {
    pub alpha: f64,
    pub delta: f64,
    pub beta: f64,
}

impl ConvergenceBudget {
    pub fn new(alpha: f64, delta: f64, beta: f64) -> Result<Self, BoundsError> {
        let b = Self { alpha, delta, beta };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), BoundsError> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(BoundsError::Alpha(self.alpha));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(BoundsError::Delta(self.delta));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(BoundsError::Beta(self.beta));
        }
        Ok(())
    }
}

/// Everything the round optimizer needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundContext {
    pub norms: Vec<f64>,
    pub sample_counts: Vec<u64>,
    pub total_samples: u64,
    pub dim: usize,
    /// Channels the optimizer sees (true channels or estimates).
    pub channels: Vec<Vec<C64>>,
    pub variances: Vec<f64>,
    pub csi_error: f64,
    pub noise_var: f64,
    pub power_cap: f64,
    pub budget: ConvergenceBudget,
    pub v_t: f64,
    /// Seed for any randomised step of the optimizer.
    pub seed: u64,
}

impl RoundContext {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        norms: Vec<f64>,
        sample_counts: Vec<u64>,
        dim: usize,
        channels: Vec<Vec<C64>>,
        variances: Vec<f64>,
        csi_error: f64,
        noise_var: f64,
        power_cap: f64,
        budget: ConvergenceBudget,
        seed: u64,
    ) -> Result<Self, BoundsError> {
        let m = norms.len();
        if m == 0 || sample_counts.len() != m || channels.len() != m || variances.len() != m {
            return Err(BoundsError::Context("per-device lengths differ".into()));
        }
        let n = channels[0].len();
        if n == 0 || channels.iter().any(|h| h.len() != n) {
            return Err(BoundsError::Context("channel lengths differ".into()));
        }
        if dim == 0 {
            return Err(BoundsError::Context("D must be positive".into()));
        }
        if norms.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(BoundsError::Context("gradient norms must be finite and >= 0".into()));
        }
        if !(0.0..1.0).contains(&csi_error) || noise_var < 0.0 || !(power_cap > 0.0) {
            return Err(BoundsError::Context("invalid eps, noise power or power cap".into()));
        }
        budget.validate()?;
        let total_samples: u64 = sample_counts.iter().sum();
        if total_samples == 0 {
            return Err(BoundsError::Context("total sample count is zero".into()));
        }
        let mut ctx = Self {
            norms,
            sample_counts,
            total_samples,
            dim,
            channels,
            variances,
            csi_error,
            noise_var,
            power_cap,
            budget,
            v_t: 0.0,
            seed,
        };
        ctx.v_t = ctx.sqrt_d_over_k() * ctx.lambda_sum();
        Ok(ctx)
    }

    /// Context for a frame; `channels` are what the optimizer is allowed to see.
    #[allow(clippy::too_many_arguments)]
    pub fn from_frame(
        frame: &UplinkFrame,
        channels: Vec<Vec<C64>>,
        variances: Vec<f64>,
        csi_error: f64,
        noise_var: f64,
        power_cap: f64,
        budget: ConvergenceBudget,
        seed: u64,
    ) -> Result<Self, BoundsError> {
        Self::new(
            frame.norms.clone(),
            frame.sample_counts.clone(),
            frame.dim(),
            channels,
            variances,
            csi_error,
            noise_var,
            power_cap,
            budget,
            seed,
        )
    }

    pub fn num_devices(&self) -> usize {
        self.norms.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.channels[0].len()
    }

    pub fn k(&self) -> f64 {
        self.total_samples as f64
    }

    pub fn sqrt_d_over_k(&self) -> f64 {
        (self.dim as f64).sqrt() / self.k()
    }

    /// `D / K^2`.
    pub fn d_over_k2(&self) -> f64 {
        self.dim as f64 / (self.k() * self.k())
    }

    /// `lambda_m = K_m v_m`.
    pub fn lambda(&self, m: usize) -> f64 {
        self.sample_counts[m] as f64 * self.norms[m]
    }

    pub fn lambda_sum(&self) -> f64 {
        (0..self.num_devices()).map(|m| self.lambda(m)).sum()
    }

    /// `delta V_t^2 + beta`.
    pub fn mse_budget(&self) -> f64 {
        self.budget.delta * self.v_t * self.v_t + self.budget.beta
    }

    pub fn bias_budget(&self) -> f64 {
        self.budget.alpha * self.v_t
    }

    /// `|f^H h_m|` per device.
    pub fn gains(&self, f: &[C64]) -> Vec<f64> {
        self.channels.iter().map(|h| inner(f, h).norm()).collect()
    }
}

fn deviation_sum(ctx: &RoundContext, f: &[C64], a: &[C64]) -> f64 {
    ctx.channels
        .iter()
        .zip(a)
        .enumerate()
        .map(|(m, (h, am))| (ctx.lambda(m) - (inner(f, h) * am).re).abs())
        .sum()
}

pub fn bias_bound(ctx: &RoundContext, f: &[C64], a: &[C64]) -> f64 {
    ctx.sqrt_d_over_k() * deviation_sum(ctx, f, a)
}

/// `D s2 ||f||^2 / (2K^2)`.
pub fn noise_term(ctx: &RoundContext, f: &[C64]) -> f64 {
    ctx.d_over_k2() * ctx.noise_var * norm_sqr(f) / 2.0
}

/// `eps D ||f||^2 / (2K^2) * sum sigma_m^2 |a_m|^2`.
pub fn csi_term(ctx: &RoundContext, f: &[C64], a: &[C64]) -> f64 {
    if ctx.csi_error == 0.0 {
        return 0.0;
    }
    let weighted: f64 = ctx.variances.iter().zip(a).map(|(s, am)| s * am.norm_sqr()).sum();
    ctx.csi_error * ctx.d_over_k2() * norm_sqr(f) / 2.0 * weighted
}

pub fn mse_bound(ctx: &RoundContext, f: &[C64], a: &[C64]) -> f64 {
    let dev = deviation_sum(ctx, f, a);
    ctx.d_over_k2() * dev * dev + noise_term(ctx, f) + csi_term(ctx, f, a)
}

/// Which budget determines `R_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Bias,
    Mse,
    Both,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Bias => "bias",
            Branch::Mse => "mse",
            Branch::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EffectiveRhs {
    Feasible { value: f64, branch: Branch },
    /// The noise term alone exceeds the MSE budget.
    Infeasible { radicand: f64 },
}

/// `R_t = min(alpha V_t, sqrt(delta V_t^2 + beta - noise_term(f)))`.
pub fn effective_rhs(ctx: &RoundContext, f: &[C64]) -> EffectiveRhs {
    let radicand = ctx.mse_budget() - noise_term(ctx, f);
    if radicand < 0.0 {
        return EffectiveRhs::Infeasible { radicand };
    }
    let bias = ctx.bias_budget();
    let mse = radicand.sqrt();
    let branch = if bias < mse {
        Branch::Bias
    } else if mse < bias {
        Branch::Mse
    } else {
        Branch::Both
    };
    EffectiveRhs::Feasible {
        value: bias.min(mse),
        branch,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> RoundContext {
        let h = vec![
            vec![C64::new(1.0, 0.5), C64::new(-0.2, 0.3)],
            vec![C64::new(0.1, -0.9), C64::new(0.4, 0.4)],
        ];
        RoundContext::new(
            vec![1.5, 0.5],
            vec![3, 2],
            4,
            h,
            vec![1.0, 0.5],
            0.0,
            0.1,
            1.0,
            ConvergenceBudget::new(0.5, 1.0, 0.0).unwrap(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn v_t_definition() {
        let c = ctx();
        assert!((c.v_t - 2.0 / 5.0 * (4.5 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_weights() {
        let c = ctx();
        let f = vec![C64::new(1.0, 0.0); 2];
        let a = vec![C64::new(0.0, 0.0); 2];
        assert!((bias_bound(&c, &f, &a) - c.v_t).abs() < 1e-12);
        let z = vec![C64::new(0.0, 0.0); 2];
        assert!((mse_bound(&c, &z, &a) - c.d_over_k2() * 5.5 * 5.5).abs() < 1e-12);
    }

    #[test]
    fn zero_forcing_has_no_bias() {
        let c = ctx();
        let f = vec![C64::new(0.3, 0.2), C64::new(-1.0, 0.7)];
        let a: Vec<C64> = (0..2).map(|m| c.lambda(m) / inner(&f, &c.channels[m])).collect();
        assert!(bias_bound(&c, &f, &a) < 1e-12);
    }

    #[test]
    fn effective_rhs_branches() {
        let c = ctx();
        let z = vec![C64::new(0.0, 0.0); 2];
        match effective_rhs(&c, &z) {
            EffectiveRhs::Feasible { value, branch } => {
                assert_eq!(branch, Branch::Bias);
                assert!((value - 0.5 * c.v_t).abs() < 1e-15);
            }
            _ => panic!(),
        }
        let big = vec![C64::new(1e3, 0.0); 2];
        assert!(matches!(effective_rhs(&c, &big), EffectiveRhs::Infeasible { .. }));
    }

    #[test]
    fn budget_validation() {
        assert_eq!(ConvergenceBudget::new(1.2, 1.0, 0.0), Err(BoundsError::Alpha(1.2)));
        assert!(ConvergenceBudget::new(0.0, 0.0, 0.0).is_ok());
    }
}
