//! Benchmark round optimizers: MMSE (zero-forcing on a multicast receive
//! vector) and bounded MSE (power minimisation under an MSE threshold).

use crate::airlink::BeamformingSolution;
use crate::beamform::{alternate, init_receive_with, qos_receive, zero_forcing, AoConfig, AoTrace, BeamformError, Budgets};
use crate::bounds::RoundContext;
use crate::solvers::SolverError;

#[derive(Debug, Clone, Copy)]
pub struct BoundedMseConfig {
    /// MSE threshold `eta`.
    pub eta: f64,
    pub ao: AoConfig,
}

impl BoundedMseConfig {
    pub fn new(eta: f64) -> Result<Self, SolverError> {
        if !(eta > 0.0) {
            return Err(SolverError::Invalid(format!("eta must be > 0, got {eta}")));
        }
        Ok(Self {
            eta,
            ao: AoConfig::default(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct MmseOutcome {
    pub solution: BeamformingSolution,
    pub sca_iterations: usize,
    /// Some weight had to be clipped to `sqrt(P0)`.
    pub clipped: bool,
}

/// Receive vector from the multicast QoS problem, zero-forcing transmit
/// weights clipped to the power cap.
pub fn mmse_round(ctx: &RoundContext, cfg: &AoConfig) -> Result<MmseOutcome, SolverError> {
    let (f, sca_iterations) = qos_receive(ctx, cfg)?;
    let solution = zero_forcing(ctx, &f);
    let clipped = solution.weights.iter().enumerate().any(|(m, a)| {
        let g = crate::cplx::inner(&f, &ctx.channels[m]).norm();
        ctx.lambda(m) > 0.0 && (a.norm() * g) < ctx.lambda(m) * (1.0 - 1e-12)
    });
    Ok(MmseOutcome {
        solution,
        sca_iterations,
        clipped,
    })
}

/// `min sum |a_m|^2  s.t.  MSE bound <= eta, |a_m|^2 <= P0`, by the same
/// alternating scheme as the main optimizer without the bias budget and
/// without final scaling.
pub fn bounded_mse_round(
    ctx: &RoundContext,
    cfg: &BoundedMseConfig,
) -> Result<(BeamformingSolution, AoTrace), BeamformError> {
    let budgets = Budgets {
        bias_cap: None,
        mse_cap: cfg.eta,
    };
    let init = init_receive_with(ctx, &cfg.ao, cfg.eta)?;
    if !init.feasible {
        return Err(BeamformError::Infeasible {
            stage: "init",
            init_f: init.f,
        });
    }
    let (f, a, records, status) = alternate(ctx, &cfg.ao, budgets, init.f)?;
    let trace = AoTrace {
        records,
        p_scale: 1.0,
        status,
        sca_iterations: init.sca_iterations,
    };
    Ok((BeamformingSolution::new(f, a), trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{bias_bound, ConvergenceBudget};
    use crate::cplx::C64;

    fn ctx() -> RoundContext {
        let h = vec![vec![C64::new(0.6, -0.2), C64::new(0.1, 0.9)]];
        RoundContext::new(
            vec![2.0],
            vec![3],
            4,
            h,
            vec![1.0],
            0.0,
            1e-3,
            4.0,
            ConvergenceBudget::new(0.5, 1.0, 0.0).unwrap(),
            1,
        )
        .unwrap()
    }

    #[test]
    fn mmse_single_device_uses_full_power() {
        let c = ctx();
        let out = mmse_round(&c, &AoConfig::default()).unwrap();
        let a = out.solution.weights[0];
        assert!((a.norm() - 2.0).abs() < 1e-6, "{}", a.norm());
        assert!(bias_bound(&c, &out.solution.receive, &out.solution.weights) < 1e-9);
    }

    #[test]
    fn loose_threshold_means_silence() {
        let c = ctx();
        let (sol, _) = bounded_mse_round(&c, &BoundedMseConfig::new(1e12).unwrap()).unwrap();
        assert_eq!(sol.sum_power, 0.0);
        assert!(BoundedMseConfig::new(0.0).is_err());
    }
}
