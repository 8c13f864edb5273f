//! Power-minimizing uplink beamforming for federated learning with
//! over-the-air analog aggregation.
//!
//! The crate is organised bottom-up:
//!
//! * [`solvers`] - dense QP / QCQP solvers and the SCA driver for the
//!   multicast QoS problem.
//! * [`channel`] - path loss, channel and channel-estimate generation.
//! * [`airlink`] - the analog uplink: normalisation, superposition, receive
//!   combining and the realised aggregation error.
//! * [`bounds`] - closed-form bias / MSE bounds and the effective
//!   right-hand side used by the transmit subproblem.
//! * [`beamform`] - the per-round alternating optimizer (perfect and
//!   imperfect CSI) with initialization and final scaling.
//! * [`baselines`] - MMSE and bounded-MSE round optimizers.
//! * [`fltrain`] - FedSGD over the simulated uplink, tasks and harnesses.
//! * [`cli`] - configuration, sweep orchestration and CSV output.

pub mod airlink;
pub mod baselines;
pub mod beamform;
pub mod bounds;
pub mod channel;
pub mod cli;
pub mod cplx;
pub mod fltrain;
pub mod rng;
pub mod solvers;

pub use airlink::{BeamformingSolution, UplinkFrame};
pub use bounds::{ConvergenceBudget, RoundContext};
pub use channel::{ChannelConfig, ChannelSet};
pub use cplx::C64;
