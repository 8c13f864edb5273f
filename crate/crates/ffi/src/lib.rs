//! C ABI over the round designer.
//!
//! Objects are opaque handles created by `*_new`/`*_generate` calls and
//! released with the matching `*_free`. Every fallible call returns an
//! [`OtaflStatus`]; the message for the last failure on the calling thread
//! is available from [`otafl_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use otafl::baselines::{bounded_mse_round, mmse_round, BoundedMseConfig};
use otafl::beamform::{optimize_round, AoConfig, BeamformError};
use otafl::bounds::{bias_bound, mse_bound, ConvergenceBudget, RoundContext};
use otafl::channel::{dbm_to_watts, generate_round, ChannelConfig, ChannelSet};
use otafl::{BeamformingSolution, C64};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OtaflStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The round has no feasible design.
    Infeasible = 3,
    BufferTooSmall = 4,
    /// A Rust panic was caught at the boundary.
    Internal = 5,
}

/// Beamforming method.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OtaflMethod {
    Pomfl = 0,
    /// Accounts for the CSI error level in the design.
    PomflImcsi = 1,
    Mmse = 2,
    BoundedMse = 3,
}

/// Channel model parameters.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct OtaflChannelParams {
    pub num_devices: usize,
    pub num_antennas: usize,
    pub min_distance_m: f64,
    pub max_distance_m: f64,
    pub noise_power_dbm: f64,
    pub csi_error: f64,
    pub seed: u64,
    /// Nonzero redraws channels every round.
    pub time_varying: u8,
}

/// Per-round design parameters.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct OtaflRoundParams {
    pub method: OtaflMethod,
    pub alpha: f64,
    pub delta: f64,
    pub beta: f64,
    /// Absolute MSE cap, used by the bounded-MSE method only.
    pub eta: f64,
    pub power_cap_dbm: f64,
    pub dim: usize,
    pub seed: u64,
}

/// One round of channels (true and estimated).
pub struct OtaflChannels {
    config: ChannelConfig,
    set: ChannelSet,
}

/// A designed round together with the context it was designed for.
pub struct OtaflSolution {
    ctx: RoundContext,
    sol: BeamformingSolution,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: OtaflStatus, msg: impl Into<String>) -> OtaflStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> OtaflStatus) -> OtaflStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(OtaflStatus::Internal, "internal panic"),
    }
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn otafl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Generates round `round` of the channel process.
///
/// # Safety
/// `params` must point to a valid struct and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn otafl_channels_generate(
    params: *const OtaflChannelParams,
    round: u64,
    out: *mut *mut OtaflChannels,
) -> OtaflStatus {
    guard(|| {
        if params.is_null() || out.is_null() {
            return fail(OtaflStatus::NullPointer, "null argument");
        }
        let p = &*params;
        let config = ChannelConfig {
            num_devices: p.num_devices,
            num_antennas: p.num_antennas,
            distance_range_m: [p.min_distance_m, p.max_distance_m],
            noise_power_dbm: p.noise_power_dbm,
            csi_error: p.csi_error,
            seed: p.seed,
            time_varying: p.time_varying != 0,
        };
        if let Err(e) = config.validate() {
            return fail(OtaflStatus::InvalidArgument, e.to_string());
        }
        let set = generate_round(&config, round);
        *out = Box::into_raw(Box::new(OtaflChannels { config, set }));
        OtaflStatus::Ok
    })
}

/// # Safety
/// `ch` must come from [`otafl_channels_generate`] or be null.
#[no_mangle]
pub unsafe extern "C" fn otafl_channels_free(ch: *mut OtaflChannels) {
    if !ch.is_null() {
        drop(Box::from_raw(ch));
    }
}

unsafe fn copy_complex(src: &[C64], re: *mut f64, im: *mut f64, len: usize) -> OtaflStatus {
    if re.is_null() || im.is_null() {
        return fail(OtaflStatus::NullPointer, "null output buffer");
    }
    if len < src.len() {
        return fail(OtaflStatus::BufferTooSmall, format!("need {} entries, got {len}", src.len()));
    }
    for (i, z) in src.iter().enumerate() {
        *re.add(i) = z.re;
        *im.add(i) = z.im;
    }
    OtaflStatus::Ok
}

/// Copies the channel estimate (`estimate != 0`) or the true channel of
/// `device` into split real/imaginary buffers of at least `len` entries.
///
/// # Safety
/// `ch` must be a live handle; `re`/`im` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn otafl_channels_get(
    ch: *const OtaflChannels,
    device: usize,
    estimate: u8,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> OtaflStatus {
    guard(|| {
        let Some(ch) = ch.as_ref() else {
            return fail(OtaflStatus::NullPointer, "null channel handle");
        };
        let src = if estimate != 0 { &ch.set.estimates } else { &ch.set.true_channels };
        match src.get(device) {
            Some(h) => copy_complex(h, re, im, len),
            None => fail(OtaflStatus::InvalidArgument, format!("device {device} out of range")),
        }
    })
}

/// Designs one round on the channel estimates.
///
/// `norms` holds the per-device gradient norms divided by `sqrt(dim)` and
/// `samples` the per-device sample counts, both of length `num_devices`.
///
/// # Safety
/// Pointers must be valid; `norms` and `samples` must hold `num_devices`
/// entries.
#[no_mangle]
pub unsafe extern "C" fn otafl_design_round(
    ch: *const OtaflChannels,
    params: *const OtaflRoundParams,
    norms: *const f64,
    samples: *const u64,
    out: *mut *mut OtaflSolution,
) -> OtaflStatus {
    guard(|| {
        let (Some(ch), Some(p)) = (ch.as_ref(), params.as_ref()) else {
            return fail(OtaflStatus::NullPointer, "null argument");
        };
        if norms.is_null() || samples.is_null() || out.is_null() {
            return fail(OtaflStatus::NullPointer, "null argument");
        }
        let m = ch.set.num_devices();
        let norms = std::slice::from_raw_parts(norms, m).to_vec();
        let samples = std::slice::from_raw_parts(samples, m).to_vec();
        let budget = match ConvergenceBudget::new(p.alpha, p.delta, p.beta) {
            Ok(b) => b,
            Err(e) => return fail(OtaflStatus::InvalidArgument, e.to_string()),
        };
        let eps = if p.method == OtaflMethod::PomflImcsi { ch.config.csi_error } else { 0.0 };
        let ctx = match RoundContext::new(
            norms,
            samples,
            p.dim,
            ch.set.estimates.clone(),
            ch.set.variances.clone(),
            eps,
            ch.config.noise_power_w(),
            dbm_to_watts(p.power_cap_dbm),
            budget,
            p.seed,
        ) {
            Ok(c) => c,
            Err(e) => return fail(OtaflStatus::InvalidArgument, e.to_string()),
        };
        let ao = AoConfig::default();
        let result = match p.method {
            OtaflMethod::Pomfl | OtaflMethod::PomflImcsi => optimize_round(&ctx, &ao).map(|(s, _)| s),
            OtaflMethod::BoundedMse => match BoundedMseConfig::new(p.eta) {
                Ok(cfg) => bounded_mse_round(&ctx, &cfg).map(|(s, _)| s),
                Err(e) => return fail(OtaflStatus::InvalidArgument, e.to_string()),
            },
            OtaflMethod::Mmse => mmse_round(&ctx, &ao).map(|o| o.solution).map_err(BeamformError::from),
        };
        match result {
            Ok(sol) => {
                *out = Box::into_raw(Box::new(OtaflSolution { ctx, sol }));
                OtaflStatus::Ok
            }
            Err(e @ BeamformError::Infeasible { .. }) => fail(OtaflStatus::Infeasible, e.to_string()),
            Err(e) => fail(OtaflStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `sol` must come from [`otafl_design_round`] or be null.
#[no_mangle]
pub unsafe extern "C" fn otafl_solution_free(sol: *mut OtaflSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Total transmit power in watts; NaN for a null handle.
///
/// # Safety
/// `sol` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn otafl_solution_sum_power(sol: *const OtaflSolution) -> f64 {
    sol.as_ref().map_or(f64::NAN, |s| s.sol.sum_power)
}

/// Bias bound of the design; NaN for a null handle.
///
/// # Safety
/// `sol` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn otafl_solution_bias_bound(sol: *const OtaflSolution) -> f64 {
    sol.as_ref()
        .map_or(f64::NAN, |s| bias_bound(&s.ctx, &s.sol.receive, &s.sol.weights))
}

/// MSE bound of the design; NaN for a null handle.
///
/// # Safety
/// `sol` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn otafl_solution_mse_bound(sol: *const OtaflSolution) -> f64 {
    sol.as_ref()
        .map_or(f64::NAN, |s| mse_bound(&s.ctx, &s.sol.receive, &s.sol.weights))
}

/// Copies the receive vector (`num_antennas` entries).
///
/// # Safety
/// `sol` must be a live handle; `re`/`im` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn otafl_solution_receive(
    sol: *const OtaflSolution,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> OtaflStatus {
    guard(|| match sol.as_ref() {
        Some(s) => copy_complex(&s.sol.receive, re, im, len),
        None => fail(OtaflStatus::NullPointer, "null solution handle"),
    })
}

/// Copies the transmit weights (`num_devices` entries).
///
/// # Safety
/// `sol` must be a live handle; `re`/`im` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn otafl_solution_weights(
    sol: *const OtaflSolution,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> OtaflStatus {
    guard(|| match sol.as_ref() {
        Some(s) => copy_complex(&s.sol.weights, re, im, len),
        None => fail(OtaflStatus::NullPointer, "null solution handle"),
    })
}
