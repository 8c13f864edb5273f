//! Path loss, Rayleigh channels and imperfect channel estimates.
//!
//! Channels follow `h_m ~ CN(0, sigma_m^2 I)` with `sigma_m^2 = 1 / PL(d_m)`
//! (per-component variance), estimates `h_hat = h + h_err` with
//! `h_err ~ CN(0, eps sigma_m^2 I)` redrawn every round.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::cplx::C64;
use crate::rng::{complex_gaussian_vec, stream, tags};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("distance must be positive, got {0} km")]
    Distance(f64),
    #[error("invalid channel config: {0}")]
    Config(String),
    #[error("channel dump line {line}: {msg}")]
    Dump { line: usize, msg: String },
}

/// COST Hata path loss in dB for a distance in kilometres.
pub fn path_loss_db(distance_km: f64) -> Result<f64, ChannelError> {
    if !(distance_km > 0.0) || !distance_km.is_finite() {
        return Err(ChannelError::Distance(distance_km));
    }
    Ok(139.1 + 35.22 * distance_km.log10())
}

pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    10f64.powf((p_dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(p_w: f64) -> f64 {
    10.0 * p_w.log10() + 30.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub num_devices: usize,
    pub num_antennas: usize,
    /// Device distance range in metres.
    pub distance_range_m: [f64; 2],
    pub noise_power_dbm: f64,
    pub csi_error: f64,
    pub seed: u64,
    /// Redraw the true channels every round instead of keeping them fixed.
    pub time_varying: bool,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            num_devices: 10,
            num_antennas: 16,
            distance_range_m: [10.0, 100.0],
            noise_power_dbm: -74.0,
            csi_error: 0.0,
            seed: 0,
            time_varying: false,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let [lo, hi] = self.distance_range_m;
        if self.num_devices == 0 || self.num_antennas == 0 {
            return Err(ChannelError::Config("need at least one device and one antenna".into()));
        }
        if !(0.0..1.0).contains(&self.csi_error) {
            return Err(ChannelError::Config(format!("csi error {} outside [0,1)", self.csi_error)));
        }
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(ChannelError::Config(format!("distance range [{lo}, {hi}]")));
        }
        if !self.noise_power_dbm.is_finite() {
            return Err(ChannelError::Config("noise power must be finite".into()));
        }
        Ok(())
    }

    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_power_dbm)
    }

    /// Device distances in metres, fixed per seed.
    pub fn distances_m(&self) -> Vec<f64> {
        let mut rng = stream(self.seed, tags::DISTANCES, 0);
        let [lo, hi] = self.distance_range_m;
        (0..self.num_devices)
            .map(|_| if hi > lo { rng.random_range(lo..hi) } else { lo })
            .collect()
    }

    /// Per-component channel variances `1 / PL(d_m)`.
    pub fn variances(&self) -> Vec<f64> {
        self.distances_m()
            .iter()
            .map(|d| {
                let pl = path_loss_db(d / 1000.0).expect("validated distance");
                10f64.powf(-pl / 10.0)
            })
            .collect()
    }
}

/// True channels, estimates and per-device variances for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub true_channels: Vec<Vec<C64>>,
    pub estimates: Vec<Vec<C64>>,
    pub variances: Vec<f64>,
}

impl ChannelSet {
    pub fn num_devices(&self) -> usize {
        self.true_channels.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.true_channels.first().map_or(0, Vec::len)
    }

    /// Perfect knowledge: estimates equal the true channels.
    pub fn perfect(true_channels: Vec<Vec<C64>>, variances: Vec<f64>) -> Self {
        Self {
            estimates: true_channels.clone(),
            true_channels,
            variances,
        }
    }

    /// Text dump: `M N`, M lines of true channels, M lines of estimates,
    /// one line of variances. Floats use shortest round-trip formatting.
    pub fn to_dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.num_devices(), self.num_antennas());
        for set in [&self.true_channels, &self.estimates] {
            for h in set.iter() {
                let row: Vec<String> = h.iter().flat_map(|z| [z.re.to_string(), z.im.to_string()]).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        let vars: Vec<String> = self.variances.iter().map(f64::to_string).collect();
        let _ = writeln!(out, "{}", vars.join(" "));
        out
    }

    pub fn from_dump(text: &str) -> Result<Self, ChannelError> {
        let eof = text.lines().count();
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let err = |line: usize, msg: &str| ChannelError::Dump {
            line: line + 1,
            msg: msg.to_string(),
        };
        let (l0, head) = lines.next().ok_or_else(|| err(0, "empty dump"))?;
        let dims = parse_row::<usize>(head).map_err(|m| err(l0, &m))?;
        let [m, n] = dims[..] else {
            return Err(err(l0, "header must be `M N`"));
        };
        if m == 0 || n == 0 {
            return Err(err(l0, "M and N must be positive"));
        }
        let read_block = |lines: &mut dyn Iterator<Item = (usize, &str)>| -> Result<Vec<Vec<C64>>, ChannelError> {
            let mut block = Vec::with_capacity(m);
            for _ in 0..m {
                let (ln, l) = lines.next().ok_or_else(|| err(eof, "unexpected end of dump"))?;
                let vals = parse_row::<f64>(l).map_err(|e| err(ln, &e))?;
                if vals.len() != 2 * n {
                    return Err(err(ln, &format!("expected {} values, got {}", 2 * n, vals.len())));
                }
                block.push(vals.chunks(2).map(|c| C64::new(c[0], c[1])).collect());
            }
            Ok(block)
        };
        let true_channels = read_block(&mut lines)?;
        let estimates = read_block(&mut lines)?;
        let (lv, vl) = lines.next().ok_or_else(|| err(eof, "missing variance line"))?;
        let variances = parse_row::<f64>(vl).map_err(|e| err(lv, &e))?;
        if variances.len() != m {
            return Err(err(lv, &format!("expected {m} variances")));
        }
        if let Some((ln, _)) = lines.next() {
            return Err(err(ln, "trailing data"));
        }
        Ok(Self {
            true_channels,
            estimates,
            variances,
        })
    }
}

fn parse_row<T: FromStr>(line: &str) -> Result<Vec<T>, String> {
    line.split_whitespace()
        .map(|t| t.parse::<T>().map_err(|_| format!("cannot parse `{t}`")))
        .collect()
}

/// Channels for round `t`; deterministic in `(cfg.seed, t)`.
pub fn generate_round(cfg: &ChannelConfig, round: u64) -> ChannelSet {
    let variances = cfg.variances();
    let n = cfg.num_antennas;
    let idx = if cfg.time_varying { round } else { 0 };
    let mut rng = stream(cfg.seed, tags::CHANNELS, idx);
    let true_channels: Vec<Vec<C64>> = variances.iter().map(|&s| complex_gaussian_vec(&mut rng, n, s)).collect();
    let estimates = if cfg.csi_error > 0.0 {
        let mut rng = stream(cfg.seed, tags::ESTIMATE_ERROR, round);
        true_channels
            .iter()
            .zip(&variances)
            .map(|(h, &s)| {
                let err = complex_gaussian_vec(&mut rng, n, cfg.csi_error * s);
                h.iter().zip(err).map(|(a, b)| a + b).collect()
            })
            .collect()
    } else {
        true_channels.clone()
    };
    ChannelSet {
        true_channels,
        estimates,
        variances,
    }
}
