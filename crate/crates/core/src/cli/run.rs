//! Sweep execution and CSV emission.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::mpsc;

use rayon::prelude::*;
use thiserror::Error;

use super::config::{ExperimentConfig, MethodName, TaskName};
use crate::beamform::AoConfig;
use crate::bounds::ConvergenceBudget;
use crate::channel::{dbm_to_watts, watts_to_dbm, ChannelConfig};
use crate::fltrain::{
    load_mnist_idx, partition_balanced, train, LogisticSpec, LrSchedule, Method, Policy, QuadraticSpec, RunLog,
    SyntheticTask, TrainConfig,
};

/// Bumped whenever a column is added, removed or renamed.
pub const SCHEMA_VERSION: u32 = 1;

pub const ROUND_COLUMNS: [&str; 18] = [
    "scenario",
    "method",
    "p0_dbm",
    "eps",
    "seed",
    "round",
    "sum_power_w",
    "sum_power_dbm",
    "bias_bound",
    "mse_bound",
    "alpha_slack",
    "mse_slack",
    "ao_iters",
    "p_scale",
    "loss",
    "accuracy",
    "grad_norm",
    "v_t_ratio",
];

pub const SUMMARY_COLUMNS: [&str; 11] = [
    "scenario",
    "method",
    "p0_dbm",
    "eps",
    "seed",
    "rounds",
    "rounds_to_target",
    "time_avg_sum_power_w",
    "time_avg_sum_power_dbm",
    "final_accuracy",
    "status",
];

/// FNV-1a hashes of the comma-joined headers for schema version 1.
pub const ROUND_HEADER_HASH: u64 = 0x14c3_b0a0_9ee7_fdc9;
pub const SUMMARY_HEADER_HASH: u64 = 0x5d8f_0e0b_4938_95bd;

/// 64-bit FNV-1a of the comma-joined column names.
pub fn header_hash(columns: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in columns.join(",").bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("task data: {0}")]
    Data(String),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub threads: Option<usize>,
    /// Replaces the seed list by this single seed.
    pub seed_override: Option<u64>,
    /// Replaces the per-round CSV path (the summary path follows it).
    pub out: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOutcome {
    pub cells: usize,
    pub failed: usize,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        i32::from(self.failed > 0)
    }
}

/// One point of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub p0_dbm: f64,
    pub eps: f64,
    pub seed: u64,
}

/// Grid in the order rows are written: P0, then eps, then seed.
pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &p0_dbm in &cfg.sweep.p0_dbm {
        for &eps in &cfg.sweep.eps {
            for &seed in &cfg.sweep.seeds {
                out.push(Cell { p0_dbm, eps, seed });
            }
        }
    }
    out
}

pub fn method_of(cfg: &ExperimentConfig) -> Method {
    match cfg.method.method {
        MethodName::Pomfl => Method::Pomfl,
        MethodName::PomflImcsi => Method::PomflImcsi,
        MethodName::Mmse => Method::Mmse,
        MethodName::BoundedMse => Method::BoundedMse { eta: cfg.method.eta },
    }
}

/// Training configuration of one cell.
pub fn train_config(cfg: &ExperimentConfig, cell: Cell) -> Result<TrainConfig, RunError> {
    let c = &cfg.channel;
    let m = &cfg.method;
    let channel = ChannelConfig {
        num_devices: c.num_devices,
        num_antennas: c.num_antennas,
        distance_range_m: c.distance_range_m,
        noise_power_dbm: c.noise_power_dbm,
        csi_error: cell.eps,
        seed: cell.seed,
        time_varying: c.time_varying,
    };
    channel.validate().map_err(|e| RunError::Config(e.to_string()))?;
    let budget = ConvergenceBudget::new(m.alpha, m.delta, m.beta).map_err(|e| RunError::Config(e.to_string()))?;
    Ok(TrainConfig {
        channel,
        power_cap_w: dbm_to_watts(cell.p0_dbm),
        lr: LrSchedule::new(m.gamma0, m.constant_rounds),
        budget,
        stop: cfg.sweep.stop,
        ao: AoConfig {
            max_outer_iters: m.max_outer_iters,
            rel_obj_tol: m.rel_obj_tol,
            scaling_enabled: m.scaling,
            ..AoConfig::default()
        },
    })
}

/// Builds the learning task; the data depends only on `data_seed`.
pub fn build_task(cfg: &ExperimentConfig) -> Result<SyntheticTask, RunError> {
    let t = &cfg.task;
    let m = cfg.channel.num_devices;
    Ok(match t.kind {
        TaskName::Logistic => SyntheticTask::logistic(&LogisticSpec {
            num_devices: m,
            samples_per_device: t.samples_per_device,
            num_features: t.num_features,
            test_samples: t.test_samples,
            feature_scale_range: t.feature_scale_range,
            margin: t.margin,
            label_noise: t.label_noise,
            regularizer: t.regularizer,
            seed: t.data_seed,
        }),
        // label_noise doubles as the target noise level here.
        TaskName::Quadratic => SyntheticTask::quadratic(&QuadraticSpec {
            num_devices: m,
            samples_per_device: t.samples_per_device,
            dim: t.num_features,
            scale_range: t.feature_scale_range,
            target_noise: t.label_noise,
            seed: t.data_seed,
        }),
        TaskName::Mnist => {
            let data = |e: crate::fltrain::MnistError| RunError::Data(e.to_string());
            let train_set = load_mnist_idx(Path::new(&t.mnist_train_images), Path::new(&t.mnist_train_labels))
                .map_err(data)?;
            let devices = partition_balanced(&train_set, m, Some(t.samples_per_device), t.data_seed).map_err(data)?;
            let test = if t.mnist_test_images.is_empty() {
                None
            } else {
                let set = load_mnist_idx(Path::new(&t.mnist_test_images), Path::new(&t.mnist_test_labels))
                    .map_err(data)?;
                Some(set.to_device_data())
            };
            SyntheticTask::classification(devices, test, 10, t.regularizer)
        }
    })
}

fn num(x: f64) -> String {
    x.to_string()
}

fn round_rows(cfg: &ExperimentConfig, cell: Cell, log: &RunLog) -> Vec<Vec<String>> {
    let method = cfg.method.method.as_str();
    log.rounds
        .iter()
        .map(|r| {
            vec![
                cfg.output.scenario.clone(),
                method.to_string(),
                num(cell.p0_dbm),
                num(cell.eps),
                cell.seed.to_string(),
                r.round.to_string(),
                num(r.sum_power_w),
                num(watts_to_dbm(r.sum_power_w)),
                num(r.bias_bound),
                num(r.mse_bound),
                num(r.alpha_slack),
                num(r.mse_slack),
                r.ao_iters.to_string(),
                num(r.p_scale),
                num(r.loss),
                r.accuracy.map(num).unwrap_or_default(),
                num(r.grad_norm),
                num(r.v_t_ratio),
            ]
        })
        .collect()
}

fn summary_row(cfg: &ExperimentConfig, cell: Cell, log: Option<&RunLog>, status: &str) -> Vec<String> {
    let (rounds, target, w, dbm, acc) = match log {
        Some(l) => (
            l.rounds.len().to_string(),
            l.rounds_to_target.map(|r| r.to_string()).unwrap_or_default(),
            num(l.time_avg_sum_power_w()),
            num(l.time_avg_sum_power_dbm()),
            l.final_accuracy().map(num).unwrap_or_default(),
        ),
        None => Default::default(),
    };
    vec![
        cfg.output.scenario.clone(),
        cfg.method.method.as_str().to_string(),
        num(cell.p0_dbm),
        num(cell.eps),
        cell.seed.to_string(),
        rounds,
        target,
        w,
        dbm,
        acc,
        status.to_string(),
    ]
}

struct CellResult {
    rows: Vec<Vec<String>>,
    summary: Vec<String>,
    failed: bool,
}

fn run_cell(cfg: &ExperimentConfig, task: &SyntheticTask, cell: Cell) -> CellResult {
    let tc = match train_config(cfg, cell) {
        Ok(tc) => tc,
        Err(e) => {
            return CellResult {
                rows: Vec::new(),
                summary: summary_row(cfg, cell, None, &format!("failed: {e}")),
                failed: true,
            }
        }
    };
    let policy = Policy::OverTheAir(method_of(cfg));
    match catch_unwind(AssertUnwindSafe(|| train(task, &policy, &tc))) {
        Ok(log) => {
            let status = match &log.aborted {
                Some(why) => format!("aborted: {why}"),
                None => "ok".to_string(),
            };
            CellResult {
                rows: round_rows(cfg, cell, &log),
                summary: summary_row(cfg, cell, Some(&log), &status),
                failed: log.aborted.is_some(),
            }
        }
        Err(_) => CellResult {
            rows: Vec::new(),
            summary: summary_row(cfg, cell, None, "failed: panic"),
            failed: true,
        },
    }
}

/// Applies the command-line overrides to a validated configuration.
pub fn apply_overrides(cfg: &ExperimentConfig, opts: &RunOptions) -> ExperimentConfig {
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed_override {
        cfg.sweep.seeds = vec![seed];
    }
    if let Some(out) = &opts.out {
        cfg.output.path = out.clone();
        cfg.output.summary_path = String::new();
    }
    cfg
}

/// Runs the sweep grid. Cells execute on a worker pool; rows reach the
/// files in grid order through one writer, each cell flushed as soon as
/// all earlier cells are written, so finished cells survive later failures.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    let cfg = apply_overrides(cfg, opts);
    let task = build_task(&cfg)?;
    let grid = cells(&cfg);
    for &cell in &grid {
        train_config(&cfg, cell)?;
    }
    let mut rounds_csv = csv::Writer::from_writer(BufWriter::new(File::create(&cfg.output.path)?));
    let mut summary_csv = csv::Writer::from_writer(BufWriter::new(File::create(cfg.summary_path())?));
    rounds_csv.write_record(ROUND_COLUMNS)?;
    summary_csv.write_record(SUMMARY_COLUMNS)?;
    rounds_csv.flush()?;
    summary_csv.flush()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.unwrap_or(0))
        .build()
        .map_err(|e| RunError::Config(format!("thread pool: {e}")))?;
    let (tx, rx) = mpsc::channel::<(usize, CellResult)>();
    let mut failed = 0;
    std::thread::scope(|scope| -> Result<(), RunError> {
        let (cfg, task, grid) = (&cfg, &task, &grid);
        scope.spawn(move || {
            pool.install(|| {
                grid.par_iter().enumerate().for_each_with(tx, |tx, (i, &cell)| {
                    let _ = tx.send((i, run_cell(cfg, task, cell)));
                })
            })
        });
        let mut pending = BTreeMap::new();
        let mut next = 0;
        for (i, res) in rx {
            pending.insert(i, res);
            while let Some(res) = pending.remove(&next) {
                for row in &res.rows {
                    rounds_csv.write_record(row)?;
                }
                summary_csv.write_record(&res.summary)?;
                rounds_csv.flush()?;
                summary_csv.flush()?;
                failed += usize::from(res.failed);
                next += 1;
            }
        }
        Ok(())
    })?;
    rounds_csv.into_inner().map_err(|e| e.into_error())?.flush()?;
    summary_csv.into_inner().map_err(|e| e.into_error())?.flush()?;
    Ok(RunOutcome {
        cells: grid.len(),
        failed,
    })
}
