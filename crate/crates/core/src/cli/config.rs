//! Experiment configuration: an INI-style `key = value` format with the
//! sections `[channel]`, `[task]`, `[method]`, `[sweep]` and `[output]`.
//!
//! Lists are comma separated; lines starting with `#` or `;` are comments.
//! Every key has a default, so an empty file is a valid configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use crate::fltrain::StopRule;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line, or 0 when the problem is not tied to a line.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}", self.line, self.message)
        } else {
            write!(f, "config: {}", self.message)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodName {
    Pomfl,
    PomflImcsi,
    Mmse,
    BoundedMse,
}

impl MethodName {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodName::Pomfl => "pomfl",
            MethodName::PomflImcsi => "pomfl_imcsi",
            MethodName::Mmse => "mmse",
            MethodName::BoundedMse => "bounded_mse",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "pomfl" => MethodName::Pomfl,
            "pomfl_imcsi" => MethodName::PomflImcsi,
            "mmse" => MethodName::Mmse,
            "bounded_mse" => MethodName::BoundedMse,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskName {
    Logistic,
    Quadratic,
    Mnist,
}

impl TaskName {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskName::Logistic => "logistic",
            TaskName::Quadratic => "quadratic",
            TaskName::Mnist => "mnist",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSection {
    pub num_devices: usize,
    pub num_antennas: usize,
    pub distance_range_m: [f64; 2],
    pub noise_power_dbm: f64,
    pub time_varying: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSection {
    pub kind: TaskName,
    pub num_features: usize,
    pub samples_per_device: usize,
    pub test_samples: usize,
    pub feature_scale_range: [f64; 2],
    pub margin: f64,
    pub label_noise: f64,
    pub regularizer: f64,
    pub data_seed: u64,
    pub mnist_train_images: String,
    pub mnist_train_labels: String,
    pub mnist_test_images: String,
    pub mnist_test_labels: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSection {
    pub method: MethodName,
    pub alpha: f64,
    pub delta: f64,
    pub beta: f64,
    pub eta: f64,
    pub gamma0: f64,
    pub constant_rounds: u64,
    pub max_outer_iters: usize,
    pub rel_obj_tol: f64,
    pub scaling: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    pub p0_dbm: Vec<f64>,
    pub eps: Vec<f64>,
    pub seeds: Vec<u64>,
    pub stop: StopRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub scenario: String,
    pub path: String,
    /// Empty means `<path without .csv>_summary.csv`.
    pub summary_path: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub channel: ChannelSection,
    pub task: TaskSection,
    pub method: MethodSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            channel: ChannelSection {
                num_devices: 10,
                num_antennas: 16,
                distance_range_m: [10.0, 100.0],
                noise_power_dbm: -74.0,
                time_varying: false,
            },
            task: TaskSection {
                kind: TaskName::Logistic,
                num_features: 20,
                samples_per_device: 500,
                test_samples: 2000,
                feature_scale_range: [0.05, 2.0],
                margin: 0.1,
                label_noise: 0.0,
                regularizer: 1e-4,
                data_seed: 0,
                mnist_train_images: String::new(),
                mnist_train_labels: String::new(),
                mnist_test_images: String::new(),
                mnist_test_labels: String::new(),
            },
            method: MethodSection {
                method: MethodName::Pomfl,
                alpha: 0.55,
                delta: 6.0,
                beta: 0.0,
                eta: 0.075,
                gamma0: 1.0,
                constant_rounds: 1_000_000,
                max_outer_iters: 30,
                rel_obj_tol: 1e-5,
                scaling: true,
            },
            sweep: SweepSection {
                p0_dbm: vec![21.0],
                eps: vec![0.0],
                seeds: vec![0],
                stop: StopRule::Rounds(100),
            },
            output: OutputSection {
                scenario: "default".into(),
                path: "results.csv".into(),
                summary_path: String::new(),
            },
        }
    }
}

impl ExperimentConfig {
    pub fn summary_path(&self) -> String {
        if !self.output.summary_path.is_empty() {
            return self.output.summary_path.clone();
        }
        let base = self.output.path.strip_suffix(".csv").unwrap_or(&self.output.path);
        format!("{base}_summary.csv")
    }

    /// Text form that [`parse_config`] reads back to an equal value.
    pub fn serialize(&self) -> String {
        let c = &self.channel;
        let t = &self.task;
        let m = &self.method;
        let s = &self.sweep;
        let o = &self.output;
        let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ");
        let mut out = String::new();
        let _ = writeln!(out, "[channel]");
        let _ = writeln!(out, "num_devices = {}", c.num_devices);
        let _ = writeln!(out, "num_antennas = {}", c.num_antennas);
        let _ = writeln!(out, "distance_range_m = {}", list(&c.distance_range_m));
        let _ = writeln!(out, "noise_power_dbm = {}", c.noise_power_dbm);
        let _ = writeln!(out, "time_varying = {}", c.time_varying);
        let _ = writeln!(out, "\n[task]");
        let _ = writeln!(out, "kind = {}", t.kind.as_str());
        let _ = writeln!(out, "num_features = {}", t.num_features);
        let _ = writeln!(out, "samples_per_device = {}", t.samples_per_device);
        let _ = writeln!(out, "test_samples = {}", t.test_samples);
        let _ = writeln!(out, "feature_scale_range = {}", list(&t.feature_scale_range));
        let _ = writeln!(out, "margin = {}", t.margin);
        let _ = writeln!(out, "label_noise = {}", t.label_noise);
        let _ = writeln!(out, "regularizer = {}", t.regularizer);
        let _ = writeln!(out, "data_seed = {}", t.data_seed);
        let _ = writeln!(out, "mnist_train_images = {}", t.mnist_train_images);
        let _ = writeln!(out, "mnist_train_labels = {}", t.mnist_train_labels);
        let _ = writeln!(out, "mnist_test_images = {}", t.mnist_test_images);
        let _ = writeln!(out, "mnist_test_labels = {}", t.mnist_test_labels);
        let _ = writeln!(out, "\n[method]");
        let _ = writeln!(out, "method = {}", m.method.as_str());
        let _ = writeln!(out, "alpha = {}", m.alpha);
        let _ = writeln!(out, "delta = {}", m.delta);
        let _ = writeln!(out, "beta = {}", m.beta);
        let _ = writeln!(out, "eta = {}", m.eta);
        let _ = writeln!(out, "gamma0 = {}", m.gamma0);
        let _ = writeln!(out, "constant_rounds = {}", m.constant_rounds);
        let _ = writeln!(out, "max_outer_iters = {}", m.max_outer_iters);
        let _ = writeln!(out, "rel_obj_tol = {}", m.rel_obj_tol);
        let _ = writeln!(out, "scaling = {}", m.scaling);
        let _ = writeln!(out, "\n[sweep]");
        let _ = writeln!(out, "p0_dbm = {}", list(&s.p0_dbm));
        let _ = writeln!(out, "eps = {}", list(&s.eps));
        let seeds: Vec<String> = s.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "seeds = {}", seeds.join(", "));
        match s.stop {
            StopRule::Rounds(n) => {
                let _ = writeln!(out, "rounds = {n}");
            }
            StopRule::TargetAccuracy { target, max_rounds } => {
                let _ = writeln!(out, "target_accuracy = {target}");
                let _ = writeln!(out, "max_rounds = {max_rounds}");
            }
        }
        let _ = writeln!(out, "\n[output]");
        let _ = writeln!(out, "scenario = {}", o.scenario);
        let _ = writeln!(out, "path = {}", o.path);
        let _ = writeln!(out, "summary_path = {}", o.summary_path);
        out
    }
}

const KEYS: &[(&str, &[&str])] = &[
    (
        "channel",
        &["num_devices", "num_antennas", "distance_range_m", "noise_power_dbm", "time_varying"],
    ),
    (
        "task",
        &[
            "kind",
            "num_features",
            "samples_per_device",
            "test_samples",
            "feature_scale_range",
            "margin",
            "label_noise",
            "regularizer",
            "data_seed",
            "mnist_train_images",
            "mnist_train_labels",
            "mnist_test_images",
            "mnist_test_labels",
        ],
    ),
    (
        "method",
        &[
            "method",
            "alpha",
            "delta",
            "beta",
            "eta",
            "gamma0",
            "constant_rounds",
            "max_outer_iters",
            "rel_obj_tol",
            "scaling",
        ],
    ),
    ("sweep", &["p0_dbm", "eps", "seeds", "rounds", "target_accuracy", "max_rounds"]),
    ("output", &["scenario", "path", "summary_path"]),
];

struct Reader {
    values: BTreeMap<(String, String), (String, usize)>,
    errors: Vec<ConfigError>,
}

impl Reader {
    fn raw(&self, sec: &str, key: &str) -> Option<(&str, usize)> {
        self.values
            .get(&(sec.to_string(), key.to_string()))
            .map(|(v, l)| (v.as_str(), *l))
    }

    fn line(&self, sec: &str, key: &str) -> usize {
        self.raw(sec, key).map_or(0, |(_, l)| l)
    }

    fn get<T: std::str::FromStr>(&mut self, sec: &str, key: &str, default: T, what: &str) -> T {
        let Some((v, line)) = self.raw(sec, key) else {
            return default;
        };
        match v.parse::<T>() {
            Ok(x) => x,
            Err(_) => {
                let message = format!("{key}: expected {what}, got `{v}`");
                self.errors.push(ConfigError { line, message });
                default
            }
        }
    }

    fn list<T: std::str::FromStr + Clone>(&mut self, sec: &str, key: &str, default: Vec<T>, what: &str) -> Vec<T> {
        let Some((v, line)) = self.raw(sec, key) else {
            return default;
        };
        let parsed: Result<Vec<T>, _> = v.split(',').map(|p| p.trim().parse::<T>()).collect();
        match parsed {
            Ok(x) => x,
            Err(_) => {
                let message = format!("{key}: expected a comma-separated list of {what}, got `{v}`");
                self.errors.push(ConfigError { line, message });
                default
            }
        }
    }

    fn pair(&mut self, sec: &str, key: &str, default: [f64; 2]) -> [f64; 2] {
        let v = self.list(sec, key, default.to_vec(), "numbers");
        if v.len() != 2 {
            let line = self.line(sec, key);
            self.errors.push(ConfigError {
                line,
                message: format!("{key}: expected exactly two numbers"),
            });
            return default;
        }
        [v[0], v[1]]
    }

    fn text(&self, sec: &str, key: &str, default: &str) -> String {
        self.raw(sec, key).map_or(default.to_string(), |(v, _)| v.to_string())
    }

    fn check(&mut self, ok: bool, sec: &str, key: &str, message: &str) {
        if !ok {
            let line = self.line(sec, key);
            self.errors.push(ConfigError {
                line,
                message: message.to_string(),
            });
        }
    }
}

/// Parses and validates a configuration, reporting every problem found.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, Vec<ConfigError>> {
    let mut r = Reader {
        values: BTreeMap::new(),
        errors: Vec::new(),
    };
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') || l.starts_with(';') {
            continue;
        }
        if let Some(name) = l.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim();
            if KEYS.iter().any(|(s, _)| *s == name) {
                section = Some(name.to_string());
            } else {
                r.errors.push(ConfigError {
                    line,
                    message: format!("unknown section [{name}]"),
                });
                section = None;
            }
            continue;
        }
        let Some((k, v)) = l.split_once('=') else {
            r.errors.push(ConfigError {
                line,
                message: format!("expected `key = value`, got `{l}`"),
            });
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        let Some(sec) = section.clone() else {
            r.errors.push(ConfigError {
                line,
                message: format!("key `{k}` outside a known section"),
            });
            continue;
        };
        let known = KEYS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !known.contains(&k) {
            r.errors.push(ConfigError {
                line,
                message: format!("unknown key `{k}` in [{sec}]"),
            });
            continue;
        }
        if let Some((_, first)) = r.values.get(&(sec.clone(), k.to_string())) {
            let message = format!("duplicate key `{k}` (first set on line {first})");
            r.errors.push(ConfigError { line, message });
            continue;
        }
        r.values.insert((sec, k.to_string()), (v.to_string(), line));
    }

    let d = ExperimentConfig::default();
    let channel = ChannelSection {
        num_devices: r.get("channel", "num_devices", d.channel.num_devices, "an integer"),
        num_antennas: r.get("channel", "num_antennas", d.channel.num_antennas, "an integer"),
        distance_range_m: r.pair("channel", "distance_range_m", d.channel.distance_range_m),
        noise_power_dbm: r.get("channel", "noise_power_dbm", d.channel.noise_power_dbm, "a number"),
        time_varying: r.get("channel", "time_varying", d.channel.time_varying, "true or false"),
    };
    let kind = match r.text("task", "kind", d.task.kind.as_str()).as_str() {
        "logistic" => TaskName::Logistic,
        "quadratic" => TaskName::Quadratic,
        "mnist" => TaskName::Mnist,
        other => {
            let line = r.line("task", "kind");
            r.errors.push(ConfigError {
                line,
                message: format!("kind: expected logistic, quadratic or mnist, got `{other}`"),
            });
            d.task.kind
        }
    };
    let task = TaskSection {
        kind,
        num_features: r.get("task", "num_features", d.task.num_features, "an integer"),
        samples_per_device: r.get("task", "samples_per_device", d.task.samples_per_device, "an integer"),
        test_samples: r.get("task", "test_samples", d.task.test_samples, "an integer"),
        feature_scale_range: r.pair("task", "feature_scale_range", d.task.feature_scale_range),
        margin: r.get("task", "margin", d.task.margin, "a number"),
        label_noise: r.get("task", "label_noise", d.task.label_noise, "a number"),
        regularizer: r.get("task", "regularizer", d.task.regularizer, "a number"),
        data_seed: r.get("task", "data_seed", d.task.data_seed, "an unsigned integer"),
        mnist_train_images: r.text("task", "mnist_train_images", ""),
        mnist_train_labels: r.text("task", "mnist_train_labels", ""),
        mnist_test_images: r.text("task", "mnist_test_images", ""),
        mnist_test_labels: r.text("task", "mnist_test_labels", ""),
    };
    let method_name = r.text("method", "method", d.method.method.as_str());
    let method_kind = MethodName::parse(&method_name).unwrap_or_else(|| {
        let line = r.line("method", "method");
        r.errors.push(ConfigError {
            line,
            message: format!("method: expected pomfl, pomfl_imcsi, mmse or bounded_mse, got `{method_name}`"),
        });
        d.method.method
    });
    let method = MethodSection {
        method: method_kind,
        alpha: r.get("method", "alpha", d.method.alpha, "a number"),
        delta: r.get("method", "delta", d.method.delta, "a number"),
        beta: r.get("method", "beta", d.method.beta, "a number"),
        eta: r.get("method", "eta", d.method.eta, "a number"),
        gamma0: r.get("method", "gamma0", d.method.gamma0, "a number"),
        constant_rounds: r.get("method", "constant_rounds", d.method.constant_rounds, "an unsigned integer"),
        max_outer_iters: r.get("method", "max_outer_iters", d.method.max_outer_iters, "an integer"),
        rel_obj_tol: r.get("method", "rel_obj_tol", d.method.rel_obj_tol, "a number"),
        scaling: r.get("method", "scaling", d.method.scaling, "true or false"),
    };
    let has_rounds = r.raw("sweep", "rounds").is_some();
    let has_target = r.raw("sweep", "target_accuracy").is_some();
    let rounds: u64 = r.get("sweep", "rounds", 100, "an unsigned integer");
    let target: f64 = r.get("sweep", "target_accuracy", 0.9, "a number");
    let max_rounds: u64 = r.get("sweep", "max_rounds", 1000, "an unsigned integer");
    if has_rounds && has_target {
        let line = r.line("sweep", "target_accuracy");
        r.errors.push(ConfigError {
            line,
            message: "set exactly one of rounds and target_accuracy".into(),
        });
    }
    if r.raw("sweep", "max_rounds").is_some() && !has_target {
        let line = r.line("sweep", "max_rounds");
        r.errors.push(ConfigError {
            line,
            message: "max_rounds only applies with target_accuracy".into(),
        });
    }
    let stop = if has_target {
        StopRule::TargetAccuracy { target, max_rounds }
    } else {
        StopRule::Rounds(rounds)
    };
    let sweep = SweepSection {
        p0_dbm: r.list("sweep", "p0_dbm", d.sweep.p0_dbm.clone(), "numbers"),
        eps: r.list("sweep", "eps", d.sweep.eps.clone(), "numbers"),
        seeds: r.list("sweep", "seeds", d.sweep.seeds.clone(), "unsigned integers"),
        stop,
    };
    let output = OutputSection {
        scenario: r.text("output", "scenario", &d.output.scenario),
        path: r.text("output", "path", &d.output.path),
        summary_path: r.text("output", "summary_path", ""),
    };

    // Constraint checks.
    let c = &channel;
    r.check(c.num_devices >= 1, "channel", "num_devices", "num_devices must be >= 1");
    r.check(c.num_antennas >= 1, "channel", "num_antennas", "num_antennas must be >= 1");
    let [lo, hi] = c.distance_range_m;
    r.check(lo > 0.0 && lo <= hi && hi.is_finite(), "channel", "distance_range_m", "distance_range_m must satisfy 0 < low <= high");
    r.check(c.noise_power_dbm.is_finite(), "channel", "noise_power_dbm", "noise_power_dbm must be finite");
    let t = &task;
    r.check(t.num_features >= 1, "task", "num_features", "num_features must be >= 1");
    r.check(t.samples_per_device >= 1, "task", "samples_per_device", "samples_per_device must be >= 1");
    let [flo, fhi] = t.feature_scale_range;
    r.check(flo > 0.0 && flo <= fhi && fhi.is_finite(), "task", "feature_scale_range", "feature_scale_range must satisfy 0 < low <= high");
    r.check(t.margin >= 0.0, "task", "margin", "margin must be >= 0");
    r.check((0.0..0.5).contains(&t.label_noise), "task", "label_noise", "label_noise must lie in [0,0.5)");
    r.check(t.regularizer >= 0.0, "task", "regularizer", "regularizer must be >= 0");
    if t.kind == TaskName::Mnist {
        for key in ["mnist_train_images", "mnist_train_labels"] {
            let missing = r.text("task", key, "").is_empty();
            r.check(!missing, "task", "kind", &format!("kind = mnist requires {key}"));
        }
    }
    let m = &method;
    r.check((0.0..1.0).contains(&m.alpha), "method", "alpha", "alpha must lie in [0,1)");
    r.check(m.delta >= 0.0 && m.delta.is_finite(), "method", "delta", "delta must be >= 0");
    r.check(m.beta >= 0.0 && m.beta.is_finite(), "method", "beta", "beta must be >= 0");
    r.check(m.eta > 0.0 && m.eta.is_finite(), "method", "eta", "eta must be > 0");
    r.check(m.gamma0 > 0.0 && m.gamma0.is_finite(), "method", "gamma0", "gamma0 must be > 0");
    r.check(m.max_outer_iters >= 1, "method", "max_outer_iters", "max_outer_iters must be >= 1");
    r.check(m.rel_obj_tol > 0.0, "method", "rel_obj_tol", "rel_obj_tol must be > 0");
    let s = &sweep;
    r.check(!s.p0_dbm.is_empty() && s.p0_dbm.iter().all(|p| p.is_finite()), "sweep", "p0_dbm", "p0_dbm must be a non-empty list of finite values");
    r.check(!s.eps.is_empty() && s.eps.iter().all(|e| (0.0..1.0).contains(e)), "sweep", "eps", "every eps must lie in [0,1)");
    r.check(!s.seeds.is_empty(), "sweep", "seeds", "seeds must not be empty");
    if let StopRule::TargetAccuracy { target, max_rounds } = s.stop {
        r.check(target > 0.0 && target <= 1.0, "sweep", "target_accuracy", "target_accuracy must lie in (0,1]");
        r.check(max_rounds >= 1, "sweep", "max_rounds", "max_rounds must be >= 1");
        r.check(t.kind != TaskName::Quadratic, "sweep", "target_accuracy", "target_accuracy needs a classification task");
    }
    r.check(!output.path.is_empty(), "output", "path", "path must not be empty");
    r.check(!output.scenario.contains(','), "output", "scenario", "scenario must not contain commas");

    if r.errors.is_empty() {
        Ok(ExperimentConfig {
            channel,
            task,
            method,
            sweep,
            output,
        })
    } else {
        r.errors.sort_by_key(|e| e.line);
        Err(r.errors)
    }
}
