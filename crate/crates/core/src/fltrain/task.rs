//! Learning tasks: strongly convex least squares and (multinomial)
//! logistic regression, with exact full-batch local gradients.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::airlink::UplinkFrame;
use crate::rng::{gaussian, stream, tags};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    QuadraticStronglyConvex,
    LogisticRegression,
}

/// Samples held by one device (or the test set). Features are stored
/// row-major without the bias column.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceData {
    pub features: Vec<f32>,
    pub num_features: usize,
    /// Regression target, or class index for classification.
    pub targets: Vec<f64>,
}

impl DeviceData {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.num_features..(i + 1) * self.num_features]
    }
}

/// Exact curvature information of a quadratic task.
#[derive(Debug, Clone, PartialEq)]
pub struct Curvature {
    pub mu: f64,
    pub l: f64,
    pub w_star: Vec<f64>,
    pub f_star: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub kind: TaskKind,
    pub devices: Vec<DeviceData>,
    pub test: Option<DeviceData>,
    /// 2 for binary logistic (sigmoid), more for softmax; unused for quadratic.
    pub classes: usize,
    /// `mu/2 ||w||^2` added to the global loss.
    pub regularizer: f64,
    pub curvature: Option<Curvature>,
}

/// Knobs of the synthetic logistic generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticSpec {
    pub num_devices: usize,
    pub samples_per_device: usize,
    pub num_features: usize,
    pub test_samples: usize,
    /// Feature standard deviations are spread geometrically over this
    /// range; a wide range makes the problem ill-conditioned.
    pub feature_scale_range: [f64; 2],
    /// Samples with `|w_true . x| < margin` are rejected.
    pub margin: f64,
    /// Probability of flipping a label.
    pub label_noise: f64,
    pub regularizer: f64,
    pub seed: u64,
}

impl Default for LogisticSpec {
    fn default() -> Self {
        Self {
            num_devices: 10,
            samples_per_device: 500,
            num_features: 20,
            test_samples: 2000,
            feature_scale_range: [1.0, 1.0],
            margin: 0.1,
            label_noise: 0.0,
            regularizer: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticSpec {
    pub num_devices: usize,
    pub samples_per_device: usize,
    pub dim: usize,
    /// Feature standard deviations are spread geometrically over this range,
    /// which sets the Hessian spectrum.
    pub scale_range: [f64; 2],
    pub target_noise: f64,
    pub seed: u64,
}

impl Default for QuadraticSpec {
    fn default() -> Self {
        Self {
            num_devices: 10,
            samples_per_device: 50,
            dim: 10,
            scale_range: [0.7, 1.4],
            target_noise: 0.1,
            seed: 0,
        }
    }
}

fn geometric([lo, hi]: [f64; 2], n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let t = if n > 1 { j as f64 / (n - 1) as f64 } else { 0.0 };
            lo * (hi / lo).powf(t)
        })
        .collect()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl SyntheticTask {
    pub fn logistic(spec: &LogisticSpec) -> Self {
        let nf = spec.num_features;
        let mut rng = stream(spec.seed, tags::DATA, 0);
        let mut w_true: Vec<f64> = (0..nf).map(|_| gaussian(&mut rng)).collect();
        let nrm = w_true.iter().map(|v| v * v).sum::<f64>().sqrt();
        w_true.iter_mut().for_each(|v| *v /= nrm);
        let scales = geometric(spec.feature_scale_range, nf);
        let draw = |count: usize, idx: u64| -> DeviceData {
            let mut rng = stream(spec.seed, tags::DATA, 1 + idx);
            let mut features = Vec::with_capacity(count * nf);
            let mut targets = Vec::with_capacity(count);
            while targets.len() < count {
                let x: Vec<f64> = scales.iter().map(|sc| sc * gaussian(&mut rng)).collect();
                let s: f64 = x.iter().zip(&w_true).map(|(a, b)| a * b).sum();
                if s.abs() < spec.margin {
                    continue;
                }
                let mut y = if s > 0.0 { 1.0 } else { 0.0 };
                if spec.label_noise > 0.0 && rng.random::<f64>() < spec.label_noise {
                    y = 1.0 - y;
                }
                features.extend(x.iter().map(|v| *v as f32));
                targets.push(y);
            }
            DeviceData {
                features,
                num_features: nf,
                targets,
            }
        };
        let devices = (0..spec.num_devices)
            .map(|m| draw(spec.samples_per_device, m as u64))
            .collect();
        let test = Some(draw(spec.test_samples, 1 << 32));
        Self {
            kind: TaskKind::LogisticRegression,
            devices,
            test,
            classes: 2,
            regularizer: spec.regularizer,
            curvature: None,
        }
    }

    /// Logistic task over given device partitions (e.g. loaded images).
    pub fn classification(devices: Vec<DeviceData>, test: Option<DeviceData>, classes: usize, regularizer: f64) -> Self {
        Self {
            kind: TaskKind::LogisticRegression,
            devices,
            test,
            classes: classes.max(2),
            regularizer,
            curvature: None,
        }
    }

    /// Least squares `F(w) = 1/(2K) ||X w - y||^2` with exact `w*`, `mu`, `L`.
    pub fn quadratic(spec: &QuadraticSpec) -> Self {
        let d = spec.dim;
        let mut rng = stream(spec.seed, tags::DATA, 0);
        let w_true: Vec<f64> = (0..d).map(|_| gaussian(&mut rng)).collect();
        let scales = geometric(spec.scale_range, d);
        let devices: Vec<DeviceData> = (0..spec.num_devices)
            .map(|m| {
                let mut rng = stream(spec.seed, tags::DATA, 1 + m as u64);
                let mut features = Vec::new();
                let mut targets = Vec::new();
                for _ in 0..spec.samples_per_device {
                    let x: Vec<f32> = scales.iter().map(|s| (s * gaussian(&mut rng)) as f32).collect();
                    let y: f64 = x.iter().zip(&w_true).map(|(a, b)| *a as f64 * b).sum::<f64>()
                        + spec.target_noise * gaussian(&mut rng);
                    features.extend(x);
                    targets.push(y);
                }
                DeviceData {
                    features,
                    num_features: d,
                    targets,
                }
            })
            .collect();
        let mut task = Self {
            kind: TaskKind::QuadraticStronglyConvex,
            devices,
            test: None,
            classes: 0,
            regularizer: 0.0,
            curvature: None,
        };
        task.curvature = Some(task.exact_curvature());
        task
    }

    fn exact_curvature(&self) -> Curvature {
        let d = self.dim();
        let k = self.total_samples() as f64;
        let mut h = DMatrix::zeros(d, d);
        let mut xty = DVector::zeros(d);
        for dev in &self.devices {
            for i in 0..dev.len() {
                let x = DVector::from_iterator(d, dev.row(i).iter().map(|v| *v as f64));
                h += &x * x.transpose();
                xty += &x * dev.targets[i];
            }
        }
        h /= k;
        xty /= k;
        let eig = SymmetricEigen::new(h.clone());
        let w = h.cholesky().expect("Hessian is positive definite").solve(&xty);
        let w_star: Vec<f64> = w.iter().cloned().collect();
        let f_star = self.loss(&w_star);
        Curvature {
            mu: eig.eigenvalues.min(),
            l: eig.eigenvalues.max(),
            w_star,
            f_star,
        }
    }

    pub fn num_features(&self) -> usize {
        self.devices[0].num_features
    }

    /// Model dimension `D`.
    pub fn dim(&self) -> usize {
        match self.kind {
            TaskKind::QuadraticStronglyConvex => self.num_features(),
            TaskKind::LogisticRegression if self.classes == 2 => self.num_features() + 1,
            TaskKind::LogisticRegression => self.classes * (self.num_features() + 1),
        }
    }

    pub fn sample_counts(&self) -> Vec<u64> {
        self.devices.iter().map(|d| d.len() as u64).collect()
    }

    pub fn total_samples(&self) -> u64 {
        self.sample_counts().iter().sum()
    }

    /// Sum of per-sample losses and their gradient on `data` (no
    /// regularizer, not averaged). The gradient is accumulated into `grad`.
    fn data_terms(&self, w: &[f64], data: &DeviceData, mut grad: Option<&mut [f64]>) -> f64 {
        let nf = data.num_features;
        let mut total = 0.0;
        match (self.kind, self.classes) {
            (TaskKind::QuadraticStronglyConvex, _) => {
                for i in 0..data.len() {
                    let x = data.row(i);
                    let r: f64 = x.iter().zip(w).map(|(a, b)| *a as f64 * b).sum::<f64>() - data.targets[i];
                    total += 0.5 * r * r;
                    if let Some(g) = grad.as_deref_mut() {
                        for (gj, xj) in g.iter_mut().zip(x) {
                            *gj += r * *xj as f64;
                        }
                    }
                }
            }
            (TaskKind::LogisticRegression, 2) => {
                for i in 0..data.len() {
                    let x = data.row(i);
                    let z = x.iter().zip(w).map(|(a, b)| *a as f64 * b).sum::<f64>() + w[nf];
                    let y = data.targets[i];
                    total += softplus(z) - y * z;
                    if let Some(g) = grad.as_deref_mut() {
                        let r = sigmoid(z) - y;
                        for (gj, xj) in g.iter_mut().zip(x) {
                            *gj += r * *xj as f64;
                        }
                        g[nf] += r;
                    }
                }
            }
            (TaskKind::LogisticRegression, c) => {
                let stride = nf + 1;
                let mut z = vec![0.0; c];
                for i in 0..data.len() {
                    let x = data.row(i);
                    for (k, zk) in z.iter_mut().enumerate() {
                        let wk = &w[k * stride..(k + 1) * stride];
                        *zk = x.iter().zip(wk).map(|(a, b)| *a as f64 * b).sum::<f64>() + wk[nf];
                    }
                    let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let lse = zmax + z.iter().map(|v| (v - zmax).exp()).sum::<f64>().ln();
                    let y = data.targets[i] as usize;
                    total += lse - z[y];
                    if let Some(g) = grad.as_deref_mut() {
                        for k in 0..c {
                            let r = (z[k] - lse).exp() - if k == y { 1.0 } else { 0.0 };
                            let gk = &mut g[k * stride..(k + 1) * stride];
                            for (gj, xj) in gk.iter_mut().zip(x) {
                                *gj += r * *xj as f64;
                            }
                            gk[nf] += r;
                        }
                    }
                }
            }
        }
        total
    }

    /// Local loss `F_m(w)`, including the full regularizer so that
    /// `sum_m K_m F_m / K` equals the global loss.
    pub fn local_loss(&self, m: usize, w: &[f64]) -> f64 {
        let data = &self.devices[m];
        self.data_terms(w, data, None) / data.len() as f64 + self.reg_value(w)
    }

    pub fn local_gradient(&self, m: usize, w: &[f64]) -> Vec<f64> {
        let data = &self.devices[m];
        let mut g = vec![0.0; self.dim()];
        self.data_terms(w, data, Some(&mut g));
        let inv = 1.0 / data.len() as f64;
        g.iter_mut().zip(w).for_each(|(gj, wj)| *gj = *gj * inv + self.regularizer * wj);
        g
    }

    fn reg_value(&self, w: &[f64]) -> f64 {
        0.5 * self.regularizer * w.iter().map(|v| v * v).sum::<f64>()
    }

    /// Global training loss `F(w)`.
    pub fn loss(&self, w: &[f64]) -> f64 {
        let total: f64 = self.devices.iter().map(|d| self.data_terms(w, d, None)).sum();
        total / self.total_samples() as f64 + self.reg_value(w)
    }

    /// Test accuracy; `None` without a test set or for regression.
    pub fn accuracy(&self, w: &[f64]) -> Option<f64> {
        let test = self.test.as_ref()?;
        if self.kind != TaskKind::LogisticRegression || test.is_empty() {
            return None;
        }
        let nf = test.num_features;
        let stride = nf + 1;
        let correct = (0..test.len())
            .filter(|&i| {
                let x = test.row(i);
                let score = |k: usize| -> f64 {
                    let wk = &w[k * stride..(k + 1) * stride];
                    x.iter().zip(wk).map(|(a, b)| *a as f64 * b).sum::<f64>() + wk[nf]
                };
                let pred = if self.classes == 2 {
                    if score(0) > 0.0 { 1 } else { 0 }
                } else {
                    (0..self.classes).max_by(|a, b| score(*a).total_cmp(&score(*b))).unwrap_or(0)
                };
                pred == test.targets[i] as usize
            })
            .count();
        Some(correct as f64 / test.len() as f64)
    }

    /// Optimality gap `F(w) - F(w*)` for quadratic tasks.
    pub fn gap(&self, w: &[f64]) -> Option<f64> {
        self.curvature.as_ref().map(|c| self.loss(w) - c.f_star)
    }
}

/// Full-batch local gradients of every device at `w`.
pub fn local_gradients(task: &SyntheticTask, w: &[f64]) -> UplinkFrame {
    let grads = (0..task.devices.len()).map(|m| task.local_gradient(m, w)).collect();
    UplinkFrame::new(grads, task.sample_counts()).expect("task devices are consistent")
}
