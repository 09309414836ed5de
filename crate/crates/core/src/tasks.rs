//! Benchmark tasks: sine/square waveform classification and Mackey-Glass
//! delayed-input recall.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Points per sine/square waveform.
pub const WAVEFORM_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    SineSquare,
    MackeyGlass,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::SineSquare => "sine_square",
            TaskKind::MackeyGlass => "mackey_glass",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sine_square" => Ok(TaskKind::SineSquare),
            "mackey_glass" => Ok(TaskKind::MackeyGlass),
            other => Err(Error::invalid(format!("unknown task kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Waveform {
    Sine,
    Square,
}

impl Waveform {
    pub fn samples(self) -> [f64; WAVEFORM_POINTS] {
        let mut out = [0.0; WAVEFORM_POINTS];
        for (k, v) in out.iter_mut().enumerate() {
            *v = match self {
                Waveform::Sine => libm::sin(2.0 * PI * k as f64 / WAVEFORM_POINTS as f64),
                Waveform::Square => {
                    if k < WAVEFORM_POINTS / 2 {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
        }
        // sin(π) and sin(2π) are not exactly zero in floating point
        if self == Waveform::Sine {
            out[0] = 0.0;
            out[2] = 1.0;
            out[4] = 0.0;
            out[6] = -1.0;
        }
        out
    }

    pub fn label(self) -> f64 {
        match self {
            Waveform::Sine => 1.0,
            Waveform::Square => 0.0,
        }
    }
}

/// Input sequence with one target row per output.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<f64>,
    /// outputs × samples
    pub targets: DMatrix<f64>,
    pub labels: Vec<String>,
    pub kind: TaskKind,
    pub seed: u64,
    pub metadata: BTreeMap<String, String>,
}

impl Dataset {
    pub fn new(
        inputs: Vec<f64>,
        targets: DMatrix<f64>,
        labels: Vec<String>,
        kind: TaskKind,
        seed: u64,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self> {
        if targets.ncols() != inputs.len() {
            return Err(Error::invalid(format!(
                "{} inputs but {} target columns",
                inputs.len(),
                targets.ncols()
            )));
        }
        if labels.len() != targets.nrows() {
            return Err(Error::invalid("one label per target row is required"));
        }
        Ok(Dataset {
            inputs,
            targets,
            labels,
            kind,
            seed,
            metadata,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn n_outputs(&self) -> usize {
        self.targets.nrows()
    }

    /// Contiguous samples `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Dataset> {
        if start > end || end > self.len() {
            return Err(Error::invalid(format!(
                "slice {start}..{end} out of range for {} samples",
                self.len()
            )));
        }
        Ok(Dataset {
            inputs: self.inputs[start..end].to_vec(),
            targets: self.targets.columns(start, end - start).into_owned(),
            labels: self.labels.clone(),
            kind: self.kind,
            seed: self.seed,
            metadata: self.metadata.clone(),
        })
    }

    /// Splits into `..at` and `at..`.
    pub fn split(&self, at: usize) -> Result<(Dataset, Dataset)> {
        Ok((self.slice(0, at)?, self.slice(at, self.len())?))
    }

    /// `self` followed by `other`; labels and kind must agree.
    pub fn concat(self, other: &Dataset) -> Result<Dataset> {
        if self.labels != other.labels || self.kind != other.kind {
            return Err(Error::invalid("datasets with different targets cannot be joined"));
        }
        let n = self.len();
        let mut targets = self.targets.resize_horizontally(n + other.len(), 0.0);
        targets.columns_mut(n, other.len()).copy_from(&other.targets);
        let mut inputs = self.inputs;
        inputs.extend_from_slice(&other.inputs);
        Ok(Dataset {
            inputs,
            targets,
            ..self
        })
    }

    /// Target row by label.
    pub fn target_row(&self, label: &str) -> Option<Vec<f64>> {
        let r = self.labels.iter().position(|l| l == label)?;
        Some(self.targets.row(r).iter().copied().collect())
    }
}

/// Concatenated waveforms with one class row (`target_class`, 1 for sine).
pub fn waveform_dataset(waves: &[Waveform], seed: u64) -> Result<Dataset> {
    if waves.is_empty() {
        return Err(Error::invalid("at least one waveform is required"));
    }
    let n = waves.len() * WAVEFORM_POINTS;
    let mut inputs = Vec::with_capacity(n);
    let mut targets = DMatrix::zeros(1, n);
    for (w, wave) in waves.iter().enumerate() {
        for (k, v) in wave.samples().iter().enumerate() {
            inputs.push(*v);
            targets[(0, w * WAVEFORM_POINTS + k)] = wave.label();
        }
    }
    let n_sine = waves.iter().filter(|w| **w == Waveform::Sine).count();
    let mut meta = BTreeMap::new();
    meta.insert("n_waveforms".to_string(), waves.len().to_string());
    meta.insert("n_sine".to_string(), n_sine.to_string());
    meta.insert("points_per_waveform".to_string(), WAVEFORM_POINTS.to_string());
    Dataset::new(
        inputs,
        targets,
        alloc::vec!["target_class".to_string()],
        TaskKind::SineSquare,
        seed,
        meta,
    )
}

/// Random independent sine/square choice per waveform.
pub fn gen_sine_square(n_waveforms: usize, seed: u64) -> Result<Dataset> {
    if n_waveforms < 1 {
        return Err(Error::invalid("n_waveforms must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<Waveform> = (0..n_waveforms)
        .map(|_| {
            if rng.random::<bool>() {
                Waveform::Sine
            } else {
                Waveform::Square
            }
        })
        .collect();
    waveform_dataset(&waves, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MackeyGlassConfig {
    pub beta: f64,
    pub gamma: f64,
    /// Delay in sample units.
    pub tau: f64,
    pub exponent: f64,
    /// Integration step in sample units; must divide 1.
    pub integration_step: f64,
    pub warmup: usize,
    pub length: usize,
    /// Constant initial history.
    pub history: f64,
    /// Recorded with the data; the generator itself is deterministic.
    pub seed: u64,
}

impl Default for MackeyGlassConfig {
    fn default() -> Self {
        MackeyGlassConfig {
            beta: 0.2,
            gamma: 0.1,
            tau: 17.0,
            exponent: 10.0,
            integration_step: 0.1,
            warmup: 1000,
            length: 2100,
            history: 1.2,
            seed: 42,
        }
    }
}

impl MackeyGlassConfig {
    /// Integration steps per sample.
    pub fn steps_per_sample(&self) -> Result<usize> {
        let h = self.integration_step;
        if !(h > 0.0) || h > 1.0 {
            return Err(Error::invalid("integration_step must lie in (0, 1]"));
        }
        let k = libm::round(1.0 / h);
        if (k * h - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("integration_step {h} does not divide 1")));
        }
        Ok(k as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.steps_per_sample()?;
        for (name, v) in [("beta", self.beta), ("gamma", self.gamma), ("exponent", self.exponent)] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite")));
            }
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::invalid("tau must be positive"));
        }
        if !(self.history > 0.0) || !self.history.is_finite() {
            return Err(Error::invalid("history must be positive"));
        }
        if self.length == 0 {
            return Err(Error::invalid("length must be positive"));
        }
        Ok(())
    }

    fn derivative(&self, x: f64, delayed: f64) -> f64 {
        self.beta * delayed / (1.0 + libm::pow(delayed, self.exponent)) - self.gamma * x
    }
}

/// Delay line sampled every half integration step, read with linear
/// interpolation. Index 0 is the newest entry.
struct History {
    buf: Vec<f64>,
    head: usize,
}

impl History {
    fn new(len: usize, value: f64) -> Self {
        History {
            buf: alloc::vec![value; len],
            head: 0,
        }
    }

    fn push(&mut self, v: f64) {
        self.head = (self.head + 1) % self.buf.len();
        self.buf[self.head] = v;
    }

    fn at(&self, back: f64) -> f64 {
        let n = self.buf.len();
        let lo = libm::floor(back) as usize;
        let frac = back - lo as f64;
        let get = |k: usize| self.buf[(self.head + n - (k % n)) % n];
        if frac == 0.0 {
            get(lo)
        } else {
            (1.0 - frac) * get(lo) + frac * get(lo + 1)
        }
    }
}

/// Integrates the delay equation by RK4 and emits one value per sample time
/// after the warmup.
pub fn gen_mackey_glass(config: &MackeyGlassConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let per = config.steps_per_sample()?;
    let h = config.integration_step;
    // in half steps, so the RK4 midpoint stages land on stored values
    let lag = 2.0 * config.tau / h;
    let mut hist = History::new(libm::ceil(lag) as usize + 2, config.history);
    let mut x = config.history;
    let mut out = Vec::with_capacity(config.length);
    let total = config.warmup + config.length;
    for sample in 0..total {
        if sample >= config.warmup {
            out.push(x);
        }
        for _ in 0..per {
            let d0 = hist.at(lag);
            let dh = hist.at(lag - 1.0);
            let d1 = hist.at(lag - 2.0);
            let k1 = config.derivative(x, d0);
            let k2 = config.derivative(x + 0.5 * h * k1, dh);
            let k3 = config.derivative(x + 0.5 * h * k2, dh);
            let k4 = config.derivative(x + h * k3, d1);
            let next = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if !next.is_finite() {
                return Err(Error::Instability { value: next });
            }
            // cubic Hermite midpoint from the end-point slopes
            let mid = 0.5 * (x + next) + h / 8.0 * (k1 - config.derivative(next, d1));
            hist.push(mid);
            hist.push(next);
            x = next;
        }
    }
    Ok(out)
}

/// Delayed-recall targets: input `i` is paired with `series[i + d]` for every
/// delay `d`. Train covers `0..train_len`, test the next `test_len` samples.
pub fn make_delay_targets(
    series: &[f64],
    delays: &[usize],
    train_len: usize,
    test_len: usize,
) -> Result<(Dataset, Dataset)> {
    if delays.is_empty() {
        return Err(Error::invalid("at least one delay is required"));
    }
    let max_delay = *delays.iter().max().unwrap_or(&0);
    let need = train_len + test_len + max_delay;
    if series.len() < need {
        return Err(Error::invalid(format!(
            "series of length {} is too short; {need} samples are required",
            series.len()
        )));
    }
    let n = train_len + test_len;
    let targets = DMatrix::from_fn(delays.len(), n, |r, i| series[i + delays[r]]);
    let labels = delays.iter().map(|d| format!("target_{d}")).collect();
    let mut meta = BTreeMap::new();
    meta.insert("train_len".to_string(), train_len.to_string());
    meta.insert("test_len".to_string(), test_len.to_string());
    meta.insert("max_delay".to_string(), max_delay.to_string());
    let all = Dataset::new(series[..n].to_vec(), targets, labels, TaskKind::MackeyGlass, 0, meta)?;
    all.split(train_len)
}
