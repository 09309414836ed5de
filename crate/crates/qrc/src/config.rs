//! Experiment configuration: a sectioned `key = value` text format.
//!
//! ```text
//! [experiment]
//! task = sine_square
//! [mixer]
//! g = 1.2566370614359172e8
//! dt = auto
//! ```
//!
//! Unknown sections or keys are rejected with the offending line. Every key
//! has a default, and [`ExperimentConfig::to_text`] writes all of them back in
//! a form that parses to the same configuration.

use std::fmt::Write as _;
use std::path::Path;

use qrc_core::baselines::{Baseline, BaselineKind, Recurrence, STOParams, StaticReservoirParams};
use qrc_core::fock::FockSpec;
use qrc_core::mixer::{
    DissipatorMode, MixerConfig, ReadoutSpec, REFERENCE_EPS0_MACKEY_GLASS, REFERENCE_EPS0_SINE_SQUARE,
};
use qrc_core::tasks::{MackeyGlassConfig, TaskKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{origin}: unknown section [{section}]")]
    UnknownSection { origin: String, section: String },
    #[error("{origin}: unknown key '{key}'")]
    UnknownKey { origin: String, key: String },
    #[error("{origin}: bad value for '{key}': {message}")]
    BadValue {
        origin: String,
        key: String,
        message: String,
    },
    #[error("{origin}: {message}")]
    Syntax { origin: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReservoirKind {
    Quantum,
    Static,
    Sto,
}

impl ReservoirKind {
    pub fn name(self) -> &'static str {
        match self {
            ReservoirKind::Quantum => "quantum",
            ReservoirKind::Static => "static",
            ReservoirKind::Sto => "sto",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "quantum" => Some(ReservoirKind::Quantum),
            "static" => Some(ReservoirKind::Static),
            "sto" | "dynamic" => Some(ReservoirKind::Sto),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    None,
    /// Neuron count: a square readout grid for the quantum reservoir, the
    /// reservoir size for the baselines.
    Neurons,
    /// Multiplier on g.
    G,
    /// Multiplier on both κ.
    Kappa,
    /// Delays of a Mackey-Glass run.
    Delay,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::None => "none",
            SweepAxis::Neurons => "neurons",
            SweepAxis::G => "g",
            SweepAxis::Kappa => "kappa",
            SweepAxis::Delay => "delay",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(SweepAxis::None),
            "neurons" => Some(SweepAxis::Neurons),
            "g" => Some(SweepAxis::G),
            "kappa" => Some(SweepAxis::Kappa),
            "delay" => Some(SweepAxis::Delay),
            _ => None,
        }
    }
}

/// Integration step of the mixer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Fixed(f64),
    /// Largest step that divides the segment and passes the stability guard.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub seed: u64,
    pub train_waveforms: usize,
    pub test_waveforms: usize,
    pub train_len: usize,
    pub test_len: usize,
    pub delays: Vec<usize>,
    pub mackey_glass: MackeyGlassConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumConfig {
    /// Rates, drives, truncation and dissipator. `mixer.dt` is ignored in
    /// favour of `step`, and the drive scales in favour of `eps0_*` when set.
    pub mixer: MixerConfig,
    /// `None` means the reference value for the task.
    pub eps0_a: Option<f64>,
    pub eps0_b: Option<f64>,
    pub step: Step,
    pub calibrate: bool,
    pub calibration_target: f64,
    pub calibration_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutConfig {
    pub max_na: usize,
    pub max_nb: usize,
    pub bias: bool,
    pub ridge: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub size: usize,
    pub seed: u64,
    /// Seeds averaged per sweep point: `seed, seed + 1, …`.
    pub seeds: usize,
    pub input_scale: f64,
    pub recurrent_scale: f64,
    pub recurrence: Recurrence,
    pub sto_gamma: f64,
    pub sto_q: f64,
    pub sto_sigma: f64,
    /// Step as a fraction of 1/Γ.
    pub sto_dt_ratio: f64,
    pub sto_interval: f64,
    /// Input gain and dc bias current in units of Γ/σ.
    pub sto_gain_ratio: f64,
    pub sto_bias_ratio: f64,
    pub sto_p0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub reservoir: ReservoirKind,
    pub dataset: DatasetConfig,
    pub quantum: QuantumConfig,
    pub readout: ReadoutConfig,
    pub baseline: BaselineConfig,
    pub sweep: SweepConfig,
    /// Output directory, relative to the output root unless absolute.
    pub output: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sto = STOParams::new(1, 1);
        let stat = StaticReservoirParams::new(1, 1);
        ExperimentConfig {
            task: TaskKind::SineSquare,
            reservoir: ReservoirKind::Quantum,
            dataset: DatasetConfig {
                seed: 42,
                train_waveforms: 100,
                test_waveforms: 100,
                train_len: 1000,
                test_len: 1000,
                delays: (1..=100).collect(),
                mackey_glass: MackeyGlassConfig::default(),
            },
            quantum: QuantumConfig {
                mixer: MixerConfig::default(),
                eps0_a: None,
                eps0_b: None,
                step: Step::Fixed(MixerConfig::default().dt),
                calibrate: true,
                calibration_target: 0.5,
                calibration_samples: 400,
            },
            readout: ReadoutConfig {
                max_na: 3,
                max_nb: 3,
                bias: true,
                ridge: 0.0,
                threshold: 0.5,
            },
            baseline: BaselineConfig {
                size: 40,
                seed: 1,
                seeds: 5,
                input_scale: stat.input_scale,
                recurrent_scale: stat.recurrent_scale,
                recurrence: stat.recurrence,
                sto_gamma: sto.gamma_damping,
                sto_q: sto.q,
                sto_sigma: sto.sigma,
                sto_dt_ratio: sto.dt * sto.gamma_damping,
                sto_interval: sto.interval,
                sto_gain_ratio: sto.input_gain * sto.sigma / sto.gamma_damping,
                sto_bias_ratio: sto.bias_current * sto.sigma / sto.gamma_damping,
                sto_p0: sto.p0,
            },
            sweep: SweepConfig {
                axis: SweepAxis::None,
                values: Vec::new(),
            },
            output: "run".to_string(),
        }
    }
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got '{v}'")),
    }
}

fn parse_f64(v: &str) -> Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("expected a number, got '{v}'"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("expected a finite number, got '{v}'"))
    }
}

fn parse_usize(v: &str) -> Result<usize, String> {
    v.parse()
        .map_err(|_| format!("expected a non-negative integer, got '{v}'"))
}

fn parse_u64(v: &str) -> Result<u64, String> {
    v.parse()
        .map_err(|_| format!("expected a non-negative integer, got '{v}'"))
}

/// Comma-separated integers; `a..b` is the inclusive range.
pub fn parse_usize_list(v: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = item.split_once("..") {
            let (a, b) = (parse_usize(a.trim())?, parse_usize(b.trim())?);
            if a > b {
                return Err(format!("empty range '{item}'"));
            }
            out.extend(a..=b);
        } else {
            out.push(parse_usize(item)?);
        }
    }
    Ok(out)
}

/// Comma-separated numbers; integer ranges `a..b` are allowed too.
pub fn parse_f64_list(v: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if item.contains("..") {
            out.extend(parse_usize_list(item)?.into_iter().map(|x| x as f64));
        } else {
            out.push(parse_f64(item)?);
        }
    }
    Ok(out)
}

/// Shortest list text: consecutive runs of integers collapse to `a..b`.
fn usize_list_text(v: &[usize]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[j] + 1 {
            j += 1;
        }
        if j - i >= 2 {
            parts.push(format!("{}..{}", v[i], v[j]));
        } else {
            parts.extend(v[i..=j].iter().map(|x| x.to_string()));
        }
        i = j + 1;
    }
    parts.join(",")
}

fn f64_list_text(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

/// Every `[section] key` pair the format accepts.
pub const KEYS: &[(&str, &[&str])] = &[
    ("experiment", &["task", "reservoir"]),
    (
        "dataset",
        &[
            "seed",
            "train_waveforms",
            "test_waveforms",
            "train_len",
            "test_len",
            "delays",
            "mg_beta",
            "mg_gamma",
            "mg_tau",
            "mg_exponent",
            "mg_step",
            "mg_warmup",
            "mg_history",
        ],
    ),
    (
        "mixer",
        &[
            "kappa_a",
            "kappa_b",
            "g",
            "eps0_a",
            "eps0_b",
            "segment",
            "cutoff_a",
            "cutoff_b",
            "dt",
            "dissipator",
            "truncation_limit",
            "calibrate",
            "calibration_target",
            "calibration_samples",
        ],
    ),
    ("readout", &["max_na", "max_nb", "bias", "ridge", "threshold"]),
    (
        "baseline",
        &[
            "size",
            "seed",
            "seeds",
            "input_scale",
            "recurrent_scale",
            "recurrence",
            "sto_gamma",
            "sto_q",
            "sto_sigma",
            "sto_dt_ratio",
            "sto_interval",
            "sto_gain_ratio",
            "sto_bias_ratio",
            "sto_p0",
        ],
    ),
    ("sweep", &["axis", "values"]),
    ("output", &["dir"]),
];

impl ExperimentConfig {
    /// Set one key. Errors carry only the message; callers add the origin.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<(), SetError> {
        let v = value.trim();
        let known = KEYS
            .iter()
            .find(|(s, _)| *s == section)
            .ok_or(SetError::UnknownSection)?;
        if !known.1.contains(&key) {
            return Err(SetError::UnknownKey);
        }
        let bad = SetError::BadValue;
        let d = &mut self.dataset;
        let mg = &mut d.mackey_glass;
        let q = &mut self.quantum;
        let b = &mut self.baseline;
        match (section, key) {
            ("experiment", "task") => self.task = TaskKind::parse(v).map_err(|e| bad(e.to_string()))?,
            ("experiment", "reservoir") => {
                self.reservoir =
                    ReservoirKind::parse(v).ok_or_else(|| bad(format!("expected quantum, static or sto, got '{v}'")))?
            }
            ("dataset", "seed") => d.seed = parse_u64(v).map_err(bad)?,
            ("dataset", "train_waveforms") => d.train_waveforms = parse_usize(v).map_err(bad)?,
            ("dataset", "test_waveforms") => d.test_waveforms = parse_usize(v).map_err(bad)?,
            ("dataset", "train_len") => d.train_len = parse_usize(v).map_err(bad)?,
            ("dataset", "test_len") => d.test_len = parse_usize(v).map_err(bad)?,
            ("dataset", "delays") => d.delays = parse_usize_list(v).map_err(bad)?,
            ("dataset", "mg_beta") => mg.beta = parse_f64(v).map_err(bad)?,
            ("dataset", "mg_gamma") => mg.gamma = parse_f64(v).map_err(bad)?,
            ("dataset", "mg_tau") => mg.tau = parse_f64(v).map_err(bad)?,
            ("dataset", "mg_exponent") => mg.exponent = parse_f64(v).map_err(bad)?,
            ("dataset", "mg_step") => mg.integration_step = parse_f64(v).map_err(bad)?,
            ("dataset", "mg_warmup") => mg.warmup = parse_usize(v).map_err(bad)?,
            ("dataset", "mg_history") => mg.history = parse_f64(v).map_err(bad)?,
            ("mixer", "kappa_a") => q.mixer.kappa_a = parse_f64(v).map_err(bad)?,
            ("mixer", "kappa_b") => q.mixer.kappa_b = parse_f64(v).map_err(bad)?,
            ("mixer", "g") => q.mixer.g = parse_f64(v).map_err(bad)?,
            ("mixer", "eps0_a") => {
                q.eps0_a = if v == "default" {
                    None
                } else {
                    Some(parse_f64(v).map_err(bad)?)
                }
            }
            ("mixer", "eps0_b") => {
                q.eps0_b = if v == "default" {
                    None
                } else {
                    Some(parse_f64(v).map_err(bad)?)
                }
            }
            ("mixer", "segment") => q.mixer.segment = parse_f64(v).map_err(bad)?,
            ("mixer", "cutoff_a") | ("mixer", "cutoff_b") => {
                let n = parse_usize(v).map_err(bad)?;
                let (a, bb) = if key == "cutoff_a" {
                    (n, q.mixer.spec.cutoff_b())
                } else {
                    (q.mixer.spec.cutoff_a(), n)
                };
                q.mixer.spec = FockSpec::new(a, bb).map_err(|e| bad(e.to_string()))?;
            }
            ("mixer", "dt") => {
                q.step = if v == "auto" {
                    Step::Auto
                } else {
                    Step::Fixed(parse_f64(v).map_err(bad)?)
                }
            }
            ("mixer", "dissipator") => {
                q.mixer.dissipator_mode =
                    DissipatorMode::parse(v).ok_or_else(|| bad(format!("expected separate or joint, got '{v}'")))?
            }
            ("mixer", "truncation_limit") => q.mixer.truncation_limit = parse_f64(v).map_err(bad)?,
            ("mixer", "calibrate") => q.calibrate = parse_bool(v).map_err(bad)?,
            ("mixer", "calibration_target") => q.calibration_target = parse_f64(v).map_err(bad)?,
            ("mixer", "calibration_samples") => q.calibration_samples = parse_usize(v).map_err(bad)?,
            ("readout", "max_na") => self.readout.max_na = parse_usize(v).map_err(bad)?,
            ("readout", "max_nb") => self.readout.max_nb = parse_usize(v).map_err(bad)?,
            ("readout", "bias") => self.readout.bias = parse_bool(v).map_err(bad)?,
            ("readout", "ridge") => self.readout.ridge = parse_f64(v).map_err(bad)?,
            ("readout", "threshold") => self.readout.threshold = parse_f64(v).map_err(bad)?,
            ("baseline", "size") => b.size = parse_usize(v).map_err(bad)?,
            ("baseline", "seed") => b.seed = parse_u64(v).map_err(bad)?,
            ("baseline", "seeds") => b.seeds = parse_usize(v).map_err(bad)?,
            ("baseline", "input_scale") => b.input_scale = parse_f64(v).map_err(bad)?,
            ("baseline", "recurrent_scale") => b.recurrent_scale = parse_f64(v).map_err(bad)?,
            ("baseline", "recurrence") => {
                b.recurrence = match v {
                    "embedded" => Recurrence::Embedded,
                    "broadcast" => Recurrence::Broadcast,
                    _ => return Err(bad(format!("expected embedded or broadcast, got '{v}'"))),
                }
            }
            ("baseline", "sto_gamma") => b.sto_gamma = parse_f64(v).map_err(bad)?,
            ("baseline", "sto_q") => b.sto_q = parse_f64(v).map_err(bad)?,
            ("baseline", "sto_sigma") => b.sto_sigma = parse_f64(v).map_err(bad)?,
            ("baseline", "sto_dt_ratio") => b.sto_dt_ratio = parse_f64(v).map_err(bad)?,
            ("baseline", "sto_interval") => b.sto_interval = parse_f64(v).map_err(bad)?,
            ("baseline", "sto_gain_ratio") => b.sto_gain_ratio = parse_f64(v).map_err(bad)?,
            ("baseline", "sto_bias_ratio") => b.sto_bias_ratio = parse_f64(v).map_err(bad)?,
            ("baseline", "sto_p0") => b.sto_p0 = parse_f64(v).map_err(bad)?,
            ("sweep", "axis") => {
                self.sweep.axis = SweepAxis::parse(v)
                    .ok_or_else(|| bad(format!("expected none, neurons, g, kappa or delay, got '{v}'")))?
            }
            ("sweep", "values") => self.sweep.values = parse_f64_list(v).map_err(bad)?,
            ("output", "dir") => {
                if v.is_empty() {
                    return Err(bad("empty directory".to_string()));
                }
                self.output = v.to_string()
            }
            _ => unreachable!("key table and setter disagree on {section}.{key}"),
        }
        Ok(())
    }

    /// Apply a configuration text on top of `self`. `name` labels errors.
    pub fn apply_text(&mut self, text: &str, name: &str) -> Result<(), ConfigError> {
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let origin = format!("{name}:{}", i + 1);
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let s = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    origin: origin.clone(),
                    message: format!("unterminated section header '{line}'"),
                })?;
                let s = s.trim();
                if !KEYS.iter().any(|(k, _)| *k == s) {
                    return Err(ConfigError::UnknownSection {
                        origin,
                        section: s.to_string(),
                    });
                }
                section = Some(s.to_string());
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                origin: origin.clone(),
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            let sec = section.as_deref().ok_or_else(|| ConfigError::Syntax {
                origin: origin.clone(),
                message: "key outside of any [section]".to_string(),
            })?;
            self.set(sec, key.trim(), value)
                .map_err(|e| e.at(origin, &format!("{sec}.{}", key.trim())))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str, name: &str) -> Result<Self, ConfigError> {
        let mut c = ExperimentConfig::default();
        c.apply_text(text, name)?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Syntax {
            origin: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_text(&text, &path.display().to_string())
    }

    /// Apply a `section.key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let origin = format!("--set {assignment}");
        let (path, value) = assignment.split_once('=').ok_or_else(|| ConfigError::Syntax {
            origin: origin.clone(),
            message: "expected section.key=value".to_string(),
        })?;
        let (section, key) = path.trim().split_once('.').ok_or_else(|| ConfigError::Syntax {
            origin: origin.clone(),
            message: "expected section.key=value".to_string(),
        })?;
        self.set(section, key, value).map_err(|e| e.at(origin, path.trim()))
    }

    /// Drive scales after substituting the reference values for the task.
    pub fn eps0(&self) -> (f64, f64) {
        let reference = match self.task {
            TaskKind::SineSquare => REFERENCE_EPS0_SINE_SQUARE,
            TaskKind::MackeyGlass => REFERENCE_EPS0_MACKEY_GLASS,
        };
        (
            self.quantum.eps0_a.unwrap_or(reference),
            self.quantum.eps0_b.unwrap_or(reference),
        )
    }

    /// Mixer parameters with drive scales resolved; `dt` still unresolved
    /// when the step is `auto`.
    pub fn mixer(&self) -> MixerConfig {
        let (a, b) = self.eps0();
        let mut m = self.quantum.mixer.clone();
        m.eps0_a = a;
        m.eps0_b = b;
        if let Step::Fixed(dt) = self.quantum.step {
            m.dt = dt;
        }
        m
    }

    pub fn readout_spec(&self) -> ReadoutSpec {
        ReadoutSpec::new(self.readout.max_na, self.readout.max_nb).with_bias(self.readout.bias)
    }

    /// Baseline template with the configured size and seed.
    pub fn baseline(&self) -> Baseline {
        let b = &self.baseline;
        match self.reservoir {
            ReservoirKind::Sto => {
                let unit = b.sto_gamma / b.sto_sigma;
                Baseline::Sto(STOParams {
                    gamma_damping: b.sto_gamma,
                    q: b.sto_q,
                    sigma: b.sto_sigma,
                    size: b.size,
                    seed: b.seed,
                    dt: b.sto_dt_ratio / b.sto_gamma,
                    interval: b.sto_interval,
                    input_gain: b.sto_gain_ratio * unit,
                    bias_current: b.sto_bias_ratio * unit,
                    p0: b.sto_p0,
                })
            }
            _ => Baseline::Static(StaticReservoirParams {
                size: b.size,
                seed: b.seed,
                input_scale: b.input_scale,
                recurrent_scale: b.recurrent_scale,
                recurrence: b.recurrence,
            }),
        }
    }

    pub fn baseline_kind(&self) -> Option<BaselineKind> {
        match self.reservoir {
            ReservoirKind::Quantum => None,
            ReservoirKind::Static => Some(BaselineKind::Static),
            ReservoirKind::Sto => Some(BaselineKind::Sto),
        }
    }

    /// Seeds averaged in baseline sweeps.
    pub fn baseline_seeds(&self) -> Vec<u64> {
        (0..self.baseline.seeds as u64)
            .map(|i| self.baseline.seed + i)
            .collect()
    }

    /// Cross-field checks that the per-key parsers cannot make.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let d = &self.dataset;
        match self.task {
            TaskKind::SineSquare => {
                if d.train_waveforms == 0 || d.test_waveforms == 0 {
                    return bad("train_waveforms and test_waveforms must be at least 1".into());
                }
            }
            TaskKind::MackeyGlass => {
                if d.train_len == 0 || d.test_len == 0 {
                    return bad("train_len and test_len must be at least 1".into());
                }
                if d.delays.is_empty() {
                    return bad("at least one delay is required".into());
                }
                d.mackey_glass.validate().or_else(|e| bad(e.to_string()))?;
            }
        }
        if self.reservoir == ReservoirKind::Quantum {
            let m = self.mixer();
            if let Err(e) = m.validate() {
                return bad(e.to_string());
            }
            if let Err(e) = self.readout_spec().check(m.spec) {
                return bad(e.to_string());
            }
            if let Step::Fixed(dt) = self.quantum.step {
                if !(dt > 0.0) {
                    return bad("dt must be positive or 'auto'".into());
                }
            }
            if self.quantum.calibrate
                && (!(self.quantum.calibration_target > 0.0) || self.quantum.calibration_samples == 0)
            {
                return bad("calibration needs a positive target and at least one sample".into());
            }
        } else {
            if self.baseline.size == 0 || self.baseline.seeds == 0 {
                return bad("baseline size and seeds must be at least 1".into());
            }
            if let Baseline::Sto(p) = self.baseline() {
                if let Err(e) = p.validate() {
                    return bad(e.to_string());
                }
            }
        }
        if !(self.readout.ridge >= 0.0) {
            return bad("ridge must be non-negative".into());
        }
        match self.sweep.axis {
            SweepAxis::None => {}
            axis => {
                if self.sweep.values.is_empty() {
                    return bad(format!("sweep axis '{}' needs values", axis.name()));
                }
                if matches!(axis, SweepAxis::G | SweepAxis::Kappa) && self.reservoir != ReservoirKind::Quantum {
                    return bad(format!("a {} sweep needs the quantum reservoir", axis.name()));
                }
                if axis == SweepAxis::Delay && self.task != TaskKind::MackeyGlass {
                    return bad("a delay sweep needs the mackey_glass task".into());
                }
                let integral = |v: &f64| *v >= 1.0 && v.fract() == 0.0;
                if matches!(axis, SweepAxis::Neurons | SweepAxis::Delay) && !self.sweep.values.iter().all(integral) {
                    return bad(format!("{} values must be positive integers", axis.name()));
                }
                if matches!(axis, SweepAxis::G | SweepAxis::Kappa) && !self.sweep.values.iter().all(|v| *v > 0.0) {
                    return bad(format!("{} multipliers must be positive", axis.name()));
                }
            }
        }
        Ok(())
    }

    /// All keys with their resolved values, in section order.
    pub fn entries(&self) -> Vec<(&'static str, &'static str, String)> {
        let d = &self.dataset;
        let mg = &d.mackey_glass;
        let q = &self.quantum;
        let m = &q.mixer;
        let b = &self.baseline;
        let (eps_a, eps_b) = self.eps0();
        let f = |x: f64| format!("{x:?}");
        vec![
            ("experiment", "task", self.task.name().to_string()),
            ("experiment", "reservoir", self.reservoir.name().to_string()),
            ("dataset", "seed", d.seed.to_string()),
            ("dataset", "train_waveforms", d.train_waveforms.to_string()),
            ("dataset", "test_waveforms", d.test_waveforms.to_string()),
            ("dataset", "train_len", d.train_len.to_string()),
            ("dataset", "test_len", d.test_len.to_string()),
            ("dataset", "delays", usize_list_text(&d.delays)),
            ("dataset", "mg_beta", f(mg.beta)),
            ("dataset", "mg_gamma", f(mg.gamma)),
            ("dataset", "mg_tau", f(mg.tau)),
            ("dataset", "mg_exponent", f(mg.exponent)),
            ("dataset", "mg_step", f(mg.integration_step)),
            ("dataset", "mg_warmup", mg.warmup.to_string()),
            ("dataset", "mg_history", f(mg.history)),
            ("mixer", "kappa_a", f(m.kappa_a)),
            ("mixer", "kappa_b", f(m.kappa_b)),
            ("mixer", "g", f(m.g)),
            ("mixer", "eps0_a", f(eps_a)),
            ("mixer", "eps0_b", f(eps_b)),
            ("mixer", "segment", f(m.segment)),
            ("mixer", "cutoff_a", m.spec.cutoff_a().to_string()),
            ("mixer", "cutoff_b", m.spec.cutoff_b().to_string()),
            (
                "mixer",
                "dt",
                match q.step {
                    Step::Auto => "auto".to_string(),
                    Step::Fixed(dt) => f(dt),
                },
            ),
            ("mixer", "dissipator", m.dissipator_mode.name().to_string()),
            ("mixer", "truncation_limit", f(m.truncation_limit)),
            ("mixer", "calibrate", q.calibrate.to_string()),
            ("mixer", "calibration_target", f(q.calibration_target)),
            ("mixer", "calibration_samples", q.calibration_samples.to_string()),
            ("readout", "max_na", self.readout.max_na.to_string()),
            ("readout", "max_nb", self.readout.max_nb.to_string()),
            ("readout", "bias", self.readout.bias.to_string()),
            ("readout", "ridge", f(self.readout.ridge)),
            ("readout", "threshold", f(self.readout.threshold)),
            ("baseline", "size", b.size.to_string()),
            ("baseline", "seed", b.seed.to_string()),
            ("baseline", "seeds", b.seeds.to_string()),
            ("baseline", "input_scale", f(b.input_scale)),
            ("baseline", "recurrent_scale", f(b.recurrent_scale)),
            (
                "baseline",
                "recurrence",
                match b.recurrence {
                    Recurrence::Embedded => "embedded",
                    Recurrence::Broadcast => "broadcast",
                }
                .to_string(),
            ),
            ("baseline", "sto_gamma", f(b.sto_gamma)),
            ("baseline", "sto_q", f(b.sto_q)),
            ("baseline", "sto_sigma", f(b.sto_sigma)),
            ("baseline", "sto_dt_ratio", f(b.sto_dt_ratio)),
            ("baseline", "sto_interval", f(b.sto_interval)),
            ("baseline", "sto_gain_ratio", f(b.sto_gain_ratio)),
            ("baseline", "sto_bias_ratio", f(b.sto_bias_ratio)),
            ("baseline", "sto_p0", f(b.sto_p0)),
            ("sweep", "axis", self.sweep.axis.name().to_string()),
            ("sweep", "values", f64_list_text(&self.sweep.values)),
            ("output", "dir", self.output.clone()),
        ]
    }

    /// The full resolved configuration in the input format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for (section, key, value) in self.entries() {
            if section != current {
                if !current.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{section}]");
                current = section;
            }
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }
}

/// Failure of a single assignment, before the origin is known.
#[derive(Debug, Clone, PartialEq)]
pub enum SetError {
    UnknownSection,
    UnknownKey,
    BadValue(String),
}

impl SetError {
    fn at(self, origin: String, key: &str) -> ConfigError {
        match self {
            SetError::UnknownSection => ConfigError::UnknownSection {
                origin,
                section: key.split('.').next().unwrap_or(key).to_string(),
            },
            SetError::UnknownKey => ConfigError::UnknownKey {
                origin,
                key: key.to_string(),
            },
            SetError::BadValue(message) => ConfigError::BadValue {
                origin,
                key: key.to_string(),
                message,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let c = ExperimentConfig::default();
        let back = ExperimentConfig::from_text(&c.to_text(), "t").unwrap();
        // eps0 prints resolved, so compare the resolved views
        assert_eq!(back.to_text(), c.to_text());
        assert_eq!(back.mixer(), c.mixer());
        assert_eq!(back.dataset, c.dataset);
    }

    #[test]
    fn every_key_round_trips_after_edits() {
        let mut c = ExperimentConfig::default();
        for kv in [
            "experiment.task=mackey_glass",
            "experiment.reservoir=sto",
            "dataset.delays=1..5,9,20..22",
            "mixer.g=1.0e7",
            "mixer.dt=auto",
            "mixer.dissipator=joint",
            "mixer.cutoff_b=5",
            "readout.bias=false",
            "baseline.recurrence=broadcast",
            "sweep.axis=kappa",
            "sweep.values=1,2.5",
            "output.dir=x/y",
        ] {
            c.apply_override(kv).unwrap();
        }
        assert_eq!(c.dataset.delays, vec![1, 2, 3, 4, 5, 9, 20, 21, 22]);
        let back = ExperimentConfig::from_text(&c.to_text(), "t").unwrap();
        assert_eq!(back.to_text(), c.to_text());
        assert_eq!(back.quantum.step, Step::Auto);
        assert_eq!(back.sweep.values, vec![1.0, 2.5]);
    }

    #[test]
    fn unknown_keys_name_the_line() {
        let err = ExperimentConfig::from_text("[mixer]\n\ng = 1\nkapa_a = 3\n", "cfg").unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                origin: "cfg:4".into(),
                key: "mixer.kapa_a".into()
            }
        );
        let err = ExperimentConfig::from_text("[mixr]\n", "cfg").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownSection { .. }));
        let err = ExperimentConfig::from_text("g = 1\n", "cfg").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { .. }));
        let err = ExperimentConfig::from_text("[mixer]\ng = fast\n", "cfg").unwrap_err();
        assert!(err.to_string().contains("cfg:2"), "{err}");
        assert!(ExperimentConfig::default().apply_override("mixer.nope=1").is_err());
        assert!(ExperimentConfig::default().apply_override("mixer=1").is_err());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let c = ExperimentConfig::from_text("# top\n[readout] \nmax_na = 2 # trailing\n\n", "t").unwrap();
        assert_eq!(c.readout.max_na, 2);
    }

    #[test]
    fn reference_drive_follows_the_task() {
        let mut c = ExperimentConfig::default();
        assert_eq!(c.eps0().0, REFERENCE_EPS0_SINE_SQUARE);
        c.apply_override("experiment.task=mackey_glass").unwrap();
        assert_eq!(c.eps0().0, REFERENCE_EPS0_MACKEY_GLASS);
        c.apply_override("mixer.eps0_a=3").unwrap();
        assert_eq!(c.eps0(), (3.0, REFERENCE_EPS0_MACKEY_GLASS));
    }

    #[test]
    fn cross_field_validation() {
        let mut c = ExperimentConfig::default();
        c.validate().unwrap();
        c.apply_override("readout.max_na=9").unwrap();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.apply_override("sweep.axis=delay").unwrap();
        c.apply_override("sweep.values=1..3").unwrap();
        assert!(c.validate().is_err());
        c.apply_override("experiment.task=mackey_glass").unwrap();
        c.validate().unwrap();
        c.apply_override("sweep.values=1.5").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn list_syntax() {
        assert_eq!(parse_usize_list("1..3, 7").unwrap(), vec![1, 2, 3, 7]);
        assert!(parse_usize_list("3..1").is_err());
        assert_eq!(usize_list_text(&[1, 2, 3, 5, 6, 9]), "1..3,5,6,9");
        assert_eq!(parse_f64_list("0.25,1e-3").unwrap(), vec![0.25, 1e-3]);
    }
}
