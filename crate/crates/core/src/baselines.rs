//! Classical comparison reservoirs: a static ReLU layer with one step of
//! input memory, and a layer of spin-torque nano-oscillators.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mixer::FeatureMatrix;
use crate::readout::{classification_accuracy, fit, predict};
use crate::tasks::Dataset;
use crate::{Error, Result};

/// How the recurrent matrix sees the previous input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recurrence {
    /// `W_res (W_in x(t−1))`
    Embedded,
    /// `W_res 1 x(t−1)`: the scalar broadcast to every neuron first.
    Broadcast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticReservoirParams {
    pub size: usize,
    pub seed: u64,
    pub input_scale: f64,
    pub recurrent_scale: f64,
    pub recurrence: Recurrence,
}

impl StaticReservoirParams {
    pub fn new(size: usize, seed: u64) -> Self {
        StaticReservoirParams {
            size,
            seed,
            input_scale: 1.0,
            recurrent_scale: 0.9,
            recurrence: Recurrence::Embedded,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.random_range(-1.0..=1.0)).collect()
}

/// Random weights of a static reservoir.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticReservoir {
    w_in: Vec<f64>,
    /// `W_res` applied to the recurrent operand; reduced to a vector because
    /// that operand is always a fixed vector times the scalar x(t−1).
    w_rec: Vec<f64>,
    w_res: DMatrix<f64>,
}

impl StaticReservoir {
    pub fn new(params: &StaticReservoirParams) -> Result<Self> {
        if params.size == 0 {
            return Err(Error::invalid("reservoir size must be at least 1"));
        }
        let n = params.size;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let w_in = uniform(&mut rng, n, params.input_scale);
        let w_res = DMatrix::from_vec(n, n, uniform(&mut rng, n * n, params.recurrent_scale));
        Ok(Self::from_weights(w_in, w_res, params.recurrence))
    }

    pub fn from_weights(w_in: Vec<f64>, w_res: DMatrix<f64>, recurrence: Recurrence) -> Self {
        let operand = match recurrence {
            Recurrence::Embedded => nalgebra::DVector::from_column_slice(&w_in),
            Recurrence::Broadcast => nalgebra::DVector::from_element(w_in.len(), 1.0),
        };
        let w_rec = (&w_res * operand).iter().copied().collect();
        StaticReservoir { w_in, w_rec, w_res }
    }

    pub fn w_in(&self) -> &[f64] {
        &self.w_in
    }

    pub fn w_res(&self) -> &DMatrix<f64> {
        &self.w_res
    }

    /// y(t) = ReLU(W_in x(t) + W_res · x(t−1) term), with x(−1) = 0.
    /// Returns `size × n_inputs`.
    pub fn states(&self, inputs: &[f64]) -> DMatrix<f64> {
        let n = self.w_in.len();
        let mut out = DMatrix::zeros(n, inputs.len());
        let mut prev = 0.0;
        for (t, &x) in inputs.iter().enumerate() {
            for i in 0..n {
                out[(i, t)] = (self.w_in[i] * x + self.w_rec[i] * prev).max(0.0);
            }
            prev = x;
        }
        out
    }
}

pub fn static_features(inputs: &[f64], params: &StaticReservoirParams, bias: bool) -> Result<FeatureMatrix> {
    Ok(FeatureMatrix::from_rows(
        StaticReservoir::new(params)?.states(inputs),
        bias,
    ))
}

/// Oscillator layer integrating dp/dt = 2(−Γ(1 + Qp) + σI(1 − p))p per
/// oscillator, with drive current I = I_dc + gain·W_in·x held for each input.
#[derive(Debug, Clone, PartialEq)]
pub struct STOParams {
    /// Γ, 1/s.
    pub gamma_damping: f64,
    /// Nonlinearity Q.
    pub q: f64,
    /// Geometry factor σ, 1/(s·A) in the units of the current.
    pub sigma: f64,
    pub size: usize,
    pub seed: u64,
    /// Integration step, s.
    pub dt: f64,
    /// Input interval, s.
    pub interval: f64,
    /// Current per unit weighted input.
    pub input_gain: f64,
    /// Operating-point current.
    pub bias_current: f64,
    /// Initial power of every oscillator.
    pub p0: f64,
}

impl STOParams {
    pub fn new(size: usize, seed: u64) -> Self {
        // Drive σI spans (1.5 … 11.5)·Γ over x ∈ [−1, 1] for |W_in| = 1,
        // i.e. steady powers of ≈0.15 … 0.74.
        let gamma = 2.2e6;
        STOParams {
            gamma_damping: gamma,
            q: 2.0,
            sigma: 1.0,
            size,
            seed,
            dt: 0.01 / gamma,
            interval: 100e-9,
            input_gain: 5.0 * gamma,
            bias_current: 6.5 * gamma,
            p0: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::invalid("oscillator count must be at least 1"));
        }
        if !(self.gamma_damping > 0.0) || !self.gamma_damping.is_finite() {
            return Err(Error::invalid("damping rate must be positive"));
        }
        if !(self.dt > 0.0) || !(self.interval > 0.0) {
            return Err(Error::invalid("dt and interval must be positive"));
        }
        if self.dt * self.gamma_damping > 0.05 {
            return Err(Error::invalid(format!(
                "dt·Γ = {:.3} exceeds 0.05",
                self.dt * self.gamma_damping
            )));
        }
        for (name, v) in [
            ("Q", self.q),
            ("sigma", self.sigma),
            ("input_gain", self.input_gain),
            ("bias_current", self.bias_current),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite")));
            }
        }
        if !(0.0..=1.0).contains(&self.p0) {
            return Err(Error::invalid("initial power must lie in [0, 1]"));
        }
        Ok(())
    }

    fn rate(&self, p: f64, drive: f64) -> f64 {
        2.0 * (-self.gamma_damping * (1.0 + self.q * p) + drive * (1.0 - p)) * p
    }

    /// Stable power for a constant drive σI, or 0 below threshold.
    pub fn steady_power(&self, drive: f64) -> f64 {
        let g = self.gamma_damping;
        if drive <= g {
            0.0
        } else {
            (drive - g) / (g * self.q + drive)
        }
    }
}

/// Oscillator powers at the end of each input interval, `size × n_inputs`.
pub fn sto_states(inputs: &[f64], params: &STOParams) -> Result<DMatrix<f64>> {
    params.validate()?;
    let n = params.size;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let w_in = uniform(&mut rng, n, 1.0);
    let steps = libm::ceil(params.interval / params.dt * (1.0 - 1e-12)) as usize;
    let h = params.interval / steps as f64;
    let mut p = alloc::vec![params.p0; n];
    let mut out = DMatrix::zeros(n, inputs.len());
    for (t, &x) in inputs.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::invalid("non-finite input").at_sample(t));
        }
        for (i, pi) in p.iter_mut().enumerate() {
            let drive = params.sigma * (params.bias_current + params.input_gain * w_in[i] * x);
            let mut v = *pi;
            for _ in 0..steps {
                let k1 = params.rate(v, drive);
                let k2 = params.rate(v + 0.5 * h * k1, drive);
                let k3 = params.rate(v + 0.5 * h * k2, drive);
                let k4 = params.rate(v + h * k3, drive);
                v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                if !(-1e-9..=1.0 + 1e-9).contains(&v) {
                    return Err(Error::Instability { value: v }.at_sample(t));
                }
                v = v.clamp(0.0, 1.0);
            }
            *pi = v;
            out[(i, t)] = v;
        }
    }
    Ok(out)
}

pub fn sto_features(inputs: &[f64], params: &STOParams, bias: bool) -> Result<FeatureMatrix> {
    Ok(FeatureMatrix::from_rows(sto_states(inputs, params)?, bias))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Static,
    Sto,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Static => "static",
            BaselineKind::Sto => "sto",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(BaselineKind::Static),
            "sto" | "dynamic" => Ok(BaselineKind::Sto),
            other => Err(Error::invalid(format!("unknown baseline kind '{other}'"))),
        }
    }
}

/// One row of a neuron-count sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub size: usize,
    pub mean: f64,
    pub std: f64,
    pub accuracies: Vec<f64>,
}

/// Sample mean and (population) standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}

/// Train on `task[..train_len]`, return test accuracy on the rest.
pub fn score_features(features: &FeatureMatrix, task: &Dataset, train_len: usize, ridge: f64) -> Result<f64> {
    if train_len == 0 || train_len >= task.len() {
        return Err(Error::invalid("train length must leave a non-empty test set"));
    }
    let (train, test) = task.split(train_len)?;
    let w = fit(&features.columns(0, train_len), &train.targets, ridge)?;
    let pred = predict(&w, &features.columns(train_len, task.len()))?;
    let p: Vec<f64> = pred.row(0).iter().copied().collect();
    let t: Vec<f64> = test.targets.row(0).iter().copied().collect();
    classification_accuracy(&p, &t, 0.5)
}

/// A baseline reservoir with all of its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Baseline {
    Static(StaticReservoirParams),
    Sto(STOParams),
}

impl Baseline {
    /// Default parameters of the given kind.
    pub fn new(kind: BaselineKind, size: usize, seed: u64) -> Self {
        match kind {
            BaselineKind::Static => Baseline::Static(StaticReservoirParams::new(size, seed)),
            BaselineKind::Sto => Baseline::Sto(STOParams::new(size, seed)),
        }
    }

    pub fn kind(&self) -> BaselineKind {
        match self {
            Baseline::Static(_) => BaselineKind::Static,
            Baseline::Sto(_) => BaselineKind::Sto,
        }
    }

    /// Same parameters with another size and seed.
    pub fn resized(&self, size: usize, seed: u64) -> Self {
        match self {
            Baseline::Static(p) => Baseline::Static(StaticReservoirParams {
                size,
                seed,
                ..p.clone()
            }),
            Baseline::Sto(p) => Baseline::Sto(STOParams {
                size,
                seed,
                ..p.clone()
            }),
        }
    }

    pub fn features(&self, inputs: &[f64], bias: bool) -> Result<FeatureMatrix> {
        match self {
            Baseline::Static(p) => static_features(inputs, p, bias),
            Baseline::Sto(p) => sto_features(inputs, p, bias),
        }
    }
}

/// Accuracy of one seeded baseline of the given size, with default
/// parameters, a bias row and no ridge.
pub fn baseline_accuracy(task: &Dataset, train_len: usize, kind: BaselineKind, size: usize, seed: u64) -> Result<f64> {
    let features = Baseline::new(kind, size, seed).features(&task.inputs, true)?;
    score_features(&features, task, train_len, 0.0)
}

/// Test accuracy versus reservoir size for default parameters.
pub fn baseline_sweep(
    task: &Dataset,
    train_len: usize,
    sizes: &[usize],
    kind: BaselineKind,
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    sizes
        .iter()
        .map(|&size| sweep_point(task, train_len, &Baseline::new(kind, size, 0), size, seeds, true, 0.0))
        .collect()
}

/// Mean test accuracy of `template` resized to `size`, over `seeds`.
pub fn sweep_point(
    task: &Dataset,
    train_len: usize,
    template: &Baseline,
    size: usize,
    seeds: &[u64],
    bias: bool,
    ridge: f64,
) -> Result<SweepRow> {
    if seeds.is_empty() {
        return Err(Error::invalid("at least one seed is required"));
    }
    let accuracies = seeds
        .iter()
        .map(|&s| {
            let f = template.resized(size, s).features(&task.inputs, bias)?;
            score_features(&f, task, train_len, ridge)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, std) = mean_std(&accuracies);
    Ok(SweepRow {
        size,
        mean,
        std,
        accuracies,
    })
}

/// Smallest size whose mean accuracy reaches `level`.
pub fn crossing(rows: &[SweepRow], level: f64) -> Option<usize> {
    rows.iter().filter(|r| r.mean >= level).map(|r| r.size).min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::{gen_sine_square, waveform_dataset, Waveform};
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn static_examples() {
        let params = StaticReservoirParams::new(8, 3);
        assert!(static_features(&[0.0; 5], &params, false)
            .unwrap()
            .values()
            .iter()
            .all(|v| *v == 0.0));
        let r = StaticReservoir::from_weights(vec![1.0], DMatrix::zeros(1, 1), Recurrence::Embedded);
        assert_eq!(r.states(&[0.5, -0.5]).as_slice(), &[0.5, 0.0]);
        assert!(StaticReservoir::new(&StaticReservoirParams::new(0, 1)).is_err());
    }

    #[test]
    fn static_recurrence_variants() {
        let w_in = vec![1.0, -2.0];
        let w_res = DMatrix::from_row_slice(2, 2, &[0.5, 0.25, -1.0, 2.0]);
        let e = StaticReservoir::from_weights(w_in.clone(), w_res.clone(), Recurrence::Embedded);
        let b = StaticReservoir::from_weights(w_in, w_res, Recurrence::Broadcast);
        // x = (0, 1): second column is ReLU(W_in + 0) for both
        // x = (1, 0): second column is ReLU(W_res v)
        let se = e.states(&[1.0, 0.0]);
        let sb = b.states(&[1.0, 0.0]);
        // W_res (1, −2) = (0, −5); W_res (1, 1) = (0.75, 1)
        assert_eq!((se[(0, 1)], se[(1, 1)]), (0.0, 0.0));
        assert_eq!((sb[(0, 1)], sb[(1, 1)]), (0.75, 1.0));
    }

    #[test]
    fn static_weights_are_seeded_and_scaled() {
        let a = StaticReservoir::new(&StaticReservoirParams::new(6, 9)).unwrap();
        assert_eq!(a, StaticReservoir::new(&StaticReservoirParams::new(6, 9)).unwrap());
        assert_ne!(a, StaticReservoir::new(&StaticReservoirParams::new(6, 10)).unwrap());
        assert!(a.w_in().iter().all(|w| w.abs() <= 1.0));
        assert!(a.w_res().iter().all(|w| w.abs() <= 0.9));
        assert_eq!(a.w_res().shape(), (6, 6));
    }

    proptest! {
        #[test]
        fn static_memory_is_one_step(xs in proptest::collection::vec(-1.0..1.0f64, 4..20), seed in 0u64..100, swap in 0usize..100) {
            let r = StaticReservoir::new(&StaticReservoirParams::new(5, seed)).unwrap();
            let t = xs.len() - 1;
            // permute inputs at distance ≥ 2 before t
            let mut ys = xs.clone();
            let i = swap % (t - 1);
            ys[..t - 1].rotate_left(i);
            let a = r.states(&xs);
            let b = r.states(&ys);
            prop_assert_eq!(a.column(t), b.column(t));
        }

        #[test]
        fn sto_power_stays_bounded(xs in proptest::collection::vec(0.0..1.0f64, 1..10), seed in 0u64..100, p0 in 0.0..=1.0f64) {
            let params = STOParams { p0, ..STOParams::new(4, seed) };
            let s = sto_states(&xs, &params).unwrap();
            prop_assert!(s.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }

    fn single(gain: f64, bias: f64, p0: f64) -> STOParams {
        STOParams {
            input_gain: gain,
            bias_current: bias,
            p0,
            ..STOParams::new(1, 0)
        }
    }

    #[test]
    fn sto_decays_without_drive() {
        let p = single(0.0, 0.0, 0.6);
        let s = sto_states(&[0.0; 3], &p).unwrap();
        assert!(s[(0, 0)] < 0.6 && s[(0, 1)] < s[(0, 0)] && s[(0, 2)] < s[(0, 1)]);
        let rate = p.rate(0.3, 0.0);
        assert!(rate < 0.0);
    }

    #[test]
    fn sto_zero_power_is_a_fixed_point() {
        let s = sto_states(&[1.0, -1.0, 0.5], &single(5e6, 1e7, 0.0)).unwrap();
        assert!(s.iter().all(|p| *p == 0.0));
    }

    #[test]
    fn sto_converges_to_the_closed_form_power() {
        let mut p = single(0.0, 9e6, 0.1);
        p.interval = 20.0 / p.gamma_damping;
        let drive = p.sigma * p.bias_current;
        let expect = (drive - p.gamma_damping) / (p.gamma_damping * p.q + drive);
        assert!((p.steady_power(drive) - expect).abs() < 1e-15);
        let s = sto_states(&[0.0; 5], &p).unwrap();
        assert!((s[(0, 4)] - expect).abs() < 1e-9, "{} vs {expect}", s[(0, 4)]);
    }

    #[test]
    fn sto_guards() {
        let mut p = STOParams::new(2, 0);
        p.dt = 0.1 / p.gamma_damping;
        assert!(sto_states(&[0.0], &p).is_err());
        let mut p = STOParams::new(2, 0);
        p.gamma_damping = 0.0;
        assert!(p.validate().is_err());
        let p = STOParams::new(0, 0);
        assert!(p.validate().is_err());
        assert!(sto_states(&[f64::NAN], &STOParams::new(1, 0)).is_err());
    }

    #[test]
    fn sto_is_seeded() {
        let xs = [0.3, -0.2, 0.9];
        let a = sto_states(&xs, &STOParams::new(3, 5)).unwrap();
        assert_eq!(a, sto_states(&xs, &STOParams::new(3, 5)).unwrap());
        assert_ne!(a, sto_states(&xs, &STOParams::new(3, 6)).unwrap());
    }

    #[test]
    fn sweep_shape_and_stats() {
        let task = gen_sine_square(20, 1).unwrap();
        let rows = baseline_sweep(&task, 80, &[1], BaselineKind::Static, &[1, 2, 3]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].accuracies.len(), 3);
        assert!(baseline_sweep(&task, 80, &[1], BaselineKind::Static, &[]).is_err());
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
        let rows = [
            SweepRow {
                size: 1,
                mean: 0.9,
                std: 0.0,
                accuracies: vec![],
            },
            SweepRow {
                size: 2,
                mean: 0.995,
                std: 0.0,
                accuracies: vec![],
            },
        ];
        assert_eq!(crossing(&rows, 0.99), Some(2));
        assert_eq!(crossing(&rows, 0.999), None);
    }

    #[test]
    fn memoryless_features_cannot_separate_the_extremes() {
        // a single input point carries no information about which waveform
        // produced ±1, so a readout on x alone misclassifies some of them
        let task = waveform_dataset(&[Waveform::Sine, Waveform::Square, Waveform::Square, Waveform::Sine], 0).unwrap();
        let f = FeatureMatrix::from_rows(DMatrix::from_row_slice(1, task.len(), &task.inputs), true);
        let acc = score_features(&f, &task.slice(0, task.len()).unwrap(), 16, 0.0).unwrap();
        assert!(acc < 1.0);
    }
}
