//! The Josephson-mixer reservoir: two resonantly driven, dissipative modes
//! exchanging photons at rate `g`. Inputs are encoded in the drive amplitudes,
//! held for one segment each, and the basis-state occupations at the end of
//! every segment are the reservoir features.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fock::{mode_annihilation, FockSpec, JointOperator, Mode};
use crate::lindblad::{evolve_in_place, DensityMatrix, LindbladProblem, STEP_RATE_LIMIT};
use crate::C64;

/// Drive scale quoted for the sine/square task, in √Hz.
pub const REFERENCE_EPS0_SINE_SQUARE: f64 = 20e5;
/// Drive scale quoted for the Mackey-Glass task, in √Hz.
pub const REFERENCE_EPS0_MACKEY_GLASS: f64 = 5e5;
/// Resonance frequencies of the device (rad/s). They drop out in the
/// rotating frame and are kept only as metadata.
pub const OMEGA_A: f64 = 2.0 * PI * 10e9;
pub const OMEGA_B: f64 = 2.0 * PI * 9e9;

/// How photon loss into the transmission lines is modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DissipatorMode {
    /// A single collapse operator `√κ_a a + √κ_b b`.
    Joint,
    /// Two independent collapse operators `√κ_a a` and `√κ_b b`.
    Separate,
}

impl DissipatorMode {
    pub fn name(&self) -> &'static str {
        match self {
            DissipatorMode::Joint => "joint",
            DissipatorMode::Separate => "separate",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "joint" => Some(DissipatorMode::Joint),
            "separate" => Some(DissipatorMode::Separate),
            _ => None,
        }
    }
}

/// Physical and numerical parameters of the mixer. Rates in rad/s, times in
/// seconds, drive scales in √(rad/s).
#[derive(Debug, Clone, PartialEq)]
pub struct MixerConfig {
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub g: f64,
    pub eps0_a: f64,
    pub eps0_b: f64,
    /// Duration each input is applied for.
    pub segment: f64,
    pub spec: FockSpec,
    /// RK4 step.
    pub dt: f64,
    pub dissipator_mode: DissipatorMode,
    /// Largest population tolerated in states with n_a or n_b at the cutoff.
    pub truncation_limit: f64,
}

impl Default for MixerConfig {
    fn default() -> Self {
        MixerConfig {
            kappa_a: 2.0 * PI * 17e6,
            kappa_b: 2.0 * PI * 21e6,
            g: 2.0 * PI * 20e6,
            eps0_a: REFERENCE_EPS0_SINE_SQUARE,
            eps0_b: REFERENCE_EPS0_SINE_SQUARE,
            segment: 100e-9,
            spec: FockSpec::default(),
            dt: 0.05e-9,
            dissipator_mode: DissipatorMode::Separate,
            truncation_limit: 1e-3,
        }
    }
}

impl MixerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("kappa_a", self.kappa_a),
            ("kappa_b", self.kappa_b),
            ("segment", self.segment),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.g >= 0.0) || !self.g.is_finite() {
            return Err(Error::invalid(format!("g must be non-negative, got {}", self.g)));
        }
        if !self.eps0_a.is_finite() || !self.eps0_b.is_finite() {
            return Err(Error::invalid("drive scales must be finite"));
        }
        Ok(())
    }

    /// Largest rate in the dynamics for given drive amplitudes.
    pub fn max_rate(&self, eps_a: f64, eps_b: f64) -> f64 {
        let (da, db) = self.drive_rates(eps_a, eps_b);
        self.kappa_a.max(self.kappa_b).max(self.g).max(da.abs()).max(db.abs())
    }

    /// Largest step of the form `segment / k` that keeps `dt·max_rate` within
    /// the stability guard for inputs up to `max_abs_input` in magnitude.
    pub fn stable_dt(&self, max_abs_input: f64) -> f64 {
        let x = max_abs_input.abs();
        let rate = self.max_rate(self.eps0_a * x, self.eps0_b * x);
        let k = libm::ceil(self.segment * rate / STEP_RATE_LIMIT * (1.0 - 1e-12)).max(1.0);
        self.segment / k
    }

    /// Drive rates `ε√(2κ)` of both modes.
    pub fn drive_rates(&self, eps_a: f64, eps_b: f64) -> (f64, f64) {
        (
            eps_a * libm::sqrt(2.0 * self.kappa_a),
            eps_b * libm::sqrt(2.0 * self.kappa_b),
        )
    }
}

/// Linear input encoding: both drives follow the input.
pub fn encode_input(x: f64, config: &MixerConfig) -> (f64, f64) {
    (config.eps0_a * x, config.eps0_b * x)
}

/// Operators of the mixer, built once per configuration.
#[derive(Debug, Clone)]
pub struct MixerOperators {
    spec: FockSpec,
    conversion: JointOperator,
    drive_a: JointOperator,
    drive_b: JointOperator,
    collapse: Vec<JointOperator>,
    number_a: JointOperator,
    number_b: JointOperator,
}

impl MixerOperators {
    pub fn new(config: &MixerConfig) -> Result<Self> {
        config.validate()?;
        let spec = config.spec;
        let a = mode_annihilation(Mode::A, spec)?;
        let b = mode_annihilation(Mode::B, spec)?;
        let (ad, bd) = (a.adjoint(), b.adjoint());
        let i = C64::new(0.0, 1.0);
        let conversion = &(&a * &bd) + &(&ad * &b);
        let drive_a = (&a - &ad).scale(i);
        let drive_b = (&b - &bd).scale(i);
        let sa = a.scale(C64::new(libm::sqrt(config.kappa_a), 0.0));
        let sb = b.scale(C64::new(libm::sqrt(config.kappa_b), 0.0));
        let collapse = match config.dissipator_mode {
            DissipatorMode::Joint => vec![&sa + &sb],
            DissipatorMode::Separate => vec![sa, sb],
        };
        Ok(MixerOperators {
            spec,
            conversion,
            drive_a,
            drive_b,
            collapse,
            number_a: &ad * &a,
            number_b: &bd * &b,
        })
    }

    /// `g(ab† + a†b) + iε_a√(2κ_a)(a − a†) + iε_b√(2κ_b)(b − b†)`.
    pub fn hamiltonian(&self, eps_a: f64, eps_b: f64, config: &MixerConfig) -> JointOperator {
        let (ra, rb) = config.drive_rates(eps_a, eps_b);
        let m = self.conversion.matrix() * C64::new(config.g, 0.0)
            + self.drive_a.matrix() * C64::new(ra, 0.0)
            + self.drive_b.matrix() * C64::new(rb, 0.0);
        // Symmetrize so H = H† holds bit for bit.
        let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        JointOperator::from_matrix(self.spec, m).expect("dimension fixed by spec")
    }

    pub fn collapse_ops(&self) -> &[JointOperator] {
        &self.collapse
    }

    pub fn number_a(&self) -> &JointOperator {
        &self.number_a
    }

    pub fn number_b(&self) -> &JointOperator {
        &self.number_b
    }
}

/// Conversion plus drive Hamiltonian for one input point.
pub fn build_hamiltonian(eps_a: f64, eps_b: f64, config: &MixerConfig) -> Result<JointOperator> {
    Ok(MixerOperators::new(config)?.hamiltonian(eps_a, eps_b, config))
}

/// Which basis-state occupations are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReadoutSpec {
    pub max_na: usize,
    pub max_nb: usize,
    /// Append a constant-one feature row.
    pub bias: bool,
}

impl ReadoutSpec {
    pub fn new(max_na: usize, max_nb: usize) -> Self {
        ReadoutSpec {
            max_na,
            max_nb,
            bias: true,
        }
    }

    pub fn with_bias(mut self, bias: bool) -> Self {
        self.bias = bias;
        self
    }

    pub fn neuron_count(&self) -> usize {
        (self.max_na + 1) * (self.max_nb + 1)
    }

    pub fn feature_count(&self) -> usize {
        self.neuron_count() + self.bias as usize
    }

    /// Measured states in joint-index order.
    pub fn neurons(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.neuron_count());
        for na in 0..=self.max_na {
            for nb in 0..=self.max_nb {
                out.push((na, nb));
            }
        }
        out
    }

    pub fn labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self.neurons().iter().map(|(a, b)| format!("p_{a}{b}")).collect();
        if self.bias {
            labels.push("bias".into());
        }
        labels
    }

    pub fn check(&self, spec: FockSpec) -> Result<()> {
        if self.max_na > spec.cutoff_a() || self.max_nb > spec.cutoff_b() {
            return Err(Error::invalid(format!(
                "readout up to |{}{}> exceeds truncation {}/{}",
                self.max_na,
                self.max_nb,
                spec.cutoff_a(),
                spec.cutoff_b()
            )));
        }
        Ok(())
    }
}

impl Default for ReadoutSpec {
    /// States |00⟩ to |33⟩ plus bias.
    fn default() -> Self {
        ReadoutSpec::new(3, 3)
    }
}

/// Reservoir outputs: one row per feature, one column per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: DMatrix<f64>,
    labels: Vec<String>,
    bias_row: bool,
}

impl FeatureMatrix {
    /// Wrap a feature matrix. When `bias_row` is set the last row must be ones.
    pub fn new(values: DMatrix<f64>, labels: Vec<String>, bias_row: bool) -> Result<Self> {
        if labels.len() != values.nrows() {
            return Err(Error::invalid("one label per feature row is required"));
        }
        if bias_row && (values.nrows() == 0 || values.row(values.nrows() - 1).iter().any(|v| *v != 1.0)) {
            return Err(Error::invalid("bias row must be all ones"));
        }
        Ok(FeatureMatrix {
            values,
            labels,
            bias_row,
        })
    }

    /// Features without labels; rows are named `f_0, f_1, ...` and an
    /// optional bias row is appended.
    pub fn from_rows(values: DMatrix<f64>, bias: bool) -> Self {
        let mut labels: Vec<String> = (0..values.nrows()).map(|i| format!("f_{i}")).collect();
        let values = if bias {
            labels.push("bias".into());
            let n = values.nrows();
            values.insert_row(n, 1.0)
        } else {
            values
        };
        FeatureMatrix {
            values,
            labels,
            bias_row: bias,
        }
    }

    pub fn n_features(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn bias_row(&self) -> bool {
        self.bias_row
    }

    /// Columns `start..end`.
    pub fn columns(&self, start: usize, end: usize) -> FeatureMatrix {
        FeatureMatrix {
            values: self.values.columns(start, end - start).into_owned(),
            labels: self.labels.clone(),
            bias_row: self.bias_row,
        }
    }

    /// Keep only rows whose label appears in `labels`, in the given order.
    pub fn select(&self, labels: &[String]) -> Result<FeatureMatrix> {
        let mut rows = Vec::with_capacity(labels.len());
        for l in labels {
            let i = self
                .labels
                .iter()
                .position(|x| x == l)
                .ok_or_else(|| Error::invalid(format!("no feature named {l}")))?;
            rows.push(i);
        }
        let values = DMatrix::from_fn(rows.len(), self.n_samples(), |r, c| self.values[(rows[r], c)]);
        let bias_row = self.bias_row && labels.last().map(|l| l == "bias").unwrap_or(false);
        Ok(FeatureMatrix {
            values,
            labels: labels.to_vec(),
            bias_row,
        })
    }
}

/// Occupation probabilities p(n_a, n_b) of a density matrix for the measured states.
pub fn read_populations(rho: &DensityMatrix, readout: &ReadoutSpec) -> Result<Vec<f64>> {
    readout.check(rho.spec())?;
    readout.neurons().iter().map(|&(a, b)| rho.population(a, b)).collect()
}

/// Full diagonal of ρ at the end of every segment.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationTrace {
    spec: FockSpec,
    /// `dim × n_samples`.
    populations: DMatrix<f64>,
    mean_photons_a: Vec<f64>,
    mean_photons_b: Vec<f64>,
}

impl PopulationTrace {
    pub fn spec(&self) -> FockSpec {
        self.spec
    }

    pub fn n_samples(&self) -> usize {
        self.populations.ncols()
    }

    pub fn populations(&self) -> &DMatrix<f64> {
        &self.populations
    }

    /// ⟨n_a⟩ at the end of every segment.
    pub fn mean_photons_a(&self) -> &[f64] {
        &self.mean_photons_a
    }

    pub fn mean_photons_b(&self) -> &[f64] {
        &self.mean_photons_b
    }

    /// Population summed over states with n_a or n_b at the cutoff, per sample.
    pub fn edge_populations(&self) -> Vec<f64> {
        let (ca, cb) = (self.spec.cutoff_a(), self.spec.cutoff_b());
        (0..self.n_samples())
            .map(|s| {
                (0..self.spec.dim())
                    .filter(|&i| {
                        let (na, nb) = self.spec.levels(i);
                        na == ca || nb == cb
                    })
                    .map(|i| self.populations[(i, s)])
                    .sum()
            })
            .collect()
    }

    /// Largest time-averaged photon number over the two modes.
    pub fn max_mean_photons(&self) -> f64 {
        let avg = |v: &[f64]| {
            if v.is_empty() {
                0.0
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        avg(&self.mean_photons_a).max(avg(&self.mean_photons_b))
    }

    pub fn features(&self, readout: &ReadoutSpec) -> Result<FeatureMatrix> {
        readout.check(self.spec)?;
        let neurons = readout.neurons();
        let n = self.n_samples();
        let rows = readout.feature_count();
        let mut values = DMatrix::zeros(rows, n);
        for (r, &(na, nb)) in neurons.iter().enumerate() {
            let idx = self.spec.index(na, nb)?;
            values.row_mut(r).copy_from(&self.populations.row(idx));
        }
        if readout.bias {
            values.row_mut(rows - 1).fill(1.0);
        }
        FeatureMatrix::new(values, readout.labels(), readout.bias)
    }
}

/// Stream an input sequence through the mixer starting from vacuum and
/// record every population at each segment end. The state carries over
/// between inputs.
pub fn simulate(inputs: &[f64], config: &MixerConfig) -> Result<PopulationTrace> {
    let ops = MixerOperators::new(config)?;
    let spec = config.spec;
    let dim = spec.dim();
    let edge: Vec<usize> = (0..dim)
        .filter(|&i| {
            let (na, nb) = spec.levels(i);
            na == spec.cutoff_a() || nb == spec.cutoff_b()
        })
        .collect();

    let mut rho = DensityMatrix::vacuum(spec);
    let mut populations = DMatrix::zeros(dim, inputs.len());
    let mut mean_a = Vec::with_capacity(inputs.len());
    let mut mean_b = Vec::with_capacity(inputs.len());
    for (s, &x) in inputs.iter().enumerate() {
        let mut step = || -> Result<()> {
            if !x.is_finite() {
                return Err(Error::invalid("non-finite input"));
            }
            let (ea, eb) = encode_input(x, config);
            let h = ops.hamiltonian(ea, eb, config);
            let problem = LindbladProblem::new(h, ops.collapse.clone(), config.dt)?;
            problem.check_step(config.max_rate(ea, eb))?;
            evolve_in_place(&problem, &mut rho, config.segment)
        };
        step().map_err(|e| e.at_sample(s))?;

        let diag = rho.populations();
        let edge_pop: f64 = edge.iter().map(|&i| diag[i]).sum();
        if edge_pop > config.truncation_limit {
            return Err(Error::TruncationViolation {
                population: edge_pop,
                limit: config.truncation_limit,
            }
            .at_sample(s));
        }
        populations.column_mut(s).copy_from_slice(&diag);
        let (mut na, mut nb) = (0.0, 0.0);
        for (i, p) in diag.iter().enumerate() {
            let (a, b) = spec.levels(i);
            na += a as f64 * p;
            nb += b as f64 * p;
        }
        mean_a.push(na);
        mean_b.push(nb);
    }
    Ok(PopulationTrace {
        spec,
        populations,
        mean_photons_a: mean_a,
        mean_photons_b: mean_b,
    })
}

/// Reservoir features for an input sequence.
pub fn run_reservoir(inputs: &[f64], config: &MixerConfig, readout: &ReadoutSpec) -> Result<FeatureMatrix> {
    readout.check(config.spec)?;
    simulate(inputs, config)?.features(readout)
}

/// Result of scaling the drive so the reservoir reaches a target photon number.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveCalibration {
    pub eps0_a: f64,
    pub eps0_b: f64,
    /// Calibrated drive relative to the configured `eps0_a`.
    pub scale: f64,
    /// Largest time-averaged ⟨n⟩ over the two modes at the calibrated drive.
    pub mean_photons: f64,
    /// Largest edge population seen at the calibrated drive.
    pub edge_population: f64,
    pub iterations: usize,
}

/// Find the drive scale for which the largest time-averaged ⟨n⟩ per mode on
/// `inputs` equals `target`. The ratio `eps0_b / eps0_a` is preserved.
///
/// Photon numbers grow quadratically with the drive for this linear bosonic
/// system, so a square-root update converges in a few passes; truncation
/// only perturbs that law slightly.
pub fn calibrate_drive(inputs: &[f64], config: &MixerConfig, target: f64) -> Result<DriveCalibration> {
    config.validate()?;
    if !(target > 0.0) {
        return Err(Error::invalid("calibration target must be positive"));
    }
    if inputs.iter().all(|x| *x == 0.0) {
        return Err(Error::invalid("cannot calibrate the drive on an all-zero input"));
    }
    let ratio = if config.eps0_a != 0.0 {
        config.eps0_b / config.eps0_a
    } else {
        1.0
    };
    // Single-mode coherent steady state: |α| = 2 ε √(2κ) / κ.
    let mut eps = libm::sqrt(target) * libm::sqrt(config.kappa_a) / (2.0 * libm::sqrt(2.0));
    let peak = inputs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut trial = config.clone();
    trial.truncation_limit = f64::INFINITY;
    let mut last = 0.0;
    let mut edge = 0.0;
    let mut iterations = 0;
    for _ in 0..12 {
        iterations += 1;
        trial.eps0_a = eps;
        trial.eps0_b = eps * ratio;
        trial.dt = config.dt.min(trial.stable_dt(peak));
        let trace = simulate(inputs, &trial)?;
        last = trace.max_mean_photons();
        edge = trace.edge_populations().into_iter().fold(0.0, f64::max);
        if !(last > 0.0) {
            return Err(Error::invalid("drive produced no photons"));
        }
        if (last - target).abs() <= 1e-3 * target {
            break;
        }
        eps *= libm::sqrt(target / last);
    }
    Ok(DriveCalibration {
        eps0_a: eps,
        eps0_b: eps * ratio,
        scale: if config.eps0_a != 0.0 {
            eps / config.eps0_a
        } else {
            f64::NAN
        },
        mean_photons: last,
        edge_population: edge,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> MixerConfig {
        MixerConfig {
            spec: FockSpec::new(4, 4).unwrap(),
            eps0_a: 3000.0,
            eps0_b: 3000.0,
            dt: 0.1e-9,
            segment: 20e-9,
            ..MixerConfig::default()
        }
    }

    #[test]
    fn encoding_is_linear() {
        let mut c = MixerConfig::default();
        assert_eq!(encode_input(0.0, &c), (0.0, 0.0));
        c.eps0_a = 2e6;
        c.eps0_b = 2e6;
        assert_eq!(encode_input(1.0, &c), (2e6, 2e6));
        assert_eq!(encode_input(-0.5, &c), (-1e6, -1e6));
    }

    #[test]
    fn hamiltonian_structure() {
        let c = MixerConfig::default();
        let spec = c.spec;
        let h = build_hamiltonian(0.0, 0.0, &c).unwrap();
        let (i10, i01) = (spec.index(1, 0).unwrap(), spec.index(0, 1).unwrap());
        assert!((h.matrix()[(i10, i01)] - C64::new(c.g, 0.0)).norm() < 1e-6);
        assert_eq!(h.hermiticity_error(), 0.0);

        let h = build_hamiltonian(1234.5, -77.0, &c).unwrap();
        assert_eq!(h.hermiticity_error(), 0.0);

        // Without conversion and drive on b, H only touches mode a.
        let c0 = MixerConfig { g: 0.0, ..c.clone() };
        let h = build_hamiltonian(5000.0, 0.0, &c0).unwrap();
        for i in 0..spec.dim() {
            for j in 0..spec.dim() {
                if spec.levels(i).1 != spec.levels(j).1 {
                    assert_eq!(h.matrix()[(i, j)].norm(), 0.0, "{i} {j}");
                }
            }
        }
    }

    #[test]
    fn readout_layouts() {
        let spec = FockSpec::default();
        let vac = DensityMatrix::vacuum(spec);
        let p = read_populations(&vac, &ReadoutSpec::new(3, 3)).unwrap();
        assert_eq!(p.len(), 16);
        assert_eq!(p[0], 1.0);
        assert!(p[1..].iter().all(|v| *v == 0.0));
        assert_eq!(read_populations(&vac, &ReadoutSpec::new(2, 2)).unwrap().len(), 9);

        let rho = DensityMatrix::fock(1, 1, spec).unwrap();
        let p = read_populations(&rho, &ReadoutSpec::new(3, 3)).unwrap();
        for (k, v) in p.iter().enumerate() {
            assert_eq!(*v, if k == 5 { 1.0 } else { 0.0 });
        }
        assert!(read_populations(&rho, &ReadoutSpec::new(8, 0)).is_err());
        assert_eq!(
            ReadoutSpec::new(1, 2).labels(),
            ["p_00", "p_01", "p_02", "p_10", "p_11", "p_12", "bias"]
        );
    }

    #[test]
    fn zero_inputs_keep_vacuum() {
        let c = small_config();
        let f = run_reservoir(&[0.0; 4], &c, &ReadoutSpec::new(3, 3)).unwrap();
        assert_eq!(f.n_features(), 17);
        assert_eq!(f.n_samples(), 4);
        for s in 0..4 {
            assert_eq!(f.values()[(0, s)], 1.0);
            assert!((1..16).all(|r| f.values()[(r, s)] == 0.0));
            assert_eq!(f.values()[(16, s)], 1.0);
        }
    }

    #[test]
    fn populations_are_normalized() {
        let c = small_config();
        let t = simulate(&[1.0, -0.5, 0.7], &c).unwrap();
        for s in 0..3 {
            let col = t.populations().column(s);
            assert!((col.sum() - 1.0).abs() < 1e-6);
            assert!(col.iter().all(|p| (-1e-9..=1.0 + 1e-9).contains(p)));
        }
    }

    #[test]
    fn truncation_violation_names_the_sample() {
        let mut c = small_config();
        c.eps0_a = 20000.0;
        c.eps0_b = 20000.0;
        let err = simulate(&[0.0, 1.0, 1.0], &c).unwrap_err();
        match err {
            Error::AtSample { index, source } => {
                assert_eq!(index, 1);
                assert!(matches!(*source, Error::TruncationViolation { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reference_drive_scale_trips_the_step_guard() {
        let c = MixerConfig::default();
        let err = simulate(&[1.0], &c).unwrap_err();
        assert!(matches!(err.root(), Error::InvalidSpecification(_)));
    }

    #[test]
    fn calibration_hits_target() {
        let c = small_config();
        let inputs = [1.0, 0.5, -1.0, 0.0, 0.8, -0.3];
        let cal = calibrate_drive(&inputs, &c, 0.8).unwrap();
        assert!((cal.mean_photons - 0.8).abs() < 1e-3);
        assert!((cal.eps0_a - cal.eps0_b).abs() < 1e-9 * cal.eps0_a);
        assert!(calibrate_drive(&[0.0, 0.0], &c, 1.0).is_err());
    }

    /// Mean fields (α, β) after one segment of constant drive, from the
    /// two-mode linear equations, integrated with a much finer RK4.
    fn mean_field(c: &MixerConfig, x: f64, mut ab: (C64, C64)) -> (C64, C64) {
        let i = C64::new(0.0, 1.0);
        let (ea, eb) = encode_input(x, c);
        let (da, db) = c.drive_rates(ea, eb);
        let (sa, sb) = (libm::sqrt(c.kappa_a), libm::sqrt(c.kappa_b));
        let f = |(a, b): (C64, C64)| -> (C64, C64) {
            let (la, lb) = match c.dissipator_mode {
                DissipatorMode::Separate => (a * (0.5 * c.kappa_a), b * (0.5 * c.kappa_b)),
                DissipatorMode::Joint => {
                    let jump = a * sa + b * sb;
                    (jump * (0.5 * sa), jump * (0.5 * sb))
                }
            };
            (-i * c.g * b - da - la, -i * c.g * a - db - lb)
        };
        let n = 20_000;
        let h = c.segment / n as f64;
        for _ in 0..n {
            let k1 = f(ab);
            let k2 = f((ab.0 + k1.0 * (0.5 * h), ab.1 + k1.1 * (0.5 * h)));
            let k3 = f((ab.0 + k2.0 * (0.5 * h), ab.1 + k2.1 * (0.5 * h)));
            let k4 = f((ab.0 + k3.0 * h, ab.1 + k3.1 * h));
            ab.0 += (k1.0 + k2.0 * 2.0 + k3.0 * 2.0 + k4.0) * (h / 6.0);
            ab.1 += (k1.1 + k2.1 * 2.0 + k3.1 * 2.0 + k4.1) * (h / 6.0);
        }
        ab
    }

    fn poisson(mean: f64, n: usize) -> f64 {
        let mut p = libm::exp(-mean);
        for k in 1..=n {
            p *= mean / k as f64;
        }
        p
    }

    #[test]
    fn populations_match_coherent_state_oracle() {
        // A linearly driven, linearly damped pair of modes stays in a product
        // of coherent states, so every occupation is a Poisson product.
        for mode in [DissipatorMode::Separate, DissipatorMode::Joint] {
            let mut c = MixerConfig {
                // weak enough that the Poisson tail past the cutoff is ~1e-10
                eps0_a: 4000.0,
                eps0_b: 3000.0,
                dissipator_mode: mode,
                ..MixerConfig::default()
            };
            c.dt = c.stable_dt(1.0);
            let inputs = [0.7, -0.4, 1.0];
            let trace = simulate(&inputs, &c).unwrap();
            let mut ab = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
            for (s, &x) in inputs.iter().enumerate() {
                ab = mean_field(&c, x, ab);
                let (na, nb) = (ab.0.norm_sqr(), ab.1.norm_sqr());
                assert!(na + nb > 0.01);
                for i in 0..c.spec.dim() {
                    let (a, b) = c.spec.levels(i);
                    let expect = poisson(na, a) * poisson(nb, b);
                    let got = trace.populations()[(i, s)];
                    assert!(
                        (got - expect).abs() < 1e-7,
                        "{mode:?} sample {s} state {a}{b}: {got} vs {expect}"
                    );
                }
            }
        }
    }

    #[test]
    fn stable_dt_respects_the_guard() {
        let c = MixerConfig {
            eps0_a: 7000.0,
            eps0_b: 7000.0,
            ..MixerConfig::default()
        };
        let dt = c.stable_dt(1.0);
        assert!(dt * c.max_rate(7000.0, 7000.0) <= STEP_RATE_LIMIT);
        let steps = c.segment / dt;
        assert!((steps - libm::round(steps)).abs() < 1e-9);
        // one more step would be needed for anything larger
        let coarser = c.segment / (libm::round(steps) - 1.0);
        assert!(coarser * c.max_rate(7000.0, 7000.0) > STEP_RATE_LIMIT);
    }

    #[test]
    fn perturbed_input_fades() {
        let mut c = MixerConfig {
            eps0_a: 7000.0,
            eps0_b: 7000.0,
            ..MixerConfig::default()
        };
        c.dt = c.stable_dt(1.0);
        let base = [0.2, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5];
        let mut bumped = base;
        bumped[1] = -0.5;
        let a = simulate(&base, &c).unwrap();
        let b = simulate(&bumped, &c).unwrap();
        let diff: Vec<f64> = (0..base.len())
            .map(|s| {
                let d = a.populations().column(s) - b.populations().column(s);
                d.amax()
            })
            .collect();
        assert_eq!(diff[0], 0.0);
        assert!(diff[2] > 1e-6, "{diff:?}");
        // mode b only sees the bump one segment later
        for w in diff[2..].windows(2) {
            assert!(w[1] < w[0] || w[1] < 1e-9, "{diff:?}");
        }
        // amplitudes relax at κ/2 per unit time; populations follow
        let per_segment = diff[3] / diff[2];
        let slowest = libm::exp(-0.5 * c.kappa_a.min(c.kappa_b) * c.segment);
        assert!(per_segment < 2.0 * slowest, "{per_segment} vs {slowest}");
    }

    #[test]
    fn uncoupled_undriven_mode_stays_empty() {
        let mut c = MixerConfig {
            g: 0.0,
            eps0_a: 4000.0,
            eps0_b: 0.0,
            ..MixerConfig::default()
        };
        c.dt = c.stable_dt(1.0);
        let t = simulate(&[1.0, -0.6, 0.3], &c).unwrap();
        for s in 0..3 {
            for i in 0..c.spec.dim() {
                if c.spec.levels(i).1 > 0 {
                    assert_eq!(t.populations()[(i, s)], 0.0);
                }
            }
            assert_eq!(t.mean_photons_b()[s], 0.0);
            assert!(t.mean_photons_a()[s] > 0.01);
        }
    }

    #[test]
    fn feature_selection() {
        let c = small_config();
        let f = run_reservoir(&[0.3, 0.9], &c, &ReadoutSpec::new(3, 3)).unwrap();
        let small = f.select(&ReadoutSpec::new(1, 1).labels()).unwrap();
        assert_eq!(small.n_features(), 5);
        assert!(small.bias_row());
        assert_eq!(small.values()[(3, 1)], f.values()[(5, 1)]);
    }
}
