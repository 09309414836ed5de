//! Physics, readout and generator checks with fixed tolerances. Each check
//! reports the measured quantity so a failure says how far off it was.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qrc_core::fock::{mode_annihilation, FockSpec, JointOperator, Mode};
use qrc_core::lindblad::{evolve_segment, DensityMatrix, LindbladProblem};
use qrc_core::mixer::{encode_input, MixerConfig, MixerOperators};
use qrc_core::readout::{fit, pseudoinverse, rmse, RCOND};
use qrc_core::tasks::{gen_mackey_glass, MackeyGlassConfig, Waveform};
use qrc_core::C64;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Check { name, passed, detail }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

fn conversion(spec: FockSpec, g: f64) -> Result<JointOperator> {
    let a = mode_annihilation(Mode::A, spec)?;
    let b = mode_annihilation(Mode::B, spec)?;
    Ok((&(&a * &b.adjoint()) + &(&a.adjoint() * &b)).scale(C64::new(g, 0.0)))
}

/// Default mixer driven at a calibrated-scale amplitude, stepped at the
/// guard-limited step.
fn driven_mixer() -> MixerConfig {
    let mut c = MixerConfig {
        eps0_a: 7000.0,
        eps0_b: 7000.0,
        ..MixerConfig::default()
    };
    c.dt = c.stable_dt(1.0);
    c
}

/// Trace, positivity and normalization over a driven sequence and from a
/// random mixed state.
fn segment_invariants() -> Result<Vec<Check>> {
    let c = driven_mixer();
    let ops = MixerOperators::new(&c)?;
    let mut inputs: Vec<f64> = Waveform::Sine.samples().into();
    inputs.extend(Waveform::Square.samples());

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = c.spec.dim();
    let m = DMatrix::<C64>::from_fn(n, n, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let mut mixed = &m * m.adjoint();
    let tr = mixed.trace();
    mixed /= tr;

    let mut drift = 0.0f64;
    let mut min_eig = f64::INFINITY;
    let mut norm = 0.0f64;
    for start in [
        DensityMatrix::vacuum(c.spec),
        DensityMatrix::from_matrix(c.spec, mixed)?,
    ] {
        let mut rho = start;
        for &x in &inputs {
            let (ea, eb) = encode_input(x, &c);
            let p = LindbladProblem::new(ops.hamiltonian(ea, eb, &c), ops.collapse_ops().to_vec(), c.dt)?;
            let before = rho.trace();
            rho = evolve_segment(&p, &rho, c.segment)?;
            drift = drift.max((rho.trace() - before).abs());
            min_eig = min_eig.min(rho.min_eigenvalue());
            norm = norm.max((rho.populations().iter().sum::<f64>() - 1.0).abs());
        }
    }
    Ok(vec![
        Check::new(
            "trace drift per segment",
            drift < 1e-8,
            format!("max {drift:.2e} (limit 1e-8)"),
        ),
        Check::new(
            "positivity",
            min_eig >= -1e-8,
            format!("min eigenvalue {min_eig:.2e} (limit -1e-8)"),
        ),
        Check::new(
            "full readout normalization",
            norm <= 1e-6,
            format!("max |Σp − 1| {norm:.2e} (limit 1e-6)"),
        ),
    ])
}

/// Period of the single-excitation swap at κ = 0, from the first return of
/// the population to |1,0⟩, located by a parabola through the sampled
/// maximum.
fn swap_period() -> Result<Check> {
    let spec = FockSpec::new(2, 2)?;
    let g = 2.0 * PI * 20e6;
    let expect = PI / g;
    let p = LindbladProblem::new(conversion(spec, g)?, vec![], 2e-11)?;
    let samples = 300;
    let h = 1.5 * expect / samples as f64;
    let mut rho = DensityMatrix::fock(1, 0, spec)?;
    let mut pop = vec![1.0];
    for _ in 0..samples {
        rho = evolve_segment(&p, &rho, h)?;
        pop.push(rho.population(1, 0)?);
    }
    // skip the first half period, where the excitation sits in mode b
    let half = samples / 3;
    let k = (half..samples)
        .max_by(|&i, &j| pop[i].total_cmp(&pop[j]))
        .unwrap_or(half);
    let (y0, y1, y2) = (pop[k - 1], pop[k], pop[k + 1]);
    let shift = 0.5 * (y0 - y2) / (y0 - 2.0 * y1 + y2);
    let period = (k as f64 + shift) * h;
    let rel = (period - expect).abs() / expect;
    Ok(Check::new(
        "excitation swap period π/g",
        rel < 0.005,
        format!("period {period:.6e} s vs {expect:.6e} s, relative error {rel:.1e} (limit 5e-3)"),
    ))
}

fn single_photon_decay() -> Result<Check> {
    let spec = FockSpec::new(2, 2)?;
    let a = mode_annihilation(Mode::A, spec)?;
    let b = mode_annihilation(Mode::B, spec)?;
    let c = MixerConfig::default();
    let p = LindbladProblem::new(
        JointOperator::zeros(spec),
        vec![
            a.scale(C64::new(c.kappa_a.sqrt(), 0.0)),
            b.scale(C64::new(c.kappa_b.sqrt(), 0.0)),
        ],
        c.stable_dt(0.0),
    )?;
    let na = &a.adjoint() * &a;
    let mut rho = DensityMatrix::fock(1, 0, spec)?;
    let mut worst = 0.0f64;
    for k in 1..=10 {
        rho = evolve_segment(&p, &rho, c.segment / 4.0)?;
        let t = k as f64 * c.segment / 4.0;
        worst = worst.max((rho.expectation(&na).re - (-c.kappa_a * t).exp()).abs());
    }
    Ok(Check::new(
        "single-photon decay law",
        worst < 1e-4,
        format!("max |⟨n_a⟩ − e^(−κt)| {worst:.2e} over 2.5 segments (limit 1e-4)"),
    ))
}

/// Ratio of successive errors when the step is halved; four-stage RK4 gives
/// 2⁴ = 16. The reference is the same problem at a 32× finer step.
fn rk4_order() -> Result<Check> {
    let c = driven_mixer();
    let ops = MixerOperators::new(&c)?;
    let (ea, eb) = encode_input(1.0, &c);
    let h = ops.hamiltonian(ea, eb, &c);
    let dt = 2.0 * c.dt;
    let run = |dt: f64| -> Result<Vec<f64>> {
        let p = LindbladProblem::new(h.clone(), ops.collapse_ops().to_vec(), dt)?;
        Ok(evolve_segment(&p, &DensityMatrix::vacuum(c.spec), c.segment)?.populations())
    };
    let (coarse, half, fine) = (run(dt)?, run(dt / 2.0)?, run(dt / 32.0)?);
    let err = |x: &[f64]| x.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let (e1, e2) = (err(&coarse), err(&half));
    let ratio = e1 / e2;
    Ok(Check::new(
        "RK4 order ratio",
        (ratio - 16.0).abs() <= 0.2 * 16.0,
        format!("errors {e1:.2e} / {e2:.2e} = {ratio:.2} (target 16 ± 20%)"),
    ))
}

pub fn physics_suite() -> Result<Vec<Check>> {
    let mut v = segment_invariants()?;
    v.push(swap_period()?);
    v.push(single_photon_decay()?);
    v.push(rk4_order()?);
    Ok(v)
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Pseudoinverse identities and normal-equation agreement on random small
/// systems, and the relation between the two RMSE conventions.
pub fn readout_suite() -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut penrose, mut normal) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let nf = rng.random_range(2..=6);
        let ns = rng.random_range(nf + 2..=20);
        let no = rng.random_range(1..=3);
        let f = DMatrix::from_fn(nf, ns, |_, _| rng.random_range(-1.0..1.0));
        let y = DMatrix::from_fn(no, ns, |_, _| rng.random_range(-1.0..1.0));
        let fp = pseudoinverse(&f, RCOND, 0.0)?;
        penrose = penrose
            .max(max_abs(&(&f * &fp * &f - &f)))
            .max(max_abs(&(&fp * &f * &fp - &fp)));
        let features = qrc_core::mixer::FeatureMatrix::from_rows(f.clone(), false);
        let w = fit(&features, &y, 0.0)?;
        let gram = (&f * f.transpose()).try_inverse().expect("random full-rank system");
        let oracle = &y * f.transpose() * gram;
        normal = normal.max(max_abs(&(w.values() - oracle)));
    }
    let mut rel = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=500);
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (per_sample, standard) = rmse(&p, &t)?;
        if standard > 0.0 {
            rel = rel.max((per_sample * (n as f64).sqrt() - standard).abs() / standard);
        }
    }
    Ok(vec![
        Check::new(
            "pseudoinverse identities",
            penrose <= 1e-10,
            format!("max residual {penrose:.2e} over 100 systems (limit 1e-10)"),
        ),
        Check::new(
            "normal-equations agreement",
            normal <= 1e-10,
            format!("max |W − Y Fᵀ(F Fᵀ)⁻¹| {normal:.2e} over 100 systems (limit 1e-10)"),
        ),
        Check::new(
            "rmse_paper·√N = rmse_standard",
            rel <= 1e-15,
            format!("max relative deviation {rel:.1e} (limit 1e-15)"),
        ),
    ])
}

/// Separation of two Mackey-Glass runs whose histories differ by `delta`.
pub fn twin_separation(delta: f64, samples: usize) -> Result<Vec<f64>> {
    let base = MackeyGlassConfig {
        length: samples,
        ..MackeyGlassConfig::default()
    };
    let twin = MackeyGlassConfig {
        history: base.history + delta,
        ..base.clone()
    };
    let (a, b) = (gen_mackey_glass(&base)?, gen_mackey_glass(&twin)?);
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).collect())
}

pub fn generator_suite() -> Result<Vec<Check>> {
    let fixed = MackeyGlassConfig {
        history: 1.0,
        warmup: 0,
        length: 1000,
        ..MackeyGlassConfig::default()
    };
    let steps = fixed.length * fixed.steps_per_sample()?;
    let dev = gen_mackey_glass(&fixed)?
        .iter()
        .fold(0.0f64, |m, x| m.max((x - 1.0).abs()));
    let sep = twin_separation(1e-6, 3000)?;
    let within = sep[..500].iter().fold(0.0f64, |m, x| m.max(*x));
    let first = sep.iter().position(|s| *s > 0.05);
    Ok(vec![
        Check::new(
            "Mackey-Glass fixed point",
            dev <= 1e-12,
            format!("max |x − 1| {dev:.1e} over {steps} steps (limit 1e-12)"),
        ),
        Check::new(
            "Mackey-Glass twin divergence",
            within > 0.05,
            format!(
                "max separation {within:.2e} within 500 samples (needs > 0.05); first exceeds 0.05 at sample {}",
                first.map_or("never (3000)".to_string(), |i| i.to_string())
            ),
        ),
    ])
}
