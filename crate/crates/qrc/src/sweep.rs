//! Parameter sweeps: one run per axis value, run on a worker pool, gathered
//! into `sweep.csv`. A failing point is recorded in the table and does not
//! stop the others.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use qrc_core::baselines::{mean_std, score_features};
use qrc_core::mixer::ReadoutSpec;

use crate::config::{ExperimentConfig, ReservoirKind, SweepAxis};
use crate::error::{QrcError, Result};
use crate::io::{self, fmt_f64};
use crate::run::{self, DatasetCache, RunResult};

/// Scores of one sweep value.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    /// Mean and spread over seeds; one entry for deterministic reservoirs.
    pub accuracies: Vec<f64>,
    pub rmse_paper: f64,
    pub rmse_standard: f64,
    /// Mean log error over the delays of the run.
    pub mean_log_error: Option<f64>,
}

impl PointSummary {
    fn from_run(r: &RunResult) -> Self {
        let curve = &r.metrics.log_error_curve;
        PointSummary {
            accuracies: r.metrics.accuracy.into_iter().collect(),
            rmse_paper: r.metrics.rmse_paper,
            rmse_standard: r.metrics.rmse_standard,
            mean_log_error: (!curve.is_empty()).then(|| curve.iter().sum::<f64>() / curve.len() as f64),
        }
    }

    pub fn accuracy_mean_std(&self) -> Option<(f64, f64)> {
        (!self.accuracies.is_empty()).then(|| mean_std(&self.accuracies))
    }
}

#[derive(Debug)]
pub struct SweepPoint {
    pub value: f64,
    pub outcome: std::result::Result<PointSummary, QrcError>,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
    pub dir: PathBuf,
}

impl SweepOutcome {
    /// First failure, which decides the exit status.
    pub fn first_error(&self) -> Option<&QrcError> {
        self.points.iter().find_map(|p| p.outcome.as_ref().err())
    }

    /// Smallest value whose mean accuracy reaches `level`.
    pub fn crossing(&self, level: f64) -> Option<f64> {
        self.points
            .iter()
            .filter(|p| {
                p.outcome
                    .as_ref()
                    .ok()
                    .and_then(PointSummary::accuracy_mean_std)
                    .is_some_and(|(m, _)| m >= level)
            })
            .map(|p| p.value)
            .reduce(f64::min)
    }
}

fn point_dir(dir: &Path, axis: SweepAxis, value: f64) -> PathBuf {
    dir.join(format!("{}_{}", axis.name(), value))
}

/// Side of the square readout grid for a neuron count.
pub fn grid_side(neurons: usize) -> Option<usize> {
    let k = (neurons as f64).sqrt().round() as usize;
    (k >= 1 && k * k == neurons).then(|| k - 1)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| QrcError::Io(format!("worker pool: {e}")))
}

/// `config` with the swept rate multiplied by `factor`.
pub fn scaled(config: &ExperimentConfig, axis: SweepAxis, factor: f64) -> ExperimentConfig {
    let mut c = config.clone();
    match axis {
        SweepAxis::G => c.quantum.mixer.g *= factor,
        SweepAxis::Kappa => {
            c.quantum.mixer.kappa_a *= factor;
            c.quantum.mixer.kappa_b *= factor;
        }
        _ => {}
    }
    c
}

/// One drive for several mixer settings: each is calibrated on its own and
/// the weakest drive is kept, so the most strongly excited setting meets the
/// calibration target and none exceeds it.
pub fn shared_drive(configs: &[ExperimentConfig], cache: &DatasetCache) -> Result<(f64, f64)> {
    let drives = configs
        .par_iter()
        .map(|c| {
            let (train, test) = cache.get(c)?;
            let m = run::resolve_mixer(c, &run::all_inputs(&train, &test))?.mixer;
            Ok((m.eps0_a, m.eps0_b))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(drives
        .into_iter()
        .reduce(|a, b| if b.0.hypot(b.1) < a.0.hypot(a.1) { b } else { a })
        .expect("at least one configuration"))
}

/// `config` with a fixed drive and calibration off.
pub fn with_drive(mut config: ExperimentConfig, (eps0_a, eps0_b): (f64, f64)) -> ExperimentConfig {
    config.quantum.eps0_a = Some(eps0_a);
    config.quantum.eps0_b = Some(eps0_b);
    config.quantum.calibrate = false;
    config
}

/// Run every point of the configured sweep on `jobs` workers (0 = all cores).
pub fn run_sweep(config: &ExperimentConfig, root: &Path, jobs: usize) -> Result<SweepOutcome> {
    config.validate()?;
    let axis = config.sweep.axis;
    if axis == SweepAxis::None {
        return Err(crate::config::ConfigError::Invalid("no sweep axis set".into()).into());
    }
    let dir = run::output_dir(config, root);
    let cache = DatasetCache::on_disk(root.join("cache"));
    let values = config.sweep.values.clone();
    let pool = pool(jobs)?;

    let points: Vec<SweepPoint> = match (axis, config.reservoir) {
        (SweepAxis::Neurons, ReservoirKind::Quantum) => {
            // populations do not depend on the readout, so one trace serves
            // every grid size
            let started = Instant::now();
            let (trace, resolved) = run::quantum_trace(config, &cache)?;
            values
                .iter()
                .map(|&v| {
                    let outcome = (|| {
                        let side = grid_side(v as usize).ok_or_else(|| {
                            crate::config::ConfigError::Invalid(format!("{v} neurons is not a square grid"))
                        })?;
                        let mut c = config.clone();
                        c.readout.max_na = side;
                        c.readout.max_nb = side;
                        c.output = point_dir(&dir, axis, v).display().to_string();
                        let features = trace.features(&ReadoutSpec::new(side, side).with_bias(c.readout.bias))?;
                        let r = run::finish(&c, &cache, features, Some(resolved.clone()), started)?;
                        run::write_bundle(&r, &point_dir(&dir, axis, v))?;
                        Ok(PointSummary::from_run(&r))
                    })();
                    SweepPoint { value: v, outcome }
                })
                .collect()
        }
        (SweepAxis::Neurons, _) => {
            let (train, test) = cache.get(config)?;
            let task = train.clone().concat(&test)?;
            let seeds = config.baseline_seeds();
            let template = config.baseline();
            pool.install(|| {
                values
                    .par_iter()
                    .map(|&v| {
                        let outcome = (|| {
                            let size = v as usize;
                            let mut c = config.clone();
                            c.baseline.size = size;
                            let r = run::execute(&c, &cache)?;
                            run::write_bundle(&r, &point_dir(&dir, axis, v))?;
                            let mut summary = PointSummary::from_run(&r);
                            summary.accuracies = seeds
                                .iter()
                                .map(|&s| {
                                    let f = template.resized(size, s).features(&task.inputs, c.readout.bias)?;
                                    score_features(&f, &task, train.len(), c.readout.ridge)
                                })
                                .collect::<qrc_core::Result<Vec<f64>>>()?;
                            Ok(summary)
                        })();
                        SweepPoint { value: v, outcome }
                    })
                    .collect()
            })
        }
        (SweepAxis::G | SweepAxis::Kappa, _) => {
            let configs: Vec<ExperimentConfig> = values
                .iter()
                .map(|&v| {
                    let mut c = scaled(config, axis, v);
                    c.sweep.axis = SweepAxis::None;
                    c.sweep.values.clear();
                    c
                })
                .collect();
            let configs = if config.reservoir == ReservoirKind::Quantum && config.quantum.calibrate {
                let drive = pool.install(|| shared_drive(&configs, &cache))?;
                configs.into_iter().map(|c| with_drive(c, drive)).collect()
            } else {
                configs
            };
            pool.install(|| {
                values
                    .par_iter()
                    .zip(configs.par_iter())
                    .map(|(&v, c)| {
                        let outcome = run::execute(c, &cache).and_then(|r| {
                            run::write_bundle(&r, &point_dir(&dir, axis, v))?;
                            Ok(PointSummary::from_run(&r))
                        });
                        SweepPoint { value: v, outcome }
                    })
                    .collect()
            })
        }
        (SweepAxis::Delay, _) => {
            // one reservoir pass trained for every delay at once
            let mut c = config.clone();
            c.dataset.delays = values.iter().map(|v| *v as usize).collect();
            let r = run::execute(&c, &cache)?;
            run::write_bundle(&r, &dir.join("run"))?;
            c.dataset
                .delays
                .iter()
                .enumerate()
                .map(|(i, &d)| SweepPoint {
                    value: d as f64,
                    outcome: Ok(PointSummary {
                        accuracies: Vec::new(),
                        rmse_paper: f64::NAN,
                        rmse_standard: f64::NAN,
                        mean_log_error: Some(r.metrics.log_error_curve[i]),
                    }),
                })
                .collect()
        }
        (SweepAxis::None, _) => unreachable!(),
    };

    let outcome = SweepOutcome { axis, points, dir };
    io::write_atomic(&outcome.dir.join("sweep.csv"), &sweep_csv(&outcome))?;
    io::write_atomic(&outcome.dir.join("config.txt"), config.to_text().as_bytes())?;
    Ok(outcome)
}

/// Aggregated table keyed by the sweep value.
pub fn sweep_csv(s: &SweepOutcome) -> Vec<u8> {
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    let rows = s
        .points
        .iter()
        .map(|p| match &p.outcome {
            Ok(sum) => {
                let ms = sum.accuracy_mean_std();
                vec![
                    format!("{:?}", p.value),
                    opt(ms.map(|m| m.0)),
                    opt(ms.map(|m| m.1)),
                    sum.accuracies.iter().map(|a| fmt_f64(*a)).collect::<Vec<_>>().join(";"),
                    fmt_f64(sum.rmse_paper),
                    fmt_f64(sum.rmse_standard),
                    opt(sum.mean_log_error),
                    "ok".to_string(),
                ]
            }
            Err(e) => {
                let mut r = vec![format!("{:?}", p.value)];
                r.extend(std::iter::repeat_n(String::new(), 6));
                r.push(format!("error: {e}"));
                r
            }
        })
        .collect();
    io::table_csv(
        &[
            s.axis.name(),
            "accuracy_mean",
            "accuracy_std",
            "accuracies",
            "rmse_paper",
            "rmse_standard",
            "mean_log_error",
            "status",
        ],
        rows,
    )
}
