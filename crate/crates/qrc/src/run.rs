//! Single experiment runs: dataset → reservoir features → readout → files.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use qrc_core::mixer::{calibrate_drive, simulate, DriveCalibration, FeatureMatrix, MixerConfig, PopulationTrace};
use qrc_core::readout::{fit, predict, Metrics, ReadoutWeights};
use qrc_core::tasks::{gen_mackey_glass, gen_sine_square, make_delay_targets, Dataset, MackeyGlassConfig, TaskKind};

use crate::config::{ExperimentConfig, ReservoirKind, Step};
use crate::error::Result;
use crate::io;

/// Environment variable naming the directory that relative output paths
/// resolve against.
pub const OUTPUT_ROOT_ENV: &str = "QRC_OUTPUT_ROOT";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

pub fn output_dir(config: &ExperimentConfig, root: &Path) -> PathBuf {
    let p = Path::new(&config.output);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        root.join(p)
    }
}

/// Train and test sets for the configured task.
pub fn build_dataset(config: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let d = &config.dataset;
    match config.task {
        TaskKind::SineSquare => {
            let all = gen_sine_square(d.train_waveforms + d.test_waveforms, d.seed)?;
            Ok(all.split(d.train_waveforms * qrc_core::tasks::WAVEFORM_POINTS)?)
        }
        TaskKind::MackeyGlass => {
            let max_delay = d.delays.iter().copied().max().unwrap_or(0);
            let mg = MackeyGlassConfig {
                length: d.train_len + d.test_len + max_delay,
                seed: d.seed,
                ..d.mackey_glass.clone()
            };
            let series = gen_mackey_glass(&mg)?;
            let (mut train, mut test) = make_delay_targets(&series, &d.delays, d.train_len, d.test_len)?;
            train.seed = d.seed;
            test.seed = d.seed;
            Ok((train, test))
        }
    }
}

/// Key of a dataset: a hash of the task and every dataset parameter.
pub fn dataset_key(config: &ExperimentConfig) -> String {
    let mut h = Sha256::new();
    h.update(config.task.name());
    for (section, key, value) in config.entries() {
        if section == "dataset" {
            h.update(format!("\n{key}={value}"));
        }
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Datasets shared by the points of a sweep, in memory and optionally on
/// disk under `dir`.
#[derive(Debug, Default)]
pub struct DatasetCache {
    dir: Option<PathBuf>,
    mem: Mutex<HashMap<String, (Dataset, Dataset)>>,
}

impl DatasetCache {
    pub fn in_memory() -> Self {
        DatasetCache::default()
    }

    pub fn on_disk(dir: PathBuf) -> Self {
        DatasetCache {
            dir: Some(dir),
            mem: Mutex::default(),
        }
    }

    pub fn get(&self, config: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
        let key = dataset_key(config);
        if let Some(d) = self.mem.lock().expect("cache lock").get(&key) {
            return Ok(d.clone());
        }
        let files = self
            .dir
            .as_ref()
            .map(|d| (d.join(format!("{key}-train.csv")), d.join(format!("{key}-test.csv"))));
        let data = match &files {
            Some((tr, te)) if tr.exists() && te.exists() => (io::read_dataset_csv(tr)?, io::read_dataset_csv(te)?),
            _ => {
                let data = build_dataset(config)?;
                if let Some((tr, te)) = &files {
                    io::write_atomic(tr, &io::dataset_csv(&data.0))?;
                    io::write_atomic(te, &io::dataset_csv(&data.1))?;
                }
                data
            }
        };
        self.mem.lock().expect("cache lock").insert(key, data.clone());
        Ok(data)
    }
}

/// Inputs of train and test, in streaming order.
pub fn all_inputs(train: &Dataset, test: &Dataset) -> Vec<f64> {
    train.inputs.iter().chain(&test.inputs).copied().collect()
}

/// Mixer with the drive calibrated (when requested) and the step resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedMixer {
    pub mixer: MixerConfig,
    pub calibration: Option<DriveCalibration>,
}

pub fn resolve_mixer(config: &ExperimentConfig, inputs: &[f64]) -> Result<ResolvedMixer> {
    let mut m = config.mixer();
    let peak = inputs.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let auto = config.quantum.step == Step::Auto;
    let calibration = if config.quantum.calibrate {
        let mut probe = m.clone();
        if auto {
            // calibration takes the smaller of this and the stable step
            probe.dt = probe.segment;
        }
        let n = config.quantum.calibration_samples.min(inputs.len());
        let cal = calibrate_drive(&inputs[..n], &probe, config.quantum.calibration_target)?;
        m.eps0_a = cal.eps0_a;
        m.eps0_b = cal.eps0_b;
        Some(cal)
    } else {
        None
    };
    if auto {
        m.dt = m.stable_dt(peak);
    }
    Ok(ResolvedMixer { mixer: m, calibration })
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: ExperimentConfig,
    pub dataset_key: String,
    pub mixer: Option<ResolvedMixer>,
    /// Features over train then test samples.
    pub features: FeatureMatrix,
    pub train_len: usize,
    pub weights: ReadoutWeights,
    pub output_labels: Vec<String>,
    /// Test predictions and targets, outputs × test samples.
    pub predictions: DMatrix<f64>,
    pub targets: DMatrix<f64>,
    pub metrics: Metrics,
    pub wall_time: f64,
}

/// Fit on the first `train.len()` feature columns, score on the rest.
pub fn evaluate(
    config: &ExperimentConfig,
    features: &FeatureMatrix,
    train: &Dataset,
    test: &Dataset,
) -> Result<(ReadoutWeights, DMatrix<f64>, Metrics)> {
    let n = train.len();
    let w = fit(&features.columns(0, n), &train.targets, config.readout.ridge)?;
    let pred = predict(&w, &features.columns(n, n + test.len()))?;
    let metrics = match config.task {
        TaskKind::SineSquare => {
            let p: Vec<f64> = pred.row(0).iter().copied().collect();
            let t: Vec<f64> = test.targets.row(0).iter().copied().collect();
            Metrics::classification(&p, &t, config.readout.threshold)?
        }
        TaskKind::MackeyGlass => Metrics::regression(&pred, &test.targets, &config.dataset.delays)?,
    };
    Ok((w, pred, metrics))
}

/// Quantum population trace for the configured task, with its mixer.
pub fn quantum_trace(config: &ExperimentConfig, cache: &DatasetCache) -> Result<(PopulationTrace, ResolvedMixer)> {
    let (train, test) = cache.get(config)?;
    let inputs = all_inputs(&train, &test);
    let resolved = resolve_mixer(config, &inputs)?;
    Ok((simulate(&inputs, &resolved.mixer)?, resolved))
}

/// Score precomputed features; used directly by sweeps that share a trace.
pub fn finish(
    config: &ExperimentConfig,
    cache: &DatasetCache,
    features: FeatureMatrix,
    mixer: Option<ResolvedMixer>,
    started: Instant,
) -> Result<RunResult> {
    let (train, test) = cache.get(config)?;
    let (weights, predictions, metrics) = evaluate(config, &features, &train, &test)?;
    Ok(RunResult {
        config: config.clone(),
        dataset_key: dataset_key(config),
        mixer,
        train_len: train.len(),
        features,
        weights,
        output_labels: test.labels.clone(),
        predictions,
        targets: test.targets.clone(),
        metrics,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

/// Run without writing anything.
pub fn execute(config: &ExperimentConfig, cache: &DatasetCache) -> Result<RunResult> {
    config.validate()?;
    let started = Instant::now();
    match config.reservoir {
        ReservoirKind::Quantum => {
            let (trace, resolved) = quantum_trace(config, cache)?;
            let features = trace.features(&config.readout_spec())?;
            finish(config, cache, features, Some(resolved), started)
        }
        ReservoirKind::Static | ReservoirKind::Sto => {
            let (train, test) = cache.get(config)?;
            let features = config
                .baseline()
                .features(&all_inputs(&train, &test), config.readout.bias)?;
            finish(config, cache, features, None, started)
        }
    }
}

pub const BUNDLE_FILES: [&str; 6] = [
    "features.csv",
    "weights.csv",
    "predictions.csv",
    "metrics.csv",
    "config.txt",
    "manifest.json",
];

/// Manifest of a run: resolved configuration, seeds, derived quantities,
/// code version and timing.
pub fn manifest(result: &RunResult) -> serde_json::Value {
    let c = &result.config;
    let mut sections = serde_json::Map::new();
    for (section, key, value) in c.entries() {
        sections
            .entry(section)
            .or_insert_with(|| serde_json::Value::Object(Default::default()))
            .as_object_mut()
            .expect("section object")
            .insert(key.to_string(), serde_json::Value::String(value));
    }
    let mixer = result.mixer.as_ref().map(|r| {
        serde_json::json!({
            "dt": r.mixer.dt,
            "eps0_a": r.mixer.eps0_a,
            "eps0_b": r.mixer.eps0_b,
            "calibration": r.calibration.as_ref().map(|k| serde_json::json!({
                "scale": k.scale,
                "mean_photons": k.mean_photons,
                "edge_population": k.edge_population,
                "iterations": k.iterations,
            })),
        })
    });
    let seeds = match c.reservoir {
        ReservoirKind::Quantum => serde_json::json!({ "dataset": c.dataset.seed }),
        _ => serde_json::json!({ "dataset": c.dataset.seed, "baseline": c.baseline.seed }),
    };
    serde_json::json!({
        "program": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": sections,
        "config_text": c.to_text(),
        "seeds": seeds,
        "dataset_key": result.dataset_key,
        "resolved_mixer": mixer,
        "train_samples": result.train_len,
        "test_samples": result.predictions.ncols(),
        "metrics": {
            "accuracy": result.metrics.accuracy,
            "rmse_paper": result.metrics.rmse_paper,
            "rmse_standard": result.metrics.rmse_standard,
        },
        "files": BUNDLE_FILES,
        "wall_time_s": result.wall_time,
    })
}

/// Write the result bundle into `dir`.
pub fn write_bundle(result: &RunResult, dir: &Path) -> Result<()> {
    io::write_atomic(&dir.join("features.csv"), &io::features_csv(&result.features))?;
    io::write_atomic(
        &dir.join("weights.csv"),
        &io::weights_csv(&result.weights, &result.output_labels),
    )?;
    io::write_atomic(
        &dir.join("predictions.csv"),
        &io::predictions_csv(
            &result.output_labels,
            &result.predictions,
            &result.targets,
            result.train_len,
        ),
    )?;
    io::write_atomic(
        &dir.join("metrics.csv"),
        &io::metrics_csv(&result.metrics, &result.config.dataset.delays),
    )?;
    io::write_atomic(&dir.join("config.txt"), result.config.to_text().as_bytes())?;
    let m = serde_json::to_string_pretty(&manifest(result)).expect("json");
    io::write_atomic(&dir.join("manifest.json"), m.as_bytes())?;
    Ok(())
}

/// Run and write the bundle to the configured output directory.
pub fn run_experiment(config: &ExperimentConfig, root: &Path) -> Result<RunResult> {
    let cache = DatasetCache::on_disk(root.join("cache"));
    let result = execute(config, &cache)?;
    write_bundle(&result, &output_dir(config, root))?;
    Ok(result)
}

/// Configuration stored in a run manifest.
pub fn config_from_manifest(path: &Path) -> Result<ExperimentConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| crate::error::QrcError::Io(format!("{}: {e}", path.display())))?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| crate::error::QrcError::Io(format!("{}: {e}", path.display())))?;
    let cfg = v["config_text"]
        .as_str()
        .ok_or_else(|| crate::error::QrcError::Io(format!("{}: no config_text", path.display())))?;
    Ok(ExperimentConfig::from_text(cfg, &path.display().to_string())?)
}
