use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qrc::config::{ExperimentConfig, ReservoirKind};
use qrc::error::{QrcError, Result, EXIT_NUMERICAL};
use qrc::run::{self, DatasetCache};
use qrc::{io, sweep, validate};

#[derive(Parser)]
#[command(
    name = "qrc",
    version,
    about = "Quantum reservoir computing on two coupled dissipative oscillators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and test one reservoir, writing features, weights, predictions,
    /// metrics and a manifest.
    Run(Common),
    /// Repeat the run over `sweep.values` of `sweep.axis` and tabulate.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Scale the drive so the largest time-averaged photon number meets the
    /// calibration target on the task inputs.
    CalibrateDrive(Common),
    /// Run the invariant suites and report one line per check.
    Validate {
        #[arg(long, value_enum, default_values_t = [Suite::Physics, Suite::Readout])]
        suite: Vec<Suite>,
    },
    /// Write the train and test datasets only.
    GenData(Common),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Physics,
    Readout,
    Generator,
}

#[derive(Args)]
struct Common {
    /// Configuration file (`[section]` / `key = value`).
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Take the configuration from a run manifest.
    #[arg(long, conflicts_with = "config")]
    manifest: Option<PathBuf>,
    /// Override one key, e.g. `--set mixer.g=6.3e7`. Repeatable; applied in order.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(short, long)]
    out: Option<String>,
    /// Directory that relative output paths resolve against
    /// (default: $QRC_OUTPUT_ROOT, else the working directory).
    #[arg(long)]
    root: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut c = match (&self.config, &self.manifest) {
            (Some(p), _) => ExperimentConfig::from_file(p)?,
            (_, Some(m)) => run::config_from_manifest(m)?,
            _ => ExperimentConfig::default(),
        };
        for s in &self.overrides {
            c.apply_override(s)?;
        }
        if let Some(o) = &self.out {
            c.apply_override(&format!("output.dir={o}"))?;
        }
        c.validate()?;
        Ok(c)
    }

    fn root(&self) -> PathBuf {
        self.root.clone().unwrap_or_else(run::output_root)
    }
}

fn print_metrics(r: &run::RunResult) {
    if let Some(a) = r.metrics.accuracy {
        println!("accuracy       {a:.4}");
    }
    println!("rmse_paper     {:.4e}", r.metrics.rmse_paper);
    println!("rmse_standard  {:.4e}", r.metrics.rmse_standard);
    if !r.metrics.log_error_curve.is_empty() {
        let c = &r.metrics.log_error_curve;
        println!(
            "mean log error {:.4} over {} delays",
            c.iter().sum::<f64>() / c.len() as f64,
            c.len()
        );
    }
    if let Some(m) = &r.mixer {
        println!("dt             {:.4e} s", m.mixer.dt);
        println!("eps0_a, eps0_b {:.6e}, {:.6e}", m.mixer.eps0_a, m.mixer.eps0_b);
    }
}

fn cmd_run(common: &Common) -> Result<()> {
    let c = common.load()?;
    if common.print_config {
        print!("{}", c.to_text());
        return Ok(());
    }
    let root = common.root();
    let r = run::run_experiment(&c, &root)?;
    print_metrics(&r);
    println!("wrote {}", run::output_dir(&c, &root).display());
    Ok(())
}

fn cmd_sweep(common: &Common, jobs: usize) -> Result<()> {
    let c = common.load()?;
    if common.print_config {
        print!("{}", c.to_text());
        return Ok(());
    }
    let s = sweep::run_sweep(&c, &common.root(), jobs)?;
    for p in &s.points {
        match &p.outcome {
            Ok(sum) => {
                let acc = sum
                    .accuracy_mean_std()
                    .map(|(m, sd)| format!("accuracy {m:.4} ± {sd:.4}"))
                    .unwrap_or_default();
                let log = sum
                    .mean_log_error
                    .map(|e| format!("log error {e:.4}"))
                    .unwrap_or_default();
                println!("{} = {:<8} {acc}{log}", s.axis.name(), p.value);
            }
            Err(e) => println!("{} = {:<8} error: {e}", s.axis.name(), p.value),
        }
    }
    println!("wrote {}", s.dir.join("sweep.csv").display());
    let failed: Vec<&QrcError> = s.points.iter().filter_map(|p| p.outcome.as_ref().err()).collect();
    match failed.first() {
        Some(first) => Err(QrcError::PartialSweep {
            failed: failed.len(),
            total: s.points.len(),
            code: first.exit_code(),
        }),
        None => Ok(()),
    }
}

fn cmd_calibrate(common: &Common) -> Result<()> {
    let mut c = common.load()?;
    if common.print_config {
        print!("{}", c.to_text());
        return Ok(());
    }
    if c.reservoir != ReservoirKind::Quantum {
        return Err(qrc::config::ConfigError::Invalid("drive calibration needs the quantum reservoir".into()).into());
    }
    c.quantum.calibrate = true;
    let root = common.root();
    let (train, test) = DatasetCache::on_disk(root.join("cache")).get(&c)?;
    let r = run::resolve_mixer(&c, &run::all_inputs(&train, &test))?;
    let k = r.calibration.expect("calibration requested");
    println!("eps0_a            {:.10e}", k.eps0_a);
    println!("eps0_b            {:.10e}", k.eps0_b);
    println!("scale vs config   {:.6e}", k.scale);
    println!("max mean photons  {:.6}", k.mean_photons);
    println!("edge population   {:.3e}", k.edge_population);
    println!("iterations        {}", k.iterations);
    let out = run::output_dir(&c, &root).join("calibration.json");
    let json = serde_json::json!({
        "eps0_a": k.eps0_a,
        "eps0_b": k.eps0_b,
        "scale": k.scale,
        "target": c.quantum.calibration_target,
        "mean_photons": k.mean_photons,
        "edge_population": k.edge_population,
        "iterations": k.iterations,
        "samples": c.quantum.calibration_samples.min(train.len() + test.len()),
        "config_text": c.to_text(),
    });
    io::write_atomic(&out, serde_json::to_string_pretty(&json).expect("json").as_bytes())?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_validate(suites: &[Suite]) -> Result<()> {
    let mut failed = 0;
    for s in suites {
        let checks = match s {
            Suite::Physics => validate::physics_suite()?,
            Suite::Readout => validate::readout_suite()?,
            Suite::Generator => validate::generator_suite()?,
        };
        for c in checks {
            println!("{}", c.line());
            failed += usize::from(!c.passed);
        }
    }
    if failed > 0 {
        eprintln!("{failed} check(s) failed");
        std::process::exit(EXIT_NUMERICAL);
    }
    Ok(())
}

fn cmd_gen_data(common: &Common) -> Result<()> {
    let c = common.load()?;
    if common.print_config {
        print!("{}", c.to_text());
        return Ok(());
    }
    let (train, test) = run::build_dataset(&c)?;
    let dir = run::output_dir(&c, &common.root());
    io::write_atomic(&dir.join("train.csv"), &io::dataset_csv(&train))?;
    io::write_atomic(&dir.join("test.csv"), &io::dataset_csv(&test))?;
    println!(
        "wrote {} and {}",
        dir.join("train.csv").display(),
        dir.join("test.csv").display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::Sweep { common, jobs } => cmd_sweep(common, *jobs),
        Command::CalibrateDrive(c) => cmd_calibrate(c),
        Command::Validate { suite } => cmd_validate(suite),
        Command::GenData(c) => cmd_gen_data(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
