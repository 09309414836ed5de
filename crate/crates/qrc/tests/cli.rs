use std::path::Path;
use std::process::{Command, Output};

fn qrc(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrc"))
        .args(args)
        .env("QRC_OUTPUT_ROOT", root)
        .output()
        .expect("spawn qrc")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL_STATIC: [&str; 6] = [
    "--set",
    "experiment.reservoir=static",
    "--set",
    "dataset.train_waveforms=20",
    "--set",
    "dataset.test_waveforms=10",
];

#[test]
fn print_config_shows_resolved_sections() {
    let dir = tempfile::tempdir().unwrap();
    let o = qrc(dir.path(), &["run", "--print-config", "--set", "mixer.g=6e7"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for section in [
        "[experiment]",
        "[dataset]",
        "[mixer]",
        "[readout]",
        "[baseline]",
        "[sweep]",
        "[output]",
    ] {
        assert!(text.contains(section), "{section} missing from\n{text}");
    }
    assert!(text.contains("g = 6"), "{text}");
}

#[test]
fn config_file_round_trips_through_print_config() {
    let dir = tempfile::tempdir().unwrap();
    let first = stdout(&qrc(
        dir.path(),
        &["run", "--print-config", "--set", "readout.max_na=2"],
    ));
    let path = dir.path().join("c.txt");
    std::fs::write(&path, &first).unwrap();
    let second = stdout(&qrc(
        dir.path(),
        &["run", "--print-config", "-c", path.to_str().unwrap()],
    ));
    assert_eq!(first, second);
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = qrc(dir.path(), &["run", "--set", "mixer.no_such_key=1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no_such_key"));

    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "[mixer]\ng = fast\n").unwrap();
    let o = qrc(dir.path(), &["run", "-c", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.txt:2"));
}

#[test]
fn truncation_overflow_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = qrc(
        dir.path(),
        &[
            "run",
            "--set",
            "dataset.train_waveforms=2",
            "--set",
            "dataset.test_waveforms=1",
            "--set",
            "mixer.calibrate=false",
            "--set",
            "mixer.eps0_a=1e5",
            "--set",
            "mixer.eps0_b=1e5",
            "--set",
            "mixer.dt=auto",
        ],
    );
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn gen_data_writes_both_splits() {
    let dir = tempfile::tempdir().unwrap();
    let o = qrc(
        dir.path(),
        &[
            "gen-data",
            "--set",
            "dataset.train_waveforms=4",
            "--set",
            "dataset.test_waveforms=2",
            "-o",
            "data",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let train = std::fs::read_to_string(dir.path().join("data/train.csv")).unwrap();
    let test = std::fs::read_to_string(dir.path().join("data/test.csv")).unwrap();
    let rows = |s: &str| s.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!((rows(&train), rows(&test)), (32, 16));
}

#[test]
fn run_and_rerun_from_manifest_agree() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "-o", "first"];
    args.extend(SMALL_STATIC);
    let o = qrc(dir.path(), &args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("accuracy"));
    let manifest = dir.path().join("first/manifest.json");
    let o = qrc(
        dir.path(),
        &["run", "--manifest", manifest.to_str().unwrap(), "-o", "second"],
    );
    assert_eq!(o.status.code(), Some(0));
    for f in ["weights.csv", "predictions.csv", "metrics.csv"] {
        assert_eq!(
            std::fs::read(dir.path().join("first").join(f)).unwrap(),
            std::fs::read(dir.path().join("second").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn sweep_tabulates_every_value() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "sweep",
        "--jobs",
        "1",
        "-o",
        "sw",
        "--set",
        "sweep.axis=neurons",
        "--set",
        "sweep.values=2,8",
    ];
    args.extend(SMALL_STATIC);
    let o = qrc(dir.path(), &args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(dir.path().join("sw/sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(dir.path().join("sw/neurons_8/manifest.json").exists());
}

#[test]
fn readout_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = qrc(dir.path(), &["validate", "--suite", "readout"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}

#[test]
fn failing_generator_check_exits_with_3() {
    // the twin-divergence check cannot pass for these generator parameters
    let dir = tempfile::tempdir().unwrap();
    let o = qrc(dir.path(), &["validate", "--suite", "generator"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("PASS Mackey-Glass fixed point"));
}
