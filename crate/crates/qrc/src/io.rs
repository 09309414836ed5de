//! CSV and JSON artifacts. Numbers are written with 17 significant digits in
//! exponent form, which round-trips every `f64` and ignores the locale.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use qrc_core::mixer::FeatureMatrix;
use qrc_core::readout::{Metrics, ReadoutWeights};
use qrc_core::tasks::{Dataset, TaskKind};

use crate::error::{QrcError, Result};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> QrcError {
    QrcError::Io(format!("{}: {e}", path.display()))
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| io_err(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

fn csv_bytes(comment: Option<&str>, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    let mut buf = Vec::new();
    if let Some(c) = comment {
        buf.extend_from_slice(b"# ");
        buf.extend_from_slice(c.as_bytes());
        buf.push(b'\n');
    }
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        // writing into a Vec cannot fail
        w.write_record(header).expect("in-memory csv");
        for r in rows {
            w.write_record(&r).expect("in-memory csv");
        }
        w.flush().expect("in-memory csv");
    }
    buf
}

/// Features, one row per sample and one column per neuron (plus `bias`).
pub fn features_csv(f: &FeatureMatrix) -> Vec<u8> {
    let mut header = vec!["sample".to_string()];
    header.extend(f.labels().iter().cloned());
    let v = f.values();
    let rows = (0..f.n_samples()).map(|s| {
        let mut r = vec![s.to_string()];
        r.extend(v.column(s).iter().map(|x| fmt_f64(*x)));
        r
    });
    csv_bytes(None, &header, rows)
}

/// Header, rows and the leading `#` comment of a CSV file.
type Table = (Vec<String>, Vec<Vec<String>>, Option<String>);

fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let comment = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# "))
        .map(str::to_string);
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = r
        .headers()
        .map_err(|e| io_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(|e| io_err(path, e))?.iter().map(str::to_string).collect());
    }
    Ok((header, rows, comment))
}

fn parse_cell(path: &Path, cell: &str) -> Result<f64> {
    cell.parse()
        .map_err(|_| QrcError::Io(format!("{}: not a number: '{cell}'", path.display())))
}

pub fn read_features_csv(path: &Path) -> Result<FeatureMatrix> {
    let (header, rows, _) = read_table(path)?;
    if header.first().map(String::as_str) != Some("sample") {
        return Err(QrcError::Io(format!(
            "{}: expected a 'sample' column first",
            path.display()
        )));
    }
    let labels: Vec<String> = header[1..].to_vec();
    let mut values = DMatrix::zeros(labels.len(), rows.len());
    for (s, row) in rows.iter().enumerate() {
        for (i, cell) in row[1..].iter().enumerate() {
            values[(i, s)] = parse_cell(path, cell)?;
        }
    }
    let bias = labels.last().map(String::as_str) == Some("bias");
    Ok(FeatureMatrix::new(values, labels, bias)?)
}

/// Weights, one row per output; the comment line records feature order and
/// bias presence.
pub fn weights_csv(w: &ReadoutWeights, outputs: &[String]) -> Vec<u8> {
    let comment = format!("features={} bias={}", w.labels().join(";"), w.bias());
    let mut header = vec!["output".to_string()];
    header.extend(w.labels().iter().cloned());
    let v = w.values();
    let rows = (0..w.n_outputs()).map(|o| {
        let mut r = vec![outputs.get(o).cloned().unwrap_or_else(|| o.to_string())];
        r.extend(v.row(o).iter().map(|x| fmt_f64(*x)));
        r
    });
    csv_bytes(Some(&comment), &header, rows)
}

pub fn read_weights_csv(path: &Path) -> Result<(ReadoutWeights, Vec<String>)> {
    let (header, rows, comment) = read_table(path)?;
    let bias = comment.as_deref().is_some_and(|c| c.ends_with("bias=true"));
    let labels: Vec<String> = header[1..].to_vec();
    let mut values = DMatrix::zeros(rows.len(), labels.len());
    let mut outputs = Vec::new();
    for (o, row) in rows.iter().enumerate() {
        outputs.push(row[0].clone());
        for (i, cell) in row[1..].iter().enumerate() {
            values[(o, i)] = parse_cell(path, cell)?;
        }
    }
    Ok((ReadoutWeights::new(values, labels, bias)?, outputs))
}

/// Test-set predictions next to their targets, indexed from `first`.
pub fn predictions_csv(labels: &[String], pred: &DMatrix<f64>, target: &DMatrix<f64>, first: usize) -> Vec<u8> {
    let mut header = vec!["sample".to_string()];
    for l in labels {
        header.push(format!("{l}_pred"));
        header.push(l.clone());
    }
    let rows = (0..pred.ncols()).map(|s| {
        let mut r = vec![(first + s).to_string()];
        for o in 0..pred.nrows() {
            r.push(fmt_f64(pred[(o, s)]));
            r.push(fmt_f64(target[(o, s)]));
        }
        r
    });
    csv_bytes(None, &header, rows)
}

/// Long-form metrics: `metric,delay,value`, delay empty for scalars.
pub fn metrics_csv(m: &Metrics, delays: &[usize]) -> Vec<u8> {
    let header = ["metric", "delay", "value"].map(String::from).to_vec();
    let mut rows = Vec::new();
    if let Some(a) = m.accuracy {
        rows.push(vec!["accuracy".into(), String::new(), fmt_f64(a)]);
    }
    rows.push(vec!["rmse_paper".into(), String::new(), fmt_f64(m.rmse_paper)]);
    rows.push(vec!["rmse_standard".into(), String::new(), fmt_f64(m.rmse_standard)]);
    for (d, e) in delays.iter().zip(&m.log_error_curve) {
        rows.push(vec!["log_error".into(), d.to_string(), fmt_f64(*e)]);
    }
    for (d, e) in delays.iter().zip(&m.log_rmse_curve) {
        rows.push(vec!["log_rmse".into(), d.to_string(), fmt_f64(*e)]);
    }
    csv_bytes(None, &header, rows.into_iter())
}

/// Scalar metrics by name and the per-delay curves, from a metrics file.
pub type MetricsTable = (BTreeMap<String, f64>, BTreeMap<String, Vec<(usize, f64)>>);

pub fn read_metrics_csv(path: &Path) -> Result<MetricsTable> {
    let (_, rows, _) = read_table(path)?;
    let mut scalars = BTreeMap::new();
    let mut curves: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
    for r in rows {
        let v = parse_cell(path, &r[2])?;
        if r[1].is_empty() {
            scalars.insert(r[0].clone(), v);
        } else {
            let d = r[1]
                .parse()
                .map_err(|_| QrcError::Io(format!("{}: bad delay '{}'", path.display(), r[1])))?;
            curves.entry(r[0].clone()).or_default().push((d, v));
        }
    }
    Ok((scalars, curves))
}

/// Dataset with a JSON header comment holding kind, seed and metadata.
pub fn dataset_csv(d: &Dataset) -> Vec<u8> {
    let meta = serde_json::json!({
        "kind": d.kind.name(),
        "seed": d.seed,
        "metadata": d.metadata,
    });
    let mut header = vec!["index".to_string(), "input".to_string()];
    header.extend(d.labels.iter().cloned());
    let rows = (0..d.len()).map(|i| {
        let mut r = vec![i.to_string(), fmt_f64(d.inputs[i])];
        r.extend(d.targets.column(i).iter().map(|x| fmt_f64(*x)));
        r
    });
    csv_bytes(Some(&meta.to_string()), &header, rows)
}

pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let (header, rows, comment) = read_table(path)?;
    let bad = |m: &str| QrcError::Io(format!("{}: {m}", path.display()));
    let meta: serde_json::Value =
        serde_json::from_str(comment.as_deref().ok_or_else(|| bad("missing header comment"))?)
            .map_err(|e| bad(&e.to_string()))?;
    let kind = TaskKind::parse(meta["kind"].as_str().ok_or_else(|| bad("missing kind"))?)?;
    let seed = meta["seed"].as_u64().ok_or_else(|| bad("missing seed"))?;
    let metadata: BTreeMap<String, String> =
        serde_json::from_value(meta["metadata"].clone()).map_err(|e| bad(&e.to_string()))?;
    if header.len() < 2 || header[0] != "index" || header[1] != "input" {
        return Err(bad("expected columns index,input,…"));
    }
    let labels: Vec<String> = header[2..].to_vec();
    let mut inputs = Vec::with_capacity(rows.len());
    let mut targets = DMatrix::zeros(labels.len(), rows.len());
    for (i, r) in rows.iter().enumerate() {
        inputs.push(parse_cell(path, &r[1])?);
        for (o, cell) in r[2..].iter().enumerate() {
            targets[(o, i)] = parse_cell(path, cell)?;
        }
    }
    Ok(Dataset::new(inputs, targets, labels, kind, seed, metadata)?)
}

/// Any table of already formatted cells.
pub fn table_csv(header: &[&str], rows: Vec<Vec<String>>) -> Vec<u8> {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    csv_bytes(None, &header, rows.into_iter())
}
