//! One-shot linear readout: weights from the Moore-Penrose pseudoinverse of
//! the feature matrix, prediction, and task metrics.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::mixer::FeatureMatrix;
use crate::{Error, Result};

/// Relative singular-value cutoff of the pseudoinverse.
pub const RCOND: f64 = 1e-12;

/// Floor added to absolute errors before taking log₁₀.
pub const LOG_FLOOR: f64 = 1e-12;

/// Trained output layer, `n_outputs × n_features`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutWeights {
    values: DMatrix<f64>,
    labels: Vec<String>,
    bias: bool,
}

impl ReadoutWeights {
    pub fn new(values: DMatrix<f64>, labels: Vec<String>, bias: bool) -> Result<Self> {
        if values.ncols() != labels.len() {
            return Err(Error::invalid(format!(
                "{} weight columns but {} feature labels",
                values.ncols(),
                labels.len()
            )));
        }
        if bias && labels.last().map(String::as_str) != Some("bias") {
            return Err(Error::invalid("a bias column must be last and labelled 'bias'"));
        }
        Ok(ReadoutWeights { values, labels, bias })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Feature ordering the weights expect.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn bias(&self) -> bool {
        self.bias
    }

    pub fn n_outputs(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }
}

/// Moore-Penrose pseudoinverse by SVD, discarding singular values below
/// `rcond·σ_max`. A positive `ridge` λ replaces 1/σ by σ/(σ² + λ).
pub fn pseudoinverse(m: &DMatrix<f64>, rcond: f64, ridge: f64) -> Result<DMatrix<f64>> {
    if m.is_empty() {
        return Err(Error::invalid("cannot invert an empty matrix"));
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::invalid("ridge parameter must be a non-negative number"));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix contains non-finite entries"));
    }
    let svd = m.clone().svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::invalid("singular value decomposition failed")),
    };
    let s = &svd.singular_values;
    let cutoff = rcond * s.max();
    // V Σ⁺ Uᵀ
    let mut vs = vt.transpose();
    for (k, &sigma) in s.iter().enumerate() {
        let inv = if sigma > cutoff && sigma > 0.0 {
            sigma / (sigma * sigma + ridge)
        } else {
            0.0
        };
        vs.column_mut(k).scale_mut(inv);
    }
    Ok(vs * u.transpose())
}

/// W = Ỹ F⁺ with `targets` shaped outputs × samples.
pub fn fit(features: &FeatureMatrix, targets: &DMatrix<f64>, ridge: f64) -> Result<ReadoutWeights> {
    if features.n_samples() == 0 || features.n_features() == 0 {
        return Err(Error::invalid("empty feature matrix"));
    }
    if targets.ncols() != features.n_samples() {
        return Err(Error::invalid(format!(
            "{} target columns for {} samples",
            targets.ncols(),
            features.n_samples()
        )));
    }
    if targets.nrows() == 0 {
        return Err(Error::invalid("at least one target row is required"));
    }
    let pinv = pseudoinverse(features.values(), RCOND, ridge)?;
    ReadoutWeights::new(targets * pinv, features.labels().to_vec(), features.bias_row())
}

/// Y = W F.
pub fn predict(weights: &ReadoutWeights, features: &FeatureMatrix) -> Result<DMatrix<f64>> {
    if weights.labels() != features.labels() {
        return Err(Error::invalid(format!(
            "weights expect features [{}], got [{}]",
            weights.labels().join(","),
            features.labels().join(",")
        )));
    }
    Ok(weights.values() * features.values())
}

/// Fraction of samples where `pred ≥ threshold` agrees with `target == 1`.
pub fn classification_accuracy(pred: &[f64], target: &[f64], threshold: f64) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::invalid("accuracy of an empty sequence"));
    }
    if pred.len() != target.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} targets",
            pred.len(),
            target.len()
        )));
    }
    let hits = pred
        .iter()
        .zip(target)
        .filter(|(p, t)| (**p >= threshold) == (**t == 1.0))
        .count();
    Ok(hits as f64 / pred.len() as f64)
}

/// `(√Σe² / N, √(Σe² / N))`. The first form is the figure of merit quoted
/// for the classification task; the second is the conventional RMSE.
pub fn rmse(pred: &[f64], target: &[f64]) -> Result<(f64, f64)> {
    if pred.is_empty() {
        return Err(Error::invalid("rmse of an empty sequence"));
    }
    if pred.len() != target.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} targets",
            pred.len(),
            target.len()
        )));
    }
    let n = pred.len() as f64;
    let sum: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((libm::sqrt(sum) / n, libm::sqrt(sum / n)))
}

fn check_rows(pred: &DMatrix<f64>, target: &DMatrix<f64>, delays: &[usize]) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::invalid(format!(
            "prediction shape {:?} differs from target shape {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    if pred.nrows() != delays.len() {
        return Err(Error::invalid(format!(
            "{} rows for {} delays",
            pred.nrows(),
            delays.len()
        )));
    }
    if pred.ncols() == 0 {
        return Err(Error::invalid("no test points"));
    }
    Ok(())
}

/// Per delay, the mean over test points of log₁₀(|e| + 1e-12).
pub fn log_error_curve(pred: &DMatrix<f64>, target: &DMatrix<f64>, delays: &[usize]) -> Result<Vec<f64>> {
    check_rows(pred, target, delays)?;
    let n = pred.ncols() as f64;
    Ok((0..pred.nrows())
        .map(|r| {
            pred.row(r)
                .iter()
                .zip(target.row(r).iter())
                .map(|(p, t)| libm::log10((p - t).abs() + LOG_FLOOR))
                .sum::<f64>()
                / n
        })
        .collect())
}

/// Per delay, log₁₀ of the conventional RMSE.
pub fn log_rmse_curve(pred: &DMatrix<f64>, target: &DMatrix<f64>, delays: &[usize]) -> Result<Vec<f64>> {
    check_rows(pred, target, delays)?;
    (0..pred.nrows())
        .map(|r| {
            let p: Vec<f64> = pred.row(r).iter().copied().collect();
            let t: Vec<f64> = target.row(r).iter().copied().collect();
            Ok(libm::log10(rmse(&p, &t)?.1 + LOG_FLOOR))
        })
        .collect()
}

/// Test-set scores. Classification fills `accuracy`; delayed recall fills
/// the per-delay curves. RMSEs are over all outputs and samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub accuracy: Option<f64>,
    pub rmse_paper: f64,
    pub rmse_standard: f64,
    pub log_error_curve: Vec<f64>,
    pub log_rmse_curve: Vec<f64>,
}

impl Metrics {
    pub fn classification(pred: &[f64], target: &[f64], threshold: f64) -> Result<Self> {
        let (rmse_paper, rmse_standard) = rmse(pred, target)?;
        Ok(Metrics {
            accuracy: Some(classification_accuracy(pred, target, threshold)?),
            rmse_paper,
            rmse_standard,
            log_error_curve: Vec::new(),
            log_rmse_curve: Vec::new(),
        })
    }

    pub fn regression(pred: &DMatrix<f64>, target: &DMatrix<f64>, delays: &[usize]) -> Result<Self> {
        check_rows(pred, target, delays)?;
        let (rmse_paper, rmse_standard) = rmse(pred.as_slice(), target.as_slice())?;
        Ok(Metrics {
            accuracy: None,
            rmse_paper,
            rmse_standard,
            log_error_curve: log_error_curve(pred, target, delays)?,
            log_rmse_curve: log_rmse_curve(pred, target, delays)?,
        })
    }

    /// Mean of the log-error curve over delays in `lo..=hi`.
    pub fn mean_log_error(&self, delays: &[usize], lo: usize, hi: usize) -> Option<f64> {
        let picked: Vec<f64> = delays
            .iter()
            .zip(&self.log_error_curve)
            .filter(|(d, _)| (lo..=hi).contains(*d))
            .map(|(_, e)| *e)
            .collect();
        if picked.is_empty() {
            None
        } else {
            Some(picked.iter().sum::<f64>() / picked.len() as f64)
        }
    }
}
