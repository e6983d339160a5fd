//! Confusion-matrix metrics and per-fold aggregation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvaluationError {
    #[error("label vectors differ in length: {truth} true vs {pred} predicted")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("label {0} is not 0 or 1")]
    InvalidLabel(u8),
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("no folds to aggregate")]
    NoFolds,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// The matrix seen with class 0 as the positive class.
    pub fn transposed(&self) -> Self {
        Self {
            tp: self.tn,
            tn: self.tp,
            fp: self.fn_,
            fn_: self.fp,
        }
    }
}

/// Cell counts with class 1 as positive.
pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix, EvaluationError> {
    if y_true.len() != y_pred.len() {
        return Err(EvaluationError::LengthMismatch {
            truth: y_true.len(),
            pred: y_pred.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => cm.tp += 1,
            (0, 0) => cm.tn += 1,
            (0, 1) => cm.fp += 1,
            (1, 0) => cm.fn_ += 1,
            (a, b) => return Err(EvaluationError::InvalidLabel(if a > 1 { a } else { b })),
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricFlags {
    /// `tp + fp = 0`; precision reported as 0.
    pub precision_undefined: bool,
    /// `tp + fn = 0`; recall reported as 0.
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub flags: MetricFlags,
    /// Accuracy of the final model on its own (resampled) training data.
    pub train_accuracy: Option<f64>,
    pub train_seconds: f64,
    pub test_seconds: f64,
    pub tune_seconds: f64,
}

/// Accuracy, precision, recall and F1 from `cm`. Timing fields are zero.
pub fn metrics(cm: &ConfusionMatrix) -> Result<FoldMetrics, EvaluationError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvaluationError::EmptyMatrix);
    }
    let mut flags = MetricFlags::default();
    let precision = if cm.tp + cm.fp == 0 {
        flags.precision_undefined = true;
        0.0
    } else {
        cm.tp as f64 / (cm.tp + cm.fp) as f64
    };
    let recall = if cm.tp + cm.fn_ == 0 {
        flags.recall_undefined = true;
        0.0
    } else {
        cm.tp as f64 / (cm.tp + cm.fn_) as f64
    };
    // 2PR / (P + R) reduces to 2tp / (2tp + fp + fn) whenever both are defined.
    let f1 = if cm.tp == 0 {
        0.0
    } else {
        (2 * cm.tp) as f64 / (2 * cm.tp + cm.fp + cm.fn_) as f64
    };
    Ok(FoldMetrics {
        confusion: *cm,
        accuracy: (cm.tp + cm.tn) as f64 / total as f64,
        precision,
        recall,
        f1,
        flags,
        train_accuracy: None,
        train_seconds: 0.0,
        test_seconds: 0.0,
        tune_seconds: 0.0,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub folds: Vec<FoldMetrics>,
    pub accuracy: Summary,
    pub precision: Summary,
    pub recall: Summary,
    pub f1: Summary,
    /// Present only when every fold recorded a training accuracy.
    pub train_accuracy: Option<Summary>,
    pub train_seconds: f64,
    pub test_seconds: f64,
    pub tune_seconds: f64,
}

/// Unweighted mean and population standard deviation of each metric across
/// folds; timings are summed.
pub fn aggregate(folds: &[FoldMetrics]) -> Result<EvaluationReport, EvaluationError> {
    if folds.is_empty() {
        return Err(EvaluationError::NoFolds);
    }
    let pick = |f: fn(&FoldMetrics) -> f64| Summary::of(&folds.iter().map(f).collect::<Vec<_>>());
    let train_accuracy = folds
        .iter()
        .map(|f| f.train_accuracy)
        .collect::<Option<Vec<f64>>>()
        .map(|v| Summary::of(&v));
    Ok(EvaluationReport {
        folds: folds.to_vec(),
        accuracy: pick(|f| f.accuracy),
        precision: pick(|f| f.precision),
        recall: pick(|f| f.recall),
        f1: pick(|f| f.f1),
        train_accuracy,
        train_seconds: folds.iter().map(|f| f.train_seconds).sum(),
        test_seconds: folds.iter().map(|f| f.test_seconds).sum(),
        tune_seconds: folds.iter().map(|f| f.tune_seconds).sum(),
    })
}
