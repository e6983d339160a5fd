//! KNN imputation and min-max scaling, fitted on training rows only.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

pub const DEFAULT_IMPUTER_K: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("feature {0} is missing in every training row")]
    UnimputableFeature(usize),
    #[error("no training row is complete, nothing to impute from")]
    NoCompleteRows,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("expected {expected} columns, got {got}")]
    ColumnMismatch { expected: usize, got: usize },
    #[error("scaler input has a missing cell at row {row}, column {col}")]
    MissingValue { row: usize, col: usize },
}

/// Complete-case training rows used as the neighbour pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputerModel {
    k: usize,
    reference: Matrix,
}

impl ImputerModel {
    /// Effective neighbour count, capped at the number of reference rows.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn reference(&self) -> &Matrix {
        &self.reference
    }
}

pub fn fit_imputer(x_train: &Matrix, k: usize) -> Result<ImputerModel, PreprocessError> {
    if k == 0 {
        return Err(PreprocessError::ZeroK);
    }
    for c in 0..x_train.cols() {
        if (0..x_train.rows()).all(|r| Matrix::is_missing(x_train.get(r, c))) {
            return Err(PreprocessError::UnimputableFeature(c));
        }
    }
    let complete: Vec<usize> = (0..x_train.rows())
        .filter(|&r| !x_train.row(r).iter().any(|v| Matrix::is_missing(*v)))
        .collect();
    if complete.is_empty() && x_train.has_missing() {
        return Err(PreprocessError::NoCompleteRows);
    }
    let reference = x_train.select_rows(&complete);
    Ok(ImputerModel {
        k: k.min(reference.rows()).max(1),
        reference,
    })
}

/// Fills every missing cell with the mean of that feature over the `k`
/// nearest reference rows. Distance is Euclidean over the query row's
/// observed columns, scaled by `sqrt(p / observed)`; ties go to the
/// earlier reference row. Observed cells are copied through untouched.
pub fn apply_imputer(m: &ImputerModel, x: &Matrix) -> Result<Matrix, PreprocessError> {
    let p = m.reference.cols();
    if x.cols() != p {
        return Err(PreprocessError::ColumnMismatch {
            expected: p,
            got: x.cols(),
        });
    }
    let mut out = x.clone();
    let nref = m.reference.rows();
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(nref);
    for r in 0..x.rows() {
        let row = x.row(r);
        if !row.iter().any(|v| Matrix::is_missing(*v)) {
            continue;
        }
        let observed: Vec<usize> = (0..p).filter(|&c| !Matrix::is_missing(row[c])).collect();
        let neighbours: Vec<usize> = if observed.is_empty() {
            // Nothing to measure against; average over the whole pool.
            (0..nref).collect()
        } else {
            let scale = p as f64 / observed.len() as f64;
            dist.clear();
            dist.extend((0..nref).map(|i| {
                let refrow = m.reference.row(i);
                let d2: f64 = observed.iter().map(|&c| (row[c] - refrow[c]).powi(2)).sum();
                ((d2 * scale).sqrt(), i)
            }));
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dist.iter().take(m.k).map(|&(_, i)| i).collect()
        };
        let dst = out.row_mut(r);
        for (c, v) in dst.iter_mut().enumerate() {
            if Matrix::is_missing(*v) {
                let sum: f64 = neighbours.iter().map(|&i| m.reference.get(i, c)).sum();
                *v = sum / neighbours.len() as f64;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerModel {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl ScalerModel {
    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }
}

pub fn fit_scaler(x_train: &Matrix) -> Result<ScalerModel, PreprocessError> {
    let p = x_train.cols();
    let mut min = vec![f64::INFINITY; p];
    let mut max = vec![f64::NEG_INFINITY; p];
    for r in 0..x_train.rows() {
        for (c, &v) in x_train.row(r).iter().enumerate() {
            if Matrix::is_missing(v) {
                return Err(PreprocessError::MissingValue { row: r, col: c });
            }
            min[c] = min[c].min(v);
            max[c] = max[c].max(v);
        }
    }
    if x_train.rows() == 0 {
        min.fill(0.0);
        max.fill(0.0);
    }
    Ok(ScalerModel { min, max })
}

/// `(x - min) / (max - min)`, clipped to `[0, 1]`; constant features map to 0.
pub fn apply_scaler(s: &ScalerModel, x: &Matrix) -> Result<Matrix, PreprocessError> {
    if x.cols() != s.min.len() {
        return Err(PreprocessError::ColumnMismatch {
            expected: s.min.len(),
            got: x.cols(),
        });
    }
    let mut out = x.clone();
    for r in 0..out.rows() {
        for (c, v) in out.row_mut(r).iter_mut().enumerate() {
            let range = s.max[c] - s.min[c];
            *v = if range > 0.0 {
                ((*v - s.min[c]) / range).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
    }
    Ok(out)
}
