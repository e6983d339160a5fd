//! Feature selectors fitted on a training partition: recursive feature
//! elimination, L1-penalized logistic regression, mutual information and
//! correlation-based feature selection.

mod cfs;
mod mi;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{train_lr, ClassifierError, LrParams, Penalty};
use crate::matrix::Matrix;

pub use cfs::{cfs_merit, pearson, select_cfs};
pub use mi::{equal_frequency_bins, mutual_information, plug_in_mi, select_mi};

/// Coefficients at or below this magnitude count as zero in L1 selection.
pub const L1_ZERO: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SelectorKind {
    None,
    Rfe,
    L1,
    Mi,
    Cfs,
}

impl SelectorKind {
    pub const ALL: [SelectorKind; 5] = [
        SelectorKind::None,
        SelectorKind::Rfe,
        SelectorKind::L1,
        SelectorKind::Mi,
        SelectorKind::Cfs,
    ];
    /// The four real selectors, in report order.
    pub const SELECTORS: [SelectorKind; 4] = [
        SelectorKind::Rfe,
        SelectorKind::L1,
        SelectorKind::Mi,
        SelectorKind::Cfs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SelectorKind::None => "none",
            SelectorKind::Rfe => "rfe",
            SelectorKind::L1 => "l1",
            SelectorKind::Mi => "mi",
            SelectorKind::Cfs => "cfs",
        }
    }
}

impl fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SelectorKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown selector '{s}' (expected none, rfe, l1, mi or cfs)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionWarning {
    /// A zero-variance feature was left out of CFS candidacy.
    ConstantFeatureExcluded(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSubset {
    /// Retained feature indices, ascending.
    pub indices: Vec<usize>,
    /// One score per retained index, same order.
    pub scores: Vec<f64>,
    pub method: SelectorKind,
    pub warnings: Vec<SelectionWarning>,
}

impl FeatureSubset {
    pub fn all(p: usize) -> Self {
        Self {
            indices: (0..p).collect(),
            scores: vec![0.0; p],
            method: SelectorKind::None,
            warnings: Vec::new(),
        }
    }

    fn from_pairs(
        mut pairs: Vec<(usize, f64)>,
        method: SelectorKind,
        warnings: Vec<SelectionWarning>,
    ) -> Self {
        pairs.sort_by_key(|p| p.0);
        Self {
            indices: pairs.iter().map(|p| p.0).collect(),
            scores: pairs.iter().map(|p| p.1).collect(),
            method,
            warnings,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        x.select_cols(&self.indices)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    pub target_count: usize,
    pub l1_strength: f64,
    pub mi_bins: usize,
    pub cfs_patience: usize,
    pub seed: u64,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            target_count: 10,
            l1_strength: 1.0,
            mi_bins: 10,
            cfs_patience: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("target_count {target} must lie in 1..={features}")]
    BadTarget { target: usize, features: usize },
    #[error("invalid selector configuration: {0}")]
    InvalidConfig(String),
    #[error("{method} needs at least {needed} {what}, got {got}")]
    TooSmall {
        method: SelectorKind,
        what: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("L1 selection kept no features at C = {c}; try a larger C")]
    EmptySelection { c: f64 },
    #[error("no selectable features: every feature is constant")]
    NoCandidates,
    #[error("base classifier failed: {0}")]
    Classifier(#[from] ClassifierError),
    #[error("row count {rows} does not match label count {labels}")]
    LengthMismatch { rows: usize, labels: usize },
}

fn check_shape(x: &Matrix, y: &[u8]) -> Result<(), SelectionError> {
    if x.rows() != y.len() {
        return Err(SelectionError::LengthMismatch {
            rows: x.rows(),
            labels: y.len(),
        });
    }
    Ok(())
}

fn check_target(cfg: &SelectorConfig, p: usize) -> Result<(), SelectionError> {
    if cfg.target_count == 0 || cfg.target_count > p {
        return Err(SelectionError::BadTarget {
            target: cfg.target_count,
            features: p,
        });
    }
    Ok(())
}

/// Recursive feature elimination with an L2 logistic regression, removing
/// one feature per round. Ties in `|coef|` drop the higher index.
pub fn select_rfe(
    x: &Matrix,
    y: &[u8],
    cfg: &SelectorConfig,
) -> Result<FeatureSubset, SelectionError> {
    check_shape(x, y)?;
    let p = x.cols();
    if p < 2 {
        return Err(SelectionError::TooSmall {
            method: SelectorKind::Rfe,
            what: "features",
            needed: 2,
            got: p,
        });
    }
    check_target(cfg, p)?;
    let params = LrParams::default();
    let mut remaining: Vec<usize> = (0..p).collect();
    loop {
        let model = train_lr(&x.select_cols(&remaining), y, &params)?;
        if remaining.len() == cfg.target_count {
            let pairs = remaining
                .iter()
                .zip(&model.beta)
                .map(|(&f, b)| (f, b.abs()))
                .collect();
            return Ok(FeatureSubset::from_pairs(
                pairs,
                SelectorKind::Rfe,
                Vec::new(),
            ));
        }
        let mut drop = 0;
        for (pos, b) in model.beta.iter().enumerate() {
            if b.abs() <= model.beta[drop].abs() {
                drop = pos;
            }
        }
        remaining.remove(drop);
    }
}

/// Keeps the features with a non-zero coefficient in an L1 logistic
/// regression at `C = l1_strength`. Scores are the signed coefficients.
pub fn select_l1(
    x: &Matrix,
    y: &[u8],
    cfg: &SelectorConfig,
) -> Result<FeatureSubset, SelectionError> {
    check_shape(x, y)?;
    if !(cfg.l1_strength > 0.0 && cfg.l1_strength.is_finite()) {
        return Err(SelectionError::InvalidConfig(format!(
            "l1_strength must be positive, got {}",
            cfg.l1_strength
        )));
    }
    let params = LrParams {
        c: cfg.l1_strength,
        penalty: Penalty::L1,
        ..Default::default()
    };
    let model = train_lr(x, y, &params)?;
    let pairs: Vec<(usize, f64)> = model
        .beta
        .iter()
        .enumerate()
        .filter(|(_, b)| b.abs() > L1_ZERO)
        .map(|(j, &b)| (j, b))
        .collect();
    if pairs.is_empty() {
        return Err(SelectionError::EmptySelection { c: cfg.l1_strength });
    }
    Ok(FeatureSubset::from_pairs(
        pairs,
        SelectorKind::L1,
        Vec::new(),
    ))
}

/// Runs the selector named by `kind`; `None` keeps every feature.
pub fn select(
    kind: SelectorKind,
    x: &Matrix,
    y: &[u8],
    cfg: &SelectorConfig,
) -> Result<FeatureSubset, SelectionError> {
    match kind {
        SelectorKind::None => {
            check_shape(x, y)?;
            Ok(FeatureSubset::all(x.cols()))
        }
        SelectorKind::Rfe => select_rfe(x, y, cfg),
        SelectorKind::L1 => select_l1(x, y, cfg),
        SelectorKind::Mi => select_mi(x, y, cfg),
        SelectorKind::Cfs => select_cfs(x, y, cfg),
    }
}
