//! Deterministic stratified k-fold partitioning.
//!
//! Rows of each class are shuffled with the plan seed and the two shuffled
//! lists are dealt round-robin as one continuous sequence (negatives first),
//! so fold sizes differ by at most one overall and per class.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum CrossvalError {
    #[error("k must be at least 2, got {0}")]
    TooFewFolds(usize),
    #[error("stratification infeasible: class {class} has {count} rows, fewer than k = {k}")]
    Infeasible { class: u8, count: usize, k: usize },
    #[error("fold {fold} out of range for k = {k}")]
    FoldOutOfRange { fold: usize, k: usize },
    #[error("label {0} is not binary")]
    InvalidLabel(u8),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    k: usize,
    assignments: Vec<usize>,
    seed: u64,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Fold index of every row.
    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn split(&self, fold: usize) -> Result<(Vec<usize>, Vec<usize>), CrossvalError> {
        fold_split(self, fold)
    }
}

pub fn stratified_folds(y: &[u8], k: usize, seed: u64) -> Result<FoldPlan, CrossvalError> {
    if k < 2 {
        return Err(CrossvalError::TooFewFolds(k));
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &label) in y.iter().enumerate() {
        match label {
            0 | 1 => by_class[label as usize].push(i),
            other => return Err(CrossvalError::InvalidLabel(other)),
        }
    }
    for (class, rows) in by_class.iter().enumerate() {
        if rows.len() < k {
            return Err(CrossvalError::Infeasible {
                class: class as u8,
                count: rows.len(),
                k,
            });
        }
    }
    let mut rng = seed::rng(seed);
    let mut assignments = vec![0usize; y.len()];
    let mut slot = 0usize;
    for rows in by_class.iter_mut() {
        rows.shuffle(&mut rng);
        for &i in rows.iter() {
            assignments[i] = slot % k;
            slot += 1;
        }
    }
    Ok(FoldPlan {
        k,
        assignments,
        seed,
    })
}

/// `(train, test)` row indices for one fold, both ascending.
pub fn fold_split(plan: &FoldPlan, fold: usize) -> Result<(Vec<usize>, Vec<usize>), CrossvalError> {
    if fold >= plan.k {
        return Err(CrossvalError::FoldOutOfRange { fold, k: plan.k });
    }
    let (test, train): (Vec<usize>, Vec<usize>) =
        (0..plan.assignments.len()).partition(|&i| plan.assignments[i] == fold);
    Ok((train, test))
}
