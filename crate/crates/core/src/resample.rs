//! ADASYN oversampling of the minority class.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{sq_dist, Matrix};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdasynConfig {
    pub k_neighbors: usize,
    /// Fraction of the class gap to fill; 1.0 balances fully.
    pub balance_target: f64,
    pub seed: u64,
}

impl Default for AdasynConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            balance_target: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ResampleError {
    #[error("k_neighbors must be at least 1")]
    ZeroNeighbors,
    #[error("balance_target must lie in (0, 1], got {0}")]
    BadBalanceTarget(f64),
    #[error("row count {rows} does not match label count {labels}")]
    LengthMismatch { rows: usize, labels: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdasynWarning {
    /// Only one class present; input returned as is.
    SingleClass,
    /// A single minority row; it was duplicated instead of interpolated.
    SingleMinority,
    /// No minority row had a majority neighbour; weights were made uniform.
    UniformWeights,
}

#[derive(Debug, Clone)]
pub struct Resampled {
    pub x: Matrix,
    pub y: Vec<u8>,
    pub n_synthetic: usize,
    pub minority: Option<u8>,
    pub warning: Option<AdasynWarning>,
}

/// Indices of the `k` nearest rows of `pool` to `x.row(i)` (excluding `i`
/// itself), nearest first, ties by lower index.
fn nearest(x: &Matrix, i: usize, pool: &[usize], k: usize) -> Vec<usize> {
    let q = x.row(i);
    let mut d: Vec<(f64, usize)> = pool
        .iter()
        .filter(|&&j| j != i)
        .map(|&j| (sq_dist(q, x.row(j)), j))
        .collect();
    let k = k.min(d.len());
    if k == 0 {
        return Vec::new();
    }
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    d.select_nth_unstable_by(k - 1, cmp);
    d.truncate(k);
    d.sort_by(cmp);
    d.into_iter().map(|(_, j)| j).collect()
}

/// Splits `total` across `weights` (summing to 1) by largest remainder.
/// Ties in the remainder go to the lower index.
pub fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let raw: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut quota: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let assigned: usize = quota.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = raw[a] - raw[a].floor();
        let rb = raw[b] - raw[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        quota[i] += 1;
    }
    quota
}

/// Appends `round((majority - minority) * balance_target)` synthetic
/// minority rows. Original rows are kept, unchanged, as a prefix.
pub fn adasyn(x: &Matrix, y: &[u8], cfg: &AdasynConfig) -> Result<Resampled, ResampleError> {
    if cfg.k_neighbors == 0 {
        return Err(ResampleError::ZeroNeighbors);
    }
    if !(cfg.balance_target > 0.0 && cfg.balance_target <= 1.0) {
        return Err(ResampleError::BadBalanceTarget(cfg.balance_target));
    }
    if x.rows() != y.len() {
        return Err(ResampleError::LengthMismatch {
            rows: x.rows(),
            labels: y.len(),
        });
    }
    let unchanged = |warning, minority| Resampled {
        x: x.clone(),
        y: y.to_vec(),
        n_synthetic: 0,
        minority,
        warning,
    };
    let pos: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 1).collect();
    let neg: Vec<usize> = (0..y.len()).filter(|&i| y[i] != 1).collect();
    if pos.is_empty() || neg.is_empty() {
        return Ok(unchanged(Some(AdasynWarning::SingleClass), None));
    }
    let (minority, min_rows, maj_len) = if pos.len() < neg.len() {
        (1u8, pos, neg.len())
    } else if neg.len() < pos.len() {
        (0u8, neg, pos.len())
    } else {
        return Ok(unchanged(None, None));
    };
    let g = ((maj_len - min_rows.len()) as f64 * cfg.balance_target).round() as usize;
    if g == 0 {
        return Ok(unchanged(None, Some(minority)));
    }

    let mut out_x = x.clone();
    let mut out_y = y.to_vec();
    let mut rng = seed::rng(cfg.seed);

    if min_rows.len() == 1 {
        let row = x.row(min_rows[0]).to_vec();
        for _ in 0..g {
            out_x.push_row(&row);
            out_y.push(minority);
        }
        return Ok(Resampled {
            x: out_x,
            y: out_y,
            n_synthetic: g,
            minority: Some(minority),
            warning: Some(AdasynWarning::SingleMinority),
        });
    }

    let all: Vec<usize> = (0..y.len()).collect();
    let k_all = cfg.k_neighbors.min(y.len() - 1);
    let k_min = cfg.k_neighbors.min(min_rows.len() - 1);

    let ratios: Vec<f64> = min_rows
        .iter()
        .map(|&i| {
            let nn = nearest(x, i, &all, k_all);
            let majority_nb = nn.iter().filter(|&&j| y[j] != minority).count();
            majority_nb as f64 / k_all as f64
        })
        .collect();
    let total: f64 = ratios.iter().sum();
    let mut warning = None;
    let weights: Vec<f64> = if total > 0.0 {
        ratios.iter().map(|r| r / total).collect()
    } else {
        warning = Some(AdasynWarning::UniformWeights);
        vec![1.0 / min_rows.len() as f64; min_rows.len()]
    };
    let quotas = largest_remainder(g, &weights);

    let p = x.cols();
    let mut synth = vec![0.0; p];
    for (pos_in_min, &i) in min_rows.iter().enumerate() {
        let gi = quotas[pos_in_min];
        if gi == 0 {
            continue;
        }
        let partners = nearest(x, i, &min_rows, k_min);
        let xi = x.row(i);
        for _ in 0..gi {
            let z = partners[rng.random_range(0..partners.len())];
            let lambda: f64 = rng.random();
            let xz = x.row(z);
            for c in 0..p {
                synth[c] = xi[c] + lambda * (xz[c] - xi[c]);
            }
            out_x.push_row(&synth);
            out_y.push(minority);
        }
    }
    Ok(Resampled {
        x: out_x,
        y: out_y,
        n_synthetic: g,
        minority: Some(minority),
        warning,
    })
}
