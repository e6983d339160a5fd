//! Correlation-based feature selection with Hall's merit
//!
//! ```text
//! merit(S) = k * mean|r_cf| / sqrt(k + k (k - 1) * mean|r_ff|)
//! ```
//!
//! searched greedily forward from the single best feature.

use super::{
    check_shape, FeatureSubset, SelectionError, SelectionWarning, SelectorConfig, SelectorKind,
};
use crate::matrix::Matrix;

/// Pearson correlation; 0 when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (da, db) = (a[i] - ma, b[i] - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// Merit from the summed `|r_cf|` over `k` features and the summed `|r_ff|`
/// over their unordered pairs.
fn merit_from_sums(k: usize, sum_cf: f64, sum_ff_pairs: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    sum_cf / (k as f64 + 2.0 * sum_ff_pairs).sqrt()
}

/// Merit of `subset` computed directly from `x` and `y`.
pub fn cfs_merit(x: &Matrix, y: &[u8], subset: &[usize]) -> f64 {
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let cols: Vec<Vec<f64>> = subset.iter().map(|&j| x.column(j)).collect();
    let sum_cf: f64 = cols.iter().map(|c| pearson(c, &yf).abs()).sum();
    let mut sum_ff = 0.0;
    for a in 0..cols.len() {
        for b in a + 1..cols.len() {
            sum_ff += pearson(&cols[a], &cols[b]).abs();
        }
    }
    merit_from_sums(subset.len(), sum_cf, sum_ff)
}

/// Greedy forward search; stops after `cfs_patience` consecutive expansions
/// that fail to beat the best merit seen, and returns the best prefix.
/// Scores are `|r_cf|` of the retained features.
pub fn select_cfs(
    x: &Matrix,
    y: &[u8],
    cfg: &SelectorConfig,
) -> Result<FeatureSubset, SelectionError> {
    check_shape(x, y)?;
    if x.rows() < 3 {
        return Err(SelectionError::TooSmall {
            method: SelectorKind::Cfs,
            what: "rows",
            needed: 3,
            got: x.rows(),
        });
    }
    if cfg.cfs_patience == 0 {
        return Err(SelectionError::InvalidConfig(
            "cfs_patience must be positive".into(),
        ));
    }
    let p = x.cols();
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let cols: Vec<Vec<f64>> = (0..p).map(|j| x.column(j)).collect();
    let mut warnings = Vec::new();
    let mut candidates = Vec::new();
    for (j, c) in cols.iter().enumerate() {
        if c.iter().all(|v| *v == c[0]) {
            warnings.push(SelectionWarning::ConstantFeatureExcluded(j));
        } else {
            candidates.push(j);
        }
    }
    if candidates.is_empty() {
        return Err(SelectionError::NoCandidates);
    }
    let r_cf: Vec<f64> = cols.iter().map(|c| pearson(c, &yf).abs()).collect();
    // Lazily filled |r_ff| cache.
    let mut r_ff = vec![f64::NAN; p * p];
    let mut ff = |a: usize, b: usize| {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if r_ff[lo * p + hi].is_nan() {
            r_ff[lo * p + hi] = pearson(&cols[lo], &cols[hi]).abs();
        }
        r_ff[lo * p + hi]
    };

    let mut chosen: Vec<usize> = Vec::new();
    let (mut sum_cf, mut sum_ff) = (0.0, 0.0);
    let mut best_merit = f64::NEG_INFINITY;
    let mut best_len = 0;
    let mut stale = 0;
    while !candidates.is_empty() && stale < cfg.cfs_patience {
        let k = chosen.len() + 1;
        let mut pick: Option<(usize, f64, f64)> = None;
        for (pos, &j) in candidates.iter().enumerate() {
            let add_ff: f64 = chosen.iter().map(|&s| ff(s, j)).sum();
            let m = merit_from_sums(k, sum_cf + r_cf[j], sum_ff + add_ff);
            if pick.is_none_or(|(_, best, _)| m > best) {
                pick = Some((pos, m, add_ff));
            }
        }
        let (pos, merit, add_ff) = pick.expect("candidates non-empty");
        let j = candidates.remove(pos);
        chosen.push(j);
        sum_cf += r_cf[j];
        sum_ff += add_ff;
        if merit > best_merit {
            best_merit = merit;
            best_len = chosen.len();
            stale = 0;
        } else {
            stale += 1;
        }
    }
    chosen.truncate(best_len);
    let pairs = chosen.iter().map(|&j| (j, r_cf[j])).collect();
    Ok(FeatureSubset::from_pairs(
        pairs,
        SelectorKind::Cfs,
        warnings,
    ))
}
