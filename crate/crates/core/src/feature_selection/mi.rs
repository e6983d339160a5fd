//! Plug-in mutual information between an equal-frequency-binned feature and
//! the binary label.

use super::{
    check_shape, check_target, FeatureSubset, SelectionError, SelectorConfig, SelectorKind,
};
use crate::matrix::Matrix;

/// Assigns each value a bin in `0..bins` by rank. A run of tied values
/// shares the bin of its middle rank, so the binning depends only on the
/// order of the values.
pub fn equal_frequency_bins(values: &[f64], bins: usize) -> Vec<usize> {
    let n = values.len();
    let bins = bins.max(1);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0; n];
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        // floor(mid * bins / n) with mid = (start + end) / 2
        let bin = ((start + end) * bins / (2 * n)).min(bins - 1);
        for &i in &order[start..=end] {
            out[i] = bin;
        }
        start = end + 1;
    }
    out
}

/// `sum p(b,c) ln(p(b,c) / (p(b) p(c)))` in nats from a table of counts
/// `table[b][c]`.
pub fn plug_in_mi(table: &[[u64; 2]]) -> f64 {
    let n: u64 = table.iter().map(|r| r[0] + r[1]).sum();
    if n == 0 {
        return 0.0;
    }
    let col = [
        table.iter().map(|r| r[0]).sum::<u64>(),
        table.iter().map(|r| r[1]).sum::<u64>(),
    ];
    let nf = n as f64;
    let mut mi = 0.0;
    for row in table {
        let nb = row[0] + row[1];
        for c in 0..2 {
            let nbc = row[c];
            if nbc == 0 {
                continue;
            }
            let ratio = (nbc as f64 * nf) / (nb as f64 * col[c] as f64);
            mi += nbc as f64 / nf * ratio.ln();
        }
    }
    mi
}

/// MI of one feature column with `y` after binning into `bins` bins.
pub fn mutual_information(values: &[f64], y: &[u8], bins: usize) -> f64 {
    let assignment = equal_frequency_bins(values, bins);
    let mut table = vec![[0u64; 2]; bins.max(1)];
    for (b, &label) in assignment.iter().zip(y) {
        table[*b][label as usize] += 1;
    }
    plug_in_mi(&table)
}

/// Bin count used for `n` rows: `min(mi_bins, floor(sqrt(n)))`, at least 1.
pub fn bin_count(mi_bins: usize, n: usize) -> usize {
    let root = (n as f64).sqrt().floor() as usize;
    mi_bins.min(root).max(1)
}

/// Top `target_count` features by MI; ties go to the lower index.
pub fn select_mi(
    x: &Matrix,
    y: &[u8],
    cfg: &SelectorConfig,
) -> Result<FeatureSubset, SelectionError> {
    check_shape(x, y)?;
    check_target(cfg, x.cols())?;
    if cfg.mi_bins == 0 {
        return Err(SelectionError::InvalidConfig(
            "mi_bins must be positive".into(),
        ));
    }
    let bins = bin_count(cfg.mi_bins, x.rows());
    let mut scored: Vec<(usize, f64)> = (0..x.cols())
        .map(|j| (j, mutual_information(&x.column(j), y, bins)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(cfg.target_count);
    Ok(FeatureSubset::from_pairs(
        scored,
        SelectorKind::Mi,
        Vec::new(),
    ))
}
