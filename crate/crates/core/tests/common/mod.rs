//! Checks shared by the oracle tests and the acceptance target. Each returns
//! a [`Check`] so the acceptance runner can print a verdict line while the
//! ordinary tests simply assert `pass`.

#![allow(dead_code)]

use faultforge::classifiers::logistic::{penalty_weight, LogisticLoss};
use faultforge::classifiers::svm::{solve_dual, Gamma};
use faultforge::classifiers::{KernelKind, SvmParams};
use faultforge::crossval::stratified_folds;
use faultforge::evaluation::{metrics, ConfusionMatrix};
use faultforge::feature_selection::{cfs_merit, plug_in_mi, select_cfs, SelectorConfig};
use faultforge::matrix::Matrix;
use faultforge::resample::{adasyn, AdasynConfig};
use faultforge::search::{
    ga_search, grid_search, Domain, FitnessScore, GaConfig, ParamPoint, ParamSpace, ParamValue,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone)]
pub struct Check {
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(r: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(r)
}

pub fn random_matrix(r: &mut ChaCha8Rng, n: usize, p: usize) -> Matrix {
    Matrix::from_vec(n, p, (0..n * p).map(|_| normal(r)).collect())
}

// ---------------------------------------------------------------- metrics

fn rational(n: u64, d: u64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// True when `v` is the f64 nearest to `exact` (ties either way).
pub fn is_nearest_f64(v: f64, exact: &BigRational) -> bool {
    if !v.is_finite() || v < 0.0 {
        return false;
    }
    let here = match BigRational::from_float(v) {
        Some(r) => r,
        None => return false,
    };
    let err = (&here - exact).abs();
    let up = f64::from_bits(v.to_bits() + 1);
    let mut neighbours = vec![up];
    if v > 0.0 {
        neighbours.push(f64::from_bits(v.to_bits() - 1));
    }
    neighbours.into_iter().all(|u| {
        BigRational::from_float(u)
            .map(|r| (&r - exact).abs() >= err)
            .unwrap_or(true)
    })
}

/// Exact reference values: accuracy, precision, recall and F1 computed from
/// precision and recall as the harmonic mean.
pub fn exact_metrics(cm: &ConfusionMatrix) -> [BigRational; 4] {
    let total = cm.tp + cm.tn + cm.fp + cm.fn_;
    let acc = rational(cm.tp + cm.tn, total);
    let p = if cm.tp + cm.fp == 0 {
        BigRational::zero()
    } else {
        rational(cm.tp, cm.tp + cm.fp)
    };
    let r = if cm.tp + cm.fn_ == 0 {
        BigRational::zero()
    } else {
        rational(cm.tp, cm.tp + cm.fn_)
    };
    let f1 = if (&p + &r).is_zero() {
        BigRational::zero()
    } else {
        BigRational::from_integer(BigInt::from(2)) * &p * &r / (&p + &r)
    };
    [acc, p, r, f1]
}

pub fn metric_oracle(n_matrices: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let mut bad = Vec::new();
    for i in 0..n_matrices {
        let mut cm = ConfusionMatrix {
            tp: r.random_range(0..60),
            tn: r.random_range(0..60),
            fp: r.random_range(0..60),
            fn_: r.random_range(0..60),
        };
        // Include degenerate matrices with undefined precision or recall.
        match i % 10 {
            0 => cm.tp = 0,
            1 => {
                cm.tp = 0;
                cm.fp = 0;
            }
            2 => {
                cm.tp = 0;
                cm.fn_ = 0;
            }
            _ => {}
        }
        if cm.tp + cm.tn + cm.fp + cm.fn_ == 0 {
            cm.tn = 1;
        }
        let m = metrics(&cm).expect("non-empty matrix");
        let exact = exact_metrics(&cm);
        let got = [m.accuracy, m.precision, m.recall, m.f1];
        for (k, (g, e)) in got.iter().zip(&exact).enumerate() {
            if !is_nearest_f64(*g, e) {
                bad.push(format!("matrix {i} {cm:?} metric {k}: {g} vs {e}"));
            }
        }
        if m.flags.precision_undefined != (cm.tp + cm.fp == 0)
            || m.flags.recall_undefined != (cm.tp + cm.fn_ == 0)
        {
            bad.push(format!("matrix {i} flags {:?}", m.flags));
        }
        // Accuracy, precision, recall all in [0, 1] and F1 between min and max of P, R.
        let one = BigRational::one();
        if exact.iter().any(|v| v > &one) {
            bad.push(format!("matrix {i} exceeds 1"));
        }
    }
    Check::new(
        bad.is_empty(),
        if bad.is_empty() {
            format!(
                "{n_matrices} matrices, all four metrics correctly rounded from exact rationals"
            )
        } else {
            format!("{} mismatches, first: {}", bad.len(), bad[0])
        },
    )
}

// ---------------------------------------------------------------- logistic

pub fn central_difference(f: &dyn Fn(&[f64]) -> f64, w: &[f64], h: f64) -> Vec<f64> {
    (0..w.len())
        .map(|j| {
            let mut a = w.to_vec();
            let mut b = w.to_vec();
            a[j] += h;
            b[j] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Worst relative error `|g - fd| / max(|g|, |fd|)` over `problems` random
/// problems, half with an L2 term.
pub fn lr_gradient_check(problems: usize, seed: u64) -> (f64, Vec<f64>) {
    let mut r = rng(seed);
    let mut errors = Vec::new();
    for i in 0..problems {
        let n = r.random_range(5..40);
        let p = r.random_range(1..7);
        let x = random_matrix(&mut r, n, p);
        let y: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
        let w: Vec<f64> = (0..=p).map(|_| normal(&mut r)).collect();
        let l2 = if i % 2 == 0 {
            0.0
        } else {
            penalty_weight(r.random_range(0.01..10.0), n)
        };
        let loss = LogisticLoss::new(&x, &y, l2);
        let g = loss.gradient(&w);
        let fd = central_difference(&|v| loss.value(v), &w, 1e-5);
        let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
        errors.push(norm(&diff) / norm(&g).max(norm(&fd)).max(1e-12));
    }
    let worst = errors.iter().cloned().fold(0.0, f64::max);
    (worst, errors)
}

pub fn lr_gradient_oracle() -> Check {
    let (worst, errs) = lr_gradient_check(20, 7);
    Check::new(
        worst <= 1e-5,
        format!(
            "{} problems, worst relative error {worst:.2e} (limit 1e-5)",
            errs.len()
        ),
    )
}

// ---------------------------------------------------------------- svm

pub struct KktReport {
    pub worst_violation: f64,
    pub sum_alpha_y: f64,
    pub cases: [usize; 3],
}

/// Decision values `f(x_i)` of a dual solution on its own training rows,
/// recomputed from the kernel rather than taken from solver state.
pub fn decision_values(
    x: &Matrix,
    y: &[u8],
    alpha: &[f64],
    b: f64,
    kernel: faultforge::classifiers::svm::Kernel,
) -> Vec<f64> {
    (0..x.rows())
        .map(|i| {
            (0..x.rows())
                .filter(|&j| alpha[j] != 0.0)
                .map(|j| alpha[j] * sign(y[j]) * kernel.eval(x.row(j), x.row(i)))
                .sum::<f64>()
                + b
        })
        .collect()
}

pub fn sign(label: u8) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

pub fn kkt_report(x: &Matrix, y: &[u8], params: &SvmParams) -> KktReport {
    let sol = solve_dual(x, y, params).expect("solver converges");
    let f = decision_values(x, y, &sol.alpha, sol.b, sol.kernel);
    let c = params.c;
    let mut worst: f64 = 0.0;
    let mut cases = [0usize; 3];
    for i in 0..y.len() {
        let m = sign(y[i]) * f[i];
        let a = sol.alpha[i];
        let v = if a == 0.0 {
            cases[0] += 1;
            (1.0 - m).max(0.0)
        } else if a < c {
            cases[1] += 1;
            (m - 1.0).abs()
        } else {
            cases[2] += 1;
            (m - 1.0).max(0.0)
        };
        worst = worst.max(v);
    }
    let sum_alpha_y = sol.alpha.iter().zip(y).map(|(a, &l)| a * sign(l)).sum();
    KktReport {
        worst_violation: worst,
        sum_alpha_y,
        cases,
    }
}

/// Two Gaussian blobs in `p` dimensions; `gap` controls separability.
pub fn blobs(r: &mut ChaCha8Rng, n: usize, p: usize, gap: f64) -> (Matrix, Vec<u8>) {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let label = (i % 2) as u8;
        let shift = if label == 1 { gap / 2.0 } else { -gap / 2.0 };
        rows.push(
            (0..p)
                .map(|_| normal(r) * 0.5 + shift)
                .collect::<Vec<f64>>(),
        );
        y.push(label);
    }
    (Matrix::from_rows(&rows), y)
}

pub fn svm_kkt_oracle() -> Check {
    let mut r = rng(11);
    let mut lines = Vec::new();
    let mut ok = true;
    let mut seen = [0usize; 3];
    for i in 0..10 {
        let separable = i < 5;
        let (x, y) = blobs(
            &mut r,
            30 + 4 * i,
            2 + i % 3,
            if separable { 6.0 } else { 0.8 },
        );
        let params = SvmParams {
            c: if separable { 10.0 } else { 1.0 },
            kernel: if i % 2 == 0 {
                KernelKind::Linear
            } else {
                KernelKind::Rbf
            },
            gamma: Gamma::Scale,
            ..SvmParams::default()
        };
        let rep = kkt_report(&x, &y, &params);
        for k in 0..3 {
            seen[k] += rep.cases[k];
        }
        let pass = rep.worst_violation <= params.tol && rep.sum_alpha_y.abs() <= 1e-9;
        ok &= pass;
        if !pass {
            lines.push(format!(
                "problem {i}: violation {:.2e}, sum {:.2e}",
                rep.worst_violation, rep.sum_alpha_y
            ));
        }
    }
    // The 2-point dual: x = -1 (negative), x = +1 (positive), linear kernel.
    // K = [[1, -1], [-1, 1]]; with a1 = a2 = a the dual is 2a - 2a^2,
    // maximized at a = 1/2, giving w = 1 and b = 0.
    let x = Matrix::from_rows(&[[-1.0], [1.0]]);
    let y = [0u8, 1];
    let params = SvmParams {
        c: 1e3,
        kernel: KernelKind::Linear,
        ..SvmParams::default()
    };
    let sol = solve_dual(&x, &y, &params).expect("two-point dual");
    let exact = sol.alpha == vec![0.5, 0.5] && sol.b == 0.0;
    ok &= exact;
    // Every KKT case must actually be exercised somewhere in the suite.
    ok &= seen.iter().all(|&c| c > 0);
    let detail = format!(
        "10 problems (cases alpha=0/free/at C: {}/{}/{}), two-point dual alpha={:?} b={}{}",
        seen[0],
        seen[1],
        seen[2],
        sol.alpha,
        sol.b,
        if lines.is_empty() {
            String::new()
        } else {
            format!("; {}", lines.join("; "))
        }
    );
    Check::new(ok, detail)
}

// ---------------------------------------------------------------- cfs

/// Best merit over all non-empty subsets.
pub fn exhaustive_merit(x: &Matrix, y: &[u8]) -> (f64, Vec<usize>) {
    let p = x.cols();
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for mask in 1u32..(1 << p) {
        let subset: Vec<usize> = (0..p).filter(|j| mask & (1 << j) != 0).collect();
        let m = cfs_merit(x, y, &subset);
        if m > best.0 {
            best = (m, subset);
        }
    }
    best
}

/// Features driven by a few shared latent factors so redundancy matters.
pub fn correlated_problem(r: &mut ChaCha8Rng, n: usize, p: usize) -> (Matrix, Vec<u8>) {
    let factors = 3;
    let load: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..factors).map(|_| normal(r)).collect())
        .collect();
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let z: Vec<f64> = (0..factors).map(|_| normal(r)).collect();
        let row: Vec<f64> = (0..p)
            .map(|j| load[j].iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() + 0.7 * normal(r))
            .collect();
        let score = z[0] + 0.5 * z[1] + 0.8 * normal(r);
        y.push(u8::from(score > 0.0));
        rows.push(row);
    }
    (Matrix::from_rows(&rows), y)
}

pub struct CfsOracleStats {
    pub problems: usize,
    pub bound_violations: usize,
    pub within_floor: usize,
    pub worst_ratio: f64,
}

pub fn cfs_oracle_stats(problems: usize, seed: u64) -> CfsOracleStats {
    let mut r = rng(seed);
    let mut stats = CfsOracleStats {
        problems,
        bound_violations: 0,
        within_floor: 0,
        worst_ratio: f64::INFINITY,
    };
    for _ in 0..problems {
        let p = r.random_range(3..=8);
        let (x, y) = correlated_problem(&mut r, 80, p);
        let cfg = SelectorConfig::default();
        let greedy = select_cfs(&x, &y, &cfg).expect("cfs");
        let g = cfs_merit(&x, &y, &greedy.indices);
        let (e, _) = exhaustive_merit(&x, &y);
        if g > e + 1e-12 {
            stats.bound_violations += 1;
        }
        if g >= 0.9 * e {
            stats.within_floor += 1;
        }
        stats.worst_ratio = stats.worst_ratio.min(g / e);
    }
    stats
}

pub fn cfs_oracle() -> Check {
    let s = cfs_oracle_stats(25, 5);
    let frac = s.within_floor as f64 / s.problems as f64;
    Check::new(
        s.bound_violations == 0 && frac >= 0.8,
        format!(
            "{} problems, exhaustive >= greedy on all but {}, greedy >= 0.9 x exhaustive on {:.0}% (worst ratio {:.4})",
            s.problems,
            s.bound_violations,
            100.0 * frac,
            s.worst_ratio
        ),
    )
}

// ---------------------------------------------------------------- mi

/// Entropy route: `H(B) + H(C) - H(B, C)` in nats.
pub fn mi_by_entropies(table: &[[u64; 2]]) -> f64 {
    let n: u64 = table.iter().map(|r| r[0] + r[1]).sum();
    let h = |counts: &mut dyn Iterator<Item = u64>| -> f64 {
        counts
            .filter(|&c| c > 0)
            .map(|c| {
                let p = c as f64 / n as f64;
                -p * p.ln()
            })
            .sum()
    };
    let hb = h(&mut table.iter().map(|r| r[0] + r[1]));
    let hc = h(&mut (0..2).map(|c| table.iter().map(|r| r[c]).sum::<u64>()));
    let hbc = h(&mut table.iter().flat_map(|r| r.iter().copied()));
    hb + hc - hbc
}

pub fn mi_oracle() -> Check {
    let ln2 = std::f64::consts::LN_2;
    // (table, hand-computed value)
    let hand: Vec<(Vec<[u64; 2]>, f64)> = vec![
        // Feature equals label, 50/50: H(y) = ln 2.
        (vec![[5, 0], [0, 5]], ln2),
        // 3:1 split fully determined: H = -(3/4 ln 3/4 + 1/4 ln 1/4).
        (
            vec![[3, 0], [0, 1]],
            -(0.75 * 0.75f64.ln() + 0.25 * 0.25f64.ln()),
        ),
        // [[2,0],[1,1]]: 1/2 ln(4/3) + 1/4 ln(2/3) + 1/4 ln 2.
        (
            vec![[2, 0], [1, 1]],
            0.5 * (4.0f64 / 3.0).ln() + 0.25 * (2.0f64 / 3.0).ln() + 0.25 * ln2,
        ),
        // Empty bin rows contribute nothing.
        (vec![[5, 0], [0, 0], [0, 5]], ln2),
    ];
    let mut bad = Vec::new();
    for (t, want) in &hand {
        let got = plug_in_mi(t);
        if (got - want).abs() > 1e-15 {
            bad.push(format!("{t:?}: {got} vs {want}"));
        }
    }
    // Random tables against the entropy identity.
    let mut r = rng(3);
    for _ in 0..50 {
        let bins = r.random_range(1..8);
        let t: Vec<[u64; 2]> = (0..bins)
            .map(|_| [r.random_range(0..40), r.random_range(0..40)])
            .collect();
        if t.iter().all(|row| row[0] + row[1] == 0) {
            continue;
        }
        let (a, b) = (plug_in_mi(&t), mi_by_entropies(&t));
        if (a - b).abs() > 1e-12 {
            bad.push(format!("{t:?}: {a} vs entropy route {b}"));
        }
    }
    // Outer-product tables are exactly independent.
    let mut zero_checks = 0;
    for _ in 0..50 {
        let bins = r.random_range(1..8);
        let rows: Vec<u64> = (0..bins).map(|_| r.random_range(0..20)).collect();
        let cols = [r.random_range(1..20u64), r.random_range(1..20u64)];
        let t: Vec<[u64; 2]> = rows.iter().map(|&a| [a * cols[0], a * cols[1]]).collect();
        let mi = plug_in_mi(&t);
        zero_checks += 1;
        if mi != 0.0 {
            bad.push(format!("independent {t:?}: MI {mi:e}"));
        }
    }
    Check::new(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} hand tables, 50 entropy-identity tables, {zero_checks} independent tables with MI exactly 0", hand.len())
        } else {
            format!("{} failures, first: {}", bad.len(), bad[0])
        },
    )
}

// ---------------------------------------------------------------- crossval

/// Checks one plan against the stratification and partition rules; returns
/// a description of the first violation.
pub fn check_fold_plan(y: &[u8], k: usize, seed: u64) -> Result<(), String> {
    let plan = stratified_folds(y, k, seed).map_err(|e| e.to_string())?;
    let n = y.len();
    let pos_total = y.iter().filter(|&&v| v == 1).count();
    let global = pos_total as f64 / n as f64;
    let mut sizes = vec![0usize; k];
    let mut pos = vec![0usize; k];
    for (i, &f) in plan.assignments().iter().enumerate() {
        if f >= k {
            return Err(format!("row {i} in fold {f}"));
        }
        sizes[f] += 1;
        pos[f] += y[i] as usize;
    }
    let spread = |v: &[usize]| v.iter().max().unwrap() - v.iter().min().unwrap();
    if spread(&pos) > 1 {
        return Err(format!("positives per fold {pos:?}"));
    }
    if spread(&sizes) > 1 {
        return Err(format!("fold sizes {sizes:?}"));
    }
    for f in 0..k {
        let rate = pos[f] as f64 / sizes[f] as f64;
        if (rate - global).abs() > 1.0 / sizes[f] as f64 + 1e-12 {
            return Err(format!("fold {f}: rate {rate} vs global {global}"));
        }
        let (train, test) = plan.split(f).map_err(|e| e.to_string())?;
        if train.len() + test.len() != n || test.iter().any(|t| train.binary_search(t).is_ok()) {
            return Err(format!("fold {f} is not a partition"));
        }
    }
    Ok(())
}

pub fn stratification_oracle(configs: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let mut failures = Vec::new();
    let mut done = 0;
    while done < configs {
        let n = r.random_range(20..3000);
        let rate: f64 = r.random_range(0.02..0.98);
        let k = r.random_range(2..=20);
        let pos = (n as f64 * rate).round() as usize;
        if pos < k || n - pos < k {
            continue;
        }
        let mut y = vec![0u8; n];
        // Scatter positives so class order in the input is arbitrary.
        let mut placed = 0;
        while placed < pos {
            let i = r.random_range(0..n);
            if y[i] == 0 {
                y[i] = 1;
                placed += 1;
            }
        }
        if let Err(e) = check_fold_plan(&y, k, r.random()) {
            failures.push(format!("n={n} k={k} pos={pos}: {e}"));
        }
        done += 1;
    }
    Check::new(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{configs} random (n, rate, k) plans within the per-fold positive bound")
        } else {
            failures[0].clone()
        },
    )
}

// ---------------------------------------------------------------- adasyn

/// Whether `s` equals `a + lambda (b - a)` for some lambda in [0, 1].
pub fn on_segment(s: &[f64], a: &[f64], b: &[f64], tol: f64) -> bool {
    let (j, span) = a
        .iter()
        .zip(b)
        .map(|(u, v)| v - u)
        .enumerate()
        .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
        .unwrap_or((0, 0.0));
    if span.abs() < 1e-300 {
        return s.iter().zip(a).all(|(u, v)| (u - v).abs() <= tol);
    }
    let lambda = (s[j] - a[j]) / span;
    if !(-tol..=1.0 + tol).contains(&lambda) {
        return false;
    }
    s.iter()
        .zip(a.iter().zip(b))
        .all(|(si, (ai, bi))| (si - (ai + lambda * (bi - ai))).abs() <= tol)
}

pub fn check_adasyn_instance(x: &Matrix, y: &[u8], cfg: &AdasynConfig) -> Result<(), String> {
    let out = adasyn(x, y, cfg).map_err(|e| e.to_string())?;
    let again = adasyn(x, y, cfg).map_err(|e| e.to_string())?;
    if out.x.as_slice().iter().map(|v| v.to_bits()).ne(again
        .x
        .as_slice()
        .iter()
        .map(|v| v.to_bits()))
        || out.y != again.y
    {
        return Err("not deterministic".into());
    }
    let n = y.len();
    let ones = y.iter().filter(|&&v| v == 1).count();
    let (min_label, n_min, n_maj) = if ones <= n - ones {
        (1u8, ones, n - ones)
    } else {
        (0u8, n - ones, ones)
    };
    // Synthetic count follows round((maj - min) * beta); at beta = 1 the
    // classes end up exactly balanced.
    let target = (n_maj - n_min) as f64 * cfg.balance_target;
    let g = out.n_synthetic as f64;
    if (g - target).abs() > 0.5 + 1e-9 {
        return Err(format!("G = {g}, expected round({target})"));
    }
    if cfg.balance_target == 1.0 && n_min + out.n_synthetic != n_maj {
        return Err(format!(
            "full balance expected, got {} vs {n_maj}",
            n_min + out.n_synthetic
        ));
    }
    if out.y.len() != n + out.n_synthetic || out.x.rows() != out.y.len() {
        return Err("shape".into());
    }
    for i in 0..n {
        if out.x.row(i) != x.row(i) || out.y[i] != y[i] {
            return Err(format!("original row {i} changed"));
        }
    }
    let minority: Vec<usize> = (0..n).filter(|&i| y[i] == min_label).collect();
    for s in n..out.y.len() {
        if out.y[s] != min_label {
            return Err(format!("synthetic {s} has the majority label"));
        }
        let row = out.x.row(s);
        let found = minority.iter().any(|&i| {
            minority
                .iter()
                .any(|&j| on_segment(row, x.row(i), x.row(j), 1e-9))
        });
        if !found {
            return Err(format!("synthetic {s} is not on any minority segment"));
        }
    }
    Ok(())
}

pub fn adasyn_oracle(instances: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let mut failures = Vec::new();
    for i in 0..instances {
        let n_min = r.random_range(2..25);
        let n_maj = n_min + r.random_range(0..60);
        let p = r.random_range(1..6);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        let min_label = r.random_range(0..2u8);
        for k in 0..n_min + n_maj {
            let is_min = k < n_min;
            let shift = if is_min { 1.0 } else { 0.0 };
            rows.push((0..p).map(|_| normal(&mut r) + shift).collect::<Vec<f64>>());
            y.push(if is_min { min_label } else { 1 - min_label });
        }
        if n_min == n_maj {
            // Balanced input is a legal edge case; keep it.
        }
        let x = Matrix::from_rows(&rows);
        let cfg = AdasynConfig {
            k_neighbors: r.random_range(1..8),
            balance_target: if i % 2 == 0 {
                1.0
            } else {
                r.random_range(0.05..1.0)
            },
            seed: r.random(),
        };
        if let Err(e) = check_adasyn_instance(&x, &y, &cfg) {
            failures.push(format!("instance {i}: {e}"));
        }
    }
    Check::new(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{instances} instances: synthetic count, convex segments, prefix and determinism hold")
        } else {
            format!("{} failures, first: {}", failures.len(), failures[0])
        },
    )
}

// ---------------------------------------------------------------- search

pub fn int_space(dims: &[(&str, i64)]) -> ParamSpace {
    ParamSpace::new(
        dims.iter()
            .map(|(name, n)| {
                (
                    name.to_string(),
                    Domain::Choice((0..*n).map(ParamValue::Int).collect()),
                )
            })
            .collect(),
    )
    .expect("valid space")
}

pub fn coords(p: &ParamPoint) -> Vec<f64> {
    p.values()
        .iter()
        .map(|(_, v)| v.as_f64().expect("numeric"))
        .collect()
}

/// Smooth unimodal fitness peaking at `peak`.
pub fn bowl(peak: [f64; 3]) -> impl Fn(&ParamPoint) -> FitnessScore + Sync {
    move |p: &ParamPoint| {
        let c = coords(p);
        let d: f64 = c.iter().zip(&peak).map(|(a, b)| (a - b) * (a - b)).sum();
        FitnessScore::new(1.0 / (1.0 + d), 0.0)
    }
}

pub fn search_oracle() -> Check {
    let mut r = rng(13);
    let mut notes = Vec::new();
    let mut ok = true;

    // Planted argmax over random fitness tables.
    let space = int_space(&[("a", 4), ("b", 3), ("c", 5)]);
    let points = space.enumerate().expect("finite");
    for trial in 0..20 {
        let table: Vec<f64> = (0..points.len())
            .map(|_| r.random_range(0.0..0.9))
            .collect();
        let winner = r.random_range(0..points.len());
        let keys: Vec<String> = points.iter().map(|p| p.key()).collect();
        let fit = |p: &ParamPoint| {
            let i = keys
                .iter()
                .position(|k| *k == p.key())
                .expect("known point");
            FitnessScore::new(if i == winner { 0.95 } else { table[i] }, 0.0)
        };
        let res = grid_search(&space, &fit).expect("grid");
        if res.best.key() != keys[winner] {
            ok = false;
            notes.push(format!("grid trial {trial} missed the planted argmax"));
        }
    }

    // GA history is non-decreasing.
    for seed in 0..20u64 {
        let table: Vec<f64> = (0..points.len())
            .map(|_| r.random_range(0.0..1.0))
            .collect();
        let keys: Vec<String> = points.iter().map(|p| p.key()).collect();
        let fit = |p: &ParamPoint| {
            FitnessScore::new(table[keys.iter().position(|k| *k == p.key()).unwrap()], 0.0)
        };
        let cfg = GaConfig {
            seed,
            population: 8,
            generations: 10,
            ..GaConfig::default()
        };
        let res = ga_search(&space, &fit, &cfg).expect("ga");
        if res.history.windows(2).any(|w| w[0].beats(&w[1])) {
            ok = false;
            notes.push(format!("GA seed {seed} history decreased"));
        }
    }

    // GA against the grid optimum on a smooth 5x5x5 space.
    let cube = int_space(&[("a", 5), ("b", 5), ("c", 5)]);
    let mut hits = 0;
    for seed in 0..100u64 {
        let peak = [
            r.random_range(0.0..4.0),
            r.random_range(0.0..4.0),
            r.random_range(0.0..4.0),
        ];
        let fit = bowl(peak);
        let grid = grid_search(&cube, &fit).expect("grid");
        let ga = ga_search(
            &cube,
            &fit,
            &GaConfig {
                seed,
                ..GaConfig::default()
            },
        )
        .expect("ga");
        if ga.fitness.cmp_fitness(&grid.fitness).is_eq() {
            hits += 1;
        }
    }
    ok &= hits >= 95;
    notes.insert(0, format!("planted argmax 20/20 trials checked, GA history monotone on 20 seeds, GA = grid optimum on {hits}/100 seeds"));
    Check::new(ok, notes.join("; "))
}
