//! Independent-route checks of the numerical cores.

mod common;

use common::*;
use faultforge::classifiers::forest::{bootstrap_counts, train_rf, DecisionTree, Node};
use faultforge::classifiers::logistic::{objective, penalty_weight, train_lr, LogisticLoss};
use faultforge::classifiers::svm::{train_svm, Gamma};
use faultforge::classifiers::{KernelKind, LrParams, Penalty, RfParams, SvmParams};
use faultforge::matrix::Matrix;
use faultforge::search::{random_search, FitnessScore, ParamPoint};
use rand::Rng;

#[test]
fn metric_values_are_correctly_rounded_rationals() {
    let c = metric_oracle(50, 1);
    assert!(c.pass, "{}", c.detail);
}

#[test]
fn logistic_gradient_matches_finite_differences() {
    let c = lr_gradient_oracle();
    assert!(c.pass, "{}", c.detail);
}

/// Newton's method on the L2 objective as a second solver; both must land on
/// the same minimizer.
fn newton_l2(x: &Matrix, y: &[u8], lambda: f64) -> Vec<f64> {
    let p = x.cols() + 1;
    let mut w = vec![0.0; p];
    let loss = LogisticLoss::new(x, y, lambda);
    for _ in 0..50 {
        let g = loss.gradient(&w);
        let n = y.len() as f64;
        let mut h = vec![vec![0.0; p]; p];
        for r in 0..y.len() {
            let mut z = w[0];
            for j in 1..p {
                z += w[j] * x.get(r, j - 1);
            }
            let s = 1.0 / (1.0 + (-z).exp());
            let wgt = s * (1.0 - s) / n;
            let row: Vec<f64> = std::iter::once(1.0)
                .chain(x.row(r).iter().copied())
                .collect();
            for a in 0..p {
                for b in 0..p {
                    h[a][b] += wgt * row[a] * row[b];
                }
            }
        }
        for a in 1..p {
            h[a][a] += lambda;
        }
        // Gaussian elimination on [H | g].
        let mut m: Vec<Vec<f64>> = h
            .iter()
            .zip(&g)
            .map(|(r, gi)| r.iter().copied().chain([*gi]).collect())
            .collect();
        for col in 0..p {
            let piv = (col..p)
                .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
                .unwrap();
            m.swap(col, piv);
            for r in 0..p {
                if r != col {
                    let f = m[r][col] / m[col][col];
                    for c in col..=p {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
        for a in 0..p {
            w[a] -= m[a][p] / m[a][a];
        }
    }
    w
}

#[test]
fn l2_solver_agrees_with_newton() {
    let mut r = rng(21);
    for _ in 0..10 {
        let n = r.random_range(20..60);
        let p = r.random_range(1..5);
        let x = random_matrix(&mut r, n, p);
        let y: Vec<u8> = (0..n)
            .map(|i| u8::from(x.get(i, 0) + 0.8 * normal(&mut r) > 0.0))
            .collect();
        if y.iter().all(|&v| v == y[0]) {
            continue;
        }
        let params = LrParams {
            c: 1.0,
            penalty: Penalty::L2,
            tol: 1e-12,
            max_iter: 20000,
        };
        let m = train_lr(&x, &y, &params).unwrap();
        let w = newton_l2(&x, &y, penalty_weight(params.c, n));
        let ours: Vec<f64> = std::iter::once(m.beta0)
            .chain(m.beta.iter().copied())
            .collect();
        for (a, b) in ours.iter().zip(&w) {
            assert!((a - b).abs() < 1e-4, "{ours:?} vs newton {w:?}");
        }
    }
}

#[test]
fn l1_zero_coefficients_satisfy_subgradient_condition() {
    let mut r = rng(22);
    let mut zeros_seen = 0;
    for _ in 0..10 {
        let n = 80;
        let p = 6;
        let x = random_matrix(&mut r, n, p);
        let y: Vec<u8> = (0..n)
            .map(|i| u8::from(x.get(i, 0) - 0.5 * x.get(i, 1) + normal(&mut r) > 0.0))
            .collect();
        let params = LrParams {
            c: 0.05,
            penalty: Penalty::L1,
            tol: 1e-12,
            max_iter: 50000,
        };
        let m = train_lr(&x, &y, &params).unwrap();
        let mut w = vec![m.beta0];
        w.extend_from_slice(&m.beta);
        let g = LogisticLoss::new(&x, &y, 0.0).gradient(&w);
        let lambda = penalty_weight(params.c, n);
        for j in 0..p {
            if m.beta[j] == 0.0 {
                zeros_seen += 1;
                assert!(
                    g[j + 1].abs() <= lambda + 1e-6,
                    "coef {j}: |grad| {} > {lambda}",
                    g[j + 1].abs()
                );
            } else {
                // Nonzero coefficients are stationary: grad = -lambda sign(beta).
                assert!((g[j + 1] + lambda * m.beta[j].signum()).abs() < 1e-5);
            }
        }
        // The intercept is unpenalized.
        assert!(g[0].abs() < 1e-5);
        let obj = objective(&x, &y, &m, &params);
        assert!(obj.is_finite());
    }
    assert!(zeros_seen > 0, "penalty never zeroed a coefficient");
}

#[test]
fn svm_kkt_suite() {
    let c = svm_kkt_oracle();
    assert!(c.pass, "{}", c.detail);
}

#[test]
fn svm_two_point_problem_has_unit_margin() {
    let x = Matrix::from_rows(&[[-1.0], [1.0]]);
    let m = train_svm(
        &x,
        &[0, 1],
        &SvmParams {
            c: 1e3,
            kernel: KernelKind::Linear,
            ..SvmParams::default()
        },
    )
    .unwrap();
    assert_eq!(m.decision_row(&[1.0]), 1.0);
    assert_eq!(m.decision_row(&[-1.0]), -1.0);
    assert_eq!(m.decision_row(&[0.0]), 0.0);
    assert_eq!(m.alphas().len(), 2);
    assert_eq!(m.predict(&x), vec![0, 1]);
}

#[test]
fn svm_duplicated_rows_keep_the_decision_function() {
    let mut r = rng(31);
    for kernel in [KernelKind::Linear, KernelKind::Rbf] {
        let (x, y) = blobs(&mut r, 40, 2, 1.5);
        let mut rows: Vec<Vec<f64>> = x.iter_rows().map(<[f64]>::to_vec).collect();
        rows.extend(x.iter_rows().map(<[f64]>::to_vec));
        let x2 = Matrix::from_rows(&rows);
        let y2: Vec<u8> = y.iter().chain(&y).copied().collect();
        // Doubling every row doubles the dual's loss terms, which halving C
        // exactly compensates; gamma is pinned so both fits share a kernel.
        let base = SvmParams {
            c: 2.0,
            kernel,
            gamma: Gamma::Value(0.5),
            tol: 1e-6,
            ..SvmParams::default()
        };
        let m1 = train_svm(&x, &y, &base).unwrap();
        let m2 = train_svm(
            &x2,
            &y2,
            &SvmParams {
                c: 1.0,
                ..base.clone()
            },
        )
        .unwrap();
        for i in -10..=10 {
            for j in -10..=10 {
                let q = [i as f64 * 0.3, j as f64 * 0.3];
                let (a, b) = (m1.decision_row(&q), m2.decision_row(&q));
                assert!(
                    (a - b).abs() < 1e-3 * (1.0 + a.abs()),
                    "{kernel:?} at {q:?}: {a} vs {b}"
                );
            }
        }
    }
}

#[test]
fn cfs_greedy_against_exhaustive_search() {
    let c = cfs_oracle();
    println!("{}", c.detail);
    assert!(c.pass, "{}", c.detail);
}

#[test]
fn mi_tables() {
    let c = mi_oracle();
    assert!(c.pass, "{}", c.detail);
}

#[test]
fn search_suite() {
    let c = search_oracle();
    assert!(c.pass, "{}", c.detail);
}

#[test]
fn random_search_hits_a_spike_at_the_binomial_rate() {
    // One good point among 60; 20 samples with replacement find it with
    // probability 1 - (59/60)^20, about 0.286.
    let space = int_space(&[("a", 6), ("b", 10)]);
    let fit = |p: &ParamPoint| {
        let c = coords(p);
        FitnessScore::new(if c == [2.0, 7.0] { 1.0 } else { 0.0 }, 0.0)
    };
    let trials = 400;
    let hits = (0..trials)
        .filter(|&s| {
            random_search(&space, &fit, 20, s as u64)
                .unwrap()
                .fitness
                .accuracy
                == 1.0
        })
        .count();
    let p = 1.0 - (59.0f64 / 60.0).powi(20);
    let sd = (trials as f64 * p * (1.0 - p)).sqrt();
    let expected = trials as f64 * p;
    assert!(
        (hits as f64 - expected).abs() < 4.0 * sd,
        "{hits} hits, expected {expected:.1} +- {sd:.1}"
    );
}

#[test]
fn gini_split_on_ten_points() {
    // Five negatives below 4.5, five positives above: the only pure split.
    let x = Matrix::from_rows(&(0..10).map(|i| [i as f64]).collect::<Vec<_>>());
    let y: Vec<u8> = (0..10).map(|i| u8::from(i >= 5)).collect();
    let tree_params = RfParams {
        n_estimators: 1,
        max_depth: Some(1),
        ..RfParams::default()
    };
    // Weighted Gini of every threshold, computed directly.
    let gini = |l: &[u8]| {
        let n = l.len() as f64;
        if n == 0.0 {
            return 0.0;
        }
        let p = l.iter().filter(|&&v| v == 1).count() as f64 / n;
        1.0 - p * p - (1.0 - p) * (1.0 - p)
    };
    let mut best = (f64::INFINITY, 0.0);
    for t in 0..9 {
        let thr = t as f64 + 0.5;
        let (l, r): (Vec<u8>, Vec<u8>) = (y[..=t].to_vec(), y[t + 1..].to_vec());
        let w = (l.len() as f64 * gini(&l) + r.len() as f64 * gini(&r)) / 10.0;
        if w < best.0 {
            best = (w, thr);
        }
    }
    assert_eq!(best, (0.0, 4.5));
    assert_eq!(gini(&y), 0.5);
    // Each tree sees a bootstrap sample, so its pure split sits midway
    // between the largest negative and smallest positive it drew.
    let params = RfParams {
        n_estimators: 25,
        seed: 9,
        ..tree_params
    };
    let forest = train_rf(&x, &y, &params).unwrap();
    for (t, tree) in forest.trees().iter().enumerate() {
        let counts = bootstrap_counts(10, params.seed, t);
        let neg = (0..5).rev().find(|&i| counts[i] > 0);
        let pos = (5..10).find(|&i| counts[i] > 0);
        match (tree.nodes().first(), neg, pos) {
            (Some(Node::Split { threshold, .. }), Some(a), Some(b)) => {
                assert_eq!(*threshold, (a + b) as f64 / 2.0, "tree {t}");
            }
            (Some(Node::Leaf { .. }), None, _) | (Some(Node::Leaf { .. }), _, None) => {}
            other => panic!("tree {t}: {other:?}"),
        }
    }
    let _: Option<&DecisionTree> = forest.trees().first();
}
