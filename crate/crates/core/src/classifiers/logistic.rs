//! Logistic regression, `P(Y=1|x) = 1 / (1 + exp(-(beta0 + beta . x)))`.
//!
//! The training objective is
//!
//! ```text
//! (1/n) * sum_i [ log(1 + exp(z_i)) - y_i z_i ]  +  penalty(beta) / (C n)
//! ```
//!
//! with `penalty = ||beta||^2 / 2` (L2) or `||beta||_1` (L1). The intercept
//! is never penalized. Dividing the penalty by `C n` makes `C` play the same
//! role as in liblinear (`C * sum loss + penalty`), so the usual grids of
//! `C` values carry over. L2 is solved by gradient descent with a
//! backtracking line search, L1 by proximal gradient with soft-thresholding.

use serde::{Deserialize, Serialize};

use super::{check_binary, ClassifierError};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Penalty {
    L1,
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrParams {
    pub c: f64,
    pub penalty: Penalty,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LrParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            penalty: Penalty::L2,
            tol: 1e-6,
            max_iter: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub beta0: f64,
    pub beta: Vec<f64>,
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LinearModel {
    pub fn n_features(&self) -> usize {
        self.beta.len()
    }

    pub fn linear_term(&self, row: &[f64]) -> f64 {
        self.beta0 + row.iter().zip(&self.beta).map(|(x, b)| x * b).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows()
            .map(|r| sigmoid(self.linear_term(r)))
            .collect()
    }

    /// Label 1 iff `P(Y=1|x) >= threshold`.
    pub fn predict_with_threshold(&self, x: &Matrix, threshold: f64) -> Vec<u8> {
        self.predict_proba(x)
            .into_iter()
            .map(|p| u8::from(p >= threshold))
            .collect()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<u8> {
        self.predict_with_threshold(x, 0.5)
    }
}

/// Smooth part of the objective: mean logistic loss plus an optional L2
/// term `l2 * ||beta||^2 / 2`. Parameters are packed as `[beta0, beta..]`.
#[derive(Debug, Clone, Copy)]
pub struct LogisticLoss<'a> {
    x: &'a Matrix,
    y: &'a [u8],
    l2: f64,
}

impl<'a> LogisticLoss<'a> {
    pub fn new(x: &'a Matrix, y: &'a [u8], l2: f64) -> Self {
        Self { x, y, l2 }
    }

    fn z(&self, w: &[f64], r: usize) -> f64 {
        w[0] + self
            .x
            .row(r)
            .iter()
            .zip(&w[1..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        let n = self.y.len().max(1) as f64;
        let nll: f64 = (0..self.y.len())
            .map(|r| {
                let z = self.z(w, r);
                softplus(z) - self.y[r] as f64 * z
            })
            .sum();
        nll / n + 0.5 * self.l2 * w[1..].iter().map(|b| b * b).sum::<f64>()
    }

    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let n = self.y.len().max(1) as f64;
        let mut g = vec![0.0; w.len()];
        for r in 0..self.y.len() {
            let resid = sigmoid(self.z(w, r)) - self.y[r] as f64;
            g[0] += resid;
            for (gj, xj) in g[1..].iter_mut().zip(self.x.row(r)) {
                *gj += resid * xj;
            }
        }
        for v in g.iter_mut() {
            *v /= n;
        }
        for (gj, b) in g[1..].iter_mut().zip(&w[1..]) {
            *gj += self.l2 * b;
        }
        g
    }
}

fn l1_norm(w: &[f64]) -> f64 {
    w[1..].iter().map(|b| b.abs()).sum()
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

const MAX_STEP: f64 = 1e6;
const MIN_STEP: f64 = 1e-20;

fn gradient_descent(
    loss: &LogisticLoss,
    w: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<usize, ClassifierError> {
    let mut step: f64 = 1.0;
    let mut f = loss.value(w);
    let mut trial = vec![0.0; w.len()];
    for iter in 1..=max_iter {
        let g = loss.gradient(w);
        let gg: f64 = g.iter().map(|v| v * v).sum();
        if gg == 0.0 {
            return Ok(iter);
        }
        step = (step * 2.0).min(MAX_STEP);
        let f_new = loop {
            for ((t, wi), gi) in trial.iter_mut().zip(w.iter()).zip(&g) {
                *t = wi - step * gi;
            }
            let f_trial = loss.value(&trial);
            if f_trial <= f - 0.5 * step * gg {
                break Some(f_trial);
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some(f_new) = f_new else {
            // No descent possible at machine precision.
            return Ok(iter);
        };
        w.copy_from_slice(&trial);
        let decrease = f - f_new;
        f = f_new;
        if decrease < tol {
            return Ok(iter);
        }
    }
    Err(ClassifierError::NoConvergence {
        objective: f,
        iterations: max_iter,
    })
}

fn proximal_gradient(
    loss: &LogisticLoss,
    lambda: f64,
    w: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<usize, ClassifierError> {
    let mut step: f64 = 1.0;
    let mut smooth = loss.value(w);
    let mut total = smooth + lambda * l1_norm(w);
    let mut trial = vec![0.0; w.len()];
    for iter in 1..=max_iter {
        let g = loss.gradient(w);
        step = (step * 2.0).min(MAX_STEP);
        let accepted = loop {
            trial[0] = w[0] - step * g[0];
            for j in 1..w.len() {
                trial[j] = soft_threshold(w[j] - step * g[j], step * lambda);
            }
            let s_trial = loss.value(&trial);
            let mut lin = 0.0;
            let mut quad = 0.0;
            for j in 0..w.len() {
                let d = trial[j] - w[j];
                lin += g[j] * d;
                quad += d * d;
            }
            if s_trial <= smooth + lin + quad / (2.0 * step) + 1e-15 * smooth.abs() {
                break Some(s_trial);
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some(s_new) = accepted else {
            return Ok(iter);
        };
        let unchanged = trial.iter().zip(w.iter()).all(|(a, b)| a == b);
        w.copy_from_slice(&trial);
        smooth = s_new;
        let new_total = smooth + lambda * l1_norm(w);
        let decrease = total - new_total;
        total = new_total;
        if unchanged || decrease.abs() < tol {
            return Ok(iter);
        }
    }
    Err(ClassifierError::NoConvergence {
        objective: total,
        iterations: max_iter,
    })
}

/// Penalty weight per unit of mean loss, `1 / (C n)`.
pub fn penalty_weight(c: f64, n: usize) -> f64 {
    1.0 / (c * n.max(1) as f64)
}

/// Full objective (smooth part plus penalty) at `model`.
pub fn objective(x: &Matrix, y: &[u8], model: &LinearModel, params: &LrParams) -> f64 {
    let lambda = penalty_weight(params.c, y.len());
    let mut w = vec![model.beta0];
    w.extend_from_slice(&model.beta);
    match params.penalty {
        Penalty::L2 => LogisticLoss::new(x, y, lambda).value(&w),
        Penalty::L1 => LogisticLoss::new(x, y, 0.0).value(&w) + lambda * l1_norm(&w),
    }
}

pub fn train_lr(x: &Matrix, y: &[u8], params: &LrParams) -> Result<LinearModel, ClassifierError> {
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(ClassifierError::InvalidParams(format!(
            "C must be positive, got {}",
            params.c
        )));
    }
    if x.rows() != y.len() {
        return Err(ClassifierError::DimensionMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    check_binary(y)?;
    let lambda = penalty_weight(params.c, y.len());
    let mut w = vec![0.0; x.cols() + 1];
    match params.penalty {
        Penalty::L2 => {
            let loss = LogisticLoss::new(x, y, lambda);
            gradient_descent(&loss, &mut w, params.tol, params.max_iter)?;
        }
        Penalty::L1 => {
            let loss = LogisticLoss::new(x, y, 0.0);
            proximal_gradient(&loss, lambda, &mut w, params.tol, params.max_iter)?;
        }
    }
    Ok(LinearModel {
        beta0: w[0],
        beta: w[1..].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_at_zero_is_half() {
        assert_eq!(sigmoid(0.0), 0.5);
        let m = LinearModel {
            beta0: 0.0,
            beta: vec![1.0],
        };
        assert_eq!(m.predict(&Matrix::from_rows(&[[0.0]])), vec![1]);
    }

    #[test]
    fn large_negative_intercept_predicts_zero() {
        let m = LinearModel {
            beta0: -50.0,
            beta: vec![0.0, 0.0],
        };
        let x = Matrix::from_rows(&[[1.0, 1.0], [0.0, 0.3]]);
        assert_eq!(m.predict(&x), vec![0, 0]);
    }

    #[test]
    fn balanced_zero_features_give_zero_model() {
        let x = Matrix::zeros(6, 3);
        let y = vec![0, 1, 0, 1, 0, 1];
        let m = train_lr(&x, &y, &LrParams::default()).unwrap();
        assert!(m.beta0.abs() < 1e-9);
        assert!(m.beta.iter().all(|b| *b == 0.0));
    }

    #[test]
    fn learns_a_separating_direction() {
        let x = Matrix::from_rows(&[[0.0], [0.1], [0.2], [0.8], [0.9], [1.0]]);
        let y = vec![0, 0, 0, 1, 1, 1];
        for penalty in [Penalty::L1, Penalty::L2] {
            let p = LrParams {
                c: 10.0,
                penalty,
                ..Default::default()
            };
            let m = train_lr(&x, &y, &p).unwrap();
            assert!(m.beta[0] > 0.0);
            assert_eq!(m.predict(&x), y);
        }
    }

    #[test]
    fn rejects_non_positive_c() {
        let x = Matrix::zeros(2, 1);
        let p = LrParams {
            c: 0.0,
            ..Default::default()
        };
        assert!(train_lr(&x, &[0, 1], &p).is_err());
    }

    #[test]
    fn iteration_cap_reports_objective() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [0.2], [0.9]]);
        let p = LrParams {
            c: 1e6,
            tol: 0.0,
            max_iter: 3,
            ..Default::default()
        };
        match train_lr(&x, &[0, 1, 0, 1], &p) {
            Err(ClassifierError::NoConvergence {
                iterations,
                objective,
            }) => {
                assert_eq!(iterations, 3);
                assert!(objective.is_finite());
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
