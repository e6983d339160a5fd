//! Soft-margin support vector machine trained with SMO.
//!
//! The dual
//!
//! ```text
//! min_a  1/2 a'Qa - e'a    s.t.  0 <= a_i <= C,  y'a = 0,   Q_ij = y_i y_j k(x_i, x_j)
//! ```
//!
//! is solved by updating two multipliers at a time. The pair is the
//! maximal violator `i` together with the `j` giving the largest
//! second-order decrease of the objective. Iteration stops once the
//! largest KKT violation `m(a) - M(a)` is at most `tol`.

use serde::{Deserialize, Serialize};

use super::{check_binary, ClassifierError};
use crate::matrix::{dot, sq_dist, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gamma {
    /// `1 / (p * Var(X))` over all cells of the training matrix.
    Scale,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(a, b),
            Kernel::Rbf { gamma } => (-gamma * sq_dist(a, b)).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub kernel: KernelKind,
    pub gamma: Gamma,
    pub tol: f64,
    /// Iteration budget in passes; one pass is `PASS_LENGTH * n` pair updates.
    pub max_passes: usize,
}

/// Pair updates per training row in one pass of the iteration budget.
pub const PASS_LENGTH: usize = 100;

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            kernel: KernelKind::Rbf,
            gamma: Gamma::Scale,
            tol: 1e-3,
            max_passes: 10,
        }
    }
}

/// Resolves `gamma = "scale"` against a training matrix.
pub fn resolve_gamma(gamma: Gamma, x: &Matrix) -> f64 {
    match gamma {
        Gamma::Value(g) => g,
        Gamma::Scale => {
            let cells = x.as_slice();
            if cells.is_empty() {
                return 1.0;
            }
            let n = cells.len() as f64;
            let mean = cells.iter().sum::<f64>() / n;
            let var = cells.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            if var > 0.0 {
                1.0 / (x.cols() as f64 * var)
            } else {
                1.0
            }
        }
    }
}

impl SvmParams {
    pub fn resolved_kernel(&self, x: &Matrix) -> Result<Kernel, ClassifierError> {
        match self.kernel {
            KernelKind::Linear => Ok(Kernel::Linear),
            KernelKind::Rbf => {
                let gamma = resolve_gamma(self.gamma, x);
                if gamma > 0.0 && gamma.is_finite() {
                    Ok(Kernel::Rbf { gamma })
                } else {
                    Err(ClassifierError::InvalidParams(format!(
                        "gamma must be positive, got {gamma}"
                    )))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    support_vectors: Matrix,
    alphas: Vec<f64>,
    /// +1 / -1 label of each support vector.
    signs: Vec<f64>,
    b: f64,
    kernel: Kernel,
    c: f64,
}

impl SvmModel {
    pub fn new(
        support_vectors: Matrix,
        alphas: Vec<f64>,
        signs: Vec<f64>,
        b: f64,
        kernel: Kernel,
        c: f64,
    ) -> Result<Self, ClassifierError> {
        if support_vectors.rows() == 0 {
            return Err(ClassifierError::EmptySupport);
        }
        if alphas.len() != support_vectors.rows() || signs.len() != alphas.len() {
            return Err(ClassifierError::DimensionMismatch {
                expected: support_vectors.rows(),
                got: alphas.len(),
            });
        }
        if alphas.iter().any(|&a| !(0.0..=c).contains(&a)) {
            return Err(ClassifierError::InvalidParams(
                "dual weights must lie in [0, C]".into(),
            ));
        }
        Ok(Self {
            support_vectors,
            alphas,
            signs,
            b,
            kernel,
            c,
        })
    }

    pub fn support_vectors(&self) -> &Matrix {
        &self.support_vectors
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn bias(&self) -> f64 {
        self.b
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn n_features(&self) -> usize {
        self.support_vectors.cols()
    }

    /// Primal weight vector `w = sum a_i y_i x_i`; linear kernel only.
    pub fn linear_weights(&self) -> Option<Vec<f64>> {
        if self.kernel != Kernel::Linear {
            return None;
        }
        let mut w = vec![0.0; self.n_features()];
        for (i, (a, s)) in self.alphas.iter().zip(&self.signs).enumerate() {
            for (wj, xj) in w.iter_mut().zip(self.support_vectors.row(i)) {
                *wj += a * s * xj;
            }
        }
        Some(w)
    }

    pub fn decision_row(&self, row: &[f64]) -> f64 {
        let mut f = self.b;
        for (i, (a, s)) in self.alphas.iter().zip(&self.signs).enumerate() {
            f += a * s * self.kernel.eval(self.support_vectors.row(i), row);
        }
        f
    }

    pub fn decision_function(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.decision_row(r)).collect()
    }

    /// Label 1 when the decision value is `>= 0`.
    pub fn predict(&self, x: &Matrix) -> Vec<u8> {
        self.decision_function(x)
            .into_iter()
            .map(|f| u8::from(f >= 0.0))
            .collect()
    }
}

/// Raw dual solution over all training rows.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// Decision function is `sum a_i y_i k(x_i, x) + b`.
    pub b: f64,
    pub iterations: usize,
    pub kernel: Kernel,
}

const TAU: f64 = 1e-12;
const CACHE_BYTES: usize = 256 << 20;

struct KernelCache<'a> {
    x: &'a Matrix,
    kernel: Kernel,
    norms: Vec<f64>,
    rows: Vec<Option<Vec<f64>>>,
    last_used: Vec<u64>,
    clock: u64,
    cached: usize,
    capacity: usize,
}

impl<'a> KernelCache<'a> {
    fn new(x: &'a Matrix, kernel: Kernel) -> Self {
        let n = x.rows();
        let norms = x.iter_rows().map(|r| dot(r, r)).collect();
        Self {
            x,
            kernel,
            norms,
            rows: vec![None; n],
            last_used: vec![0; n],
            clock: 0,
            cached: 0,
            capacity: (CACHE_BYTES / (8 * n.max(1))).max(2),
        }
    }

    fn compute(&self, i: usize) -> Vec<f64> {
        let xi = self.x.row(i);
        match self.kernel {
            Kernel::Linear => self.x.iter_rows().map(|r| dot(xi, r)).collect(),
            Kernel::Rbf { gamma } => self
                .x
                .iter_rows()
                .zip(&self.norms)
                .map(|(r, nr)| {
                    let d2 = (self.norms[i] + nr - 2.0 * dot(xi, r)).max(0.0);
                    (-gamma * d2).exp()
                })
                .collect(),
        }
    }

    /// Makes row `i` resident; `pin` is never evicted by this call.
    fn ensure(&mut self, i: usize, pin: usize) {
        self.clock += 1;
        self.last_used[i] = self.clock;
        if self.rows[i].is_some() {
            return;
        }
        if self.cached >= self.capacity {
            let victim = (0..self.rows.len())
                .filter(|&t| t != i && t != pin && self.rows[t].is_some())
                .min_by_key(|&t| self.last_used[t]);
            if let Some(v) = victim {
                self.rows[v] = None;
                self.cached -= 1;
            }
        }
        self.rows[i] = Some(self.compute(i));
        self.cached += 1;
    }

    fn row(&self, i: usize) -> &[f64] {
        self.rows[i]
            .as_deref()
            .expect("row made resident before use")
    }
}

/// Runs SMO and returns the multipliers for every training row.
pub fn solve_dual(
    x: &Matrix,
    y: &[u8],
    params: &SvmParams,
) -> Result<DualSolution, ClassifierError> {
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
    if !(y.contains(&0) && y.contains(&1)) {
        return Err(ClassifierError::SingleClass);
    }
    let kernel = params.resolved_kernel(x)?;
    let n = y.len();
    let c = params.c;
    let s: Vec<f64> = y.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();
    let diag: Vec<f64> = (0..n).map(|i| kernel.eval(x.row(i), x.row(i))).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut cache = KernelCache::new(x, kernel);
    let max_iter = params
        .max_passes
        .max(1)
        .saturating_mul(PASS_LENGTH)
        .saturating_mul(n.max(100));

    let mut iterations = 0usize;
    loop {
        // Maximal violator in I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            let v = -s[t] * grad[t];
            let in_up = if s[t] > 0.0 {
                alpha[t] < c
            } else {
                alpha[t] > 0.0
            };
            if in_up && v >= gmax {
                gmax = v;
                i_sel = t;
            }
        }
        if i_sel == usize::MAX {
            break;
        }
        let i = i_sel;
        cache.ensure(i, i);
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut best_obj = f64::INFINITY;
        {
            let ki = cache.row(i);
            for t in 0..n {
                let in_low = if s[t] > 0.0 {
                    alpha[t] > 0.0
                } else {
                    alpha[t] < c
                };
                if !in_low {
                    continue;
                }
                let v = s[t] * grad[t];
                if v >= gmax2 {
                    gmax2 = v;
                }
                let grad_diff = gmax + v;
                if grad_diff > 0.0 {
                    let quad = diag[i] + diag[t] - 2.0 * ki[t];
                    let quad = if quad > 0.0 { quad } else { TAU };
                    let obj = -(grad_diff * grad_diff) / quad;
                    if obj <= best_obj {
                        best_obj = obj;
                        j_sel = t;
                    }
                }
            }
        }
        if gmax + gmax2 <= params.tol || j_sel == usize::MAX {
            break;
        }
        if iterations >= max_iter {
            // Rows outside the [M, m] band by more than tol.
            let violations = (0..n)
                .filter(|&t| {
                    let v = -s[t] * grad[t];
                    let in_up = if s[t] > 0.0 {
                        alpha[t] < c
                    } else {
                        alpha[t] > 0.0
                    };
                    let in_low = if s[t] > 0.0 {
                        alpha[t] > 0.0
                    } else {
                        alpha[t] < c
                    };
                    (in_up && v - (-gmax2) > params.tol) || (in_low && gmax - v > params.tol)
                })
                .count();
            return Err(ClassifierError::SvmNoConvergence {
                violations,
                gap: gmax + gmax2,
            });
        }
        iterations += 1;
        let j = j_sel;
        cache.ensure(j, i);

        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        let kij = cache.row(i)[j];
        if s[i] != s[j] {
            let quad = diag[i] + diag[j] - 2.0 * kij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = diag[i] + diag[j] - 2.0 * kij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let dai = alpha[i] - old_ai;
        let daj = alpha[j] - old_aj;
        let ki = cache.row(i);
        let kj = cache.row(j);
        for t in 0..n {
            grad[t] += s[t] * (s[i] * ki[t] * dai + s[j] * kj[t] * daj);
        }
    }

    // Offset from free multipliers, or the middle of the feasible interval.
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut sum_free = 0.0;
    let mut n_free = 0usize;
    for t in 0..n {
        let yg = s[t] * grad[t];
        if alpha[t] >= c {
            if s[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if s[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    Ok(DualSolution {
        alpha,
        b: -rho,
        iterations,
        kernel,
    })
}

pub fn train_svm(x: &Matrix, y: &[u8], params: &SvmParams) -> Result<SvmModel, ClassifierError> {
    let sol = solve_dual(x, y, params)?;
    let sv: Vec<usize> = (0..y.len()).filter(|&i| sol.alpha[i] > 0.0).collect();
    SvmModel::new(
        x.select_rows(&sv),
        sv.iter().map(|&i| sol.alpha[i]).collect(),
        sv.iter()
            .map(|&i| if y[i] == 1 { 1.0 } else { -1.0 })
            .collect(),
        sol.b,
        sol.kernel,
        params.c,
    )
}
