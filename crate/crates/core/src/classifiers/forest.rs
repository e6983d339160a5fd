//! Random forest of Gini CART trees on bootstrap samples.
//!
//! Bootstrap duplicates are carried as integer sample weights, so a row
//! drawn three times counts three times in impurities and in the
//! `min_samples_*` rules.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_binary, ClassifierError};
use crate::matrix::Matrix;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfParams {
    pub n_estimators: usize,
    /// `None` grows trees until the other stopping rules fire.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Candidate features per split; `None` means `ceil(sqrt(p))`.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for RfParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
            seed: 0,
        }
    }
}

impl RfParams {
    fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::InvalidParams(m.to_string()));
        if self.n_estimators == 0 {
            return bad("n_estimators must be positive");
        }
        if self.max_depth == Some(0) {
            return bad("max_depth must be positive");
        }
        if self.min_samples_split < 2 {
            return bad("min_samples_split must be at least 2");
        }
        if self.min_samples_leaf < 1 {
            return bad("min_samples_leaf must be at least 1");
        }
        if self.max_features == Some(0) {
            return bad("max_features must be positive");
        }
        Ok(())
    }

    pub fn features_per_split(&self, p: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| (p as f64).sqrt().ceil() as usize)
            .clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        /// Weighted training counts of class 0 and class 1.
        counts: [u32; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

impl Node {
    fn leaf_class(counts: &[u32; 2]) -> u8 {
        u8::from(counts[1] > counts[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    fn leaf(&self, row: &[f64]) -> &[u32; 2] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    /// Majority class of the leaf reached by `row`; ties go to 0.
    pub fn predict_row(&self, row: &[f64]) -> u8 {
        Node::leaf_class(self.leaf(row))
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Weighted sample count of the smallest leaf.
    pub fn min_leaf_weight(&self) -> u32 {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { counts } => Some(counts[0] + counts[1]),
                _ => None,
            })
            .min()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<DecisionTree>,
    n_features: usize,
}

impl ForestModel {
    pub fn from_trees(trees: Vec<DecisionTree>, n_features: usize) -> Self {
        Self { trees, n_features }
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Number of trees voting for class 1, per row.
    pub fn votes(&self, x: &Matrix) -> Vec<usize> {
        x.iter_rows()
            .map(|r| self.trees.iter().filter(|t| t.predict_row(r) == 1).count())
            .collect()
    }

    /// Majority vote; an exact tie is label 0.
    pub fn predict(&self, x: &Matrix) -> Vec<u8> {
        let total = self.trees.len();
        self.votes(x)
            .into_iter()
            .map(|ones| u8::from(2 * ones > total))
            .collect()
    }
}

/// Multiplicity of each row in the bootstrap sample of tree `tree`.
pub fn bootstrap_counts(n: usize, forest_seed: u64, tree: usize) -> Vec<u32> {
    let mut rng = seed::rng(seed::child(forest_seed, tree as u64));
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1;
    }
    counts
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [u8],
    weight: Vec<u32>,
    params: &'a RfParams,
    mtry: usize,
    nodes: Vec<Node>,
    scratch: Vec<(f64, u8, u32)>,
    features: Vec<usize>,
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn counts(&self, samples: &[usize]) -> [u32; 2] {
        let mut c = [0u32; 2];
        for &s in samples {
            c[self.y[s] as usize] += self.weight[s];
        }
        c
    }

    /// Best split of `samples`, by the largest value of
    /// `sum_k n_Lk^2 / n_L + sum_k n_Rk^2 / n_R` (equivalently, the lowest
    /// weighted Gini impurity of the children).
    fn best_split<R: Rng>(&mut self, samples: &[usize], rng: &mut R) -> Option<Split> {
        let min_leaf = self.params.min_samples_leaf as u64;
        let mut best: Option<Split> = None;
        self.features.shuffle(rng);
        let mut visited = 0;
        for fi in 0..self.features.len() {
            if visited >= self.mtry {
                break;
            }
            let f = self.features[fi];
            self.scratch.clear();
            self.scratch.extend(
                samples
                    .iter()
                    .map(|&s| (self.x.get(s, f), self.y[s], self.weight[s])),
            );
            let (lo, hi) = self
                .scratch
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
                    (lo.min(e.0), hi.max(e.0))
                });
            if lo >= hi {
                continue;
            }
            visited += 1;
            self.scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let mut total = [0u64; 2];
            for e in &self.scratch {
                total[e.1 as usize] += e.2 as u64;
            }
            let mut left = [0u64; 2];
            for k in 0..self.scratch.len() - 1 {
                let (v, label, w) = self.scratch[k];
                left[label as usize] += w as u64;
                let next = self.scratch[k + 1].0;
                if next <= v {
                    continue;
                }
                let nl = left[0] + left[1];
                let nr = total[0] + total[1] - nl;
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let r0 = (total[0] - left[0]) as f64;
                let r1 = (total[1] - left[1]) as f64;
                let (l0, l1) = (left[0] as f64, left[1] as f64);
                let score = (l0 * l0 + l1 * l1) / nl as f64 + (r0 * r0 + r1 * r1) / nr as f64;
                if best.as_ref().is_none_or(|b| score > b.score) {
                    let mid = v + (next - v) / 2.0;
                    best = Some(Split {
                        feature: f,
                        threshold: if mid < next { mid } else { v },
                        score,
                    });
                }
            }
        }
        best
    }

    fn build<R: Rng>(&mut self, samples: Vec<usize>, rng: &mut R) {
        // (node index, samples, depth)
        self.nodes.push(Node::Leaf { counts: [0, 0] });
        let mut stack = vec![(0usize, samples, 0usize)];
        while let Some((at, mut samples, depth)) = stack.pop() {
            let counts = self.counts(&samples);
            let total = (counts[0] + counts[1]) as usize;
            let stop = counts[0] == 0
                || counts[1] == 0
                || total < self.params.min_samples_split
                || total < 2 * self.params.min_samples_leaf
                || self.params.max_depth.is_some_and(|d| depth >= d);
            let split = if stop {
                None
            } else {
                self.best_split(&samples, rng)
            };
            let Some(split) = split else {
                self.nodes[at] = Node::Leaf { counts };
                continue;
            };
            let (left, right): (Vec<usize>, Vec<usize>) = samples
                .drain(..)
                .partition(|&s| self.x.get(s, split.feature) <= split.threshold);
            let li = self.nodes.len();
            self.nodes.push(Node::Leaf { counts: [0, 0] });
            let ri = self.nodes.len();
            self.nodes.push(Node::Leaf { counts: [0, 0] });
            self.nodes[at] = Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: li,
                right: ri,
            };
            stack.push((ri, right, depth + 1));
            stack.push((li, left, depth + 1));
        }
    }
}

fn grow_tree(x: &Matrix, y: &[u8], params: &RfParams, tree: usize) -> DecisionTree {
    let n = y.len();
    let weight = bootstrap_counts(n, params.seed, tree);
    let samples: Vec<usize> = (0..n).filter(|&i| weight[i] > 0).collect();
    // The bootstrap stream is consumed first; splits draw from a second one.
    let mut rng = seed::rng(seed::child(seed::child(params.seed, tree as u64), 1));
    let mut b = Builder {
        x,
        y,
        weight,
        params,
        mtry: params.features_per_split(x.cols()),
        nodes: Vec::new(),
        scratch: Vec::with_capacity(samples.len()),
        features: (0..x.cols()).collect(),
    };
    b.build(samples, &mut rng);
    DecisionTree { nodes: b.nodes }
}

pub fn train_rf(x: &Matrix, y: &[u8], params: &RfParams) -> Result<ForestModel, ClassifierError> {
    params.validate()?;
    if x.rows() != y.len() {
        return Err(ClassifierError::DimensionMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    check_binary(y)?;
    if y.len() < 2 {
        return Err(ClassifierError::EmptyInput);
    }
    if !(y.contains(&0) && y.contains(&1)) {
        return Err(ClassifierError::SingleClass);
    }
    let trees = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| grow_tree(x, y, params, t))
        .collect();
    Ok(ForestModel {
        trees,
        n_features: x.cols(),
    })
}
