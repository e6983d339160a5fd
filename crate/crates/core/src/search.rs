//! Hyperparameter search: exhaustive grid, random sampling and a genetic
//! algorithm over a declarative parameter space.
//!
//! Every strategy maximizes a [`FitnessScore`], ordered by success first,
//! then accuracy, then F1; remaining ties keep the earliest candidate.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::Mutex;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{
    Gamma, KernelKind, LrParams, ModelKind, ModelParams, Penalty, RfParams, SvmParams,
};
use crate::seed;

pub const DEFAULT_RANDOM_SAMPLES: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Real(v) => Some(*v),
            ParamValue::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            ParamValue::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Parses an integer, then a real, and otherwise keeps the text.
    pub fn parse(s: &str) -> Self {
        let s = s.trim();
        if let Ok(v) = s.parse::<i64>() {
            ParamValue::Int(v)
        } else if let Ok(v) = s.parse::<f64>() {
            ParamValue::Real(v)
        } else {
            ParamValue::Text(s.to_string())
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v:?}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Choice(Vec<ParamValue>),
    LogUniform { lo: f64, hi: f64 },
}

impl Domain {
    pub fn is_finite(&self) -> bool {
        matches!(self, Domain::Choice(_))
    }

    pub fn contains(&self, v: &ParamValue) -> bool {
        match self {
            Domain::Choice(values) => values.contains(v),
            Domain::LogUniform { lo, hi } => v.as_f64().is_some_and(|x| x >= *lo && x <= *hi),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> ParamValue {
        match self {
            Domain::Choice(values) => values[rng.random_range(0..values.len())].clone(),
            Domain::LogUniform { lo, hi } => {
                let u: f64 = rng.random();
                ParamValue::Real((lo.ln() + u * (hi.ln() - lo.ln())).exp().clamp(*lo, *hi))
            }
        }
    }

    /// `v1,v2,...` for a finite set or `log:lo:hi` for a log-uniform interval.
    pub fn parse(s: &str) -> Result<Self, SearchError> {
        if let Some(rest) = s.strip_prefix("log:") {
            let bad = || {
                SearchError::InvalidSpace(format!("malformed interval '{s}', expected log:lo:hi"))
            };
            let (lo, hi) = rest.split_once(':').ok_or_else(bad)?;
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            return Ok(Domain::LogUniform { lo, hi });
        }
        let values: Vec<ParamValue> = s
            .split(',')
            .filter(|v| !v.trim().is_empty())
            .map(ParamValue::parse)
            .collect();
        Ok(Domain::Choice(values))
    }
}

/// Rewrites a point into its canonical form; equal canonical points share
/// one fitness evaluation.
pub type Canonicalizer = fn(&mut ParamPoint);

#[derive(Debug, Clone)]
pub struct ParamSpace {
    dims: Vec<(String, Domain)>,
    canonicalizer: Option<Canonicalizer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint {
    values: Vec<(String, ParamValue)>,
}

impl ParamPoint {
    pub fn new(values: Vec<(String, ParamValue)>) -> Self {
        Self { values }
    }

    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn set(&mut self, name: &str, value: ParamValue) {
        if let Some(slot) = self.values.iter_mut().find(|(n, _)| n == name) {
            slot.1 = value;
        } else {
            self.values.push((name.to_string(), value));
        }
    }

    pub fn values(&self) -> &[(String, ParamValue)] {
        &self.values
    }

    /// `name=value` pairs joined by `;`, in dimension order.
    pub fn key(&self) -> String {
        self.values
            .iter()
            .map(|(n, v)| format!("{n}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

impl fmt::Display for ParamPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

impl ParamSpace {
    pub fn new(dims: Vec<(String, Domain)>) -> Result<Self, SearchError> {
        if dims.is_empty() {
            return Err(SearchError::InvalidSpace("space has no dimensions".into()));
        }
        for (i, (name, domain)) in dims.iter().enumerate() {
            if dims[..i].iter().any(|(n, _)| n == name) {
                return Err(SearchError::InvalidSpace(format!(
                    "duplicate dimension '{name}'"
                )));
            }
            validate_domain(name, domain)?;
        }
        Ok(Self {
            dims,
            canonicalizer: None,
        })
    }

    pub fn with_canonicalizer(mut self, f: Canonicalizer) -> Self {
        self.canonicalizer = Some(f);
        self
    }

    pub fn dims(&self) -> &[(String, Domain)] {
        &self.dims
    }

    pub fn is_finite(&self) -> bool {
        self.dims.iter().all(|(_, d)| d.is_finite())
    }

    /// Replaces the domain of an existing dimension.
    pub fn override_dim(&mut self, name: &str, domain: Domain) -> Result<(), SearchError> {
        validate_domain(name, &domain)?;
        let slot = self
            .dims
            .iter_mut()
            .find(|(n, _)| n == name)
            .ok_or_else(|| SearchError::InvalidSpace(format!("unknown dimension '{name}'")))?;
        slot.1 = domain;
        Ok(())
    }

    pub fn canonicalize(&self, point: &mut ParamPoint) {
        if let Some(f) = self.canonicalizer {
            f(point);
        }
    }

    pub fn contains(&self, point: &ParamPoint) -> bool {
        point.values.len() == self.dims.len()
            && self
                .dims
                .iter()
                .zip(&point.values)
                .all(|((n, d), (pn, v))| n == pn && d.contains(v))
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> ParamPoint {
        let mut p = ParamPoint {
            values: self
                .dims
                .iter()
                .map(|(n, d)| (n.clone(), d.sample(rng)))
                .collect(),
        };
        self.canonicalize(&mut p);
        p
    }

    /// Cartesian product with the last dimension varying fastest.
    pub fn enumerate(&self) -> Result<Vec<ParamPoint>, SearchError> {
        let mut choices = Vec::with_capacity(self.dims.len());
        for (name, d) in &self.dims {
            match d {
                Domain::Choice(v) => choices.push(v),
                Domain::LogUniform { .. } => {
                    return Err(SearchError::GridInfeasible { dim: name.clone() })
                }
            }
        }
        let total: usize = choices.iter().map(|c| c.len()).product();
        let mut out = Vec::with_capacity(total);
        for mut idx in 0..total {
            let mut values = vec![None; choices.len()];
            for d in (0..choices.len()).rev() {
                values[d] = Some(choices[d][idx % choices[d].len()].clone());
                idx /= choices[d].len();
            }
            let mut p = ParamPoint {
                values: self
                    .dims
                    .iter()
                    .zip(values)
                    .map(|((n, _), v)| (n.clone(), v.expect("filled")))
                    .collect(),
            };
            self.canonicalize(&mut p);
            out.push(p);
        }
        Ok(out)
    }
}

fn validate_domain(name: &str, domain: &Domain) -> Result<(), SearchError> {
    match domain {
        Domain::Choice(v) if v.is_empty() => Err(SearchError::InvalidSpace(format!(
            "dimension '{name}' has no values"
        ))),
        Domain::LogUniform { lo, hi } if !(*lo > 0.0 && lo < hi && hi.is_finite()) => {
            Err(SearchError::InvalidSpace(format!(
                "dimension '{name}' needs 0 < lo < hi, got [{lo}, {hi}]"
            )))
        }
        _ => Ok(()),
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("grid search needs finite dimensions, but '{dim}' is an interval")]
    GridInfeasible { dim: String },
    #[error("invalid parameter space: {0}")]
    InvalidSpace(String),
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("parameter point {point} is invalid: {reason}")]
    BadPoint { point: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessScore {
    pub accuracy: f64,
    pub f1: f64,
    pub failed: bool,
}

impl FitnessScore {
    pub fn new(accuracy: f64, f1: f64) -> Self {
        Self {
            accuracy,
            f1,
            failed: false,
        }
    }

    pub fn failure() -> Self {
        Self {
            accuracy: 0.0,
            f1: 0.0,
            failed: true,
        }
    }

    /// Total order: any success beats any failure, then accuracy, then F1.
    pub fn cmp_fitness(&self, other: &Self) -> Ordering {
        (!self.failed)
            .cmp(&!other.failed)
            .then(self.accuracy.total_cmp(&other.accuracy))
            .then(self.f1.total_cmp(&other.f1))
    }

    pub fn beats(&self, other: &Self) -> bool {
        self.cmp_fitness(other) == Ordering::Greater
    }
}

/// Objective maximized by the searches. Implementations must be pure for a
/// given point and safe to call from several threads.
pub trait Fitness: Sync {
    fn evaluate(&self, point: &ParamPoint) -> FitnessScore;
}

impl<F> Fitness for F
where
    F: Fn(&ParamPoint) -> FitnessScore + Sync,
{
    fn evaluate(&self, point: &ParamPoint) -> FitnessScore {
        self(point)
    }
}

/// Caches fitness by canonical point key and counts real evaluations.
pub struct Memo<'a> {
    inner: &'a dyn Fitness,
    cache: Mutex<HashMap<String, FitnessScore>>,
    calls: AtomicUsize,
}

impl<'a> Memo<'a> {
    pub fn new(inner: &'a dyn Fitness) -> Self {
        Self {
            inner,
            cache: Mutex::new(HashMap::new()),
            calls: AtomicUsize::new(0),
        }
    }

    /// Number of times the wrapped fitness was invoked.
    pub fn calls(&self) -> usize {
        self.calls.load(AtomicOrdering::SeqCst)
    }

    /// Scores for `points`, evaluating unseen ones in parallel.
    pub fn batch(&self, points: &[ParamPoint]) -> Vec<FitnessScore> {
        let keys: Vec<String> = points.iter().map(|p| p.key()).collect();
        let mut todo: Vec<usize> = Vec::new();
        {
            let cache = self.cache.lock().expect("memo lock");
            for (i, k) in keys.iter().enumerate() {
                if !cache.contains_key(k) && !todo.iter().any(|&j| keys[j] == *k) {
                    todo.push(i);
                }
            }
        }
        let fresh: Vec<(usize, FitnessScore)> = todo
            .par_iter()
            .map(|&i| {
                self.calls.fetch_add(1, AtomicOrdering::SeqCst);
                (i, self.inner.evaluate(&points[i]))
            })
            .collect();
        let mut cache = self.cache.lock().expect("memo lock");
        for (i, s) in fresh {
            cache.insert(keys[i].clone(), s);
        }
        keys.iter().map(|k| cache[k]).collect()
    }

    pub fn get(&self, point: &ParamPoint) -> FitnessScore {
        self.batch(std::slice::from_ref(point))[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: ParamPoint,
    pub fitness: FitnessScore,
    /// Distinct fitness evaluations.
    pub evals: usize,
    /// Best fitness per generation (genetic search only).
    pub history: Vec<FitnessScore>,
}

fn argmax(scores: &[FitnessScore]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if s.beats(&scores[best]) {
            best = i;
        }
    }
    best
}

pub fn grid_search(space: &ParamSpace, fit: &dyn Fitness) -> Result<SearchResult, SearchError> {
    let points = space.enumerate()?;
    let memo = Memo::new(fit);
    let scores = memo.batch(&points);
    let i = argmax(&scores);
    Ok(SearchResult {
        best: points[i].clone(),
        fitness: scores[i],
        evals: memo.calls(),
        history: Vec::new(),
    })
}

pub fn random_search(
    space: &ParamSpace,
    fit: &dyn Fitness,
    n_samples: usize,
    seed: u64,
) -> Result<SearchResult, SearchError> {
    if n_samples == 0 {
        return Err(SearchError::InvalidConfig(
            "n_samples must be at least 1".into(),
        ));
    }
    let mut rng = seed::rng(seed);
    let points: Vec<ParamPoint> = (0..n_samples).map(|_| space.sample(&mut rng)).collect();
    let memo = Memo::new(fit);
    let scores = memo.batch(&points);
    let i = argmax(&scores);
    Ok(SearchResult {
        best: points[i].clone(),
        fitness: scores[i],
        evals: memo.calls(),
        history: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elitism: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 20,
            generations: 15,
            tournament_size: 3,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            elitism: 1,
            seed: 0,
        }
    }
}

impl GaConfig {
    fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: String| Err(SearchError::InvalidConfig(m));
        if self.population < 2 {
            return bad(format!(
                "population must be at least 2, got {}",
                self.population
            ));
        }
        if self.elitism >= self.population {
            return bad(format!(
                "elitism {} must be below population {}",
                self.elitism, self.population
            ));
        }
        if self.tournament_size == 0 {
            return bad("tournament_size must be positive".into());
        }
        for (name, r) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} must lie in [0, 1], got {r}"));
            }
        }
        Ok(())
    }
}

const MUTATION_SIGMA: f64 = 0.5;

fn tournament<R: Rng>(scores: &[FitnessScore], size: usize, rng: &mut R) -> usize {
    let mut best = rng.random_range(0..scores.len());
    for _ in 1..size {
        let c = rng.random_range(0..scores.len());
        if scores[c].beats(&scores[best])
            || (scores[c].cmp_fitness(&scores[best]) == Ordering::Equal && c < best)
        {
            best = c;
        }
    }
    best
}

fn mutate<R: Rng>(space: &ParamSpace, p: &mut ParamPoint, rate: f64, rng: &mut R) {
    let step = Normal::new(0.0, MUTATION_SIGMA).expect("valid sigma");
    for ((_, domain), (_, v)) in space.dims.iter().zip(p.values.iter_mut()) {
        if rng.random::<f64>() >= rate {
            continue;
        }
        *v = match domain {
            Domain::Choice(_) => domain.sample(rng),
            Domain::LogUniform { lo, hi } => {
                let cur = v.as_f64().unwrap_or(*lo);
                ParamValue::Real((cur * step.sample(rng).exp()).clamp(*lo, *hi))
            }
        };
    }
}

pub fn ga_search(
    space: &ParamSpace,
    fit: &dyn Fitness,
    cfg: &GaConfig,
) -> Result<SearchResult, SearchError> {
    cfg.validate()?;
    let mut rng = seed::rng(cfg.seed);
    let memo = Memo::new(fit);
    let mut pop: Vec<ParamPoint> = (0..cfg.population)
        .map(|_| space.sample(&mut rng))
        .collect();
    let mut scores = memo.batch(&pop);
    let mut best_i = argmax(&scores);
    let mut best = (pop[best_i].clone(), scores[best_i]);
    let mut history = vec![scores[best_i]];

    for _ in 0..cfg.generations {
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| scores[b].cmp_fitness(&scores[a]).then(a.cmp(&b)));
        let mut next: Vec<ParamPoint> = order[..cfg.elitism]
            .iter()
            .map(|&i| pop[i].clone())
            .collect();
        while next.len() < cfg.population {
            let a = &pop[tournament(&scores, cfg.tournament_size, &mut rng)];
            let b = &pop[tournament(&scores, cfg.tournament_size, &mut rng)];
            let mut child = a.clone();
            if rng.random::<f64>() < cfg.crossover_rate {
                for (slot, (_, bv)) in child.values.iter_mut().zip(&b.values) {
                    if rng.random::<bool>() {
                        slot.1 = bv.clone();
                    }
                }
            }
            mutate(space, &mut child, cfg.mutation_rate, &mut rng);
            space.canonicalize(&mut child);
            next.push(child);
        }
        pop = next;
        scores = memo.batch(&pop);
        best_i = argmax(&scores);
        history.push(scores[best_i]);
        if scores[best_i].beats(&best.1) {
            best = (pop[best_i].clone(), scores[best_i]);
        }
    }
    Ok(SearchResult {
        best: best.0,
        fitness: best.1,
        evals: memo.calls(),
        history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TunerKind {
    None,
    Grid,
    Random,
    Ga,
}

impl TunerKind {
    pub const ALL: [TunerKind; 4] = [
        TunerKind::None,
        TunerKind::Grid,
        TunerKind::Random,
        TunerKind::Ga,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TunerKind::None => "none",
            TunerKind::Grid => "grid",
            TunerKind::Random => "random",
            TunerKind::Ga => "ga",
        }
    }
}

impl fmt::Display for TunerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TunerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TunerKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown tuner '{s}' (expected none, grid, random or ga)"))
    }
}

fn ints(v: &[i64]) -> Domain {
    Domain::Choice(v.iter().map(|&x| ParamValue::Int(x)).collect())
}

fn reals(v: &[f64]) -> Domain {
    Domain::Choice(v.iter().map(|&x| ParamValue::Real(x)).collect())
}

fn texts(v: &[&str]) -> Domain {
    Domain::Choice(v.iter().map(|s| ParamValue::Text(s.to_string())).collect())
}

/// Linear-kernel points ignore gamma, so it is pinned to `scale`.
pub fn canonicalize_svm(p: &mut ParamPoint) {
    if p.get("kernel").and_then(ParamValue::as_text) == Some("linear") && p.get("gamma").is_some() {
        p.set("gamma", ParamValue::Text("scale".into()));
    }
}

pub fn default_space(kind: ModelKind) -> ParamSpace {
    let dims = match kind {
        ModelKind::Rf => vec![
            ("n_estimators", ints(&[50, 100, 200])),
            (
                "max_depth",
                Domain::Choice(vec![
                    ParamValue::Text("none".into()),
                    ParamValue::Int(5),
                    ParamValue::Int(10),
                    ParamValue::Int(20),
                ]),
            ),
            ("min_samples_split", ints(&[2, 5, 10])),
            ("min_samples_leaf", ints(&[1, 2, 4])),
        ],
        ModelKind::Lr => vec![
            ("C", reals(&[0.01, 0.1, 1.0, 10.0, 100.0])),
            ("penalty", texts(&["l1", "l2"])),
        ],
        ModelKind::Svm => vec![
            ("C", reals(&[0.1, 1.0, 10.0, 100.0])),
            ("kernel", texts(&["linear", "rbf"])),
            (
                "gamma",
                Domain::Choice(vec![
                    ParamValue::Text("scale".into()),
                    ParamValue::Real(0.01),
                    ParamValue::Real(0.1),
                    ParamValue::Real(1.0),
                ]),
            ),
        ],
    };
    let space = ParamSpace::new(dims.into_iter().map(|(n, d)| (n.to_string(), d)).collect())
        .expect("default space is valid");
    match kind {
        ModelKind::Svm => space.with_canonicalizer(canonicalize_svm),
        _ => space,
    }
}

fn bad_point(p: &ParamPoint, reason: impl Into<String>) -> SearchError {
    SearchError::BadPoint {
        point: p.key(),
        reason: reason.into(),
    }
}

fn positive_int(p: &ParamPoint, name: &str) -> Result<Option<usize>, SearchError> {
    match p.get(name) {
        None => Ok(None),
        Some(v) => match v.as_f64() {
            Some(x) if x >= 1.0 && x.is_finite() => Ok(Some(x.round() as usize)),
            _ => Err(bad_point(p, format!("{name} must be a positive integer"))),
        },
    }
}

fn positive_real(p: &ParamPoint, name: &str) -> Result<Option<f64>, SearchError> {
    match p.get(name) {
        None => Ok(None),
        Some(v) => match v.as_f64() {
            Some(x) if x > 0.0 && x.is_finite() => Ok(Some(x)),
            _ => Err(bad_point(p, format!("{name} must be a positive number"))),
        },
    }
}

/// Builds model parameters from the defaults of `kind`, overridden by every
/// dimension present in `p`. Unknown names are rejected.
pub fn params_from_point(kind: ModelKind, p: &ParamPoint) -> Result<ModelParams, SearchError> {
    let known: &[&str] = match kind {
        ModelKind::Rf => &[
            "n_estimators",
            "max_depth",
            "min_samples_split",
            "min_samples_leaf",
            "max_features",
        ],
        ModelKind::Lr => &["C", "penalty", "tol", "max_iter"],
        ModelKind::Svm => &["C", "kernel", "gamma", "tol", "max_passes"],
    };
    if let Some((n, _)) = p.values.iter().find(|(n, _)| !known.contains(&n.as_str())) {
        return Err(bad_point(p, format!("unknown parameter '{n}' for {kind}")));
    }
    match kind {
        ModelKind::Rf => {
            let mut r = RfParams::default();
            if let Some(v) = positive_int(p, "n_estimators")? {
                r.n_estimators = v;
            }
            match p.get("max_depth") {
                None => {}
                Some(ParamValue::Text(s)) if s == "none" || s == "unlimited" => r.max_depth = None,
                Some(_) => r.max_depth = positive_int(p, "max_depth")?,
            }
            if let Some(v) = positive_int(p, "min_samples_split")? {
                r.min_samples_split = v;
            }
            if let Some(v) = positive_int(p, "min_samples_leaf")? {
                r.min_samples_leaf = v;
            }
            if let Some(v) = positive_int(p, "max_features")? {
                r.max_features = Some(v);
            }
            if r.min_samples_split < 2 {
                return Err(bad_point(p, "min_samples_split must be at least 2"));
            }
            Ok(ModelParams::Rf(r))
        }
        ModelKind::Lr => {
            let mut l = LrParams::default();
            if let Some(v) = positive_real(p, "C")? {
                l.c = v;
            }
            match p.get("penalty").map(|v| v.to_string().to_ascii_lowercase()) {
                None => {}
                Some(s) if s == "l1" => l.penalty = Penalty::L1,
                Some(s) if s == "l2" => l.penalty = Penalty::L2,
                Some(s) => return Err(bad_point(p, format!("unknown penalty '{s}'"))),
            }
            if let Some(v) = positive_real(p, "tol")? {
                l.tol = v;
            }
            if let Some(v) = positive_int(p, "max_iter")? {
                l.max_iter = v;
            }
            Ok(ModelParams::Lr(l))
        }
        ModelKind::Svm => {
            let mut s = SvmParams::default();
            if let Some(v) = positive_real(p, "C")? {
                s.c = v;
            }
            match p.get("kernel").map(|v| v.to_string().to_ascii_lowercase()) {
                None => {}
                Some(k) if k == "linear" => s.kernel = KernelKind::Linear,
                Some(k) if k == "rbf" => s.kernel = KernelKind::Rbf,
                Some(k) => return Err(bad_point(p, format!("unknown kernel '{k}'"))),
            }
            match p.get("gamma") {
                None => {}
                Some(ParamValue::Text(g)) if g == "scale" => s.gamma = Gamma::Scale,
                Some(_) => s.gamma = Gamma::Value(positive_real(p, "gamma")?.expect("present")),
            }
            if let Some(v) = positive_real(p, "tol")? {
                s.tol = v;
            }
            if let Some(v) = positive_int(p, "max_passes")? {
                s.max_passes = v;
            }
            Ok(ModelParams::Svm(s))
        }
    }
}

/// Parses `name=value;name=value` into a point, values typed as in
/// [`ParamValue::parse`].
pub fn parse_point(s: &str) -> Result<ParamPoint, SearchError> {
    let mut p = ParamPoint::new(Vec::new());
    for part in s.split([';', ' ']).filter(|t| !t.trim().is_empty()) {
        let (n, v) = part.split_once('=').ok_or_else(|| {
            SearchError::InvalidConfig(format!("expected name=value, got '{part}'"))
        })?;
        p.set(n.trim(), ParamValue::parse(v));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space_3x2() -> ParamSpace {
        ParamSpace::new(vec![
            ("a".into(), ints(&[1, 2, 3])),
            ("b".into(), texts(&["x", "y"])),
        ])
        .unwrap()
    }

    #[test]
    fn grid_counts_and_order() {
        let pts = space_3x2().enumerate().unwrap();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0].key(), "a=1;b=x");
        assert_eq!(pts[1].key(), "a=1;b=y");
        let r = grid_search(&space_3x2(), &|_: &ParamPoint| FitnessScore::new(0.5, 0.5)).unwrap();
        assert_eq!(r.evals, 6);
        assert_eq!(r.best.key(), "a=1;b=x");
    }

    #[test]
    fn grid_singleton_and_spike() {
        let s = ParamSpace::new(vec![("a".into(), ints(&[7]))]).unwrap();
        let r = grid_search(&s, &|_: &ParamPoint| FitnessScore::new(0.1, 0.0)).unwrap();
        assert_eq!((r.best.key().as_str(), r.evals), ("a=7", 1));
        let spike =
            |p: &ParamPoint| FitnessScore::new(if p.key() == "a=2;b=y" { 1.0 } else { 0.0 }, 0.0);
        assert_eq!(
            grid_search(&space_3x2(), &spike).unwrap().best.key(),
            "a=2;b=y"
        );
    }

    #[test]
    fn grid_rejects_intervals() {
        let s = ParamSpace::new(vec![(
            "C".into(),
            Domain::LogUniform {
                lo: 0.01,
                hi: 100.0,
            },
        )])
        .unwrap();
        let r = grid_search(&s, &|_: &ParamPoint| FitnessScore::new(0.0, 0.0));
        assert_eq!(
            r.unwrap_err(),
            SearchError::GridInfeasible { dim: "C".into() }
        );
    }

    #[test]
    fn fitness_order() {
        let a = FitnessScore::new(0.8, 0.1);
        let b = FitnessScore::new(0.8, 0.2);
        assert!(b.beats(&a));
        assert!(a.beats(&FitnessScore::failure()));
        assert!(FitnessScore::new(0.9, 0.0).beats(&b));
    }

    #[test]
    fn random_is_seeded_and_in_space() {
        let s = ParamSpace::new(vec![
            (
                "C".into(),
                Domain::LogUniform {
                    lo: 0.01,
                    hi: 100.0,
                },
            ),
            ("k".into(), texts(&["a", "b"])),
        ])
        .unwrap();
        let fit = |p: &ParamPoint| {
            FitnessScore::new(-p.get("C").unwrap().as_f64().unwrap().ln().abs(), 0.0)
        };
        let r1 = random_search(&s, &fit, 30, 11).unwrap();
        let r2 = random_search(&s, &fit, 30, 11).unwrap();
        assert_eq!(r1, r2);
        assert!(s.contains(&r1.best));
    }

    #[test]
    fn ga_constant_fitness_history_flat() {
        let cfg = GaConfig {
            seed: 3,
            ..Default::default()
        };
        let r = ga_search(
            &space_3x2(),
            &|_: &ParamPoint| FitnessScore::new(0.5, 0.5),
            &cfg,
        )
        .unwrap();
        assert_eq!(r.history.len(), cfg.generations + 1);
        assert!(r.history.iter().all(|h| *h == FitnessScore::new(0.5, 0.5)));
        assert!(r.evals <= 6);
    }

    #[test]
    fn svm_gamma_canonicalized() {
        let space = default_space(ModelKind::Svm);
        let pts = space.enumerate().unwrap();
        let distinct: std::collections::HashSet<String> = pts.iter().map(|p| p.key()).collect();
        // 4 C values x (1 linear + 4 rbf gammas)
        assert_eq!(distinct.len(), 20);
        let r = grid_search(&space, &|_: &ParamPoint| FitnessScore::new(0.0, 0.0)).unwrap();
        assert_eq!(r.evals, 20);
    }

    #[test]
    fn default_spaces_map_to_params() {
        for kind in ModelKind::ALL {
            for p in default_space(kind).enumerate().unwrap() {
                assert_eq!(params_from_point(kind, &p).unwrap().kind(), kind);
            }
        }
        let p = parse_point("C=0.5;penalty=l1").unwrap();
        match params_from_point(ModelKind::Lr, &p).unwrap() {
            ModelParams::Lr(l) => assert_eq!((l.c, l.penalty), (0.5, Penalty::L1)),
            other => panic!("{other:?}"),
        }
        assert!(params_from_point(ModelKind::Lr, &parse_point("depth=3").unwrap()).is_err());
    }

    #[test]
    fn domain_parsing() {
        assert_eq!(
            Domain::parse("log:0.1:10").unwrap(),
            Domain::LogUniform { lo: 0.1, hi: 10.0 }
        );
        assert_eq!(
            Domain::parse("1,2.5,rbf").unwrap(),
            Domain::Choice(vec![
                ParamValue::Int(1),
                ParamValue::Real(2.5),
                ParamValue::Text("rbf".into())
            ])
        );
        assert!(Domain::parse("log:1").is_err());
    }

    #[test]
    fn invalid_spaces() {
        assert!(ParamSpace::new(vec![("a".into(), ints(&[1])), ("a".into(), ints(&[2]))]).is_err());
        assert!(
            ParamSpace::new(vec![("a".into(), Domain::LogUniform { lo: 0.0, hi: 1.0 })]).is_err()
        );
        assert!(
            ParamSpace::new(vec![("a".into(), Domain::LogUniform { lo: 2.0, hi: 1.0 })]).is_err()
        );
    }
}
