//! End-to-end experiment runs.
//!
//! Per outer fold, every fit-phase step sees training rows only:
//!
//! 1. fit the KNN imputer, then the min-max scaler, on the training rows;
//! 2. fit the feature selector on the scaled training rows;
//! 3. oversample the selected training rows with ADASYN;
//! 4. tune hyperparameters by inner stratified CV over the original training
//!    rows, oversampling each inner training split separately;
//! 5. train the final model on all oversampled rows;
//! 6. impute, scale and subset the test rows with the fitted transforms and
//!    predict them.
//!
//! Row provenance is carried alongside every matrix, and every fit call logs
//! the original row indices it consumed in a [`LeakageProbe`].
//!
//! # Seeds
//!
//! All streams derive from the master seed through [`seed::derive`] with a
//! label path rooted at the dataset scope (`pooled` or a project tag):
//!
//! | stream                   | path                                           |
//! |--------------------------|------------------------------------------------|
//! | outer fold plan          | `scope / folds`                                |
//! | global ADASYN (ablation) | `scope / global-adasyn`                        |
//! | ADASYN                   | `scope / selector / fold<i> / adasyn`          |
//! | inner fold plan          | `scope / selector / model / fold<i> / inner`   |
//! | inner ADASYN, split j    | `scope / selector / model / fold<i> / inner / adasyn<j>` |
//! | model seed in fitness    | `scope / selector / model / fold<i> / fitness` |
//! | final model seed         | `scope / selector / model / fold<i> / final`   |
//! | search                   | `scope / selector / model / tuner / fold<i> / search` |
//!
//! Only the search stream depends on the tuner. Tuners of one
//! (selector, model, fold) therefore score any given point identically, and
//! their fitness evaluations are computed once and shared.

pub mod config;
pub mod report;

use std::collections::{BTreeSet, HashMap};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{ModelKind, ModelParams};
use crate::corpus::{self, Dataset, FeatureSchema};
use crate::crossval::{stratified_folds, FoldPlan};
use crate::evaluation::{self, aggregate, confusion, EvaluationReport, FoldMetrics};
use crate::feature_selection::{self, FeatureSubset, SelectorConfig, SelectorKind};
use crate::matrix::Matrix;
use crate::preprocess::{apply_imputer, apply_scaler, fit_imputer, fit_scaler};
use crate::resample::{adasyn, AdasynConfig};
use crate::search::{
    default_space, ga_search, grid_search, params_from_point, random_search, FitnessScore,
    GaConfig, ParamPoint, ParamSpace, SearchError, SearchResult, TunerKind,
};
use crate::seed;

pub use config::{load_config, parse_config, ExperimentConfig, MatrixSpec};
pub use report::emit_reports;

pub const POOLED_SCOPE: &str = "pooled";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("configuration line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("{0}")]
    Io(String),
    #[error("data: {0}")]
    Data(String),
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error("fold {fold}, {stage}: {message}")]
    Fold {
        fold: usize,
        stage: &'static str,
        message: String,
    },
}

fn fold_err(fold: usize, stage: &'static str) -> impl Fn(String) -> PipelineError {
    move |message| PipelineError::Fold {
        fold,
        stage,
        message,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Impute,
    Scale,
    Select,
    Resample,
    Tune,
    Train,
    Predict,
}

impl Phase {
    pub fn is_fit(self) -> bool {
        self != Phase::Predict
    }
}

/// Records which original rows each pipeline phase consumed.
#[derive(Debug, Default)]
pub struct LeakageProbe {
    events: Mutex<Vec<(Phase, BTreeSet<usize>)>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageSummary {
    /// Fit-phase calls observed.
    pub fit_calls: usize,
    /// Distinct original rows seen by any fit phase.
    pub fit_rows: usize,
    /// Test rows among them; zero unless something leaked.
    pub test_rows_in_fit: usize,
}

impl LeakageProbe {
    pub fn record(&self, phase: Phase, source: &[Option<usize>]) {
        let rows = source.iter().flatten().copied().collect();
        self.events.lock().expect("probe lock").push((phase, rows));
    }

    fn record_all(&self, phase: Phase, rows: BTreeSet<usize>) {
        self.events.lock().expect("probe lock").push((phase, rows));
    }

    /// Union of rows consumed by fit phases.
    pub fn fit_rows(&self) -> BTreeSet<usize> {
        let events = self.events.lock().expect("probe lock");
        events
            .iter()
            .filter(|(p, _)| p.is_fit())
            .flat_map(|(_, r)| r.iter().copied())
            .collect()
    }

    pub fn events(&self) -> Vec<(Phase, BTreeSet<usize>)> {
        self.events.lock().expect("probe lock").clone()
    }

    pub fn summary(&self, test_rows: &[usize]) -> LeakageSummary {
        let fit = self.fit_rows();
        let calls = self
            .events
            .lock()
            .expect("probe lock")
            .iter()
            .filter(|(p, _)| p.is_fit())
            .count();
        LeakageSummary {
            fit_calls: calls,
            fit_rows: fit.len(),
            test_rows_in_fit: test_rows.iter().filter(|r| fit.contains(r)).count(),
        }
    }
}

/// A matrix with labels and, per row, the original corpus row it came from
/// (`None` for synthetic rows).
#[derive(Debug, Clone)]
pub struct Rows {
    pub x: Matrix,
    pub y: Vec<u8>,
    pub source: Vec<Option<usize>>,
}

impl Rows {
    fn select(&self, idx: &[usize]) -> Rows {
        Rows {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            source: idx.iter().map(|&i| self.source[i]).collect(),
        }
    }

    fn with_x(&self, x: Matrix) -> Rows {
        Rows {
            x,
            y: self.y.clone(),
            source: self.source.clone(),
        }
    }

    /// The matrix and labels, logging the rows under `phase`.
    pub fn view(&self, probe: &LeakageProbe, phase: Phase) -> (&Matrix, &[u8]) {
        probe.record(phase, &self.source);
        (&self.x, &self.y)
    }
}

/// The rows an experiment is cross-validated over.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub scope: String,
    pub schema: FeatureSchema,
    pub rows: Rows,
    /// Rows consumed by a corpus-wide fit before splitting (global ADASYN).
    pub pre_split_fit: Option<BTreeSet<usize>>,
}

impl Corpus {
    pub fn from_dataset(scope: impl Into<String>, d: &Dataset) -> Self {
        Self {
            scope: scope.into(),
            schema: d.schema().clone(),
            rows: Rows {
                x: d.x().clone(),
                y: d.y().to_vec(),
                source: (0..d.len()).map(Some).collect(),
            },
            pre_split_fit: None,
        }
    }

    /// Imputes, scales and oversamples the whole corpus before any split.
    pub fn globally_resampled(self, cfg: &ExperimentConfig) -> Result<Self, PipelineError> {
        let err = |e: String| PipelineError::Data(format!("global resampling: {e}"));
        let imp = fit_imputer(&self.rows.x, cfg.imputer_k).map_err(|e| err(e.to_string()))?;
        let x = apply_imputer(&imp, &self.rows.x).map_err(|e| err(e.to_string()))?;
        let sc = fit_scaler(&x).map_err(|e| err(e.to_string()))?;
        let x = apply_scaler(&sc, &x).map_err(|e| err(e.to_string()))?;
        let acfg = AdasynConfig {
            seed: seed::derive(cfg.seed, &[self.scope.as_str(), "global-adasyn"]),
            ..cfg.adasyn.clone()
        };
        let r = adasyn(&x, &self.rows.y, &acfg).map_err(|e| err(e.to_string()))?;
        let n = self.rows.y.len();
        let mut source = self.rows.source.clone();
        source.resize(r.y.len(), None);
        Ok(Self {
            rows: Rows {
                x: r.x,
                y: r.y,
                source,
            },
            pre_split_fit: Some((0..n).collect()),
            ..self
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellSpec {
    pub selector: SelectorKind,
    pub model: ModelKind,
    pub tuner: TunerKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub metrics: FoldMetrics,
    /// Hyperparameters of the final model.
    pub params: ParamPoint,
    /// Retained feature indices.
    pub features: Vec<usize>,
    /// Distinct fitness evaluations requested by the tuner.
    pub evals: usize,
    pub best_fitness: Option<FitnessScore>,
    /// Best accuracy per GA generation.
    pub history: Vec<f64>,
    pub warnings: Vec<String>,
    pub leakage: LeakageSummary,
}

fn searched_space(cfg: &ExperimentConfig, model: ModelKind) -> Result<ParamSpace, SearchError> {
    let mut space = default_space(model);
    for (name, domain) in &cfg.space_overrides {
        space.override_dim(name, domain.clone())?;
    }
    Ok(space)
}

/// Cache of fitness results shared by the tuners of one
/// (selector, model, fold), with the seconds each evaluation took.
#[derive(Default)]
struct SharedFitness {
    cache: Mutex<HashMap<String, (FitnessScore, f64)>>,
}

/// Inner cross-validation over a fold's original training rows. Each inner
/// training split is oversampled on its own; validation rows are never
/// resampled.
struct InnerCv {
    sets: Vec<(Rows, Rows)>,
    model: ModelKind,
    model_seed: u64,
}

/// Inner `(train, validation)` pairs, or a warning when none could be built.
type InnerSets = (Vec<(Rows, Rows)>, Option<String>);

impl InnerCv {
    fn score(&self, point: &ParamPoint) -> FitnessScore {
        let Ok(params) = params_from_point(self.model, point) else {
            return FitnessScore::failure();
        };
        let params = params.with_seed(self.model_seed);
        if self.sets.is_empty() {
            return FitnessScore::failure();
        }
        let (mut acc, mut f1) = (0.0, 0.0);
        for (tr, va) in &self.sets {
            let Ok(model) = params.train(&tr.x, &tr.y) else {
                return FitnessScore::failure();
            };
            let Ok(pred) = model.predict(&va.x) else {
                return FitnessScore::failure();
            };
            let Ok(m) = confusion(&va.y, &pred).and_then(|cm| evaluation::metrics(&cm)) else {
                return FitnessScore::failure();
            };
            acc += m.accuracy;
            f1 += m.f1;
        }
        let k = self.sets.len() as f64;
        FitnessScore::new(acc / k, f1 / k)
    }
}

fn tuned_point(
    cfg: &ExperimentConfig,
    scope: &str,
    cell: CellSpec,
    fold: usize,
    inner: &InnerCv,
    shared: &SharedFitness,
) -> Result<(ParamPoint, Option<SearchResult>, f64), PipelineError> {
    let err = fold_err(fold, "tuning");
    if cell.tuner == TunerKind::None {
        let point = cfg
            .fixed_params
            .clone()
            .unwrap_or_else(|| ParamPoint::new(Vec::new()));
        return Ok((point, None, 0.0));
    }
    let space = searched_space(cfg, cell.model).map_err(|e| err(e.to_string()))?;
    let spent = Mutex::new(0.0f64);
    let fitness = |p: &ParamPoint| {
        let key = p.key();
        if let Some(&(s, secs)) = shared.cache.lock().expect("fitness lock").get(&key) {
            *spent.lock().expect("time lock") += secs;
            return s;
        }
        let t = Instant::now();
        let s = inner.score(p);
        let secs = t.elapsed().as_secs_f64();
        *spent.lock().expect("time lock") += secs;
        shared
            .cache
            .lock()
            .expect("fitness lock")
            .insert(key, (s, secs));
        s
    };
    let fold_label = format!("fold{fold}");
    let search_seed = seed::derive(
        cfg.seed,
        &[
            scope,
            cell.selector.as_str(),
            cell.model.as_str(),
            cell.tuner.as_str(),
            &fold_label,
            "search",
        ],
    );
    let result = match cell.tuner {
        TunerKind::Grid => grid_search(&space, &fitness),
        TunerKind::Random => random_search(&space, &fitness, cfg.random_samples, search_seed),
        TunerKind::Ga => ga_search(
            &space,
            &fitness,
            &GaConfig {
                seed: search_seed,
                ..cfg.ga.clone()
            },
        ),
        TunerKind::None => unreachable!("handled above"),
    }
    .map_err(|e| err(e.to_string()))?;
    let secs = *spent.lock().expect("time lock");
    Ok((result.best.clone(), Some(result), secs))
}

fn accuracy_on(model: &crate::classifiers::Model, rows: &Rows) -> Option<f64> {
    let pred = model.predict(&rows.x).ok()?;
    let hits = pred.iter().zip(&rows.y).filter(|(a, b)| a == b).count();
    Some(hits as f64 / rows.y.len().max(1) as f64)
}

struct Prepared {
    subset: FeatureSubset,
    train: Rows,
    test: Rows,
    warnings: Vec<String>,
}

/// Runs every cell in `cells` on one outer fold. Shared steps (imputation,
/// scaling, selection, oversampling, fitness) are done once per fold.
fn run_fold_cells(
    cfg: &ExperimentConfig,
    corpus: &Corpus,
    plan: &FoldPlan,
    fold: usize,
    cells: &[CellSpec],
) -> (Vec<Result<FoldOutcome, PipelineError>>, LeakageProbe) {
    let probe = LeakageProbe::default();
    let fail_all = |e: PipelineError| cells.iter().map(|_| Err(e.clone())).collect();
    let (train_idx, test_idx) = match plan.split(fold) {
        Ok(s) => s,
        Err(e) => return (fail_all(fold_err(fold, "split")(e.to_string())), probe),
    };
    if let Some(rows) = &corpus.pre_split_fit {
        probe.record_all(Phase::Resample, rows.clone());
    }
    let test_sources: Vec<usize> = test_idx
        .iter()
        .filter_map(|&i| corpus.rows.source[i])
        .collect();
    let raw_train = corpus.rows.select(&train_idx);
    let raw_test = corpus.rows.select(&test_idx);

    // Imputation and scaling, fitted on training rows.
    let base = (|| {
        let (x, _) = raw_train.view(&probe, Phase::Impute);
        let imp = fit_imputer(x, cfg.imputer_k)
            .map_err(|e| fold_err(fold, "imputation")(e.to_string()))?;
        let tr = raw_train.with_x(
            apply_imputer(&imp, &raw_train.x)
                .map_err(|e| fold_err(fold, "imputation")(e.to_string()))?,
        );
        let te = raw_test.with_x(
            apply_imputer(&imp, &raw_test.x)
                .map_err(|e| fold_err(fold, "imputation")(e.to_string()))?,
        );
        let (x, _) = tr.view(&probe, Phase::Scale);
        let sc = fit_scaler(x).map_err(|e| fold_err(fold, "scaling")(e.to_string()))?;
        let tr = tr.with_x(
            apply_scaler(&sc, &tr.x).map_err(|e| fold_err(fold, "scaling")(e.to_string()))?,
        );
        let te = te.with_x(
            apply_scaler(&sc, &te.x).map_err(|e| fold_err(fold, "scaling")(e.to_string()))?,
        );
        Ok::<_, PipelineError>((tr, te))
    })();
    let (train, test) = match base {
        Ok(b) => b,
        Err(e) => return (fail_all(e), probe),
    };

    let fold_label = format!("fold{fold}");
    let scope = corpus.scope.as_str();
    let mut prepared: HashMap<SelectorKind, Result<Prepared, PipelineError>> = HashMap::new();
    let mut shared: HashMap<(SelectorKind, ModelKind), SharedFitness> = HashMap::new();
    let mut inner_cache: HashMap<(SelectorKind, ModelKind), InnerSets> = HashMap::new();

    // Grid first, so later tuners mostly hit the shared fitness cache.
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by_key(|&i| {
        (
            cells[i].selector,
            cells[i].model,
            cells[i].tuner != TunerKind::Grid,
            i,
        )
    });
    let mut results: Vec<Option<Result<FoldOutcome, PipelineError>>> = vec![None; cells.len()];

    for &ci in &order {
        let cell = cells[ci];
        let prep = prepared.entry(cell.selector).or_insert_with(|| {
            let (x, y) = train.view(&probe, Phase::Select);
            let subset = feature_selection::select(cell.selector, x, y, &cfg.selector_cfg)
                .map_err(|e| fold_err(fold, "feature selection")(e.to_string()))?;
            let mut warnings: Vec<String> =
                subset.warnings.iter().map(|w| format!("{w:?}")).collect();
            let tr = Rows {
                x: subset.apply(&train.x),
                y: train.y.clone(),
                source: train.source.clone(),
            };
            let te = Rows {
                x: subset.apply(&test.x),
                y: test.y.clone(),
                source: test.source.clone(),
            };
            let tr = if corpus.pre_split_fit.is_some() {
                tr
            } else {
                let acfg = AdasynConfig {
                    seed: seed::derive(
                        cfg.seed,
                        &[scope, cell.selector.as_str(), &fold_label, "adasyn"],
                    ),
                    ..cfg.adasyn.clone()
                };
                let (x, y) = tr.view(&probe, Phase::Resample);
                let r =
                    adasyn(x, y, &acfg).map_err(|e| fold_err(fold, "resampling")(e.to_string()))?;
                if let Some(w) = r.warning {
                    warnings.push(format!("{w:?}"));
                }
                let mut source = tr.source.clone();
                source.resize(r.y.len(), None);
                Rows {
                    x: r.x,
                    y: r.y,
                    source,
                }
            };
            Ok(Prepared {
                subset,
                train: tr,
                test: te,
                warnings,
            })
        });
        let prep = match prep {
            Ok(p) => &*p,
            Err(e) => {
                results[ci] = Some(Err(e.clone()));
                continue;
            }
        };
        let path = [
            scope,
            cell.selector.as_str(),
            cell.model.as_str(),
            fold_label.as_str(),
        ];
        let originals = train.y.len();
        let (sets, inner_warning) = inner_cache
            .entry((cell.selector, cell.model))
            .or_insert_with(|| {
                let own = prep.train.select(&(0..originals).collect::<Vec<_>>());
                let s = seed::derive(cfg.seed, &[&path[..], &["inner"]].concat());
                let plan = match stratified_folds(&own.y, cfg.inner_folds, s) {
                    Ok(plan) => plan,
                    Err(e) => return (Vec::new(), Some(format!("inner CV infeasible: {e}"))),
                };
                let mut sets = Vec::with_capacity(plan.k());
                for f in 0..plan.k() {
                    let (tr, va) = plan.split(f).expect("in range");
                    let (tr, va) = (own.select(&tr), own.select(&va));
                    let tr = if corpus.pre_split_fit.is_some() {
                        tr
                    } else {
                        let acfg = AdasynConfig {
                            seed: seed::derive(
                                cfg.seed,
                                &[&path[..], &["inner", &format!("adasyn{f}")]].concat(),
                            ),
                            ..cfg.adasyn.clone()
                        };
                        match adasyn(&tr.x, &tr.y, &acfg) {
                            Ok(r) => {
                                let mut source = tr.source.clone();
                                source.resize(r.y.len(), None);
                                Rows {
                                    x: r.x,
                                    y: r.y,
                                    source,
                                }
                            }
                            Err(e) => {
                                return (Vec::new(), Some(format!("inner resampling failed: {e}")))
                            }
                        }
                    };
                    sets.push((tr, va));
                }
                (sets, None)
            })
            .clone();
        let inner = InnerCv {
            sets,
            model: cell.model,
            model_seed: seed::derive(cfg.seed, &[&path[..], &["fitness"]].concat()),
        };
        let sh = shared.entry((cell.selector, cell.model)).or_default();
        if cell.tuner != TunerKind::None {
            probe.record(Phase::Tune, &prep.train.source);
        }
        let outcome = (|| {
            // Standalone cost: seconds of every fitness evaluation this
            // tuner requested, cached or not.
            let (point, search, tune_seconds) = tuned_point(cfg, scope, cell, fold, &inner, sh)?;
            let params: ModelParams = params_from_point(cell.model, &point)
                .map_err(|e| fold_err(fold, "parameters")(e.to_string()))?
                .with_seed(seed::derive(cfg.seed, &[&path[..], &["final"]].concat()));
            let (x, y) = prep.train.view(&probe, Phase::Train);
            let t = Instant::now();
            let model = params
                .train(x, y)
                .map_err(|e| fold_err(fold, "training")(e.to_string()))?;
            let train_seconds = t.elapsed().as_secs_f64();
            let t = Instant::now();
            let pred = model
                .predict(&prep.test.x)
                .map_err(|e| fold_err(fold, "prediction")(e.to_string()))?;
            let test_seconds = t.elapsed().as_secs_f64();
            probe.record(Phase::Predict, &prep.test.source);
            let cm = confusion(&prep.test.y, &pred)
                .map_err(|e| fold_err(fold, "evaluation")(e.to_string()))?;
            let mut metrics = evaluation::metrics(&cm)
                .map_err(|e| fold_err(fold, "evaluation")(e.to_string()))?;
            let own = Rows {
                x: prep
                    .train
                    .x
                    .select_rows(&(0..originals).collect::<Vec<_>>()),
                y: prep.train.y[..originals].to_vec(),
                source: prep.train.source[..originals].to_vec(),
            };
            metrics.train_accuracy = accuracy_on(&model, &own);
            metrics.train_seconds = train_seconds;
            metrics.test_seconds = test_seconds;
            metrics.tune_seconds = tune_seconds;
            let mut warnings = prep.warnings.clone();
            warnings.extend(inner_warning.clone());
            Ok(FoldOutcome {
                fold,
                metrics,
                params: point,
                features: prep.subset.indices.clone(),
                evals: search.as_ref().map_or(0, |s| s.evals),
                best_fitness: search.as_ref().map(|s| s.fitness),
                history: search
                    .as_ref()
                    .map_or_else(Vec::new, |s| s.history.iter().map(|h| h.accuracy).collect()),
                warnings,
                leakage: LeakageSummary::default(),
            })
        })();
        results[ci] = Some(outcome);
    }
    let leakage = probe.summary(&test_sources);
    let results = results
        .into_iter()
        .map(|r| {
            r.expect("every cell visited").map(|mut o| {
                o.leakage = leakage;
                o
            })
        })
        .collect();
    (results, probe)
}

/// Scope name used in seed paths and reports.
pub fn scope_name(cfg: &ExperimentConfig, d: &Dataset) -> String {
    if cfg.pool {
        POOLED_SCOPE.to_string()
    } else {
        d.provenance()
            .first()
            .map_or_else(|| "dataset".to_string(), |p| p.tag())
    }
}

/// Outer fold plan for a scope.
pub fn fold_plan(cfg: &ExperimentConfig, scope: &str, y: &[u8]) -> Result<FoldPlan, PipelineError> {
    stratified_folds(y, cfg.k_folds, seed::derive(cfg.seed, &[scope, "folds"]))
        .map_err(|e| PipelineError::Data(format!("{scope}: {e}")))
}

/// One fold of the single cell named by `cfg`, with its leakage probe.
pub fn run_fold_probed(
    cfg: &ExperimentConfig,
    data: &Dataset,
    plan: &FoldPlan,
    fold: usize,
) -> Result<(FoldOutcome, LeakageProbe), PipelineError> {
    let corpus = Corpus::from_dataset(scope_name(cfg, data), data);
    let cell = CellSpec {
        selector: cfg.selector,
        model: cfg.model,
        tuner: cfg.tuner,
    };
    let (mut r, probe) = run_fold_cells(cfg, &corpus, plan, fold, &[cell]);
    r.pop().expect("one cell").map(|o| (o, probe))
}

/// One fold of the single cell named by `cfg`.
pub fn run_fold(
    cfg: &ExperimentConfig,
    data: &Dataset,
    plan: &FoldPlan,
    fold: usize,
) -> Result<FoldOutcome, PipelineError> {
    run_fold_probed(cfg, data, plan, fold).map(|(o, _)| o)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub dataset: String,
    pub selector: SelectorKind,
    pub model: ModelKind,
    pub tuner: TunerKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    /// Chosen hyperparameters as `name=value;...` (empty for defaults).
    pub params: String,
    pub features: Vec<String>,
    pub evals: usize,
    pub best_fitness: Option<FitnessScore>,
    pub history: Vec<f64>,
    pub warnings: Vec<String>,
    pub leakage: LeakageSummary,
}

/// Settings that shaped a cell, recorded with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSettings {
    pub master_seed: u64,
    pub fold_plan_seed: u64,
    pub k_folds: usize,
    pub inner_folds: usize,
    pub selector: SelectorConfig,
    pub adasyn: AdasynConfig,
    pub random_samples: usize,
    pub ga: GaConfig,
    pub global_resample: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    #[serde(flatten)]
    pub key: CellKey,
    pub status: CellStatus,
    pub error: Option<String>,
    pub report: Option<EvaluationReport>,
    pub folds: Vec<FoldRecord>,
    pub settings: CellSettings,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLedger {
    pub cells: Vec<CellRecord>,
}

impl RunLedger {
    pub fn get(
        &self,
        dataset: &str,
        selector: SelectorKind,
        model: ModelKind,
        tuner: TunerKind,
    ) -> Option<&CellRecord> {
        self.cells.iter().find(|c| {
            c.key.dataset == dataset
                && c.key.selector == selector
                && c.key.model == model
                && c.key.tuner == tuner
        })
    }

    /// One JSON object per cell, one cell per line.
    pub fn to_json_lines(&self) -> String {
        self.cells
            .iter()
            .map(|c| serde_json::to_string(c).expect("ledger serializes") + "\n")
            .collect()
    }

    pub fn from_json_lines(text: &str) -> Result<Self, serde_json::Error> {
        let cells = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Self { cells })
    }
}

/// Loads every configured dataset, pooling them or not, and removes
/// duplicate rows within each scope.
pub fn prepare_scopes(cfg: &ExperimentConfig) -> Result<Vec<(String, Dataset)>, PipelineError> {
    if cfg.datasets.is_empty() {
        return Err(PipelineError::Invalid("no datasets given".into()));
    }
    let schema = FeatureSchema::default();
    let parts = cfg
        .datasets
        .iter()
        .map(|p| corpus::load_csv(p, &schema).map_err(|e| PipelineError::Data(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    scopes_from(cfg, parts)
}

/// Pools or separates already-loaded datasets and deduplicates each scope.
pub fn scopes_from(
    cfg: &ExperimentConfig,
    parts: Vec<Dataset>,
) -> Result<Vec<(String, Dataset)>, PipelineError> {
    if cfg.pool {
        let pooled = Dataset::pool(&parts).map_err(|e| PipelineError::Data(e.to_string()))?;
        Ok(vec![(
            POOLED_SCOPE.to_string(),
            corpus::deduplicate(&pooled),
        )])
    } else {
        Ok(parts
            .into_iter()
            .map(|d| (scope_name(cfg, &d), corpus::deduplicate(&d)))
            .collect())
    }
}

fn validate(cfg: &ExperimentConfig, spec: &MatrixSpec) -> Result<(), PipelineError> {
    if spec.is_empty() {
        return Err(PipelineError::Invalid("the matrix has no cells".into()));
    }
    for &model in &spec.models {
        let space =
            searched_space(cfg, model).map_err(|e| PipelineError::Invalid(e.to_string()))?;
        if spec.tuners.contains(&TunerKind::Grid) {
            space
                .enumerate()
                .map_err(|e| PipelineError::Invalid(e.to_string()))?;
        }
        if let Some(p) = &cfg.fixed_params {
            if spec.tuners.contains(&TunerKind::None) {
                params_from_point(model, p).map_err(|e| PipelineError::Invalid(e.to_string()))?;
            }
        }
    }
    Ok(())
}

fn settings(cfg: &ExperimentConfig, scope: &str) -> CellSettings {
    CellSettings {
        master_seed: cfg.seed,
        fold_plan_seed: seed::derive(cfg.seed, &[scope, "folds"]),
        k_folds: cfg.k_folds,
        inner_folds: cfg.inner_folds,
        selector: cfg.selector_cfg.clone(),
        adasyn: cfg.adasyn.clone(),
        random_samples: cfg.random_samples,
        ga: cfg.ga.clone(),
        global_resample: cfg.global_resample,
    }
}

/// Runs every (selector, model, tuner) cell of `spec` on each scope. Cells
/// that fail are recorded as failed; the rest still run.
pub fn run_matrix_on(
    cfg: &ExperimentConfig,
    spec: &MatrixSpec,
    scopes: &[(String, Dataset)],
) -> Result<RunLedger, PipelineError> {
    validate(cfg, spec)?;
    let mut cells = Vec::with_capacity(spec.len());
    for &selector in &spec.selectors {
        for &model in &spec.models {
            for &tuner in &spec.tuners {
                cells.push(CellSpec {
                    selector,
                    model,
                    tuner,
                });
            }
        }
    }
    let mut ledger = RunLedger::default();
    for (scope, data) in scopes {
        let mut corpus = Corpus::from_dataset(scope.clone(), data);
        let record = |cell: &CellSpec, status, error, report, folds| CellRecord {
            key: CellKey {
                dataset: scope.clone(),
                selector: cell.selector,
                model: cell.model,
                tuner: cell.tuner,
            },
            status,
            error,
            report,
            folds,
            settings: settings(cfg, scope),
        };
        if cfg.global_resample {
            corpus = match corpus.globally_resampled(cfg) {
                Ok(c) => c,
                Err(e) => {
                    for c in &cells {
                        ledger.cells.push(record(
                            c,
                            CellStatus::Failed,
                            Some(e.to_string()),
                            None,
                            Vec::new(),
                        ));
                    }
                    continue;
                }
            };
        }
        let plan = match fold_plan(cfg, scope, &corpus.rows.y) {
            Ok(p) => p,
            Err(e) => {
                for c in &cells {
                    ledger.cells.push(record(
                        c,
                        CellStatus::Failed,
                        Some(e.to_string()),
                        None,
                        Vec::new(),
                    ));
                }
                continue;
            }
        };
        let per_fold: Vec<Vec<Result<FoldOutcome, PipelineError>>> = (0..plan.k())
            .into_par_iter()
            .map(|fold| {
                log::info!("{scope}: fold {}/{}", fold + 1, plan.k());
                run_fold_cells(cfg, &corpus, &plan, fold, &cells).0
            })
            .collect();
        let names = corpus.schema.names();
        for (ci, cell) in cells.iter().enumerate() {
            let mut folds = Vec::new();
            let mut metrics = Vec::new();
            let mut error = None;
            for results in &per_fold {
                match &results[ci] {
                    Ok(o) => {
                        metrics.push(o.metrics.clone());
                        folds.push(FoldRecord {
                            fold: o.fold,
                            params: o.params.key(),
                            features: o.features.iter().map(|&j| names[j].clone()).collect(),
                            evals: o.evals,
                            best_fitness: o.best_fitness,
                            history: o.history.clone(),
                            warnings: o.warnings.clone(),
                            leakage: o.leakage,
                        });
                    }
                    Err(e) => {
                        error.get_or_insert_with(|| e.to_string());
                    }
                }
            }
            let rec = match error {
                Some(e) => record(cell, CellStatus::Failed, Some(e), None, folds),
                None => record(cell, CellStatus::Ok, None, aggregate(&metrics).ok(), folds),
            };
            ledger.cells.push(rec);
        }
    }
    Ok(ledger)
}

/// Loads the configured data and runs the matrix.
pub fn run_matrix(cfg: &ExperimentConfig, spec: &MatrixSpec) -> Result<RunLedger, PipelineError> {
    validate(cfg, spec)?;
    let scopes = prepare_scopes(cfg)?;
    run_matrix_on(cfg, spec, &scopes)
}
