//! Experiment configuration and its plain-text `key = value` file form.
//!
//! ```text
//! # comments start with '#'
//! dataset = data/ant-1.7.csv, data/camel-1.6.csv
//! pool = true
//! folds = 10
//! fs = cfs
//! model = rf
//! tuner = ga
//! seed = 42
//! ga_pop = 20
//! space.n_estimators = 50,100
//! space.C = log:0.01:100
//! ```
//!
//! Recognized keys: `dataset` (repeatable, comma separated), `pool`,
//! `folds`, `fs`, `fs_k`, `fs_c`, `fs_bins`, `fs_patience`, `model`,
//! `tuner`, `tuner_budget`, `ga_pop`, `ga_gens`, `ga_tournament`,
//! `ga_crossover`, `ga_mutation`, `ga_elitism`, `adasyn_k`, `imputer_k`,
//! `inner_folds`, `seed`, `out`, `jobs`, `global_resample`, `params`,
//! `space.<name>`, `selectors`, `models`, `tuners`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::classifiers::ModelKind;
use crate::crossval::DEFAULT_FOLDS;
use crate::feature_selection::{SelectorConfig, SelectorKind};
use crate::preprocess::DEFAULT_IMPUTER_K;
use crate::resample::AdasynConfig;
use crate::search::{parse_point, Domain, GaConfig, ParamPoint, TunerKind, DEFAULT_RANDOM_SAMPLES};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_INNER_FOLDS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub datasets: Vec<PathBuf>,
    /// Pool every dataset into one corpus; otherwise each file runs alone.
    pub pool: bool,
    pub k_folds: usize,
    pub inner_folds: usize,
    pub selector: SelectorKind,
    pub selector_cfg: SelectorConfig,
    pub model: ModelKind,
    /// Parameters for untuned runs; unspecified ones keep their defaults.
    pub fixed_params: Option<ParamPoint>,
    /// Replacement domains for dimensions of the default search space.
    pub space_overrides: Vec<(String, Domain)>,
    pub tuner: TunerKind,
    pub random_samples: usize,
    pub ga: GaConfig,
    pub adasyn: AdasynConfig,
    pub imputer_k: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Oversample the whole corpus once before splitting (leaks by design
    /// of the ablation; the leakage probe reports it).
    pub global_resample: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            pool: true,
            k_folds: DEFAULT_FOLDS,
            inner_folds: DEFAULT_INNER_FOLDS,
            selector: SelectorKind::None,
            selector_cfg: SelectorConfig::default(),
            model: ModelKind::Rf,
            fixed_params: None,
            space_overrides: Vec::new(),
            tuner: TunerKind::None,
            random_samples: DEFAULT_RANDOM_SAMPLES,
            ga: GaConfig::default(),
            adasyn: AdasynConfig::default(),
            imputer_k: DEFAULT_IMPUTER_K,
            seed: DEFAULT_SEED,
            out: PathBuf::from("faultforge-out"),
            global_resample: false,
        }
    }
}

/// Which cells a matrix run covers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub selectors: Vec<SelectorKind>,
    pub models: Vec<ModelKind>,
    pub tuners: Vec<TunerKind>,
}

impl Default for MatrixSpec {
    /// The 36-cell matrix: four selectors, three models, three tuners.
    fn default() -> Self {
        Self {
            selectors: SelectorKind::SELECTORS.to_vec(),
            models: ModelKind::ALL.to_vec(),
            tuners: vec![TunerKind::Grid, TunerKind::Random, TunerKind::Ga],
        }
    }
}

impl MatrixSpec {
    pub fn single(cfg: &ExperimentConfig) -> Self {
        Self {
            selectors: vec![cfg.selector],
            models: vec![cfg.model],
            tuners: vec![cfg.tuner],
        }
    }

    pub fn len(&self) -> usize {
        self.selectors.len() * self.models.len() * self.tuners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn parse_list<T: std::str::FromStr<Err = String>>(v: &str) -> Result<Vec<T>, String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(T::from_str)
        .collect()
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("expected a boolean, got '{v}'")),
    }
}

fn num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.parse()
        .map_err(|_| format!("cannot parse '{v}' as a number"))
}

/// Applies one `key = value` setting to `cfg` (and `spec` for matrix keys).
pub fn apply_setting(
    cfg: &mut ExperimentConfig,
    spec: &mut MatrixSpec,
    key: &str,
    value: &str,
) -> Result<(), String> {
    let v = value.trim();
    if let Some(dim) = key.strip_prefix("space.") {
        let domain = Domain::parse(v).map_err(|e| e.to_string())?;
        cfg.space_overrides.retain(|(n, _)| n != dim);
        cfg.space_overrides.push((dim.to_string(), domain));
        return Ok(());
    }
    match key {
        "dataset" => cfg.datasets.extend(
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(PathBuf::from),
        ),
        "pool" => cfg.pool = parse_bool(v)?,
        "folds" => cfg.k_folds = num(v)?,
        "inner_folds" => cfg.inner_folds = num(v)?,
        "fs" => cfg.selector = v.parse()?,
        "fs_k" => cfg.selector_cfg.target_count = num(v)?,
        "fs_c" => cfg.selector_cfg.l1_strength = num(v)?,
        "fs_bins" => cfg.selector_cfg.mi_bins = num(v)?,
        "fs_patience" => cfg.selector_cfg.cfs_patience = num(v)?,
        "model" => cfg.model = v.parse()?,
        "tuner" => cfg.tuner = v.parse()?,
        "tuner_budget" => cfg.random_samples = num(v)?,
        "ga_pop" => cfg.ga.population = num(v)?,
        "ga_gens" => cfg.ga.generations = num(v)?,
        "ga_tournament" => cfg.ga.tournament_size = num(v)?,
        "ga_crossover" => cfg.ga.crossover_rate = num(v)?,
        "ga_mutation" => cfg.ga.mutation_rate = num(v)?,
        "ga_elitism" => cfg.ga.elitism = num(v)?,
        "adasyn_k" => cfg.adasyn.k_neighbors = num(v)?,
        "imputer_k" => cfg.imputer_k = num(v)?,
        "seed" => cfg.seed = num(v)?,
        "out" => cfg.out = PathBuf::from(v),
        "global_resample" => cfg.global_resample = parse_bool(v)?,
        "params" => cfg.fixed_params = Some(parse_point(v).map_err(|e| e.to_string())?),
        "selectors" => spec.selectors = parse_list(v)?,
        "models" => spec.models = parse_list(v)?,
        "tuners" => spec.tuners = parse_list(v)?,
        other => return Err(format!("unknown key '{other}'")),
    }
    Ok(())
}

/// Parses a configuration file on top of the defaults.
pub fn parse_config(text: &str) -> Result<(ExperimentConfig, MatrixSpec), PipelineError> {
    let mut cfg = ExperimentConfig::default();
    let mut spec = MatrixSpec::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| PipelineError::Config {
            line: i + 1,
            message: format!("expected key = value, got '{line}'"),
        })?;
        apply_setting(&mut cfg, &mut spec, k.trim(), v).map_err(|message| {
            PipelineError::Config {
                line: i + 1,
                message,
            }
        })?;
    }
    Ok((cfg, spec))
}

pub fn load_config(path: &Path) -> Result<(ExperimentConfig, MatrixSpec), PipelineError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}
