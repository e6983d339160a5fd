//! Command-line interface: `inspect`, `run` and `matrix`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or parse error.

use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::classifiers::ModelKind;
use crate::corpus::{self, FeatureSchema, SummaryRow};
use crate::feature_selection::SelectorKind;
use crate::pipeline::{self, emit_reports, CellRecord, CellStatus, ExperimentConfig, MatrixSpec};
use crate::search::{Domain, TunerKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "faultforge",
    version,
    about = "Software fault prediction experiments on CK-metric datasets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Summarize datasets: instances, defective instances and defect rate
    Inspect(InspectArgs),
    /// Run one (selector, model, tuner) cell with cross-validation
    Run(RunArgs),
    /// Run every combination of selectors, models and tuners
    Matrix(MatrixArgs),
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Dataset CSV files
    #[arg(required = true, value_name = "PATH")]
    pub paths: Vec<PathBuf>,
    /// Also write the summary as CSV to this file
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
    /// Compare counts with the reference table of the 19 PROMISE versions
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Dataset CSV files
    #[arg(long = "dataset", value_name = "PATH", num_args = 1.., action = ArgAction::Append)]
    pub datasets: Vec<PathBuf>,
    /// Pool all datasets into one corpus (false: run each file separately)
    #[arg(long, value_name = "BOOL", default_value_t = true, action = ArgAction::Set)]
    pub pool: bool,
    /// Outer cross-validation folds
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Inner cross-validation folds used by tuner fitness
    #[arg(long, default_value_t = 3)]
    pub inner_folds: usize,
    /// Master seed; every random stream derives from it
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads (default: available cores)
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory
    #[arg(long, env = "FAULTFORGE_OUT", default_value = "faultforge-out")]
    pub out: PathBuf,
    /// Key = value configuration file; flags given explicitly override it
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Features kept by RFE and MI
    #[arg(long, default_value_t = 10)]
    pub fs_k: usize,
    /// Inverse L1 penalty strength for L1 selection
    #[arg(long, default_value_t = 1.0)]
    pub fs_c: f64,
    /// Maximum equal-frequency bins for MI
    #[arg(long, default_value_t = 10)]
    pub fs_bins: usize,
    /// Non-improving CFS expansions before stopping
    #[arg(long, default_value_t = 5)]
    pub fs_patience: usize,
    /// Samples drawn by random search
    #[arg(long, default_value_t = 30)]
    pub tuner_budget: usize,
    /// GA population size
    #[arg(long, default_value_t = 20)]
    pub ga_pop: usize,
    /// GA generations
    #[arg(long, default_value_t = 15)]
    pub ga_gens: usize,
    /// ADASYN neighbours
    #[arg(long, default_value_t = 5)]
    pub adasyn_k: usize,
    /// KNN imputer neighbours
    #[arg(long, default_value_t = 5)]
    pub imputer_k: usize,
    /// Oversample the whole corpus before splitting (leaky ablation)
    #[arg(long)]
    pub global_resample: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Classifier: rf, lr or svm
    #[arg(long, default_value = "rf")]
    pub model: ModelKind,
    /// Feature selector: none, rfe, l1, mi or cfs
    #[arg(long = "fs", default_value = "none")]
    pub selector: SelectorKind,
    /// Tuner: none, grid, random or ga
    #[arg(long, default_value = "none")]
    pub tuner: TunerKind,
    /// Fixed hyperparameters for untuned runs, e.g. "C=10;penalty=l1"
    #[arg(long, value_name = "POINT")]
    pub params: Option<String>,
    /// Replace a search dimension: NAME=v1,v2,... or NAME=log:lo:hi
    #[arg(long = "space", value_name = "NAME=DOMAIN", action = ArgAction::Append)]
    pub space: Vec<String>,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Feature selectors to cross
    #[arg(long, value_delimiter = ',', default_value = "rfe,l1,mi,cfs")]
    pub selectors: Vec<SelectorKind>,
    /// Classifiers to cross
    #[arg(long, value_delimiter = ',', default_value = "rf,lr,svm")]
    pub models: Vec<ModelKind>,
    /// Tuners to cross
    #[arg(long, value_delimiter = ',', default_value = "grid,random,ga")]
    pub tuners: Vec<TunerKind>,
}

/// Whether a flag was given on the command line or through the environment.
fn explicit(m: &ArgMatches, id: &str) -> bool {
    matches!(
        m.value_source(id),
        Some(ValueSource::CommandLine | ValueSource::EnvVariable)
    )
}

fn build_config(
    common: &CommonArgs,
    m: &ArgMatches,
    spec: &mut MatrixSpec,
) -> Result<ExperimentConfig, String> {
    let mut cfg = match &common.config {
        Some(path) => {
            let (cfg, file_spec) = pipeline::load_config(path).map_err(|e| e.to_string())?;
            *spec = file_spec;
            cfg
        }
        None => ExperimentConfig::default(),
    };
    let from_file = common.config.is_some();
    let take = |id: &str| !from_file || explicit(m, id);
    if take("datasets") && !common.datasets.is_empty() {
        cfg.datasets = common.datasets.clone();
    }
    if take("pool") {
        cfg.pool = common.pool;
    }
    if take("folds") {
        cfg.k_folds = common.folds;
    }
    if take("inner_folds") {
        cfg.inner_folds = common.inner_folds;
    }
    if take("seed") {
        cfg.seed = common.seed;
    }
    if take("out") {
        cfg.out = common.out.clone();
    }
    if take("fs_k") {
        cfg.selector_cfg.target_count = common.fs_k;
    }
    if take("fs_c") {
        cfg.selector_cfg.l1_strength = common.fs_c;
    }
    if take("fs_bins") {
        cfg.selector_cfg.mi_bins = common.fs_bins;
    }
    if take("fs_patience") {
        cfg.selector_cfg.cfs_patience = common.fs_patience;
    }
    if take("tuner_budget") {
        cfg.random_samples = common.tuner_budget;
    }
    if take("ga_pop") {
        cfg.ga.population = common.ga_pop;
    }
    if take("ga_gens") {
        cfg.ga.generations = common.ga_gens;
    }
    if take("adasyn_k") {
        cfg.adasyn.k_neighbors = common.adasyn_k;
    }
    if take("imputer_k") {
        cfg.imputer_k = common.imputer_k;
    }
    if common.global_resample {
        cfg.global_resample = true;
    }
    Ok(cfg)
}

fn configure_threads(jobs: Option<usize>) {
    if let Some(n) = jobs {
        // Fails only if a global pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn summary_line(c: &CellRecord) -> String {
    let head = format!(
        "{} {} {} {}",
        c.key.dataset, c.key.model, c.key.selector, c.key.tuner
    );
    match (&c.report, c.status) {
        (Some(r), CellStatus::Ok) => format!(
            "{head} accuracy={:.4}±{:.4} precision={:.4} recall={:.4} f1={:.4}±{:.4}",
            r.accuracy.mean, r.accuracy.std, r.precision.mean, r.recall.mean, r.f1.mean, r.f1.std
        ),
        _ => format!(
            "{head} FAILED: {}",
            c.error.as_deref().unwrap_or("unknown error")
        ),
    }
}

fn execute(cfg: &ExperimentConfig, spec: &MatrixSpec) -> i32 {
    let ledger = match pipeline::run_matrix(cfg, spec) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILURE;
        }
    };
    if let Err(e) = emit_reports(&ledger, &cfg.out) {
        eprintln!("error: {e}");
        return EXIT_FAILURE;
    }
    let mut failed = 0;
    for c in &ledger.cells {
        println!("{}", summary_line(c));
        if c.status == CellStatus::Failed {
            eprintln!(
                "error: cell {} {} {} failed: {}",
                c.key.model,
                c.key.selector,
                c.key.tuner,
                c.error.as_deref().unwrap_or("")
            );
            failed += 1;
        }
    }
    println!("reports written to {}", cfg.out.display());
    if failed > 0 {
        EXIT_FAILURE
    } else {
        EXIT_OK
    }
}

fn cmd_inspect(args: &InspectArgs) -> i32 {
    let schema = FeatureSchema::default();
    let mut rows: Vec<SummaryRow> = Vec::new();
    for path in &args.paths {
        match corpus::load_csv(path, &schema) {
            Ok(d) => rows.extend(corpus::summarize(&d)),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        }
    }
    for r in &rows {
        println!("{r}");
    }
    let mut code = EXIT_OK;
    if args.check {
        let mismatches = corpus::check_against_reference(&rows);
        for (tag, got, want) in &mismatches {
            eprintln!(
                "mismatch: {tag} has {} instances / {} defective, reference {} / {}",
                got.0, got.1, want.0, want.1
            );
        }
        if !mismatches.is_empty() {
            code = EXIT_FAILURE;
        }
    }
    if let Some(path) = &args.csv {
        if let Err(e) = write_summary_csv(path, &rows) {
            eprintln!("error: {}: {e}", path.display());
            return EXIT_FAILURE;
        }
    }
    code
}

fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["project", "instances", "defective", "rate"])?;
    for r in rows {
        w.write_record([
            r.project.clone(),
            r.instances.to_string(),
            r.defective.to_string(),
            format!("{:.3}", r.rate),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_run(args: &RunArgs, m: &ArgMatches) -> i32 {
    let mut spec = MatrixSpec::default();
    let mut cfg = match build_config(&args.common, m, &mut spec) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let from_file = args.common.config.is_some();
    if !from_file || explicit(m, "model") {
        cfg.model = args.model;
    }
    if !from_file || explicit(m, "selector") {
        cfg.selector = args.selector;
    }
    if !from_file || explicit(m, "tuner") {
        cfg.tuner = args.tuner;
    }
    if let Some(p) = &args.params {
        match crate::search::parse_point(p) {
            Ok(point) => cfg.fixed_params = Some(point),
            Err(e) => {
                eprintln!("error: --params: {e}");
                return EXIT_USAGE;
            }
        }
    }
    for s in &args.space {
        let Some((name, dom)) = s.split_once('=') else {
            eprintln!("error: --space expects NAME=DOMAIN, got '{s}'");
            return EXIT_USAGE;
        };
        match Domain::parse(dom) {
            Ok(d) => {
                cfg.space_overrides.retain(|(n, _)| n != name);
                cfg.space_overrides.push((name.to_string(), d));
            }
            Err(e) => {
                eprintln!("error: --space: {e}");
                return EXIT_USAGE;
            }
        }
    }
    configure_threads(args.common.jobs);
    execute(&cfg, &MatrixSpec::single(&cfg))
}

fn cmd_matrix(args: &MatrixArgs, m: &ArgMatches) -> i32 {
    let mut spec = MatrixSpec::default();
    let cfg = match build_config(&args.common, m, &mut spec) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let from_file = args.common.config.is_some();
    if !from_file || explicit(m, "selectors") {
        spec.selectors = args.selectors.clone();
    }
    if !from_file || explicit(m, "models") {
        spec.models = args.models.clone();
    }
    if !from_file || explicit(m, "tuners") {
        spec.tuners = args.tuners.clone();
    }
    configure_threads(args.common.jobs);
    execute(&cfg, &spec)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return EXIT_USAGE;
        }
    };
    let sub = matches
        .subcommand()
        .map(|(_, m)| m)
        .expect("subcommand required");
    match &cli.command {
        Command::Inspect(a) => cmd_inspect(a),
        Command::Run(a) => cmd_run(a, sub),
        Command::Matrix(a) => cmd_matrix(a, sub),
    }
}
