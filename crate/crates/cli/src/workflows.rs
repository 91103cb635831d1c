//! Subcommand implementations. Every function takes a plain config struct so
//! the binary and the tests drive the same code.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use conflictlens::eval::{EvaluationReport, DEFAULT_GRID_STEP};
use conflictlens::event_model::{
    labels_of, one_hot_encode, read_events_path, stratified_split, write_events_path, CriticalEvent, RecodeMap,
    VruType,
};
use conflictlens::explain::{beeswarm_csv, beeswarm_export, explain_rows, AttributionSet};
use conflictlens::imbalance::{Balance, SmoteParams};
use conflictlens::logit::FittedLogit;
use conflictlens::model::{fit_model, Family, Model, ModelParams};
use conflictlens::seed;
use conflictlens::synth::{generate_dataset, GeneratorConfig};
use conflictlens::tune::{tune_family, TuneResult};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifacts::{
    config_hash, fingerprint, read_json, write_json, write_text, ModelFile, SplitManifest, MODEL_FORMAT_VERSION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BalanceMode {
    None,
    Weights,
    Smote,
}

impl BalanceMode {
    pub const ALL: [BalanceMode; 3] = [BalanceMode::None, BalanceMode::Weights, BalanceMode::Smote];

    pub fn name(self) -> &'static str {
        match self {
            BalanceMode::None => "none",
            BalanceMode::Weights => "weights",
            BalanceMode::Smote => "smote",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoteOptions {
    pub k: usize,
    pub ratio: f64,
}

impl Default for SmoteOptions {
    fn default() -> Self {
        Self { k: 5, ratio: 1.0 }
    }
}

pub fn balance_for(mode: BalanceMode, smote: SmoteOptions, seed: u64) -> Balance {
    match mode {
        BalanceMode::None => Balance::None,
        BalanceMode::Weights => Balance::Weights,
        BalanceMode::Smote => Balance::Smote(SmoteParams {
            k_neighbors: smote.k,
            target_ratio: smote.ratio,
            seed: seed::derive(seed, "smote"),
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum VruFilter {
    All,
    Pedestrian,
}

impl VruFilter {
    pub fn apply(self, events: Vec<CriticalEvent>) -> Vec<CriticalEvent> {
        match self {
            VruFilter::All => events,
            VruFilter::Pedestrian => events.into_iter().filter(|e| e.vru_type == VruType::Pedestrian).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPolicy {
    Auto,
    Fixed(f64),
}

impl ThresholdPolicy {
    fn fixed(self) -> Option<f64> {
        match self {
            ThresholdPolicy::Auto => None,
            ThresholdPolicy::Fixed(t) => Some(t),
        }
    }
}

impl FromStr for ThresholdPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(ThresholdPolicy::Auto);
        }
        match s.parse::<f64>() {
            Ok(t) if (0.0..=1.0).contains(&t) => Ok(ThresholdPolicy::Fixed(t)),
            _ => Err(format!("expected \"auto\" or a number in [0, 1], got {s:?}")),
        }
    }
}

impl fmt::Display for ThresholdPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdPolicy::Auto => f.write_str("auto"),
            ThresholdPolicy::Fixed(t) => write!(f, "{t}"),
        }
    }
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(&Sha256::digest(&bytes)[..8]))
}

fn load_events(path: &Path) -> Result<Vec<CriticalEvent>> {
    read_events_path(path, &RecodeMap::standard()).with_context(|| format!("loading events from {}", path.display()))
}

fn load_params(path: Option<&Path>) -> Result<ModelParams> {
    match path {
        Some(p) => read_json(p),
        None => Ok(ModelParams::default()),
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

// ---------------------------------------------------------------- generate

#[derive(Debug, Clone, Serialize)]
pub struct GenerateConfig {
    pub n: usize,
    pub seed: u64,
    pub base_rate: Option<f64>,
    #[serde(skip)]
    pub generator: Option<PathBuf>,
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateMeta {
    pub config_hash: String,
    pub seed: u64,
    pub n: usize,
    pub positives: usize,
    pub generator: GeneratorConfig,
}

pub fn run_generate(cfg: &GenerateConfig) -> Result<GenerateMeta> {
    let mut generator: GeneratorConfig = match &cfg.generator {
        Some(p) => read_json(p)?,
        None => GeneratorConfig::default(),
    };
    generator = generator.with_seed(cfg.seed);
    if cfg.base_rate.is_some() {
        generator = generator.with_base_rate(cfg.base_rate);
    }
    let events = generate_dataset(&generator, cfg.n)?;
    write_events_path(&cfg.out, &events).with_context(|| format!("writing {}", cfg.out.display()))?;
    let meta = GenerateMeta {
        config_hash: config_hash(&(&generator, cfg.n)),
        seed: cfg.seed,
        n: cfg.n,
        positives: events.iter().filter(|e| e.label == Some(true)).count(),
        generator,
    };
    write_json(&meta_path(&cfg.out), &meta)?;
    info!("wrote {} events ({} positive) to {}", meta.n, meta.positives, cfg.out.display());
    Ok(meta)
}

fn meta_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

// ------------------------------------------------------------------- train

#[derive(Debug, Clone, Serialize)]
pub struct TrainConfig {
    #[serde(skip)]
    pub data: PathBuf,
    pub family: Family,
    pub balance: BalanceMode,
    pub smote: SmoteOptions,
    pub seed: u64,
    pub test_fraction: f64,
    pub filter: VruFilter,
    #[serde(skip)]
    pub params: Option<PathBuf>,
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub config_hash: String,
    pub seed: u64,
    pub family: Family,
    pub balance: BalanceMode,
    pub n_train: usize,
    pub n_test: usize,
    pub train_positives: usize,
    pub test_positives: usize,
    pub rows_after_balance: usize,
    pub logit: Option<FittedLogit>,
}

pub struct Trained {
    pub model_file: ModelFile,
    pub report: TrainReport,
    pub train: Vec<CriticalEvent>,
    pub test: Vec<CriticalEvent>,
}

/// Recode, split, rebalance the training part, encode and fit.
#[allow(clippy::too_many_arguments)]
fn train_on(
    events: &[CriticalEvent],
    family: Family,
    mode: BalanceMode,
    smote: SmoteOptions,
    params: &ModelParams,
    seed: u64,
    test_fraction: f64,
    hash: String,
) -> Result<(Trained, SplitManifest)> {
    let labels = labels_of(events)?;
    let split = stratified_split(&labels, test_fraction, seed::derive(seed, "split"))?;
    let (train, test) = split.take(events);
    let balance = balance_for(mode, smote, seed);
    let params = params.with_seed(seed);
    let encoded = balance.apply(one_hot_encode(&train, false)?)?;
    let model = fit_model(family, &encoded, &params)?;
    let columns = model.encode(&train[..1])?.column_names();
    let mut train_fingerprints: Vec<String> = train.iter().map(fingerprint).collect();
    train_fingerprints.sort();
    let report = TrainReport {
        config_hash: hash.clone(),
        seed,
        family,
        balance: mode,
        n_train: train.len(),
        n_test: test.len(),
        train_positives: train.iter().filter(|e| e.label == Some(true)).count(),
        test_positives: test.iter().filter(|e| e.label == Some(true)).count(),
        rows_after_balance: encoded.n_rows(),
        logit: match &model {
            Model::Logit(m) => Some(m.clone()),
            _ => None,
        },
    };
    let model_file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        config_hash: hash.clone(),
        seed,
        family,
        balance,
        params,
        columns,
        train_fingerprints,
        model,
    };
    let manifest = SplitManifest { config_hash: hash, seed, test_fraction, train: split.train, test: split.test };
    Ok((Trained { model_file, report, train, test }, manifest))
}

pub fn train_report_text(r: &TrainReport) -> String {
    let mut out = format!(
        "family: {}\nbalance: {}\nseed: {}\nconfig: {}\ntrain rows: {} ({} positive, {} after balancing)\ntest rows: {} ({} positive)\n",
        r.family,
        r.balance.name(),
        r.seed,
        r.config_hash,
        r.n_train,
        r.train_positives,
        r.rows_after_balance,
        r.n_test,
        r.test_positives
    );
    if let Some(m) = &r.logit {
        out.push_str("\nTerms significant at 0.05 (log-odds scale)\n");
        out.push_str(&m.significance_report(0.05));
        if m.penalized_inference {
            out.push_str("note: standard errors use the ridge-penalized information matrix\n");
        }
    }
    out
}

pub fn run_train(cfg: &TrainConfig) -> Result<Trained> {
    let events = cfg.filter.apply(load_events(&cfg.data)?);
    let params = load_params(cfg.params.as_deref())?;
    let hash = config_hash(&(cfg, file_digest(&cfg.data)?, &params));
    let (trained, manifest) =
        train_on(&events, cfg.family, cfg.balance, cfg.smote, &params, cfg.seed, cfg.test_fraction, hash)?;
    create_dir(&cfg.out)?;
    write_json(&cfg.out.join("model.json"), &trained.model_file)?;
    write_json(&cfg.out.join("split.json"), &manifest)?;
    write_events_path(&cfg.out.join("train.csv"), &trained.train)?;
    write_events_path(&cfg.out.join("test.csv"), &trained.test)?;
    write_json(&cfg.out.join("train_report.json"), &trained.report)?;
    write_text(&cfg.out.join("train_report.txt"), &train_report_text(&trained.report))?;
    info!("trained {} model into {}", cfg.family, cfg.out.display());
    Ok(trained)
}

// ---------------------------------------------------------------- evaluate

#[derive(Debug, Clone)]
pub struct EvaluateConfig {
    pub data: PathBuf,
    pub model: PathBuf,
    pub out: PathBuf,
    pub threshold: ThresholdPolicy,
    pub grid_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leakage {
    pub overlapping_rows: usize,
    pub warning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationFile {
    pub config_hash: String,
    pub seed: u64,
    pub family: Family,
    pub balance: String,
    pub threshold_policy: ThresholdPolicy,
    pub leakage: Leakage,
    pub report: EvaluationReport,
}

fn leakage(model: &ModelFile, events: &[CriticalEvent]) -> Leakage {
    let overlapping_rows =
        events.iter().filter(|e| model.train_fingerprints.binary_search(&fingerprint(e)).is_ok()).count();
    Leakage { overlapping_rows, warning: overlapping_rows > 0 }
}

fn evaluate_events(
    model: &ModelFile,
    events: &[CriticalEvent],
    threshold: ThresholdPolicy,
    grid_step: f64,
) -> Result<EvaluationFile> {
    let labels = labels_of(events)?;
    let encoded = model.model.encode(events)?;
    if encoded.column_names() != model.columns {
        bail!(conflictlens::Error::SchemaMismatch("data columns differ from the model's training columns".into()));
    }
    let p = model.model.predict_matrix(&encoded)?;
    let report = EvaluationReport::build(&labels, &p, grid_step, threshold.fixed())?;
    let leakage = leakage(model, events);
    if leakage.warning {
        warn!("{} evaluation rows also appear in the training data", leakage.overlapping_rows);
    }
    Ok(EvaluationFile {
        config_hash: model.config_hash.clone(),
        seed: model.seed,
        family: model.family,
        balance: model.balance.name().to_string(),
        threshold_policy: threshold,
        leakage,
        report,
    })
}

fn evaluation_text(e: &EvaluationFile) -> String {
    let mut out = format!(
        "family: {}\nbalance: {}\nseed: {}\nconfig: {}\nrows: {} ({} positive)\n\n",
        e.family, e.balance, e.seed, e.config_hash, e.report.n, e.report.positives
    );
    out.push_str(&e.report.to_text());
    if e.leakage.warning {
        out.push_str(&format!(
            "WARNING: {} evaluation rows were part of the training data\n",
            e.leakage.overlapping_rows
        ));
    }
    out
}

fn write_evaluation(dir: &Path, e: &EvaluationFile) -> Result<()> {
    create_dir(dir)?;
    write_json(&dir.join("evaluation.json"), e)?;
    write_text(&dir.join("evaluation.txt"), &evaluation_text(e))?;
    let r = &e.report;
    write_text(&dir.join("roc_conflict.csv"), &r.roc.positive.to_csv())?;
    write_text(&dir.join("roc_no_conflict.csv"), &r.roc.negative.to_csv())?;
    write_text(&dir.join("pr_conflict.csv"), &r.pr.positive.to_csv())?;
    write_text(&dir.join("pr_no_conflict.csv"), &r.pr.negative.to_csv())?;
    let mut sweep = String::from("threshold,macro_f1\n");
    for (t, f) in r.sweep.thresholds.iter().zip(&r.sweep.macro_f1) {
        sweep.push_str(&format!("{t},{f}\n"));
    }
    write_text(&dir.join("threshold_sweep.csv"), &sweep)
}

pub fn run_evaluate(cfg: &EvaluateConfig) -> Result<EvaluationFile> {
    let model: ModelFile = read_json(&cfg.model)?;
    let events = load_events(&cfg.data)?;
    let e = evaluate_events(&model, &events, cfg.threshold, cfg.grid_step)?;
    write_evaluation(&cfg.out, &e)?;
    Ok(e)
}

// ----------------------------------------------------------------- explain

#[derive(Debug, Clone)]
pub struct ExplainConfig {
    pub data: PathBuf,
    pub model: PathBuf,
    pub out: PathBuf,
    pub max_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapFile {
    pub config_hash: String,
    pub seed: u64,
    pub family: Family,
    /// Scale the attributions add up on.
    pub scale: String,
    pub attributions: AttributionSet,
}

fn margin_scale(family: Family) -> &'static str {
    match family {
        Family::Logit | Family::Gbdt => "log_odds",
        Family::Dt | Family::Rf => "probability",
    }
}

fn explain_events(model: &ModelFile, events: &[CriticalEvent], max_rows: usize) -> Result<ShapFile> {
    let encoded = model.model.encode(events)?;
    let rows: Vec<Vec<f64>> = encoded.rows().take(max_rows.max(1)).map(<[f64]>::to_vec).collect();
    let background: Vec<Vec<f64>> = encoded.rows().map(<[f64]>::to_vec).collect();
    let attributions = explain_rows(&model.model, encoded.column_names(), &rows, &background)?;
    Ok(ShapFile {
        config_hash: model.config_hash.clone(),
        seed: model.seed,
        family: model.family,
        scale: margin_scale(model.family).into(),
        attributions,
    })
}

fn write_shap(dir: &Path, shap: &ShapFile) -> Result<()> {
    create_dir(dir)?;
    write_json(&dir.join("shap.json"), shap)?;
    write_text(&dir.join("beeswarm.csv"), &beeswarm_csv(&beeswarm_export(&shap.attributions)))
}

pub fn run_explain(cfg: &ExplainConfig) -> Result<ShapFile> {
    let model: ModelFile = read_json(&cfg.model)?;
    let events = load_events(&cfg.data)?;
    let shap = explain_events(&model, &events, cfg.max_rows)?;
    write_shap(&cfg.out, &shap)?;
    Ok(shap)
}

// -------------------------------------------------------------------- tune

#[derive(Debug, Clone, Serialize)]
pub struct TuneConfig {
    #[serde(skip)]
    pub data: PathBuf,
    pub family: Family,
    pub balance: BalanceMode,
    pub smote: SmoteOptions,
    pub seed: u64,
    pub budget: usize,
    pub n_init: usize,
    pub folds: usize,
    pub filter: VruFilter,
    #[serde(skip)]
    pub params: Option<PathBuf>,
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneFile {
    pub config_hash: String,
    pub seed: u64,
    pub family: Family,
    pub balance: BalanceMode,
    /// Full parameter set with the best trial applied; usable as `--params`.
    pub best_params: ModelParams,
    pub result: TuneResult,
}

pub fn run_tune(cfg: &TuneConfig) -> Result<TuneFile> {
    let events = cfg.filter.apply(load_events(&cfg.data)?);
    labels_of(&events)?;
    let base = load_params(cfg.params.as_deref())?.with_seed(cfg.seed);
    let hash = config_hash(&(cfg, file_digest(&cfg.data)?, &base));
    let data = one_hot_encode(&events, false)?;
    let balance = balance_for(cfg.balance, cfg.smote, cfg.seed);
    let result = tune_family(cfg.family, &base, &balance, &data, cfg.n_init, cfg.budget, cfg.folds, cfg.seed)?;
    let best_params =
        conflictlens::tune::apply_params(cfg.family, &base, &result.names, &result.best_values)?;
    let file = TuneFile { config_hash: hash, seed: cfg.seed, family: cfg.family, balance: cfg.balance, best_params, result };
    if let Some(dir) = cfg.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_json(&cfg.out, &file)?;
    info!("best objective {:.4} after {} trials", file.result.best_objective, file.result.history.len());
    Ok(file)
}

// ---------------------------------------------------------------- pipeline

#[derive(Debug, Clone, Serialize)]
pub struct PipelineConfig {
    #[serde(skip)]
    pub data: Option<PathBuf>,
    /// Rows to generate when no data file is given.
    pub n: usize,
    pub seed: u64,
    pub filter: VruFilter,
    pub threshold: ThresholdPolicy,
    pub test_fraction: f64,
    pub smote: SmoteOptions,
    pub shap_rows: usize,
    pub save_models: bool,
    #[serde(skip)]
    pub params: Option<PathBuf>,
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: String,
    pub family: Family,
    pub balance: BalanceMode,
    pub roc_auc_macro: f64,
    pub pr_auc_macro: f64,
    pub macro_f1_at_050: f64,
    pub threshold: f64,
    pub macro_f1_at_threshold: f64,
    pub conflict_precision: f64,
    pub conflict_recall: f64,
    pub conflict_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub cell: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub config_hash: String,
    pub seed: u64,
    pub n_events: usize,
    pub cells: Vec<CellSummary>,
    pub failures: Vec<CellFailure>,
}

pub fn comparison_text(c: &Comparison) -> String {
    let mut out = format!("config: {}\nseed: {}\nevents: {}\n\n", c.config_hash, c.seed, c.n_events);
    out.push_str(&format!(
        "{:<6}  {:<8}  {:>7}  {:>6}  {:>9}  {:>9}  {:>9}  {:>9}  {:>9}  {:>6}\n",
        "Model", "Balance", "ROC AUC", "PR AUC", "F1 @0.50", "Threshold", "Macro F1", "Precision", "Recall", "F1"
    ));
    for s in &c.cells {
        out.push_str(&format!(
            "{:<6}  {:<8}  {:>7.3}  {:>6.3}  {:>9.3}  {:>9.2}  {:>9.3}  {:>9.3}  {:>9.3}  {:>6.3}\n",
            s.family.name(),
            s.balance.name(),
            s.roc_auc_macro,
            s.pr_auc_macro,
            s.macro_f1_at_050,
            s.threshold,
            s.macro_f1_at_threshold,
            s.conflict_precision,
            s.conflict_recall,
            s.conflict_f1
        ));
    }
    for f in &c.failures {
        out.push_str(&format!("FAILED {}: {}\n", f.cell, f.error));
    }
    out
}

fn run_cell(
    cfg: &PipelineConfig,
    events: &[CriticalEvent],
    params: &ModelParams,
    hash: &str,
    family: Family,
    mode: BalanceMode,
) -> Result<CellSummary> {
    let cell = format!("{}_{}", family.name(), mode.name());
    let dir = cfg.out.join(&cell);
    let cell_seed = seed::derive(cfg.seed, &cell);
    // The split uses the pipeline seed so every cell sees the same test rows.
    let labels = labels_of(events)?;
    let split = stratified_split(&labels, cfg.test_fraction, seed::derive(cfg.seed, "split"))?;
    let (train, test) = split.take(events);
    let balance = balance_for(mode, cfg.smote, cell_seed);
    let params = params.with_seed(cell_seed);
    let encoded = balance.apply(one_hot_encode(&train, false)?)?;
    let model = fit_model(family, &encoded, &params)?;
    let mut train_fingerprints: Vec<String> = train.iter().map(fingerprint).collect();
    train_fingerprints.sort();
    let model_file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        config_hash: hash.to_string(),
        seed: cell_seed,
        family,
        balance,
        params,
        columns: model.encode(&train[..1])?.column_names(),
        train_fingerprints,
        model,
    };
    let e = evaluate_events(&model_file, &test, cfg.threshold, DEFAULT_GRID_STEP)?;
    write_evaluation(&dir, &e)?;
    if cfg.save_models {
        write_json(&dir.join("model.json"), &model_file)?;
    }
    if matches!(family, Family::Rf | Family::Gbdt) && cfg.shap_rows > 0 {
        write_shap(&dir, &explain_events(&model_file, &test, cfg.shap_rows)?)?;
    }
    let r = &e.report;
    Ok(CellSummary {
        cell,
        family,
        balance: mode,
        roc_auc_macro: r.roc.macro_auc,
        pr_auc_macro: r.pr.macro_auc,
        macro_f1_at_050: r.at_default.metrics.macro_f1,
        threshold: r.at_optimized.threshold,
        macro_f1_at_threshold: r.at_optimized.metrics.macro_f1,
        conflict_precision: r.at_optimized.metrics.positive.precision,
        conflict_recall: r.at_optimized.metrics.positive.recall,
        conflict_f1: r.at_optimized.metrics.positive.f1,
    })
}

/// Runs the model family x balancing grid. Returns the comparison even when
/// cells fail; callers decide the exit status from `failures`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Comparison> {
    let (events, data_digest) = match &cfg.data {
        Some(path) => (load_events(path)?, file_digest(path)?),
        None => {
            let events = generate_dataset(&GeneratorConfig::default().with_seed(cfg.seed), cfg.n)?;
            (events, "generated".to_string())
        }
    };
    let events = cfg.filter.apply(events);
    if events.is_empty() {
        return Err(anyhow!(conflictlens::Error::EmptyDataset));
    }
    let params = load_params(cfg.params.as_deref())?;
    let hash = config_hash(&(cfg, data_digest, &params));
    create_dir(&cfg.out)?;
    let grid: Vec<(Family, BalanceMode)> =
        Family::ALL.iter().flat_map(|&f| BalanceMode::ALL.iter().map(move |&b| (f, b))).collect();
    let results: Vec<(String, Result<CellSummary>)> = grid
        .par_iter()
        .map(|&(f, b)| (format!("{}_{}", f.name(), b.name()), run_cell(cfg, &events, &params, &hash, f, b)))
        .collect();
    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for (cell, r) in results {
        match r {
            Ok(s) => cells.push(s),
            Err(e) => {
                warn!("cell {cell} failed: {e:#}");
                failures.push(CellFailure { cell, error: format!("{e:#}") });
            }
        }
    }
    let comparison = Comparison { config_hash: hash, seed: cfg.seed, n_events: events.len(), cells, failures };
    write_json(&cfg.out.join("comparison.json"), &comparison)?;
    write_text(&cfg.out.join("comparison.txt"), &comparison_text(&comparison))?;
    write_json(&cfg.out.join("failures.json"), &comparison.failures)?;
    Ok(comparison)
}
