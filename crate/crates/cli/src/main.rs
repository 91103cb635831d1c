use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use conflictlens::eval::DEFAULT_GRID_STEP;
use conflictlens::model::Family;
use conflictlens_cli::workflows::{
    run_evaluate, run_explain, run_generate, run_pipeline, run_train, run_tune, BalanceMode, EvaluateConfig,
    ExplainConfig, GenerateConfig, PipelineConfig, SmoteOptions, ThresholdPolicy, TrainConfig, TuneConfig, VruFilter,
};

/// Classify low-PET critical events as confirmed vehicle/VRU conflicts.
#[derive(Parser)]
#[command(name = "conflictlens", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic labeled event table.
    Generate {
        #[arg(long, default_value_t = 1470)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Target share of confirmed conflicts.
        #[arg(long)]
        base_rate: Option<f64>,
        /// Generator config as JSON.
        #[arg(long)]
        generator: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split, rebalance and fit one model.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: FamilyArg,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bayesian hyperparameter search with stratified cross-validation.
    Tune {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: FamilyArg,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 50)]
        budget: usize,
        #[arg(long, default_value_t = 10)]
        n_init: usize,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        /// Output JSON file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a trained model on labeled data.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        /// model.json written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// "auto" or a fixed probability.
        #[arg(long, default_value = "auto")]
        threshold: ThresholdPolicy,
        #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
        grid_step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// SHAP attributions for a trained model.
    Explain {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 200)]
        max_rows: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Every model family with every balancing mode.
    Pipeline {
        /// Event CSV; a synthetic table is generated when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 1470)]
        n: usize,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "auto")]
        threshold: ThresholdPolicy,
        #[arg(long, default_value_t = 100)]
        shap_rows: usize,
        #[arg(long)]
        save_models: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, value_enum, default_value_t = BalanceMode::None)]
    balance: BalanceMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = VruFilter::All)]
    filter_vru: VruFilter,
    #[arg(long, default_value_t = 5)]
    smote_k: usize,
    #[arg(long, default_value_t = 1.0)]
    smote_ratio: f64,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// Model parameters as JSON.
    #[arg(long)]
    params: Option<PathBuf>,
}

impl Common {
    fn smote(&self) -> SmoteOptions {
        SmoteOptions { k: self.smote_k, ratio: self.smote_ratio }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FamilyArg {
    Logit,
    Dt,
    Rf,
    Gbdt,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Logit => Family::Logit,
            FamilyArg::Dt => Family::Dt,
            FamilyArg::Rf => Family::Rf,
            FamilyArg::Gbdt => Family::Gbdt,
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate { n, seed, base_rate, generator, out } => {
            run_generate(&GenerateConfig { n, seed, base_rate, generator, out })?;
        }
        Command::Train { data, model, common, out } => {
            let trained = run_train(&TrainConfig {
                data,
                family: model.into(),
                balance: common.balance,
                smote: common.smote(),
                seed: common.seed,
                test_fraction: common.test_fraction,
                filter: common.filter_vru,
                params: common.params,
                out,
            })?;
            print!("{}", conflictlens_cli::workflows::train_report_text(&trained.report));
        }
        Command::Tune { data, model, common, budget, n_init, folds, out } => {
            let t = run_tune(&TuneConfig {
                data,
                family: model.into(),
                balance: common.balance,
                smote: common.smote(),
                seed: common.seed,
                budget,
                n_init,
                folds,
                filter: common.filter_vru,
                params: common.params,
                out,
            })?;
            println!("best macro F1 {:.4}", t.result.best_objective);
            for (name, v) in t.result.names.iter().zip(&t.result.best_values) {
                println!("  {name} = {v}");
            }
        }
        Command::Evaluate { data, model, threshold, grid_step, out } => {
            let e = run_evaluate(&EvaluateConfig { data, model, out, threshold, grid_step })?;
            print!("{}", e.report.to_text());
        }
        Command::Explain { data, model, max_rows, out } => {
            let s = run_explain(&ExplainConfig { data, model, out: out.clone(), max_rows })?;
            println!("explained {} rows into {}", s.attributions.phi.len(), out.display());
        }
        Command::Pipeline { data, n, common, threshold, shap_rows, save_models, out } => {
            let c = run_pipeline(&PipelineConfig {
                data,
                n,
                seed: common.seed,
                filter: common.filter_vru,
                threshold,
                test_fraction: common.test_fraction,
                smote: common.smote(),
                shap_rows,
                save_models,
                params: common.params,
                out,
            })?;
            print!("{}", conflictlens_cli::workflows::comparison_text(&c));
            return Ok(c.failures.is_empty());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CONFLICTLENS_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
