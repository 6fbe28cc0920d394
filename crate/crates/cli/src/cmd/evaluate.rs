//! `uercm evaluate`: cross-validated scoring of a model family against
//! its label-shuffle reference, written as a TOML report plus a per-fold
//! CSV.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Parser;

use uercm_core::dataset::build_instances;
use uercm_core::error::Result;
use uercm_core::eval::{evaluate, EvalOptions, EvalReport, ModelKind, SplitScheme, Task};
use uercm_core::features::FEATURE_DIM;

use crate::cmd::train::ModelFlags;
use crate::cmd::{load_feature_files, path_str};
use crate::runlock::write_run_lock;

#[derive(Parser)]
pub struct Args {
    /// Feature CSV produced by `uercm features`. Repeatable.
    #[arg(long = "features", required = true)]
    pub features: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// extraction or classification.
    #[arg(long)]
    pub task: String,
    /// cvot (question-level folds) or lopo (leave-one-participant-out).
    #[arg(long, default_value = "cvot")]
    pub scheme: String,
    /// CVOT fold count; ignored for LOPO.
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// uercm, logistic, or untrained.
    #[arg(long, default_value = "uercm")]
    pub model: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Label permutations for the chance reference.
    #[arg(long, default_value_t = 1000)]
    pub reference_draws: usize,
    #[command(flatten)]
    pub model_flags: ModelFlags,
}

pub fn run(args: &Args) -> Result<()> {
    let task = Task::parse(&args.task)?;
    let scheme = SplitScheme::parse(&args.scheme)?;
    let model = ModelKind::parse(&args.model)?;

    let words = load_feature_files(&args.features)?;
    let instances = build_instances(&words)?;

    let mut opts = EvalOptions::new(scheme, task, model, args.seed);
    opts.k_folds = args.folds;
    opts.reference_draws = args.reference_draws;
    // d/t_max/seed are managed per fold; the flags carry the rest.
    opts.model_config = Some(args.model_flags.config(FEATURE_DIM, 1, 0));

    let report = evaluate(&instances, &opts)?;

    std::fs::create_dir_all(&args.out)?;
    let toml_text = toml::to_string(&report)
        .map_err(|e| uercm_core::error::Error::Parse(format!("report serialization: {e}")))?;
    std::fs::write(args.out.join("report.toml"), toml_text)?;
    std::fs::write(args.out.join("folds.csv"), folds_csv(&report))?;

    let map_part = match (report.map, report.delta_map) {
        (Some(m), Some(d)) => format!(", MAP {m:.4} (delta {d:+.4})"),
        _ => String::new(),
    };
    println!(
        "{} {} {}: AUC {:.4} vs reference {:.4} (delta {:+.4}){} over {} folds",
        scheme.as_str(),
        task.as_str(),
        model.as_str(),
        report.auc,
        report.reference_auc,
        report.delta_auc,
        map_part,
        report.folds.len()
    );

    let inputs: Vec<String> = args.features.iter().map(|p| path_str(p)).collect();
    write_run_lock(
        &args.out,
        "evaluate",
        &[
            ("features", inputs.join(",")),
            ("task", task.as_str().to_string()),
            ("scheme", scheme.as_str().to_string()),
            ("folds", args.folds.to_string()),
            ("model", model.as_str().to_string()),
            ("seed", args.seed.to_string()),
            ("reference_draws", args.reference_draws.to_string()),
            ("hidden", args.model_flags.hidden.to_string()),
            ("heads", args.model_flags.heads.to_string()),
            ("lr", args.model_flags.lr.to_string()),
            ("batch_size", args.model_flags.batch_size.to_string()),
            ("patience", args.model_flags.patience.to_string()),
            ("max_epochs", args.model_flags.max_epochs.to_string()),
        ],
    )
}

fn folds_csv(report: &EvalReport) -> String {
    let mut text = String::from("fold,n_train_sentences,n_val_sentences,auc\n");
    for f in &report.folds {
        let _ = writeln!(
            text,
            "{},{},{},{:.6}",
            f.fold, f.n_train_sentences, f.n_val_sentences, f.auc
        );
    }
    text
}
