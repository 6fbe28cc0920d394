//! `uercm train`: feature tables in, binary checkpoint and training
//! history out. A question-level holdout drives early stopping, and the
//! feature scaler is fitted on the fitting split only.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Parser;
use rand::seq::SliceRandom;

use uercm_core::dataset::{build_instances, scale_instances, SentenceInstance};
use uercm_core::error::{Error, Result};
use uercm_core::eval::Task;
use uercm_core::features::{FeatureScaler, FEATURE_DIM};
use uercm_core::model::{save_checkpoint, train, ModelConfig, TrainHistory};
use uercm_core::rng::stream_rng;

use crate::cmd::{load_feature_files, path_str};
use crate::runlock::write_run_lock;

/// Model hyperparameters shared by `train` and `evaluate`.
#[derive(Parser)]
pub struct ModelFlags {
    /// Hidden size (divisible by the head count).
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long, default_value_t = 4)]
    pub heads: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    /// Early-stop patience in epochs.
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    #[arg(long, default_value_t = 200)]
    pub max_epochs: usize,
}

impl ModelFlags {
    pub fn config(&self, d: usize, t_max: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            d,
            h: self.hidden,
            heads: self.heads,
            t_max,
            lr: self.lr,
            batch_size: self.batch_size,
            patience: self.patience,
            max_epochs: self.max_epochs,
            seed,
        }
    }
}

#[derive(Parser)]
pub struct Args {
    /// Feature CSV produced by `uercm features`. Repeatable.
    #[arg(long = "features", required = true)]
    pub features: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Training objective: extraction (per-word answer scoring) or
    /// classification (per-sentence relevance).
    #[arg(long)]
    pub task: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub model: ModelFlags,
}

/// Splits instances into fitting and early-stop sets by question id,
/// holding out one in five questions.
pub fn holdout_split(
    instances: Vec<SentenceInstance>,
    seed: u64,
) -> Result<(Vec<SentenceInstance>, Vec<SentenceInstance>)> {
    let questions: std::collections::BTreeSet<u32> =
        instances.iter().map(|i| i.question_id).collect();
    if questions.len() < 2 {
        return Err(Error::Data(
            "need at least two questions to carve an early-stop holdout".into(),
        ));
    }
    let mut order: Vec<u32> = questions.into_iter().collect();
    order.shuffle(&mut stream_rng(seed, 0x7D0));
    let n_val = (order.len() / 5).max(1);
    let held: std::collections::BTreeSet<u32> = order[..n_val].iter().copied().collect();
    let (stop, fit): (Vec<_>, Vec<_>) =
        instances.into_iter().partition(|i| held.contains(&i.question_id));
    Ok((fit, stop))
}

pub fn run(args: &Args) -> Result<()> {
    let task = Task::parse(&args.task)?;
    let words = load_feature_files(&args.features)?;
    let instances = build_instances(&words)?;
    let t_max = instances.iter().map(|i| i.len()).max().unwrap_or(1);

    let (fit, stop) = holdout_split(instances, args.seed)?;
    let fit_words: Vec<_> = fit.iter().flat_map(|i| i.features.iter().cloned()).collect();
    let scaler = FeatureScaler::fit(&fit_words)?;
    let fit = scale_instances(&fit, &scaler)?;
    let stop = scale_instances(&stop, &scaler)?;

    let config = args.model.config(FEATURE_DIM, t_max, args.seed);
    let (params, history) = train(&config, &fit, &stop, task.train_task())?;

    std::fs::create_dir_all(&args.out)?;
    let ckpt = args.out.join("model.ckpt");
    save_checkpoint(&ckpt, &config, &params)?;
    std::fs::write(args.out.join("history.csv"), history_csv(&history))?;
    println!(
        "trained on {} sentences ({} held out): best epoch {}, val AUC {:.4}{} -> {}",
        fit.len(),
        stop.len(),
        history.best_epoch,
        history.best_val_auc,
        if history.stopped_early { ", stopped early" } else { "" },
        ckpt.display()
    );

    let inputs: Vec<String> = args.features.iter().map(|p| path_str(p)).collect();
    write_run_lock(
        &args.out,
        "train",
        &[
            ("features", inputs.join(",")),
            ("task", task.as_str().to_string()),
            ("seed", args.seed.to_string()),
            ("hidden", config.h.to_string()),
            ("heads", config.heads.to_string()),
            ("lr", config.lr.to_string()),
            ("batch_size", config.batch_size.to_string()),
            ("patience", config.patience.to_string()),
            ("max_epochs", config.max_epochs.to_string()),
        ],
    )
}

fn history_csv(h: &TrainHistory) -> String {
    let mut text = String::from("epoch,train_loss,val_auc\n");
    for e in &h.epochs {
        let _ = writeln!(text, "{},{:.6},{:.6}", e.epoch, e.train_loss, e.val_auc);
    }
    text
}
