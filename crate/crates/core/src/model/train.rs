//! Adam optimizer, the mini-batch training loop with early stopping on
//! validation AUC, and the hyperparameter grid sweep.

use rand::seq::SliceRandom;

use crate::dataset::{to_batch, SentenceInstance};
use crate::error::{Error, Result};
use crate::eval::{auc, partition_fold, split_cvot, split_lopo, SplitScheme};
use crate::model::backward::{backward, check_finite};
use crate::model::forward::{forward, predict, Mode};
use crate::model::{loss, ModelConfig, ModelGrads, ModelParams, TrainTask, BN_MOMENTUM};
use crate::rng::stream_rng;

/// Hyperparameter grid, swept in tie-break priority order:
/// hidden size ascending, head count ascending, learning rate ascending.
pub const HP_GRID_HIDDEN: [usize; 2] = [16, 32];
pub const HP_GRID_HEADS: [usize; 2] = [4, 8];
pub const HP_GRID_LR: [f64; 3] = [1e-4, 1e-3, 1e-2];

/// Adam with bias correction; state tensors mirror the learnables.
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u32,
    m: ModelGrads,
    v: ModelGrads,
}

impl Adam {
    pub fn new(config: &ModelConfig) -> Self {
        Adam {
            lr: config.lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: ModelGrads::zeros(config),
            v: ModelGrads::zeros(config),
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &mut ModelGrads) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        let mut p_views = params.learnables_mut();
        let g_views = grads.learnables_mut();
        let mut m_views = self.m.learnables_mut();
        let mut v_views = self.v.learnables_mut();
        for i in 0..p_views.len() {
            let p = &mut p_views[i].1;
            let g = &g_views[i].1;
            let m = &mut m_views[i].1;
            let v = &mut v_views[i].1;
            for j in 0..p.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                p[j] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_auc: f64,
    pub stopped_early: bool,
}

/// Labels for one task over a set of instances, aligned with
/// [`predict`]'s score order.
fn task_labels(instances: &[&SentenceInstance], task: TrainTask) -> Vec<bool> {
    match task {
        TrainTask::Sentence => instances.iter().map(|i| i.sentence_label() > 0.5).collect(),
        TrainTask::Token => instances
            .iter()
            .flat_map(|i| i.word_labels().into_iter().map(|y| y > 0.5))
            .collect(),
    }
}

/// Eval-mode scores for a whole set, batched.
pub(crate) fn score_set(
    config: &ModelConfig,
    params: &ModelParams,
    instances: &[&SentenceInstance],
    task: TrainTask,
) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for chunk in instances.chunks(config.batch_size.max(1)) {
        let batch = to_batch(chunk, config.t_max, config.d)?;
        out.extend(predict(config, params, &batch, task)?);
    }
    Ok(out)
}

/// Mini-batch training with early stopping: stop after `patience` epochs
/// without a strict improvement in validation AUC, and return the
/// parameters from the best epoch.
pub fn train(
    config: &ModelConfig,
    train_set: &[SentenceInstance],
    val_set: &[SentenceInstance],
    task: TrainTask,
) -> Result<(ModelParams, TrainHistory)> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Config("training and validation sets must be non-empty".into()));
    }
    if config.max_epochs == 0 {
        return Err(Error::Config("max_epochs must be at least 1".into()));
    }
    let mut params = ModelParams::init(config)?;
    let mut adam = Adam::new(config);
    let val_refs: Vec<&SentenceInstance> = val_set.iter().collect();
    let val_labels = task_labels(&val_refs, task);

    let mut history = TrainHistory {
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_auc: f64::NEG_INFINITY,
        stopped_early: false,
    };
    let mut best_params = params.clone();
    let mut since_best = 0usize;

    for epoch in 0..config.max_epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut rng = stream_rng(config.seed, 0xE000 + epoch as u64);
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut loss_batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let items: Vec<&SentenceInstance> = chunk.iter().map(|&i| &train_set[i]).collect();
            let batch = to_batch(&items, config.t_max, config.d)?;
            let trace = forward(config, &params, &batch, Mode::Train)?;
            loss_sum += loss(&trace, &batch, task);
            loss_batches += 1;
            let mut grads = backward(config, &params, &batch, &trace, task)?;
            check_finite(&mut grads)?;
            adam.step(&mut params, &mut grads);
            // Running statistics track the batch statistics the trace
            // was normalized with.
            for j in 0..config.h {
                params.running_mean[j] =
                    (1.0 - BN_MOMENTUM) * params.running_mean[j] + BN_MOMENTUM * trace.bn_mean[j];
                params.running_var[j] =
                    (1.0 - BN_MOMENTUM) * params.running_var[j] + BN_MOMENTUM * trace.bn_var[j];
            }
        }

        let scores = score_set(config, &params, &val_refs, task)?;
        let val_auc = auc(&scores, &val_labels)?;
        history.epochs.push(EpochStats {
            epoch,
            train_loss: loss_sum / loss_batches.max(1) as f64,
            val_auc,
        });
        if val_auc > history.best_val_auc {
            history.best_val_auc = val_auc;
            history.best_epoch = epoch;
            best_params = params.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    Ok((best_params, history))
}

/// One grid-sweep entry: validation AUC per split scheme and their mean.
#[derive(Debug, Clone)]
pub struct GridTrial {
    pub h: usize,
    pub heads: usize,
    pub lr: f64,
    pub scheme_auc: Vec<(SplitScheme, f64)>,
    pub mean_auc: f64,
}

/// Sweep the 2x2x3 grid: one training per configuration per split scheme
/// on that scheme's first fold, selecting by mean validation AUC with
/// ties broken toward smaller hidden size, then fewer heads, then a
/// smaller learning rate (the sweep order).
pub fn grid_search(
    instances: &[SentenceInstance],
    base: &ModelConfig,
    task: TrainTask,
    k_folds: usize,
) -> Result<(ModelConfig, Vec<GridTrial>)> {
    let cvot = split_cvot(instances, k_folds, base.seed)?;
    let lopo = split_lopo(instances)?;
    let mut folds = Vec::new();
    for plan in [&cvot, &lopo] {
        folds.push((plan.scheme, partition_fold(instances, plan, 0)?));
    }

    let mut trials = Vec::new();
    let mut best: Option<(f64, ModelConfig)> = None;
    for &h in &HP_GRID_HIDDEN {
        for &heads in &HP_GRID_HEADS {
            for &lr in &HP_GRID_LR {
                let mut config = base.clone();
                config.h = h;
                config.heads = heads;
                config.lr = lr;
                config.validate()?;
                let mut scheme_auc = Vec::new();
                let mut sum = 0.0;
                for (scheme, (train_set, val_set)) in &folds {
                    let (_, hist) = train(&config, train_set, val_set, task)?;
                    scheme_auc.push((*scheme, hist.best_val_auc));
                    sum += hist.best_val_auc;
                }
                let mean_auc = sum / folds.len() as f64;
                trials.push(GridTrial { h, heads, lr, scheme_auc, mean_auc });
                let better = match &best {
                    None => true,
                    Some((best_auc, _)) => mean_auc > *best_auc,
                };
                if better {
                    best = Some((mean_auc, config));
                }
            }
        }
    }
    let (_, config) = best.expect("grid is non-empty");
    Ok((config, trials))
}
