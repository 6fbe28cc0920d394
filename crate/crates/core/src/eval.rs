//! Ranking metrics, cross-validation split plans, and the evaluation
//! orchestrator that trains and scores a model per fold with per-fold
//! feature standardization.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baseline::{aggregate_sentence_score, untrained_scores, LogisticScorer};
use crate::dataset::{scale_instances, to_batch, SentenceInstance};
use crate::error::{Error, Result};
use crate::features::{FeatureScaler, FEATURE_DIM};
use crate::model::{self, ModelConfig, TrainTask};
use crate::rng::{derive_seed, stream_rng};

/// How validation folds are carved out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitScheme {
    /// Cross-validation over tasks: every participant's sentences for a
    /// held-out question land in the validation fold.
    Cvot,
    /// Leave-one-participant-out.
    Lopo,
}

impl SplitScheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            SplitScheme::Cvot => "cvot",
            SplitScheme::Lopo => "lopo",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cvot" => Ok(SplitScheme::Cvot),
            "lopo" => Ok(SplitScheme::Lopo),
            other => Err(Error::Parse(format!("unknown split scheme '{other}'"))),
        }
    }
}

/// What is being scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    /// Rank words by answer probability.
    AnswerExtraction,
    /// Rank sentences by relevance.
    SentenceClassification,
}

impl Task {
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::AnswerExtraction => "extraction",
            Task::SentenceClassification => "classification",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "extraction" => Ok(Task::AnswerExtraction),
            "classification" => Ok(Task::SentenceClassification),
            other => Err(Error::Parse(format!("unknown task '{other}'"))),
        }
    }

    pub fn train_task(&self) -> TrainTask {
        match self {
            Task::AnswerExtraction => TrainTask::Token,
            Task::SentenceClassification => TrainTask::Sentence,
        }
    }
}

/// Scoring model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    Uercm,
    Logistic,
    Untrained,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Uercm => "uercm",
            ModelKind::Logistic => "logistic",
            ModelKind::Untrained => "untrained",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "uercm" => Ok(ModelKind::Uercm),
            "logistic" => Ok(ModelKind::Logistic),
            "untrained" => Ok(ModelKind::Untrained),
            other => Err(Error::Parse(format!("unknown model '{other}'"))),
        }
    }
}

/// One fold: unit ids (question ids as `q<N>` for CVOT, participant ids
/// for LOPO) on each side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub train_units: Vec<String>,
    pub val_units: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub scheme: SplitScheme,
    pub folds: Vec<Fold>,
}

fn unit_of(scheme: SplitScheme, inst: &SentenceInstance) -> String {
    match scheme {
        SplitScheme::Cvot => format!("q{}", inst.question_id),
        SplitScheme::Lopo => inst.participant_id.clone(),
    }
}

/// Shuffle questions with the seed and deal them into `k` validation
/// folds; the first `n mod k` folds take the extra question.
pub fn split_cvot(instances: &[SentenceInstance], k: usize, seed: u64) -> Result<SplitPlan> {
    if k < 2 {
        return Err(Error::Config(format!("cross-validation needs at least 2 folds, got {k}")));
    }
    let questions: BTreeSet<u32> = instances.iter().map(|i| i.question_id).collect();
    if questions.len() < k {
        return Err(Error::Config(format!(
            "{} questions cannot fill {} folds",
            questions.len(),
            k
        )));
    }
    let mut order: Vec<u32> = questions.into_iter().collect();
    let mut rng = stream_rng(seed, 0xC0);
    order.shuffle(&mut rng);
    let n = order.len();
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut cursor = 0usize;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let val: BTreeSet<u32> = order[cursor..cursor + size].iter().copied().collect();
        cursor += size;
        folds.push(Fold {
            train_units: order
                .iter()
                .filter(|q| !val.contains(q))
                .map(|q| format!("q{q}"))
                .collect(),
            val_units: val.iter().map(|q| format!("q{q}")).collect(),
        });
    }
    Ok(SplitPlan { scheme: SplitScheme::Cvot, folds })
}

/// One fold per participant, in sorted participant order.
pub fn split_lopo(instances: &[SentenceInstance]) -> Result<SplitPlan> {
    let participants: BTreeSet<String> =
        instances.iter().map(|i| i.participant_id.clone()).collect();
    if participants.len() < 2 {
        return Err(Error::Config(format!(
            "leave-one-participant-out needs at least 2 participants, got {}",
            participants.len()
        )));
    }
    let all: Vec<String> = participants.into_iter().collect();
    let folds = all
        .iter()
        .map(|p| Fold {
            train_units: all.iter().filter(|x| *x != p).cloned().collect(),
            val_units: vec![p.clone()],
        })
        .collect();
    Ok(SplitPlan { scheme: SplitScheme::Lopo, folds })
}

/// Split instances for one fold and standardize both sides with
/// statistics fitted on the training side only.
pub fn partition_fold(
    instances: &[SentenceInstance],
    plan: &SplitPlan,
    fold: usize,
) -> Result<(Vec<SentenceInstance>, Vec<SentenceInstance>)> {
    let f = plan
        .folds
        .get(fold)
        .ok_or_else(|| Error::Config(format!("fold {fold} out of range")))?;
    let train_units: BTreeSet<&String> = f.train_units.iter().collect();
    let val_units: BTreeSet<&String> = f.val_units.iter().collect();
    if let Some(shared) = train_units.intersection(&val_units).next() {
        return Err(Error::Leakage(format!(
            "unit {shared} appears on both sides of fold {fold}"
        )));
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for inst in instances {
        let unit = unit_of(plan.scheme, inst);
        let in_train = train_units.contains(&unit);
        let in_val = val_units.contains(&unit);
        match (in_train, in_val) {
            (true, true) => {
                return Err(Error::Leakage(format!(
                    "unit {unit} appears on both sides of fold {fold}"
                )))
            }
            (true, false) => train.push(inst.clone()),
            (false, true) => val.push(inst.clone()),
            (false, false) => {}
        }
    }
    if train.is_empty() || val.is_empty() {
        return Err(Error::Config(format!(
            "fold {fold} leaves an empty side (train {}, validation {})",
            train.len(),
            val.len()
        )));
    }
    let train_words: Vec<_> = train.iter().flat_map(|i| i.features.clone()).collect();
    let scaler = FeatureScaler::fit(&train_words)?;
    Ok((scale_instances(&train, &scaler)?, scale_instances(&val, &scaler)?))
}

/// Area under the ROC curve via the rank-sum formulation with midranks
/// for ties.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Metric(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Metric("non-finite score".into()));
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Metric(format!(
            "degenerate label set ({n_pos} positive, {n_neg} negative)"
        )));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite"));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // 1-based midrank for the tie block [i, j].
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &which in &idx[i..=j] {
            if labels[which] {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let np = n_pos as f64;
    let nn = n_neg as f64;
    Ok((rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn))
}

/// Mean average precision over queries of (score, relevant) candidates.
/// Candidates are ranked by descending score; ties keep candidate order.
pub fn mean_average_precision(queries: &[Vec<(f64, bool)>]) -> Result<f64> {
    if queries.is_empty() {
        return Err(Error::Metric("no queries".into()));
    }
    let mut total = 0.0;
    for (qi, cands) in queries.iter().enumerate() {
        let n_rel = cands.iter().filter(|(_, r)| *r).count();
        if n_rel == 0 {
            return Err(Error::Metric(format!("query {qi} has no relevant candidate")));
        }
        if cands.iter().any(|(s, _)| !s.is_finite()) {
            return Err(Error::Metric("non-finite score".into()));
        }
        let mut order: Vec<usize> = (0..cands.len()).collect();
        order.sort_by(|&a, &b| cands[b].0.partial_cmp(&cands[a].0).expect("finite"));
        let mut hits = 0usize;
        let mut ap = 0.0;
        for (pos, &c) in order.iter().enumerate() {
            if cands[c].1 {
                hits += 1;
                ap += hits as f64 / (pos + 1) as f64;
            }
        }
        total += ap / n_rel as f64;
    }
    Ok(total / queries.len() as f64)
}

/// One pooled prediction.
#[derive(Debug, Clone)]
struct Prediction {
    score: f64,
    label: bool,
    participant: String,
    question: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub n_train_sentences: usize,
    pub n_val_sentences: usize,
    pub auc: f64,
}

/// Full evaluation outcome; `auc`/`map` are micro (pooled over folds),
/// `macro_auc` averages per-fold AUC, and the deltas compare against the
/// mean of `reference_draws` random-score redraws on the same pooled
/// labels. `folds` stays last so the TOML rendering keeps every scalar
/// ahead of the fold tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub scheme: SplitScheme,
    pub model: ModelKind,
    pub seed: u64,
    pub n_instances: usize,
    pub auc: f64,
    pub macro_auc: f64,
    pub map: Option<f64>,
    pub reference_auc: f64,
    pub delta_auc: f64,
    pub reference_map: Option<f64>,
    pub delta_map: Option<f64>,
    pub folds: Vec<FoldOutcome>,
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub scheme: SplitScheme,
    pub task: Task,
    pub model: ModelKind,
    pub seed: u64,
    /// CVOT fold count; ignored for LOPO.
    pub k_folds: usize,
    /// Override the swept defaults; `t_max`/`d`/`seed` are still managed
    /// per fold.
    pub model_config: Option<ModelConfig>,
    pub reference_draws: usize,
}

impl EvalOptions {
    pub fn new(scheme: SplitScheme, task: Task, model: ModelKind, seed: u64) -> Self {
        EvalOptions {
            scheme,
            task,
            model,
            seed,
            k_folds: 10,
            model_config: None,
            reference_draws: 1000,
        }
    }
}

/// Carve an early-stop validation subset out of a fold's training side,
/// grouped by question so no question straddles the boundary.
fn inner_split(
    train: Vec<SentenceInstance>,
    seed: u64,
    stream: u64,
) -> Result<(Vec<SentenceInstance>, Vec<SentenceInstance>)> {
    let questions: BTreeSet<u32> = train.iter().map(|i| i.question_id).collect();
    if questions.len() < 2 {
        return Err(Error::Config(
            "need at least two training questions to carve an early-stop split".into(),
        ));
    }
    let mut order: Vec<u32> = questions.into_iter().collect();
    let mut rng = stream_rng(seed, stream);
    order.shuffle(&mut rng);
    let n_val = (order.len() / 5).max(1);
    let val_q: BTreeSet<u32> = order[..n_val].iter().copied().collect();
    let (val, fit): (Vec<_>, Vec<_>) =
        train.into_iter().partition(|i| val_q.contains(&i.question_id));
    Ok((fit, val))
}

fn word_matrix(instances: &[SentenceInstance]) -> (Array2<f64>, Vec<f64>) {
    let n: usize = instances.iter().map(|i| i.len()).sum();
    let mut x = Array2::<f64>::zeros((n, FEATURE_DIM));
    let mut y = Vec::with_capacity(n);
    let mut row = 0;
    for inst in instances {
        let labels = inst.word_labels();
        for (w, feat) in inst.features.iter().enumerate() {
            for j in 0..FEATURE_DIM {
                x[[row, j]] = feat.values[j];
            }
            y.push(labels[w]);
            row += 1;
        }
    }
    (x, y)
}

/// Score one fold's validation instances. Returns one score per word
/// (extraction) or per sentence (classification), in instance order.
fn score_fold(
    opts: &EvalOptions,
    fold_idx: usize,
    train: Vec<SentenceInstance>,
    val: &[SentenceInstance],
    t_max: usize,
) -> Result<Vec<f64>> {
    let n_scores = match opts.task {
        Task::AnswerExtraction => val.iter().map(|i| i.len()).sum(),
        Task::SentenceClassification => val.len(),
    };
    match opts.model {
        ModelKind::Untrained => {
            let mut rng = stream_rng(opts.seed, 0xF000 + fold_idx as u64);
            Ok(untrained_scores(n_scores, &mut rng))
        }
        ModelKind::Logistic => {
            let (x, y) = word_matrix(&train);
            let scorer = LogisticScorer::fit(&x, &y, 500, 0.1, 1e-3)?;
            let mut out = Vec::with_capacity(n_scores);
            for inst in val {
                let (xv, _) = word_matrix(std::slice::from_ref(inst));
                let word_scores = scorer.predict(&xv);
                match opts.task {
                    Task::AnswerExtraction => out.extend(word_scores),
                    Task::SentenceClassification => {
                        out.push(aggregate_sentence_score(&word_scores)?)
                    }
                }
            }
            Ok(out)
        }
        ModelKind::Uercm => {
            let (fit_set, stop_set) = inner_split(train, opts.seed, 0xA000 + fold_idx as u64)?;
            let mut config = match &opts.model_config {
                Some(c) => c.clone(),
                None => ModelConfig::default_for(FEATURE_DIM, t_max, 0),
            };
            config.d = FEATURE_DIM;
            config.t_max = t_max;
            config.seed = derive_seed(opts.seed, 0x300 + fold_idx as u64);
            let (params, _) = model::train(&config, &fit_set, &stop_set, opts.task.train_task())?;
            let mut out = Vec::with_capacity(n_scores);
            for chunk in val.chunks(config.batch_size) {
                let refs: Vec<&SentenceInstance> = chunk.iter().collect();
                let batch = to_batch(&refs, config.t_max, config.d)?;
                out.extend(model::predict(
                    &config,
                    &params,
                    &batch,
                    opts.task.train_task(),
                )?);
            }
            Ok(out)
        }
    }
}

/// Evaluate under a caller-supplied split plan.
pub fn evaluate_with_plan(
    instances: &[SentenceInstance],
    plan: &SplitPlan,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if instances.is_empty() {
        return Err(Error::Config("no instances to evaluate".into()));
    }
    let t_max = instances.iter().map(|i| i.len()).max().unwrap();
    let mut pooled: Vec<Prediction> = Vec::new();
    let mut folds = Vec::new();
    let mut seen: BTreeSet<(String, u32)> = BTreeSet::new();
    for fold_idx in 0..plan.folds.len() {
        let (train, val) = partition_fold(instances, plan, fold_idx)?;
        for inst in &val {
            if !seen.insert((inst.participant_id.clone(), inst.trial_id)) {
                return Err(Error::Leakage(format!(
                    "trial {} of {} validated in more than one fold",
                    inst.trial_id, inst.participant_id
                )));
            }
        }
        let n_train = train.len();
        let scores = score_fold(opts, fold_idx, train, &val, t_max)?;
        let mut fold_preds = Vec::new();
        let mut cursor = 0usize;
        for inst in &val {
            match opts.task {
                Task::AnswerExtraction => {
                    for y in inst.word_labels() {
                        fold_preds.push(Prediction {
                            score: scores[cursor],
                            label: y > 0.5,
                            participant: inst.participant_id.clone(),
                            question: inst.question_id,
                        });
                        cursor += 1;
                    }
                }
                Task::SentenceClassification => {
                    fold_preds.push(Prediction {
                        score: scores[cursor],
                        label: inst.sentence_label() > 0.5,
                        participant: inst.participant_id.clone(),
                        question: inst.question_id,
                    });
                    cursor += 1;
                }
            }
        }
        debug_assert_eq!(cursor, scores.len());
        let fold_scores: Vec<f64> = fold_preds.iter().map(|p| p.score).collect();
        let fold_labels: Vec<bool> = fold_preds.iter().map(|p| p.label).collect();
        folds.push(FoldOutcome {
            fold: fold_idx,
            n_train_sentences: n_train,
            n_val_sentences: val.len(),
            auc: auc(&fold_scores, &fold_labels)?,
        });
        pooled.extend(fold_preds);
    }

    let scores: Vec<f64> = pooled.iter().map(|p| p.score).collect();
    let labels: Vec<bool> = pooled.iter().map(|p| p.label).collect();
    let micro_auc = auc(&scores, &labels)?;
    let macro_auc = folds.iter().map(|f| f.auc).sum::<f64>() / folds.len() as f64;

    let queries: Option<Vec<Vec<(f64, bool)>>> = match opts.task {
        Task::SentenceClassification => {
            let mut by_query: BTreeMap<(String, u32), Vec<(f64, bool)>> = BTreeMap::new();
            for p in &pooled {
                by_query
                    .entry((p.participant.clone(), p.question))
                    .or_default()
                    .push((p.score, p.label));
            }
            Some(by_query.into_values().collect())
        }
        Task::AnswerExtraction => None,
    };
    let map = match &queries {
        Some(q) => Some(mean_average_precision(q)?),
        None => None,
    };

    // Random-score reference on the same pooled labels.
    if opts.reference_draws == 0 {
        return Err(Error::Config("reference_draws must be at least 1".into()));
    }
    let mut ref_auc_sum = 0.0;
    let mut ref_map_sum = 0.0;
    for draw in 0..opts.reference_draws {
        let mut rng = stream_rng(opts.seed, 0xD000 + draw as u64);
        let random: Vec<f64> = (0..labels.len()).map(|_| rng.gen::<f64>()).collect();
        ref_auc_sum += auc(&random, &labels)?;
        if let Some(q) = &queries {
            let mut cursor = 0usize;
            let redrawn: Vec<Vec<(f64, bool)>> = q
                .iter()
                .map(|cands| {
                    cands
                        .iter()
                        .map(|(_, r)| {
                            let s = random[cursor % random.len()];
                            cursor += 1;
                            (s, *r)
                        })
                        .collect()
                })
                .collect();
            ref_map_sum += mean_average_precision(&redrawn)?;
        }
    }
    let reference_auc = ref_auc_sum / opts.reference_draws as f64;
    let reference_map = queries.as_ref().map(|_| ref_map_sum / opts.reference_draws as f64);

    Ok(EvalReport {
        task: opts.task,
        scheme: plan.scheme,
        model: opts.model,
        seed: opts.seed,
        n_instances: instances.len(),
        folds,
        auc: micro_auc,
        macro_auc,
        map,
        reference_auc,
        delta_auc: micro_auc - reference_auc,
        reference_map,
        delta_map: match (map, reference_map) {
            (Some(m), Some(r)) => Some(m - r),
            _ => None,
        },
    })
}

/// Build the split plan for the scheme and evaluate.
pub fn evaluate(instances: &[SentenceInstance], opts: &EvalOptions) -> Result<EvalReport> {
    let plan = match opts.scheme {
        SplitScheme::Cvot => split_cvot(instances, opts.k_folds, opts.seed)?,
        SplitScheme::Lopo => split_lopo(instances)?,
    };
    evaluate_with_plan(instances, &plan, opts)
}
