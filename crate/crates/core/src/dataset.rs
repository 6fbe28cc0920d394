//! Sentence-level dataset assembly: word feature vectors grouped by
//! trial, labels derived from the annotation scheme, and padding into
//! fixed-shape batches.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Array3};

use crate::error::{Error, Result};
use crate::features::{FeatureScaler, WordFeatureVector, FEATURE_DIM};
use crate::signal::{SentenceRelevance, WordType};

/// Three consecutive trials share one question.
pub fn question_id(trial_id: u32) -> u32 {
    trial_id / 3
}

/// One sentence: the surviving words of a trial in reading order, with
/// the trial's relevance label.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceInstance {
    pub participant_id: String,
    pub trial_id: u32,
    pub question_id: u32,
    pub relevance: SentenceRelevance,
    /// Per word, aligned with `features`.
    pub word_types: Vec<WordType>,
    pub features: Vec<WordFeatureVector>,
}

impl SentenceInstance {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// 1.0 iff the sentence fully answers its question.
    pub fn sentence_label(&self) -> f64 {
        if self.relevance == SentenceRelevance::PerfectlyRelevant {
            1.0
        } else {
            0.0
        }
    }

    /// Per-word answer indicators.
    pub fn word_labels(&self) -> Vec<f64> {
        self.word_types
            .iter()
            .map(|t| if *t == WordType::Answer { 1.0 } else { 0.0 })
            .collect()
    }
}

/// Group per-word feature vectors into sentences using their embedded
/// labels; order within a trial follows word_index. Enforces two label
/// invariants: one relevance per trial, and answer words only inside
/// perfectly relevant sentences.
pub fn build_instances(words: &[WordFeatureVector]) -> Result<Vec<SentenceInstance>> {
    let mut by_trial: BTreeMap<(String, u32), Vec<&WordFeatureVector>> = BTreeMap::new();
    for w in words {
        by_trial
            .entry((w.label.participant_id.clone(), w.label.trial_id))
            .or_default()
            .push(w);
    }
    let mut out = Vec::new();
    for ((participant_id, trial_id), mut items) in by_trial {
        items.sort_by_key(|w| w.label.word_index);
        for pair in items.windows(2) {
            if pair[0].label.word_index == pair[1].label.word_index {
                return Err(Error::Data(format!(
                    "duplicate word {} in trial {} of {}",
                    pair[0].label.word_index, trial_id, participant_id
                )));
            }
        }
        let relevance = items[0].label.relevance;
        let mut word_types = Vec::with_capacity(items.len());
        let mut features = Vec::with_capacity(items.len());
        for feat in items {
            if feat.label.relevance != relevance {
                return Err(Error::Data(format!(
                    "trial {} of {} carries conflicting relevance labels",
                    trial_id, participant_id
                )));
            }
            if feat.label.word_type == WordType::Answer
                && relevance != SentenceRelevance::PerfectlyRelevant
            {
                return Err(Error::Data(format!(
                    "answer word in a non-perfectly-relevant sentence (trial {} of {})",
                    trial_id, participant_id
                )));
            }
            word_types.push(feat.label.word_type);
            features.push(feat.clone());
        }
        out.push(SentenceInstance {
            participant_id,
            trial_id,
            question_id: question_id(trial_id),
            relevance,
            word_types,
            features,
        });
    }
    Ok(out)
}

/// Standardize every word vector with an already-fitted scaler.
pub fn scale_instances(
    instances: &[SentenceInstance],
    scaler: &FeatureScaler,
) -> Result<Vec<SentenceInstance>> {
    let mut out = Vec::with_capacity(instances.len());
    for inst in instances {
        let mut scaled = inst.clone();
        for f in &mut scaled.features {
            *f = scaler.apply(f);
        }
        out.push(scaled);
    }
    Ok(out)
}

/// A padded batch: zero feature rows and a false mask beyond each
/// sentence's length.
#[derive(Debug, Clone)]
pub struct TrainingBatch {
    /// B x t_max x d.
    pub x: Array3<f64>,
    /// B x t_max; true at real positions.
    pub mask: Array2<bool>,
    /// B sentence labels.
    pub y_s: Array1<f64>,
    /// B x t_max word labels (zero at padding).
    pub y_o: Array2<f64>,
}

/// Pad instances into one batch. A sentence longer than `t_max` is a
/// configuration error, not something to truncate silently.
pub fn to_batch(
    instances: &[&SentenceInstance],
    t_max: usize,
    d: usize,
) -> Result<TrainingBatch> {
    if instances.is_empty() {
        return Err(Error::Config("cannot build an empty batch".into()));
    }
    if d > FEATURE_DIM {
        return Err(Error::Config(format!(
            "model input dim {d} exceeds feature dim {FEATURE_DIM}"
        )));
    }
    let b_n = instances.len();
    let mut x = Array3::<f64>::zeros((b_n, t_max, d));
    let mut mask = Array2::<bool>::default((b_n, t_max));
    let mut y_s = Array1::<f64>::zeros(b_n);
    let mut y_o = Array2::<f64>::zeros((b_n, t_max));
    for (b, inst) in instances.iter().enumerate() {
        if inst.is_empty() {
            return Err(Error::Data(format!(
                "trial {} of {} has no surviving words",
                inst.trial_id, inst.participant_id
            )));
        }
        if inst.len() > t_max {
            return Err(Error::Config(format!(
                "sentence of {} words exceeds t_max {} (trial {} of {})",
                inst.len(),
                t_max,
                inst.trial_id,
                inst.participant_id
            )));
        }
        let labels = inst.word_labels();
        for (t, feat) in inst.features.iter().enumerate() {
            mask[[b, t]] = true;
            for j in 0..d {
                x[[b, t, j]] = feat.values[j];
            }
            y_o[[b, t]] = labels[t];
        }
        y_s[b] = inst.sentence_label();
    }
    Ok(TrainingBatch { x, mask, y_s, y_o })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::WordLabel;

    fn word(
        participant: &str,
        trial: u32,
        idx: u16,
        wt: WordType,
        rel: SentenceRelevance,
        fill: f64,
    ) -> WordFeatureVector {
        WordFeatureVector {
            values: [fill; FEATURE_DIM],
            label: WordLabel {
                trial_id: trial,
                word_index: idx,
                word_type: wt,
                relevance: rel,
                participant_id: participant.to_string(),
            },
            standardized: false,
        }
    }

    #[test]
    fn question_id_groups_triples() {
        assert_eq!(question_id(0), 0);
        assert_eq!(question_id(2), 0);
        assert_eq!(question_id(3), 1);
        assert_eq!(question_id(154), 51);
    }

    #[test]
    fn instances_group_and_sort_by_word_index() {
        use SentenceRelevance::*;
        use WordType::*;
        let words = vec![
            word("p00", 0, 2, Ordinary, PerfectlyRelevant, 2.0),
            word("p00", 0, 0, Answer, PerfectlyRelevant, 0.0),
            word("p00", 0, 1, SemanticRelated, PerfectlyRelevant, 1.0),
            word("p00", 1, 0, Ordinary, Irrelevant, 3.0),
        ];
        let inst = build_instances(&words).unwrap();
        assert_eq!(inst.len(), 2);
        assert_eq!(inst[0].trial_id, 0);
        assert_eq!(inst[0].word_types, vec![Answer, SemanticRelated, Ordinary]);
        assert_eq!(inst[0].features[0].values[0], 0.0);
        assert_eq!(inst[0].features[2].values[0], 2.0);
        assert_eq!(inst[0].sentence_label(), 1.0);
        assert_eq!(inst[0].word_labels(), vec![1.0, 0.0, 0.0]);
        assert_eq!(inst[1].sentence_label(), 0.0);
        assert_eq!(inst[1].question_id, 0);
    }

    #[test]
    fn answer_outside_perfectly_relevant_is_rejected() {
        use SentenceRelevance::*;
        use WordType::*;
        let words = vec![word("p00", 0, 0, Answer, Relevant, 0.0)];
        let err = build_instances(&words).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn conflicting_relevance_in_one_trial_is_rejected() {
        use SentenceRelevance::*;
        use WordType::*;
        let words = vec![
            word("p00", 0, 0, Ordinary, Relevant, 0.0),
            word("p00", 0, 1, Ordinary, Irrelevant, 0.0),
        ];
        assert!(build_instances(&words).is_err());
    }

    #[test]
    fn duplicate_word_index_is_rejected() {
        use SentenceRelevance::*;
        use WordType::*;
        let words = vec![
            word("p00", 0, 1, Ordinary, Relevant, 0.0),
            word("p00", 0, 1, Ordinary, Relevant, 1.0),
        ];
        assert!(build_instances(&words).is_err());
    }

    #[test]
    fn batch_padding_and_masks() {
        use SentenceRelevance::*;
        use WordType::*;
        let words = vec![
            word("p00", 0, 0, Answer, PerfectlyRelevant, 1.0),
            word("p00", 0, 1, Ordinary, PerfectlyRelevant, 2.0),
            word("p00", 1, 0, Ordinary, Irrelevant, 3.0),
        ];
        let inst = build_instances(&words).unwrap();
        let refs: Vec<&SentenceInstance> = inst.iter().collect();
        let batch = to_batch(&refs, 4, FEATURE_DIM).unwrap();
        assert_eq!(batch.x.dim(), (2, 4, FEATURE_DIM));
        assert!(batch.mask[[0, 1]] && !batch.mask[[0, 2]]);
        assert!(batch.mask[[1, 0]] && !batch.mask[[1, 1]]);
        assert_eq!(batch.x[[0, 1, 5]], 2.0);
        assert_eq!(batch.x[[0, 2, 5]], 0.0, "padding rows are zero");
        assert_eq!(batch.y_s[0], 1.0);
        assert_eq!(batch.y_s[1], 0.0);
        assert_eq!(batch.y_o[[0, 0]], 1.0);
        assert_eq!(batch.y_o[[0, 1]], 0.0);
    }

    #[test]
    fn overlong_sentence_is_a_config_error() {
        use SentenceRelevance::*;
        use WordType::*;
        let words: Vec<_> = (0..5)
            .map(|i| word("p00", 0, i, Ordinary, Relevant, 0.0))
            .collect();
        let inst = build_instances(&words).unwrap();
        let refs: Vec<&SentenceInstance> = inst.iter().collect();
        let err = to_batch(&refs, 4, FEATURE_DIM).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn scaling_preserves_structure() {
        use SentenceRelevance::*;
        use WordType::*;
        let words = vec![
            word("p00", 0, 0, Ordinary, Relevant, 1.0),
            word("p00", 0, 1, Ordinary, Relevant, 3.0),
            word("p00", 1, 0, Ordinary, Irrelevant, 5.0),
        ];
        let inst = build_instances(&words).unwrap();
        let all: Vec<WordFeatureVector> =
            inst.iter().flat_map(|i| i.features.clone()).collect();
        let scaler = FeatureScaler::fit(&all).unwrap();
        let scaled = scale_instances(&inst, &scaler).unwrap();
        assert_eq!(scaled.len(), inst.len());
        assert_eq!(scaled[0].word_types, inst[0].word_types);
        // Mean of the three scaled values per dim is zero.
        let sum: f64 = scaled
            .iter()
            .flat_map(|i| i.features.iter())
            .map(|f| f.values[0])
            .sum();
        assert!(sum.abs() < 1e-12);
    }
}
