//! Recording ingestion and epoch preprocessing.
//!
//! The preprocessing chain turns a continuous multi-channel recording into
//! clean word epochs:
//!
//! ```text
//! re-reference (avg mastoids) -> DC offset removal -> 0.5-30 Hz zero-phase
//! band-pass -> epoch extraction [-200, +750) ms -> amplitude screen
//! (> 100 uV rejected, at the native rate) -> decimation to 500 Hz ->
//! baseline correction (-200..0 ms)
//! ```
//!
//! Amplitude screening runs before decimation so short-lived peaks cannot
//! slip between kept samples; epochs are extracted before the screen
//! because the screen's unit is the epoch.

pub mod filter;

use std::collections::HashMap;
use std::sync::Arc;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use filter::ZeroPhaseBandpass;

/// Epoch span relative to word onset, half-open: `[-200, +750)` ms.
pub const EPOCH_PRE_MS: f64 = 200.0;
pub const EPOCH_POST_MS: f64 = 750.0;
/// Target rate after decimation.
pub const TARGET_RATE_HZ: f64 = 500.0;
/// Pass band of the main filter.
pub const BAND_LOW_HZ: f64 = 0.5;
pub const BAND_HIGH_HZ: f64 = 30.0;
/// Amplitude screen threshold; strictly-greater comparison.
pub const ARTIFACT_THRESHOLD_UV: f64 = 100.0;

/// Word-level stimulus category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WordType {
    Answer,
    SemanticRelated,
    Ordinary,
}

impl WordType {
    pub const ALL: [WordType; 3] = [WordType::Answer, WordType::SemanticRelated, WordType::Ordinary];

    pub fn as_str(&self) -> &'static str {
        match self {
            WordType::Answer => "answer",
            WordType::SemanticRelated => "semantic_related",
            WordType::Ordinary => "ordinary",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "answer" => Ok(WordType::Answer),
            "semantic_related" => Ok(WordType::SemanticRelated),
            "ordinary" => Ok(WordType::Ordinary),
            other => Err(Error::Parse(format!("unknown word_type '{other}'"))),
        }
    }
}

/// Sentence-level relevance category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SentenceRelevance {
    PerfectlyRelevant,
    Relevant,
    Irrelevant,
}

impl SentenceRelevance {
    pub fn as_str(&self) -> &'static str {
        match self {
            SentenceRelevance::PerfectlyRelevant => "perfectly_relevant",
            SentenceRelevance::Relevant => "relevant",
            SentenceRelevance::Irrelevant => "irrelevant",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "perfectly_relevant" => Ok(SentenceRelevance::PerfectlyRelevant),
            "relevant" => Ok(SentenceRelevance::Relevant),
            "irrelevant" => Ok(SentenceRelevance::Irrelevant),
            other => Err(Error::Parse(format!("unknown sentence_relevance '{other}'"))),
        }
    }
}

/// Label attached to one word presentation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WordLabel {
    pub trial_id: u32,
    pub word_index: u16,
    pub word_type: WordType,
    pub relevance: SentenceRelevance,
    pub participant_id: String,
}

/// Trigger kinds recorded in the session trigger table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TriggerCode {
    Fixation,
    WordOnset,
}

impl TriggerCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TriggerCode::Fixation => "fixation",
            TriggerCode::WordOnset => "word_onset",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fixation" => Ok(TriggerCode::Fixation),
            "word_onset" => Ok(TriggerCode::WordOnset),
            other => Err(Error::Parse(format!("unknown trigger code '{other}'"))),
        }
    }
}

/// One entry of the trigger table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerEvent {
    pub sample_index: usize,
    pub code: TriggerCode,
    pub trial_id: u32,
    /// Present for word-onset triggers only.
    pub word_index: Option<u16>,
}

/// Continuous multi-channel recording with its trigger and label tables.
#[derive(Debug, Clone)]
pub struct SessionRecording {
    pub participant_id: String,
    pub rate_hz: f64,
    pub channel_names: Arc<Vec<String>>,
    /// channels x samples, microvolts.
    pub data: Array2<f64>,
    pub triggers: Vec<TriggerEvent>,
    pub labels: Vec<WordLabel>,
}

impl SessionRecording {
    /// Structural validation: unique channels, in-range triggers, finite data.
    pub fn validate(&self) -> Result<()> {
        if self.rate_hz <= 0.0 {
            return Err(Error::Data(format!("non-positive sampling rate {}", self.rate_hz)));
        }
        if self.channel_names.len() != self.data.nrows() {
            return Err(Error::Shape(format!(
                "{} channel names but {} data rows",
                self.channel_names.len(),
                self.data.nrows()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for name in self.channel_names.iter() {
            if !seen.insert(name) {
                return Err(Error::Data(format!("duplicate channel name '{name}'")));
            }
        }
        let n = self.data.ncols();
        for t in &self.triggers {
            if t.sample_index >= n {
                return Err(Error::Data(format!(
                    "trigger at sample {} outside recording of {} samples",
                    t.sample_index, n
                )));
            }
            if t.code == TriggerCode::WordOnset && t.word_index.is_none() {
                return Err(Error::Data(format!(
                    "word-onset trigger at sample {} lacks a word_index",
                    t.sample_index
                )));
            }
        }
        if !self.data.iter().all(|v| v.is_finite()) {
            return Err(Error::Data("recording contains non-finite samples".into()));
        }
        Ok(())
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channel_names.iter().position(|c| c == name)
    }
}

/// One word epoch: channels x samples around a single word onset.
#[derive(Debug, Clone)]
pub struct EpochMatrix {
    /// channels x samples, microvolts.
    pub data: Array2<f64>,
    pub rate_hz: f64,
    /// Time of the first sample relative to word onset, in ms.
    pub t0_ms: f64,
    pub channel_names: Arc<Vec<String>>,
    pub label: WordLabel,
}

impl EpochMatrix {
    /// Index of the sample closest to `t_ms` (relative to onset).
    pub fn sample_at_ms(&self, t_ms: f64) -> usize {
        let idx = (t_ms - self.t0_ms) * self.rate_hz / 1000.0;
        idx.round().max(0.0) as usize
    }

    /// Half-open sample range covering `[start_ms, end_ms)`.
    pub fn window_range(&self, start_ms: f64, end_ms: f64) -> Result<std::ops::Range<usize>> {
        let n = self.data.ncols();
        let start = ((start_ms - self.t0_ms) * self.rate_hz / 1000.0).round() as i64;
        let end = ((end_ms - self.t0_ms) * self.rate_hz / 1000.0).round() as i64;
        if start < 0 || end > n as i64 || start >= end {
            return Err(Error::Config(format!(
                "window {start_ms}..{end_ms} ms outside epoch span ({} samples from {} ms)",
                n, self.t0_ms
            )));
        }
        Ok(start as usize..end as usize)
    }

    pub fn peak_abs_uv(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Subtracts the average of the two mastoid channels from every channel.
pub fn rereference_to_mastoids(rec: &SessionRecording) -> Result<SessionRecording> {
    let a1 = rec
        .channel_index("A1")
        .ok_or_else(|| Error::Config("mastoid channel A1 missing from montage".into()))?;
    let a2 = rec
        .channel_index("A2")
        .ok_or_else(|| Error::Config("mastoid channel A2 missing from montage".into()))?;
    let reference = (&rec.data.row(a1) + &rec.data.row(a2)) * 0.5;
    let mut data = rec.data.clone();
    for mut row in data.rows_mut() {
        row -= &reference;
    }
    Ok(SessionRecording { data, ..rec.clone() })
}

/// Removes each channel's whole-recording mean (DC offset).
pub fn remove_dc_offset(rec: &SessionRecording) -> SessionRecording {
    let mut data = rec.data.clone();
    for mut row in data.rows_mut() {
        let mean = row.mean().unwrap_or(0.0);
        row -= mean;
    }
    SessionRecording { data, ..rec.clone() }
}

/// Applies the zero-phase band-pass to every channel.
pub fn bandpass_filter(rec: &SessionRecording, low_hz: f64, high_hz: f64) -> Result<SessionRecording> {
    let filt = ZeroPhaseBandpass::design(low_hz, high_hz, rec.rate_hz)?;
    let mut data = rec.data.clone();
    for mut row in data.rows_mut() {
        let x: Vec<f64> = row.to_vec();
        let y = filt.filtfilt(&x);
        for (dst, src) in row.iter_mut().zip(y) {
            *dst = src;
        }
    }
    Ok(SessionRecording { data, ..rec.clone() })
}

/// Report of epochs dropped because their trigger sat too close to an edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedTrigger {
    pub sample_index: usize,
    pub trial_id: u32,
    pub word_index: u16,
}

/// Cuts one epoch per word-onset trigger, attaching labels from the
/// session's label table. Triggers without room for the full span are
/// skipped and reported, not errors.
pub fn extract_epochs(rec: &SessionRecording) -> Result<(Vec<EpochMatrix>, Vec<SkippedTrigger>)> {
    let pre = (EPOCH_PRE_MS * rec.rate_hz / 1000.0).round() as usize;
    let post = (EPOCH_POST_MS * rec.rate_hz / 1000.0).round() as usize;
    let n = rec.data.ncols();

    let mut label_map: HashMap<(u32, u16), &WordLabel> = HashMap::new();
    for l in &rec.labels {
        label_map.insert((l.trial_id, l.word_index), l);
    }

    let mut epochs = Vec::new();
    let mut skipped = Vec::new();
    for t in &rec.triggers {
        if t.code != TriggerCode::WordOnset {
            continue;
        }
        let wi = t.word_index.expect("validated: word onsets carry word_index");
        if t.sample_index < pre || t.sample_index + post > n {
            skipped.push(SkippedTrigger {
                sample_index: t.sample_index,
                trial_id: t.trial_id,
                word_index: wi,
            });
            continue;
        }
        let label = label_map.get(&(t.trial_id, wi)).ok_or_else(|| {
            Error::Data(format!("no label for trial {} word {}", t.trial_id, wi))
        })?;
        let start = t.sample_index - pre;
        let data = rec.data.slice(ndarray::s![.., start..t.sample_index + post]).to_owned();
        epochs.push(EpochMatrix {
            data,
            rate_hz: rec.rate_hz,
            t0_ms: -EPOCH_PRE_MS,
            channel_names: rec.channel_names.clone(),
            label: (*label).clone(),
        });
    }
    Ok((epochs, skipped))
}

/// Partitions epochs by the amplitude screen: rejected iff any sample
/// exceeds `threshold_uv` in magnitude (strictly).
pub fn reject_artifacts(
    epochs: Vec<EpochMatrix>,
    threshold_uv: f64,
) -> (Vec<EpochMatrix>, Vec<EpochMatrix>) {
    epochs.into_iter().partition(|e| e.peak_abs_uv() <= threshold_uv)
}

/// Integer-factor decimation of an epoch; the input must already be
/// band-limited below the target Nyquist (the 30 Hz filter guarantees it).
pub fn downsample_epoch(e: &EpochMatrix, target_hz: f64) -> Result<EpochMatrix> {
    if e.rate_hz == target_hz {
        return Ok(e.clone());
    }
    let factor = e.rate_hz / target_hz;
    if factor.fract() != 0.0 || factor < 1.0 {
        return Err(Error::Config(format!(
            "decimation {} -> {} Hz is not an integer factor",
            e.rate_hz, target_hz
        )));
    }
    let step = factor as usize;
    let data = e.data.slice(ndarray::s![.., ..;step]).to_owned();
    Ok(EpochMatrix {
        data,
        rate_hz: target_hz,
        t0_ms: e.t0_ms,
        channel_names: e.channel_names.clone(),
        label: e.label.clone(),
    })
}

/// Subtracts each channel's mean over `[start_ms, end_ms)`.
pub fn baseline_correct(e: &EpochMatrix, start_ms: f64, end_ms: f64) -> Result<EpochMatrix> {
    let range = e.window_range(start_ms, end_ms)?;
    let baseline = e.data.slice(ndarray::s![.., range]).mean_axis(Axis(1)).expect("non-empty window");
    let mut data = e.data.clone();
    for (mut row, b) in data.rows_mut().into_iter().zip(baseline.iter()) {
        row -= *b;
    }
    Ok(EpochMatrix { data, ..e.clone() })
}

/// Summary of preprocessing one session.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub participant_id: String,
    pub total_word_triggers: usize,
    pub kept: usize,
    /// (trial_id, word_index, peak microvolts) for rejected epochs.
    pub rejected: Vec<(u32, u16, f64)>,
    pub skipped: Vec<SkippedTrigger>,
}

/// Full preprocessing chain from continuous recording to clean epochs.
pub fn preprocess_session(rec: &SessionRecording) -> Result<(Vec<EpochMatrix>, PreprocessReport)> {
    rec.validate()?;
    let rec = rereference_to_mastoids(rec)?;
    let rec = remove_dc_offset(&rec);
    let rec = bandpass_filter(&rec, BAND_LOW_HZ, BAND_HIGH_HZ)?;
    let (epochs, skipped) = extract_epochs(&rec)?;
    let total = epochs.len();
    let (kept, rejected) = reject_artifacts(epochs, ARTIFACT_THRESHOLD_UV);
    let rejected_info: Vec<(u32, u16, f64)> = rejected
        .iter()
        .map(|e| (e.label.trial_id, e.label.word_index, e.peak_abs_uv()))
        .collect();
    let mut cleaned = Vec::with_capacity(kept.len());
    for e in kept {
        let e = downsample_epoch(&e, TARGET_RATE_HZ)?;
        cleaned.push(baseline_correct(&e, -EPOCH_PRE_MS, 0.0)?);
    }
    let report = PreprocessReport {
        participant_id: rec.participant_id.clone(),
        total_word_triggers: total,
        kept: cleaned.len(),
        rejected: rejected_info,
        skipped,
    };
    Ok((cleaned, report))
}
