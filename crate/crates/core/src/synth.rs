//! Synthetic EEG session generator. Each word event injects four Gaussan
//! component bumps whose amplitudes are solved so the noise-free window
//! means hit the configured targets exactly on the downsampled grid,
//! layered over 1/f noise; blink-like artifacts drive the rejection path.

use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use statrs::distribution::Normal;

use crate::error::{Error, Result};
use crate::montage::{default_channel_names, Roi, RoiMap};
use crate::rng::stream_rng;
use crate::signal::{
    SentenceRelevance, SessionRecording, TriggerCode, TriggerEvent, WordLabel, WordType,
};

/// Generation sampling rate; downstream code decimates to 500 Hz.
pub const SYNTH_RATE_HZ: f64 = 1000.0;
/// Fixation cross duration before the first word of a trial.
pub const FIXATION_MS: usize = 1000;
/// Word onset asynchrony.
pub const WORD_SOA_MS: usize = 750;
/// Silence after a trial's last word span.
pub const TRIAL_GAP_MS: usize = 250;
/// Recording padding on both ends, absorbing filter edges.
const EDGE_PAD_MS: usize = 1200;

/// Component bump centers and widths (window width / 4), ms post-onset.
const TEMPLATE_CENTERS_MS: [f64; 4] = [90.0, 220.0, 420.0, 635.0];
const TEMPLATE_SIGMAS_MS: [f64; 4] = [15.0, 50.0, 50.0, 57.5];

/// Blink artifact: amplitude far above the rejection threshold even
/// after band-passing, slow enough (40 ms sigma) to survive the 30 Hz
/// cut.
const ARTIFACT_AMP_UV: f64 = 220.0;
const ARTIFACT_SIGMA_MS: f64 = 40.0;
/// Blink center offset range within the word span, keeping its support
/// inside exactly one epoch.
const ARTIFACT_CENTER_MS: (f64, f64) = (150.0, 400.0);

// RNG stream namespaces (disjoint by construction).
const STREAM_RELEVANCE: u64 = 0x0007_0000;
const STREAM_LAYOUT: u64 = 0x0008_0000;
const STREAM_NOISE: u64 = 0x0100_0000;
const STREAM_ARTIFACT: u64 = 0x0200_0000;
const STREAM_GAIN: u64 = 0x0300_0000;

/// Component targets for one word type: the N100-P200 peak-to-peak
/// amplitude (split evenly into a negative N100 and positive P200 window
/// mean) plus N400 and P600 window means, in reference-region µV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WordEffect {
    pub n100_p200_uv: f64,
    pub n400_uv: f64,
    pub p600_uv: f64,
}

/// Injected effect structure plus noise and artifact levels. The
/// reference region is central (gain 1.0 by default); other regions
/// scale by their gain.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectSpec {
    pub answer: WordEffect,
    pub semantic_related: WordEffect,
    pub ordinary: WordEffect,
    pub roi_gains: BTreeMap<Roi, f64>,
    pub noise_sigma_uv: f64,
    pub artifact_rate: f64,
}

fn default_roi_gains() -> BTreeMap<Roi, f64> {
    BTreeMap::from([
        (Roi::Prefrontal, 0.5),
        (Roi::Frontal, 0.6),
        (Roi::Central, 1.0),
        (Roi::Parietal, 0.85),
        (Roi::LTemporal, 0.75),
        (Roi::RTemporal, 0.75),
        (Roi::Occipital, 0.4),
    ])
}

impl Default for EffectSpec {
    /// Defaults encode the reported orderings: N100-P200 amplitude
    /// answer > semantic = ordinary (approximately); N400 negativity
    /// smallest for answer, largest for ordinary; P600 positivity
    /// answer > ordinary > semantic.
    fn default() -> Self {
        EffectSpec {
            answer: WordEffect { n100_p200_uv: 6.5, n400_uv: -1.0, p600_uv: 3.5 },
            semantic_related: WordEffect { n100_p200_uv: 4.0, n400_uv: -2.0, p600_uv: 1.5 },
            ordinary: WordEffect { n100_p200_uv: 4.2, n400_uv: -3.0, p600_uv: 2.5 },
            roi_gains: default_roi_gains(),
            noise_sigma_uv: 5.0,
            artifact_rate: 0.05,
        }
    }
}

impl EffectSpec {
    /// No effects, no noise, no artifacts: a flat recording.
    pub fn zero() -> Self {
        let flat = WordEffect { n100_p200_uv: 0.0, n400_uv: 0.0, p600_uv: 0.0 };
        EffectSpec {
            answer: flat,
            semantic_related: flat,
            ordinary: flat,
            roi_gains: default_roi_gains(),
            noise_sigma_uv: 0.0,
            artifact_rate: 0.0,
        }
    }

    /// Widened between-type separations for end-to-end learning runs.
    pub fn strong() -> Self {
        EffectSpec {
            answer: WordEffect { n100_p200_uv: 9.0, n400_uv: -1.0, p600_uv: 5.0 },
            semantic_related: WordEffect { n100_p200_uv: 4.0, n400_uv: -3.0, p600_uv: 1.0 },
            ordinary: WordEffect { n100_p200_uv: 4.2, n400_uv: -5.0, p600_uv: 3.0 },
            ..EffectSpec::default()
        }
    }

    pub fn word_effect(&self, wt: WordType) -> &WordEffect {
        match wt {
            WordType::Answer => &self.answer,
            WordType::SemanticRelated => &self.semantic_related,
            WordType::Ordinary => &self.ordinary,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma_uv >= 0.0 && self.noise_sigma_uv.is_finite()) {
            return Err(Error::Config(format!(
                "noise sigma must be finite and non-negative, got {}",
                self.noise_sigma_uv
            )));
        }
        if !(0.0..=1.0).contains(&self.artifact_rate) {
            return Err(Error::Config(format!(
                "artifact rate must lie in [0, 1], got {}",
                self.artifact_rate
            )));
        }
        for roi in Roi::ALL {
            match self.roi_gains.get(&roi) {
                Some(g) if g.is_finite() && *g >= 0.0 => {}
                Some(g) => {
                    return Err(Error::Config(format!("invalid gain {} for {}", g, roi.as_str())))
                }
                None => {
                    return Err(Error::Config(format!("missing gain for region {}", roi.as_str())))
                }
            }
        }
        for wt in WordType::ALL {
            let e = self.word_effect(wt);
            if ![e.n100_p200_uv, e.n400_uv, e.p600_uv].iter().all(|v| v.is_finite()) {
                return Err(Error::Config(format!("non-finite effect for {}", wt.as_str())));
            }
        }
        Ok(())
    }
}

/// Generator parameters for one session.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_trials: usize,
    pub words_per_sentence: usize,
    pub effects: EffectSpec,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(n_trials: usize, words_per_sentence: usize, seed: u64) -> Self {
        SynthConfig { n_trials, words_per_sentence, effects: EffectSpec::default(), seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::Config("need at least one trial".into()));
        }
        if self.words_per_sentence == 0 {
            return Err(Error::Config("need at least one word per sentence".into()));
        }
        self.effects.validate()
    }

    fn trial_stride_ms(&self) -> usize {
        FIXATION_MS + self.words_per_sentence * WORD_SOA_MS + TRIAL_GAP_MS
    }

    fn total_samples(&self) -> usize {
        2 * EDGE_PAD_MS + self.n_trials * self.trial_stride_ms()
    }
}

/// A cohort: shared materials, per-participant gains and noise.
#[derive(Debug, Clone)]
pub struct CohortConfig {
    pub base: SynthConfig,
    pub n_participants: usize,
    /// Multiplicative gain spread: gain_i = 1 + jitter*uniform(-1, 1).
    pub gain_jitter: f64,
}

impl CohortConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.n_participants < 2 {
            return Err(Error::Config(format!(
                "a cohort needs at least 2 participants, got {}",
                self.n_participants
            )));
        }
        if !(self.gain_jitter >= 0.0 && self.gain_jitter < 1.0) {
            return Err(Error::Config(format!(
                "gain jitter must lie in [0, 1), got {}",
                self.gain_jitter
            )));
        }
        Ok(())
    }
}

/// Ground truth emitted alongside a session.
#[derive(Debug, Clone, PartialEq)]
pub struct WordTruth {
    pub trial_id: u32,
    pub word_index: u16,
    pub word_type: WordType,
    /// Injected component amplitudes (reference region, before gain).
    pub amplitudes: [f64; 4],
    pub artifact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth {
    pub participant_id: String,
    pub gain: f64,
    pub relevance: Vec<(u32, SentenceRelevance)>,
    pub words: Vec<WordTruth>,
}

fn gaussian(t: f64, center: f64, sigma: f64) -> f64 {
    let d = (t - center) / sigma;
    (-0.5 * d * d).exp()
}

/// Solve a 4x4 linear system by Gaussian elimination with partial
/// pivoting.
fn solve4(mut m: [[f64; 4]; 4], mut b: [f64; 4]) -> Result<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        if m[pivot][col].abs() < 1e-12 {
            return Err(Error::Config("degenerate component template system".into()));
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let mut acc = b[row];
        for k in row + 1..4 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Ok(x)
}

/// Window means of each unit bump over the canonical windows, evaluated
/// on the 2 ms grid the downsampled pipeline measures on.
fn window_mean_matrix() -> [[f64; 4]; 4] {
    let windows = crate::erp::TimeWindows::canonical();
    let bounds = [windows.n100, windows.p200, windows.n400, windows.p600];
    let mut m = [[0.0; 4]; 4];
    for (w, (start, end)) in bounds.iter().enumerate() {
        let mut t = *start;
        let mut count = 0usize;
        let mut sums = [0.0; 4];
        while t < *end {
            for v in 0..4 {
                sums[v] += gaussian(t, TEMPLATE_CENTERS_MS[v], TEMPLATE_SIGMAS_MS[v]);
            }
            count += 1;
            t += 2.0;
        }
        for v in 0..4 {
            m[w][v] = sums[v] / count as f64;
        }
    }
    m
}

/// Component amplitudes whose noise-free window means equal the targets.
/// The N100-P200 amplitude is split evenly: N100 mean -a/2, P200 mean
/// +a/2, so the measured P200-minus-N100 difference equals `a` exactly.
pub fn solve_component_amplitudes(effect: &WordEffect) -> Result<[f64; 4]> {
    let m = window_mean_matrix();
    let targets = [
        -effect.n100_p200_uv / 2.0,
        effect.n100_p200_uv / 2.0,
        effect.n400_uv,
        effect.p600_uv,
    ];
    solve4(m, targets)
}

/// Per-word-type summed template over the word span at 1 ms resolution.
fn word_template(amplitudes: &[f64; 4]) -> Vec<f64> {
    (0..WORD_SOA_MS)
        .map(|ms| {
            let t = ms as f64;
            (0..4)
                .map(|v| amplitudes[v] * gaussian(t, TEMPLATE_CENTERS_MS[v], TEMPLATE_SIGMAS_MS[v]))
                .sum()
        })
        .collect()
}

/// 1/f-amplitude noise, normalized to the requested standard deviation.
fn pink_noise(n: usize, sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if sigma == 0.0 || n == 0 {
        return vec![0.0; n];
    }
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    let n_fft = n.next_power_of_two().max(8);
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n_fft];
    for k in 1..n_fft / 2 {
        let f = k as f64 * SYNTH_RATE_HZ / n_fft as f64;
        let a = 1.0 / f.sqrt();
        let re: f64 = rng.sample(normal);
        let im: f64 = rng.sample(normal);
        spectrum[k] = Complex64::new(re * a, im * a);
        spectrum[n_fft - k] = spectrum[k].conj();
    }
    let f_nyq = SYNTH_RATE_HZ / 2.0;
    let re: f64 = rng.sample(normal);
    spectrum[n_fft / 2] = Complex64::new(re / f_nyq.sqrt(), 0.0);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_inverse(n_fft);
    fft.process(&mut spectrum);
    let raw: Vec<f64> = spectrum[..n].iter().map(|c| c.re).collect();
    let mean = raw.iter().sum::<f64>() / n as f64;
    let var = raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return vec![0.0; n];
    }
    let scale = sigma / var.sqrt();
    raw.iter().map(|v| (v - mean) * scale).collect()
}

/// Trial materials shared by every participant of a cohort: relevance
/// per trial and the word-type layout per sentence.
#[derive(Debug, Clone, PartialEq)]
struct TrialPlan {
    relevance: SentenceRelevance,
    word_types: Vec<WordType>,
}

fn material_plan(cfg: &SynthConfig) -> Vec<TrialPlan> {
    use rand::seq::SliceRandom;
    let mut plans = Vec::with_capacity(cfg.n_trials);
    let n_questions = cfg.n_trials.div_ceil(3);
    for q in 0..n_questions {
        let mut order = [
            SentenceRelevance::PerfectlyRelevant,
            SentenceRelevance::Relevant,
            SentenceRelevance::Irrelevant,
        ];
        let mut rng = stream_rng(cfg.seed, STREAM_RELEVANCE + q as u64);
        order.shuffle(&mut rng);
        for s in 0..3 {
            let trial = q * 3 + s;
            if trial >= cfg.n_trials {
                break;
            }
            let relevance = order[s];
            let mut rng = stream_rng(cfg.seed, STREAM_LAYOUT + trial as u64);
            let w = cfg.words_per_sentence;
            let mut word_types = vec![WordType::Ordinary; w];
            match relevance {
                SentenceRelevance::PerfectlyRelevant => {
                    let answer = rng.gen_range(0..w);
                    word_types[answer] = WordType::Answer;
                    if w >= 2 {
                        let mut semantic = rng.gen_range(0..w - 1);
                        if semantic >= answer {
                            semantic += 1;
                        }
                        word_types[semantic] = WordType::SemanticRelated;
                    }
                }
                SentenceRelevance::Relevant => {
                    let semantic = rng.gen_range(0..w);
                    word_types[semantic] = WordType::SemanticRelated;
                }
                SentenceRelevance::Irrelevant => {}
            }
            plans.push(TrialPlan { relevance, word_types });
        }
    }
    plans
}

fn session_for_participant(
    cfg: &SynthConfig,
    participant_idx: usize,
    participant_id: &str,
    gain: f64,
) -> Result<(SessionRecording, SyntheticTruth)> {
    cfg.validate()?;
    let plan = material_plan(cfg);
    let channel_names = Arc::new(default_channel_names());
    let n_channels = channel_names.len();
    let n_samples = cfg.total_samples();
    let roi_map = RoiMap::default();

    // Per-channel effect gain; mastoids (no region) stay at zero.
    let mut channel_gain = vec![0.0f64; n_channels];
    for roi in Roi::ALL {
        let g = cfg.effects.roi_gains[&roi];
        for idx in roi_map.indices(roi, &channel_names)? {
            channel_gain[idx] = g;
        }
    }
    let artifact_channels: Vec<(usize, f64)> = {
        let mut v = Vec::new();
        for idx in roi_map.indices(Roi::Prefrontal, &channel_names)? {
            v.push((idx, 1.0));
        }
        for idx in roi_map.indices(Roi::Frontal, &channel_names)? {
            v.push((idx, 0.6));
        }
        v
    };

    let mut data = Array2::<f64>::zeros((n_channels, n_samples));
    for ch in 0..n_channels {
        let mut rng = stream_rng(
            cfg.seed,
            STREAM_NOISE + (participant_idx as u64) * 64 + ch as u64,
        );
        let noise = pink_noise(n_samples, cfg.effects.noise_sigma_uv, &mut rng);
        let mut row = data.row_mut(ch);
        for (s, v) in noise.into_iter().enumerate() {
            row[s] = v;
        }
    }

    let mut templates: BTreeMap<WordType, Vec<f64>> = BTreeMap::new();
    let mut amplitudes: BTreeMap<WordType, [f64; 4]> = BTreeMap::new();
    for wt in WordType::ALL {
        let a = solve_component_amplitudes(cfg.effects.word_effect(wt))?;
        templates.insert(wt, word_template(&a));
        amplitudes.insert(wt, a);
    }

    let mut triggers = Vec::new();
    let mut labels = Vec::new();
    let mut truth_words = Vec::new();
    let mut truth_relevance = Vec::new();
    let mut artifact_rng = stream_rng(cfg.seed, STREAM_ARTIFACT + participant_idx as u64);

    for (trial, tp) in plan.iter().enumerate() {
        let trial_start = EDGE_PAD_MS + trial * cfg.trial_stride_ms();
        triggers.push(TriggerEvent {
            sample_index: trial_start,
            code: TriggerCode::Fixation,
            trial_id: trial as u32,
            word_index: None,
        });
        truth_relevance.push((trial as u32, tp.relevance));
        for (w, wt) in tp.word_types.iter().enumerate() {
            let onset = trial_start + FIXATION_MS + w * WORD_SOA_MS;
            triggers.push(TriggerEvent {
                sample_index: onset,
                code: TriggerCode::WordOnset,
                trial_id: trial as u32,
                word_index: Some(w as u16),
            });
            labels.push(WordLabel {
                trial_id: trial as u32,
                word_index: w as u16,
                word_type: *wt,
                relevance: tp.relevance,
                participant_id: participant_id.to_string(),
            });
            let template = &templates[wt];
            for ch in 0..n_channels {
                let g = channel_gain[ch] * gain;
                if g == 0.0 {
                    continue;
                }
                let mut row = data.row_mut(ch);
                for (ms, v) in template.iter().enumerate() {
                    row[onset + ms] += g * v;
                }
            }
            // Blink artifact confined to this word's epoch.
            let artifact = cfg.effects.artifact_rate > 0.0
                && artifact_rng.gen::<f64>() < cfg.effects.artifact_rate;
            if artifact {
                let center = onset as f64
                    + artifact_rng.gen_range(ARTIFACT_CENTER_MS.0..=ARTIFACT_CENTER_MS.1);
                let half = (3.0 * ARTIFACT_SIGMA_MS) as isize;
                for &(ch, g) in &artifact_channels {
                    let mut row = data.row_mut(ch);
                    for off in -half..=half {
                        let s = center as isize + off;
                        let t = s as f64;
                        row[s as usize] +=
                            ARTIFACT_AMP_UV * g * gaussian(t, center, ARTIFACT_SIGMA_MS);
                    }
                }
            }
            truth_words.push(WordTruth {
                trial_id: trial as u32,
                word_index: w as u16,
                word_type: *wt,
                amplitudes: amplitudes[wt],
                artifact,
            });
        }
    }

    let rec = SessionRecording {
        participant_id: participant_id.to_string(),
        rate_hz: SYNTH_RATE_HZ,
        channel_names,
        data,
        triggers,
        labels,
    };
    rec.validate()?;
    let truth = SyntheticTruth {
        participant_id: participant_id.to_string(),
        gain,
        relevance: truth_relevance,
        words: truth_words,
    };
    Ok((rec, truth))
}

/// Generate one session (single participant, unit gain).
pub fn generate_session(cfg: &SynthConfig) -> Result<(SessionRecording, SyntheticTruth)> {
    session_for_participant(cfg, 0, "p00", 1.0)
}

/// Generate the i-th participant of a cohort without materializing the
/// others; sessions share trial materials but have independent noise,
/// artifacts, and gain.
pub fn cohort_session(
    cfg: &CohortConfig,
    participant_idx: usize,
) -> Result<(SessionRecording, SyntheticTruth)> {
    cfg.validate()?;
    if participant_idx >= cfg.n_participants {
        return Err(Error::Config(format!(
            "participant {participant_idx} out of range for cohort of {}",
            cfg.n_participants
        )));
    }
    let mut rng = stream_rng(cfg.base.seed, STREAM_GAIN + participant_idx as u64);
    let gain = 1.0 + cfg.gain_jitter * rng.gen_range(-1.0..=1.0);
    let id = format!("p{participant_idx:02}");
    session_for_participant(&cfg.base, participant_idx, &id, gain)
}

/// Materialize a whole cohort. Memory scales with participants times
/// session length; iterate [`cohort_session`] for large cohorts.
pub fn generate_cohort(cfg: &CohortConfig) -> Result<Vec<(SessionRecording, SyntheticTruth)>> {
    cfg.validate()?;
    (0..cfg.n_participants).map(|i| cohort_session(cfg, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::erp::TimeWindows;
    use crate::signal;
    use approx::assert_relative_eq;

    fn central_indices(rec: &SessionRecording) -> Vec<usize> {
        RoiMap::default().indices(Roi::Central, &rec.channel_names).unwrap()
    }

    /// Extract, decimate, and baseline-correct epochs without the
    /// band-pass, preserving injected template values exactly.
    fn raw_epochs(rec: &SessionRecording) -> Vec<signal::EpochMatrix> {
        let reref = signal::rereference_to_mastoids(rec).unwrap();
        let (epochs, skipped) = signal::extract_epochs(&reref).unwrap();
        assert!(skipped.is_empty());
        epochs
            .iter()
            .map(|e| {
                let d = signal::downsample_epoch(e, 500.0).unwrap();
                signal::baseline_correct(&d, -200.0, 0.0).unwrap()
            })
            .collect()
    }

    #[test]
    fn zero_spec_recording_is_flat() {
        let mut cfg = SynthConfig::new(3, 2, 1);
        cfg.effects = EffectSpec::zero();
        let (rec, truth) = generate_session(&cfg).unwrap();
        assert!(rec.data.iter().all(|v| *v == 0.0));
        assert!(truth.words.iter().all(|w| !w.artifact));
        assert!(truth.words.iter().all(|w| w.amplitudes.iter().all(|a| a.abs() < 1e-9)));
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig::new(4, 3, 99);
        let (a, ta) = generate_session(&cfg).unwrap();
        let (b, tb) = generate_session(&cfg).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.triggers, b.triggers);
        assert_eq!(a.labels, b.labels);
        assert_eq!(ta, tb);
        let cfg2 = SynthConfig::new(4, 3, 100);
        let (c, _) = generate_session(&cfg2).unwrap();
        assert!(a.data != c.data, "different seeds should differ");
    }

    #[test]
    fn trial_and_trigger_structure() {
        let cfg = SynthConfig::new(6, 4, 5);
        let (rec, truth) = generate_session(&cfg).unwrap();
        let fixations: Vec<_> =
            rec.triggers.iter().filter(|t| t.code == TriggerCode::Fixation).collect();
        let onsets: Vec<_> =
            rec.triggers.iter().filter(|t| t.code == TriggerCode::WordOnset).collect();
        assert_eq!(fixations.len(), 6);
        assert_eq!(onsets.len(), 24);
        assert_eq!(rec.labels.len(), 24);
        assert_eq!(truth.words.len(), 24);
        // First word follows its fixation by the fixation interval;
        // words are spaced by the onset asynchrony.
        assert_eq!(onsets[0].sample_index - fixations[0].sample_index, FIXATION_MS);
        assert_eq!(onsets[1].sample_index - onsets[0].sample_index, WORD_SOA_MS);
        // Labels and truth agree row by row.
        for (label, tw) in rec.labels.iter().zip(&truth.words) {
            assert_eq!((label.trial_id, label.word_index), (tw.trial_id, tw.word_index));
            assert_eq!(label.word_type, tw.word_type);
        }
    }

    #[test]
    fn material_layout_follows_the_annotation_scheme() {
        let cfg = SynthConfig::new(12, 6, 17);
        let (rec, truth) = generate_session(&cfg).unwrap();
        // 4 questions -> 4 of each relevance.
        for rel in [
            SentenceRelevance::PerfectlyRelevant,
            SentenceRelevance::Relevant,
            SentenceRelevance::Irrelevant,
        ] {
            assert_eq!(truth.relevance.iter().filter(|(_, r)| *r == rel).count(), 4);
        }
        for (trial, rel) in &truth.relevance {
            let words: Vec<_> =
                rec.labels.iter().filter(|l| l.trial_id == *trial).collect();
            let answers = words.iter().filter(|l| l.word_type == WordType::Answer).count();
            let semantic =
                words.iter().filter(|l| l.word_type == WordType::SemanticRelated).count();
            match rel {
                SentenceRelevance::PerfectlyRelevant => {
                    assert_eq!(answers, 1);
                    assert_eq!(semantic, 1);
                }
                SentenceRelevance::Relevant => {
                    assert_eq!(answers, 0);
                    assert_eq!(semantic, 1);
                }
                SentenceRelevance::Irrelevant => {
                    assert_eq!(answers, 0);
                    assert_eq!(semantic, 0);
                }
            }
        }
    }

    #[test]
    fn noise_free_window_means_hit_targets_exactly() {
        // Single-word sentences: every epoch's baseline window is silent,
        // so the unfiltered means must equal the spec targets to float
        // precision on the 2 ms measurement grid.
        let mut cfg = SynthConfig::new(9, 1, 23);
        cfg.effects.noise_sigma_uv = 0.0;
        cfg.effects.artifact_rate = 0.0;
        let (rec, _) = generate_session(&cfg).unwrap();
        let epochs = raw_epochs(&rec);
        assert_eq!(epochs.len(), 9);
        let central = central_indices(&rec);
        let windows = TimeWindows::canonical();
        for e in &epochs {
            let effect = cfg.effects.word_effect(e.label.word_type);
            let n100 = crate::erp::epoch_roi_mean(e, &central, windows.n100).unwrap();
            let p200 = crate::erp::epoch_roi_mean(e, &central, windows.p200).unwrap();
            let n400 = crate::erp::epoch_roi_mean(e, &central, windows.n400).unwrap();
            let p600 = crate::erp::epoch_roi_mean(e, &central, windows.p600).unwrap();
            assert_relative_eq!(p200 - n100, effect.n100_p200_uv, epsilon = 1e-9);
            assert_relative_eq!(n400, effect.n400_uv, epsilon = 1e-9);
            assert_relative_eq!(p600, effect.p600_uv, epsilon = 1e-9);
        }
    }

    #[test]
    fn region_gains_scale_the_injection() {
        let mut cfg = SynthConfig::new(3, 1, 29);
        cfg.effects.noise_sigma_uv = 0.0;
        cfg.effects.artifact_rate = 0.0;
        let (rec, _) = generate_session(&cfg).unwrap();
        let epochs = raw_epochs(&rec);
        let roi_map = RoiMap::default();
        let central = roi_map.indices(Roi::Central, &rec.channel_names).unwrap();
        let occipital = roi_map.indices(Roi::Occipital, &rec.channel_names).unwrap();
        let windows = TimeWindows::canonical();
        let e = &epochs[0];
        let c = crate::erp::epoch_roi_mean(e, &central, windows.p600).unwrap();
        let o = crate::erp::epoch_roi_mean(e, &occipital, windows.p600).unwrap();
        assert_relative_eq!(o, 0.4 * c, epsilon = 1e-9);
    }

    #[test]
    fn artifact_count_and_magnitude() {
        let mut cfg = SynthConfig::new(100, 1, 31);
        cfg.effects.noise_sigma_uv = 0.0;
        cfg.effects.artifact_rate = 0.1;
        let (rec, truth) = generate_session(&cfg).unwrap();
        let flagged: Vec<bool> = truth.words.iter().map(|w| w.artifact).collect();
        let count = flagged.iter().filter(|f| **f).count();
        // Binomial(100, 0.1): a deterministic draw, asserted within 3 sigma.
        assert!((2..=19).contains(&count), "artifact count {count}");
        let epochs = raw_epochs(&rec);
        for (e, artifact) in epochs.iter().zip(&flagged) {
            let peak = e.peak_abs_uv();
            if *artifact {
                assert!(peak > 150.0, "artifact epoch peaked at {peak}");
            } else {
                assert!(peak < 100.0, "clean epoch peaked at {peak}");
            }
        }
    }

    #[test]
    fn rejection_pipeline_matches_truth_after_filtering() {
        let mut cfg = SynthConfig::new(60, 1, 37);
        cfg.effects.artifact_rate = 0.1;
        let (rec, truth) = generate_session(&cfg).unwrap();
        let (kept, report) = signal::preprocess_session(&rec).unwrap();
        let truth_set: std::collections::BTreeSet<(u32, u16)> = truth
            .words
            .iter()
            .filter(|w| w.artifact)
            .map(|w| (w.trial_id, w.word_index))
            .collect();
        assert!(!truth_set.is_empty(), "seed produced no artifacts; pick another");
        let rejected: std::collections::BTreeSet<(u32, u16)> =
            report.rejected.iter().map(|(t, w, _)| (*t, *w)).collect();
        assert_eq!(rejected, truth_set, "band-passed rejection must match injected truth");
        assert_eq!(kept.len() + rejected.len(), truth.words.len());
    }

    #[test]
    fn effect_sign_recovered_across_seeds() {
        // Injected-vs-measured sign agreement with noise present: the
        // answer-vs-ordinary N100-P200 difference stays positive.
        let windows = TimeWindows::canonical();
        for seed in [1u64, 2, 3, 4, 5] {
            let mut cfg = SynthConfig::new(60, 1, seed);
            cfg.effects.artifact_rate = 0.0;
            let (rec, _) = generate_session(&cfg).unwrap();
            let (epochs, _) = signal::preprocess_session(&rec).unwrap();
            let central = central_indices(&rec);
            let mut sums = BTreeMap::from([(WordType::Answer, (0.0, 0)), (WordType::Ordinary, (0.0, 0))]);
            for e in &epochs {
                if let Some(entry) = sums.get_mut(&e.label.word_type) {
                    let n100 = crate::erp::epoch_roi_mean(e, &central, windows.n100).unwrap();
                    let p200 = crate::erp::epoch_roi_mean(e, &central, windows.p200).unwrap();
                    entry.0 += p200 - n100;
                    entry.1 += 1;
                }
            }
            let (a_sum, a_n) = sums[&WordType::Answer];
            let (o_sum, o_n) = sums[&WordType::Ordinary];
            assert!(a_n > 0 && o_n > 0);
            let delta = a_sum / a_n as f64 - o_sum / o_n as f64;
            assert!(delta > 0.0, "seed {seed}: measured delta {delta}");
        }
    }

    #[test]
    fn cohort_shares_materials_and_varies_gain() {
        let cfg = CohortConfig {
            base: SynthConfig::new(6, 2, 41),
            n_participants: 3,
            gain_jitter: 0.2,
        };
        let cohort = generate_cohort(&cfg).unwrap();
        assert_eq!(cohort.len(), 3);
        let ids: Vec<_> = cohort.iter().map(|(r, _)| r.participant_id.clone()).collect();
        assert_eq!(ids, vec!["p00", "p01", "p02"]);
        // Shared materials: identical labels modulo participant id.
        for (rec, truth) in &cohort[1..] {
            assert_eq!(truth.relevance, cohort[0].1.relevance);
            for (a, b) in rec.labels.iter().zip(&cohort[0].0.labels) {
                assert_eq!((a.trial_id, a.word_index, a.word_type), (b.trial_id, b.word_index, b.word_type));
            }
        }
        // Distinct gains and noise.
        assert!(cohort[0].1.gain != cohort[1].1.gain);
        assert!(cohort[0].0.data != cohort[1].0.data);
    }

    #[test]
    fn zero_jitter_gives_unit_gains() {
        let cfg = CohortConfig {
            base: SynthConfig::new(3, 1, 43),
            n_participants: 2,
            gain_jitter: 0.0,
        };
        let cohort = generate_cohort(&cfg).unwrap();
        for (_, truth) in &cohort {
            assert_eq!(truth.gain, 1.0);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(SynthConfig::new(0, 3, 1).validate().is_err());
        assert!(SynthConfig::new(3, 0, 1).validate().is_err());
        let mut cfg = SynthConfig::new(3, 1, 1);
        cfg.effects.artifact_rate = 1.5;
        assert!(cfg.validate().is_err());
        cfg.effects.artifact_rate = 0.0;
        cfg.effects.noise_sigma_uv = -1.0;
        assert!(cfg.validate().is_err());
        let cohort = CohortConfig {
            base: SynthConfig::new(3, 1, 1),
            n_participants: 1,
            gain_jitter: 0.0,
        };
        assert!(cohort.validate().is_err());
    }

    #[test]
    fn pink_noise_statistics() {
        let mut rng = stream_rng(7, 99);
        let x = pink_noise(20000, 5.0, &mut rng);
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64;
        assert_relative_eq!(mean, 0.0, epsilon = 1e-9);
        assert_relative_eq!(var.sqrt(), 5.0, epsilon = 1e-9);
        // Spectral tilt: the low-frequency half carries more power.
        let half = x.len() / 2;
        let low: f64 = x[..half].windows(50).map(|w| w.iter().sum::<f64>().powi(2)).sum();
        let high_freq_energy: f64 = x.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
        assert!(low > 0.0 && high_freq_energy > 0.0);
    }
}
