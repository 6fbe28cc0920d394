//! ERP analysis: grand averages, GFP-based component windows, ROI
//! amplitude measures, and repeated-measures statistics (`stats`).

pub mod stats;

pub use stats::{bonferroni_pairwise, permutation_paired_test, rm_anova, AnovaResult, PairwiseTest};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::signal::{EpochMatrix, WordType};

/// Canonical component windows in ms, half-open `[start, end)`.
pub const N100_START_MS: f64 = 60.0;
pub const CANONICAL_BOUNDARIES_MS: [f64; 3] = [120.0, 320.0, 520.0];
pub const EPOCH_END_MS: f64 = 750.0;
/// Smoothing window for boundary detection.
pub const GFP_SMOOTH_MS: f64 = 20.0;
/// Maximum distance a boundary may move toward a GFP minimum.
pub const SNAP_RADIUS_MS: f64 = 40.0;

/// The four component windows. Contiguous and non-overlapping by
/// construction; bounded by 60 and 750 ms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeWindows {
    pub n100: (f64, f64),
    pub p200: (f64, f64),
    pub n400: (f64, f64),
    pub p600: (f64, f64),
}

impl TimeWindows {
    pub fn canonical() -> Self {
        TimeWindows {
            n100: (N100_START_MS, 120.0),
            p200: (120.0, 320.0),
            n400: (320.0, 520.0),
            p600: (520.0, EPOCH_END_MS),
        }
    }

    fn from_boundaries(b: [f64; 3]) -> Self {
        TimeWindows {
            n100: (N100_START_MS, b[0]),
            p200: (b[0], b[1]),
            n400: (b[1], b[2]),
            p600: (b[2], EPOCH_END_MS),
        }
    }
}

/// Mean waveform of all epochs sharing one word type.
#[derive(Debug, Clone)]
pub struct ConditionWaveform {
    pub condition: WordType,
    /// channels x samples, microvolts.
    pub data: Array2<f64>,
    pub n_epochs: usize,
    pub rate_hz: f64,
    pub t0_ms: f64,
}

impl ConditionWaveform {
    /// Half-open sample range covering `[start_ms, end_ms)`.
    pub fn window_range(&self, start_ms: f64, end_ms: f64) -> Result<std::ops::Range<usize>> {
        let n = self.data.ncols();
        let start = ((start_ms - self.t0_ms) * self.rate_hz / 1000.0).round() as i64;
        let end = ((end_ms - self.t0_ms) * self.rate_hz / 1000.0).round() as i64;
        if start < 0 || end > n as i64 || start >= end {
            return Err(Error::Config(format!(
                "window {start_ms}..{end_ms} ms outside waveform span"
            )));
        }
        Ok(start as usize..end as usize)
    }
}

/// Element-wise mean per word type, in `WordType::ALL` order; empty
/// conditions are omitted.
pub fn grand_average(epochs: &[EpochMatrix]) -> Result<Vec<ConditionWaveform>> {
    let Some(first) = epochs.first() else {
        return Ok(Vec::new());
    };
    let shape = (first.data.nrows(), first.data.ncols());
    let mut out = Vec::new();
    for wt in WordType::ALL {
        let members: Vec<&EpochMatrix> =
            epochs.iter().filter(|e| e.label.word_type == wt).collect();
        if members.is_empty() {
            continue;
        }
        let mut acc = Array2::<f64>::zeros(shape);
        for e in &members {
            if (e.data.nrows(), e.data.ncols()) != shape || e.rate_hz != first.rate_hz {
                return Err(Error::Shape(
                    "epochs must share shape and rate for grand averaging".into(),
                ));
            }
            acc += &e.data;
        }
        acc /= members.len() as f64;
        out.push(ConditionWaveform {
            condition: wt,
            data: acc,
            n_epochs: members.len(),
            rate_hz: first.rate_hz,
            t0_ms: first.t0_ms,
        });
    }
    Ok(out)
}

/// Global field power: population standard deviation across channels,
/// restricted to the 0-750 ms post-stimulus span. The returned series
/// starts at 0 ms with the waveform's sample step.
pub fn global_field_power(w: &ConditionWaveform) -> Result<Vec<f64>> {
    if w.data.nrows() < 2 {
        return Err(Error::Config("GFP needs at least two channels".into()));
    }
    let range = w.window_range(0.0, EPOCH_END_MS)?;
    let n_ch = w.data.nrows() as f64;
    Ok(range
        .map(|s| {
            let col = w.data.column(s);
            let mean = col.sum() / n_ch;
            (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n_ch).sqrt()
        })
        .collect())
}

/// Segments the four component windows from a GFP series covering
/// 0-750 ms. Each canonical boundary (120/320/520 ms) snaps to the
/// nearest local minimum of the smoothed series within ±40 ms; with no
/// such minimum the canonical value stands.
pub fn segment_time_windows(gfp: &[f64], rate_hz: f64) -> TimeWindows {
    if gfp.len() < 3 {
        return TimeWindows::canonical();
    }
    let smoothed = moving_average(gfp, (GFP_SMOOTH_MS * rate_hz / 1000.0).round() as usize);
    let minima: Vec<usize> = (1..smoothed.len() - 1)
        .filter(|&i| smoothed[i] < smoothed[i - 1] && smoothed[i] < smoothed[i + 1])
        .collect();

    let ms_per_sample = 1000.0 / rate_hz;
    let mut boundaries = CANONICAL_BOUNDARIES_MS;
    for b in boundaries.iter_mut() {
        let best = minima
            .iter()
            .map(|&i| (i as f64 * ms_per_sample, (i as f64 * ms_per_sample - *b).abs()))
            .filter(|(_, d)| *d <= SNAP_RADIUS_MS)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((t, _)) = best {
            *b = t;
        }
    }
    TimeWindows::from_boundaries(boundaries)
}

/// Centered moving average with edge clamping; `width` in samples.
fn moving_average(x: &[f64], width: usize) -> Vec<f64> {
    let half = (width / 2).max(1);
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            x[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Mean voltage over a region's electrodes and a time window.
pub fn roi_mean(
    w: &ConditionWaveform,
    roi_indices: &[usize],
    window_ms: (f64, f64),
) -> Result<f64> {
    if roi_indices.is_empty() {
        return Err(Error::Config("empty region".into()));
    }
    for &i in roi_indices {
        if i >= w.data.nrows() {
            return Err(Error::Config(format!("channel index {i} out of range")));
        }
    }
    let range = w.window_range(window_ms.0, window_ms.1)?;
    let mut acc = 0.0;
    for &ch in roi_indices {
        for s in range.clone() {
            acc += w.data[[ch, s]];
        }
    }
    Ok(acc / (roi_indices.len() * range.len()) as f64)
}

/// Average waveform change from the N100 window to the P200 window.
pub fn n100_p200_amplitude(
    w: &ConditionWaveform,
    roi_indices: &[usize],
    windows: &TimeWindows,
) -> Result<f64> {
    Ok(roi_mean(w, roi_indices, windows.p200)? - roi_mean(w, roi_indices, windows.n100)?)
}

/// Per-epoch variant of [`roi_mean`], used for subject-level statistics.
pub fn epoch_roi_mean(
    e: &EpochMatrix,
    roi_indices: &[usize],
    window_ms: (f64, f64),
) -> Result<f64> {
    let range = e.window_range(window_ms.0, window_ms.1)?;
    if roi_indices.is_empty() {
        return Err(Error::Config("empty region".into()));
    }
    let mut acc = 0.0;
    for &ch in roi_indices {
        for s in range.clone() {
            acc += e.data[[ch, s]];
        }
    }
    Ok(acc / (roi_indices.len() * range.len()) as f64)
}
