//! 69-dimensional word-epoch features: frequency-band features (band power
//! and differential entropy over delta/theta/alpha/beta) and ERP time-point
//! features (five evenly spaced voltages in the P200/N400/P600 windows),
//! each computed over three regions (central, r-temporal, parietal).
//!
//! Layout, frozen: for each region in (central, r-temporal, parietal):
//! `[bp_delta, bp_theta, bp_alpha, bp_beta, de_delta, de_theta, de_alpha,
//! de_beta, p200 x5, n400 x5, p600 x5]` — 23 per region, 69 total.

use crate::erp::TimeWindows;
use crate::error::{Error, Result};
use crate::montage::{Roi, RoiMap};
use crate::signal::filter::ZeroPhaseBandpass;
use crate::signal::{EpochMatrix, WordLabel, EPOCH_POST_MS};

pub const FEATURE_DIM: usize = 69;
/// Points sampled per ERP window.
pub const ERPF_POINTS: usize = 5;
/// Regions contributing features, in layout order.
pub const FEATURE_REGIONS: [Roi; 3] = [Roi::Central, Roi::RTemporal, Roi::Parietal];

/// One frequency band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSpec {
    pub name: &'static str,
    pub low_hz: f64,
    pub high_hz: f64,
}

/// The four bands, in layout order.
pub const BANDS: [BandSpec; 4] = [
    BandSpec { name: "delta", low_hz: 0.5, high_hz: 4.0 },
    BandSpec { name: "theta", low_hz: 4.0, high_hz: 8.0 },
    BandSpec { name: "alpha", low_hz: 8.0, high_hz: 13.0 },
    BandSpec { name: "beta", low_hz: 13.0, high_hz: 30.0 },
];

/// ERP windows used for time-point features (canonical definitions).
pub fn erpf_windows() -> [(&'static str, (f64, f64)); 3] {
    let w = TimeWindows::canonical();
    [("p200", w.p200), ("n400", w.n400), ("p600", w.p600)]
}

/// The 69-dim feature vector of one word epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct WordFeatureVector {
    pub values: [f64; FEATURE_DIM],
    pub label: WordLabel,
    pub standardized: bool,
}

impl WordFeatureVector {
    /// Bare vector with a placeholder label, for assembling fixtures.
    #[cfg(test)]
    pub(crate) fn from_values(values: [f64; FEATURE_DIM]) -> Self {
        WordFeatureVector {
            values,
            label: WordLabel {
                trial_id: 0,
                word_index: 0,
                word_type: crate::signal::WordType::Ordinary,
                relevance: crate::signal::SentenceRelevance::Irrelevant,
                participant_id: "test".to_string(),
            },
            standardized: false,
        }
    }
}

/// Region-averaged signal over the whole epoch span.
fn region_signal(e: &EpochMatrix, roi_indices: &[usize]) -> Result<Vec<f64>> {
    if roi_indices.is_empty() {
        return Err(Error::Config("empty region".into()));
    }
    for &i in roi_indices {
        if i >= e.data.nrows() {
            return Err(Error::Config(format!("channel index {i} out of range")));
        }
    }
    let n = e.data.ncols();
    let mut out = vec![0.0; n];
    for &ch in roi_indices {
        for (acc, v) in out.iter_mut().zip(e.data.row(ch)) {
            *acc += v;
        }
    }
    let k = roi_indices.len() as f64;
    out.iter_mut().for_each(|v| *v /= k);
    Ok(out)
}

/// Post-stimulus (0..750 ms) slice of a region signal.
fn post_stimulus<'a>(e: &EpochMatrix, signal: &'a [f64]) -> Result<&'a [f64]> {
    let range = e.window_range(0.0, EPOCH_POST_MS)?;
    Ok(&signal[range])
}

fn band_limited(e: &EpochMatrix, band: BandSpec, roi_indices: &[usize]) -> Result<Vec<f64>> {
    if band.high_hz >= e.rate_hz / 2.0 {
        return Err(Error::Config(format!(
            "band {} ({}-{} Hz) exceeds Nyquist at rate {} Hz",
            band.name, band.low_hz, band.high_hz, e.rate_hz
        )));
    }
    let signal = region_signal(e, roi_indices)?;
    let post = post_stimulus(e, &signal)?;
    let filt = ZeroPhaseBandpass::design(band.low_hz, band.high_hz, e.rate_hz)?;
    Ok(filt.filtfilt(post))
}

/// Mean power (µV²) of the band-limited, region-averaged post-stimulus
/// signal.
pub fn band_power(e: &EpochMatrix, band: BandSpec, roi_indices: &[usize]) -> Result<f64> {
    let y = band_limited(e, band, roi_indices)?;
    Ok(y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64)
}

/// Differential entropy ½·ln(2πeσ²) of the band-limited signal under a
/// Gaussian assumption.
pub fn differential_entropy(e: &EpochMatrix, band: BandSpec, roi_indices: &[usize]) -> Result<f64> {
    let y = band_limited(e, band, roi_indices)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / y.len() as f64;
    if var <= 0.0 {
        return Err(Error::Data(format!(
            "degenerate epoch: zero variance in band {} (differential entropy undefined)",
            band.name
        )));
    }
    Ok(0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * var).ln())
}

/// Region-averaged voltage at `k` points evenly spaced over the window,
/// both endpoints included, nearest-sample lookup. A point falling on the
/// open epoch edge (750 ms) reads the final sample.
pub fn erp_time_points(
    e: &EpochMatrix,
    window_ms: (f64, f64),
    roi_indices: &[usize],
    k: usize,
) -> Result<Vec<f64>> {
    let (start, end) = window_ms;
    let span_end = e.t0_ms + e.data.ncols() as f64 * 1000.0 / e.rate_hz;
    if start < e.t0_ms || end > span_end || start >= end || k < 2 {
        return Err(Error::Config(format!(
            "window {start}..{end} ms (k={k}) invalid for epoch span {}..{span_end} ms",
            e.t0_ms
        )));
    }
    let signal = region_signal(e, roi_indices)?;
    let step = (end - start) / (k - 1) as f64;
    Ok((0..k)
        .map(|i| {
            let t = start + i as f64 * step;
            let idx = e.sample_at_ms(t).min(signal.len() - 1);
            signal[idx]
        })
        .collect())
}

/// Human-readable names of the 69 dimensions, in layout order.
pub fn feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(FEATURE_DIM);
    for roi in FEATURE_REGIONS {
        for b in BANDS {
            names.push(format!("{}:band_power:{}", roi.as_str(), b.name));
        }
        for b in BANDS {
            names.push(format!("{}:diff_entropy:{}", roi.as_str(), b.name));
        }
        for (wname, _) in erpf_windows() {
            for i in 0..ERPF_POINTS {
                names.push(format!("{}:erpf:{}:{}", roi.as_str(), wname, i));
            }
        }
    }
    debug_assert_eq!(names.len(), FEATURE_DIM);
    names
}

/// Computes the full 69-dim vector for one epoch.
pub fn word_feature_vector(e: &EpochMatrix, roi_map: &RoiMap) -> Result<WordFeatureVector> {
    let mut values = [0.0; FEATURE_DIM];
    let mut idx = 0;
    for roi in FEATURE_REGIONS {
        let indices = roi_map.indices(roi, &e.channel_names)?;
        for b in BANDS {
            values[idx] = band_power(e, b, &indices)?;
            idx += 1;
        }
        for b in BANDS {
            values[idx] = differential_entropy(e, b, &indices)?;
            idx += 1;
        }
        for (_, window) in erpf_windows() {
            for v in erp_time_points(e, window, &indices, ERPF_POINTS)? {
                values[idx] = v;
                idx += 1;
            }
        }
    }
    debug_assert_eq!(idx, FEATURE_DIM);
    if !values.iter().all(|v| v.is_finite()) {
        return Err(Error::Data("non-finite feature value".into()));
    }
    Ok(WordFeatureVector { values, label: e.label.clone(), standardized: false })
}

/// Per-dimension z-score statistics learned on a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaler {
    pub mean: [f64; FEATURE_DIM],
    pub std: [f64; FEATURE_DIM],
}

impl FeatureScaler {
    /// Fits mean/std per dimension. A constant dimension is an error that
    /// names the offending dimension.
    pub fn fit(train: &[WordFeatureVector]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Data("cannot fit scaler on an empty training split".into()));
        }
        let n = train.len() as f64;
        let mut mean = [0.0; FEATURE_DIM];
        let mut std = [0.0; FEATURE_DIM];
        for v in train {
            for (m, x) in mean.iter_mut().zip(v.values.iter()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        for v in train {
            for d in 0..FEATURE_DIM {
                let c = v.values[d] - mean[d];
                std[d] += c * c;
            }
        }
        let names = feature_names();
        for d in 0..FEATURE_DIM {
            std[d] = (std[d] / n).sqrt();
            if std[d] == 0.0 {
                return Err(Error::Data(format!(
                    "feature dimension {d} ({}) is constant on the training split",
                    names[d]
                )));
            }
        }
        Ok(FeatureScaler { mean, std })
    }

    /// Standardizes one vector with the stored statistics.
    pub fn apply(&self, v: &WordFeatureVector) -> WordFeatureVector {
        let mut values = [0.0; FEATURE_DIM];
        for d in 0..FEATURE_DIM {
            values[d] = (v.values[d] - self.mean[d]) / self.std[d];
        }
        WordFeatureVector { values, label: v.label.clone(), standardized: true }
    }
}
