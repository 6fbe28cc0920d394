//! On-disk session and epoch-archive formats.
//!
//! A session directory holds:
//!   - `manifest`       TOML: participant, rate, channel order, file names
//!   - `signals.f32le`  channel-major little-endian f32 samples, microvolts
//!   - `triggers.csv`   `sample_index,code,trial_id,word_index`
//!   - `labels.csv`     `trial_id,word_index,word_type,sentence_relevance`
//!
//! An epoch archive holds the preprocessed epochs of one session:
//!   - `epochs_manifest` TOML: shape, rate, t0, channel order, file names
//!   - `epochs.f32le`    epoch-major then channel-major f32 samples
//!   - `epoch_index.csv` one row per stored epoch (labels)
//!   - `rejections.csv`  screen rejections and skipped triggers

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{
    EpochMatrix, PreprocessReport, SentenceRelevance, SessionRecording, SkippedTrigger,
    TriggerCode, TriggerEvent, WordLabel, WordType,
};

pub const MANIFEST_FILE: &str = "manifest";
pub const SIGNALS_FILE: &str = "signals.f32le";
pub const TRIGGERS_FILE: &str = "triggers.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const EPOCHS_MANIFEST_FILE: &str = "epochs_manifest";
pub const EPOCHS_FILE: &str = "epochs.f32le";
pub const EPOCH_INDEX_FILE: &str = "epoch_index.csv";
pub const REJECTIONS_FILE: &str = "rejections.csv";

#[derive(Debug, Serialize, Deserialize)]
struct SessionManifest {
    participant_id: String,
    rate_hz: f64,
    channels: Vec<String>,
    signals_file: String,
    triggers_file: String,
    labels_file: String,
    n_samples: usize,
}

fn write_f32le(path: &Path, values: impl Iterator<Item = f64>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for v in values {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_f32le(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let mut r = BufReader::new(fs::File::open(path)?);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != expected * 4 {
        return Err(Error::Data(format!(
            "{}: expected {} samples ({} bytes), found {} bytes",
            path.display(),
            expected,
            expected * 4,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

/// Writes a session directory; `dir` is created if needed.
pub fn write_session(dir: &Path, rec: &SessionRecording) -> Result<()> {
    rec.validate()?;
    fs::create_dir_all(dir)?;
    let manifest = SessionManifest {
        participant_id: rec.participant_id.clone(),
        rate_hz: rec.rate_hz,
        channels: rec.channel_names.as_ref().clone(),
        signals_file: SIGNALS_FILE.into(),
        triggers_file: TRIGGERS_FILE.into(),
        labels_file: LABELS_FILE.into(),
        n_samples: rec.data.ncols(),
    };
    let text = toml::to_string_pretty(&manifest)
        .map_err(|e| Error::Parse(format!("manifest serialization: {e}")))?;
    fs::write(dir.join(MANIFEST_FILE), text)?;

    write_f32le(&dir.join(SIGNALS_FILE), rec.data.iter().copied())?;

    let mut tw = csv::Writer::from_path(dir.join(TRIGGERS_FILE))
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    tw.write_record(["sample_index", "code", "trial_id", "word_index"])
        .map_err(csv_err)?;
    for t in &rec.triggers {
        let word = t.word_index.map(|w| w.to_string()).unwrap_or_default();
        tw.write_record([
            t.sample_index.to_string(),
            t.code.as_str().to_string(),
            t.trial_id.to_string(),
            word,
        ])
        .map_err(csv_err)?;
    }
    tw.flush()?;

    let mut lw = csv::Writer::from_path(dir.join(LABELS_FILE))
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    lw.write_record(["trial_id", "word_index", "word_type", "sentence_relevance"])
        .map_err(csv_err)?;
    for l in &rec.labels {
        lw.write_record([
            l.trial_id.to_string(),
            l.word_index.to_string(),
            l.word_type.as_str().to_string(),
            l.relevance.as_str().to_string(),
        ])
        .map_err(csv_err)?;
    }
    lw.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

fn parse_field<T: std::str::FromStr>(record: &csv::StringRecord, idx: usize, what: &str) -> Result<T> {
    let raw = record
        .get(idx)
        .ok_or_else(|| Error::Parse(format!("missing column {idx} ({what})")))?;
    raw.parse()
        .map_err(|_| Error::Parse(format!("bad {what} value '{raw}'")))
}

/// Reads a session directory written by [`write_session`].
pub fn read_session(dir: &Path) -> Result<SessionRecording> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let manifest: SessionManifest =
        toml::from_str(&text).map_err(|e| Error::Parse(format!("manifest: {e}")))?;

    let n_ch = manifest.channels.len();
    let flat = read_f32le(&dir.join(&manifest.signals_file), n_ch * manifest.n_samples)?;
    let data = Array2::from_shape_vec((n_ch, manifest.n_samples), flat)
        .map_err(|e| Error::Shape(format!("signal reshape: {e}")))?;

    let mut triggers = Vec::new();
    let mut tr = csv::Reader::from_path(dir.join(&manifest.triggers_file)).map_err(csv_err)?;
    for row in tr.records() {
        let row = row.map_err(csv_err)?;
        let code = TriggerCode::parse(row.get(1).unwrap_or(""))?;
        let word_index = match row.get(3) {
            Some("") | None => None,
            Some(raw) => Some(
                raw.parse::<u16>()
                    .map_err(|_| Error::Parse(format!("bad word_index '{raw}'")))?,
            ),
        };
        triggers.push(TriggerEvent {
            sample_index: parse_field(&row, 0, "sample_index")?,
            code,
            trial_id: parse_field(&row, 2, "trial_id")?,
            word_index,
        });
    }

    let mut labels = Vec::new();
    let mut lr = csv::Reader::from_path(dir.join(&manifest.labels_file)).map_err(csv_err)?;
    for row in lr.records() {
        let row = row.map_err(csv_err)?;
        labels.push(WordLabel {
            trial_id: parse_field(&row, 0, "trial_id")?,
            word_index: parse_field(&row, 1, "word_index")?,
            word_type: WordType::parse(row.get(2).unwrap_or(""))?,
            relevance: SentenceRelevance::parse(row.get(3).unwrap_or(""))?,
            participant_id: manifest.participant_id.clone(),
        });
    }

    let rec = SessionRecording {
        participant_id: manifest.participant_id,
        rate_hz: manifest.rate_hz,
        channel_names: Arc::new(manifest.channels),
        data,
        triggers,
        labels,
    };
    rec.validate()?;
    Ok(rec)
}

#[derive(Debug, Serialize, Deserialize)]
struct EpochsManifest {
    participant_id: String,
    rate_hz: f64,
    t0_ms: f64,
    n_epochs: usize,
    n_channels: usize,
    n_samples: usize,
    channels: Vec<String>,
    epochs_file: String,
    index_file: String,
    rejections_file: String,
}

/// Writes preprocessed epochs plus their rejection report.
pub fn write_epochs(dir: &Path, epochs: &[EpochMatrix], report: &PreprocessReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (rate_hz, t0_ms, n_channels, n_samples, channels) = match epochs.first() {
        Some(e) => (
            e.rate_hz,
            e.t0_ms,
            e.data.nrows(),
            e.data.ncols(),
            e.channel_names.as_ref().clone(),
        ),
        None => (0.0, 0.0, 0, 0, Vec::new()),
    };
    for e in epochs {
        if e.data.nrows() != n_channels || e.data.ncols() != n_samples {
            return Err(Error::Shape("epochs in one archive must share shape".into()));
        }
    }
    let manifest = EpochsManifest {
        participant_id: report.participant_id.clone(),
        rate_hz,
        t0_ms,
        n_epochs: epochs.len(),
        n_channels,
        n_samples,
        channels,
        epochs_file: EPOCHS_FILE.into(),
        index_file: EPOCH_INDEX_FILE.into(),
        rejections_file: REJECTIONS_FILE.into(),
    };
    let text = toml::to_string_pretty(&manifest)
        .map_err(|e| Error::Parse(format!("epochs manifest serialization: {e}")))?;
    fs::write(dir.join(EPOCHS_MANIFEST_FILE), text)?;

    write_f32le(
        &dir.join(EPOCHS_FILE),
        epochs.iter().flat_map(|e| e.data.iter().copied()),
    )?;

    let mut iw = csv::Writer::from_path(dir.join(EPOCH_INDEX_FILE)).map_err(csv_err)?;
    iw.write_record(["trial_id", "word_index", "word_type", "sentence_relevance"])
        .map_err(csv_err)?;
    for e in epochs {
        iw.write_record([
            e.label.trial_id.to_string(),
            e.label.word_index.to_string(),
            e.label.word_type.as_str().to_string(),
            e.label.relevance.as_str().to_string(),
        ])
        .map_err(csv_err)?;
    }
    iw.flush()?;

    let mut rw = csv::Writer::from_path(dir.join(REJECTIONS_FILE)).map_err(csv_err)?;
    rw.write_record(["kind", "trial_id", "word_index", "detail"]).map_err(csv_err)?;
    for (trial, word, peak) in &report.rejected {
        rw.write_record([
            "rejected".to_string(),
            trial.to_string(),
            word.to_string(),
            format!("{peak:.3}"),
        ])
        .map_err(csv_err)?;
    }
    for s in &report.skipped {
        rw.write_record([
            "skipped".to_string(),
            s.trial_id.to_string(),
            s.word_index.to_string(),
            format!("trigger at sample {}", s.sample_index),
        ])
        .map_err(csv_err)?;
    }
    rw.flush()?;
    Ok(())
}

/// Reads an epoch archive written by [`write_epochs`].
pub fn read_epochs(dir: &Path) -> Result<(Vec<EpochMatrix>, PreprocessReport)> {
    let text = fs::read_to_string(dir.join(EPOCHS_MANIFEST_FILE))?;
    let manifest: EpochsManifest =
        toml::from_str(&text).map_err(|e| Error::Parse(format!("epochs manifest: {e}")))?;

    let per_epoch = manifest.n_channels * manifest.n_samples;
    let flat = read_f32le(&dir.join(&manifest.epochs_file), manifest.n_epochs * per_epoch)?;
    let channels = Arc::new(manifest.channels);

    let mut labels = Vec::new();
    let mut ir = csv::Reader::from_path(dir.join(&manifest.index_file)).map_err(csv_err)?;
    for row in ir.records() {
        let row = row.map_err(csv_err)?;
        labels.push(WordLabel {
            trial_id: parse_field(&row, 0, "trial_id")?,
            word_index: parse_field(&row, 1, "word_index")?,
            word_type: WordType::parse(row.get(2).unwrap_or(""))?,
            relevance: SentenceRelevance::parse(row.get(3).unwrap_or(""))?,
            participant_id: manifest.participant_id.clone(),
        });
    }
    if labels.len() != manifest.n_epochs {
        return Err(Error::Data(format!(
            "epoch index has {} rows but manifest declares {} epochs",
            labels.len(),
            manifest.n_epochs
        )));
    }

    let mut epochs = Vec::with_capacity(manifest.n_epochs);
    for (i, label) in labels.into_iter().enumerate() {
        let chunk = flat[i * per_epoch..(i + 1) * per_epoch].to_vec();
        let data = Array2::from_shape_vec((manifest.n_channels, manifest.n_samples), chunk)
            .map_err(|e| Error::Shape(format!("epoch reshape: {e}")))?;
        epochs.push(EpochMatrix {
            data,
            rate_hz: manifest.rate_hz,
            t0_ms: manifest.t0_ms,
            channel_names: channels.clone(),
            label,
        });
    }

    let mut rejected = Vec::new();
    let mut skipped = Vec::new();
    let mut rr = csv::Reader::from_path(dir.join(&manifest.rejections_file)).map_err(csv_err)?;
    for row in rr.records() {
        let row = row.map_err(csv_err)?;
        let trial: u32 = parse_field(&row, 1, "trial_id")?;
        let word: u16 = parse_field(&row, 2, "word_index")?;
        match row.get(0) {
            Some("rejected") => {
                let peak: f64 = row.get(3).unwrap_or("0").parse().unwrap_or(f64::NAN);
                rejected.push((trial, word, peak));
            }
            Some("skipped") => skipped.push(SkippedTrigger { sample_index: 0, trial_id: trial, word_index: word }),
            other => {
                return Err(Error::Parse(format!("unknown rejection kind {other:?}")));
            }
        }
    }

    let report = PreprocessReport {
        participant_id: manifest.participant_id,
        total_word_triggers: manifest.n_epochs + rejected.len(),
        kept: manifest.n_epochs,
        rejected,
        skipped,
    };
    Ok((epochs, report))
}
