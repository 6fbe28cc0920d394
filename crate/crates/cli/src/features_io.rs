//! CSV surface for word feature vectors: five label columns followed by
//! the 69 named feature dimensions. Values print in shortest round-trip
//! form, so write → read → write is byte-stable.

use std::path::Path;

use uercm_core::error::{Error, Result};
use uercm_core::features::{feature_names, WordFeatureVector, FEATURE_DIM};
use uercm_core::signal::{SentenceRelevance, WordLabel, WordType};

const LABEL_COLUMNS: [&str; 5] =
    ["participant_id", "trial_id", "word_index", "word_type", "relevance"];

pub fn write_features(path: &Path, words: &[WordFeatureVector]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Io(std::io::Error::other(format!("{}: {e}", path.display()))))?;
    let header: Vec<String> = LABEL_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(feature_names())
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for word in words {
        let l = &word.label;
        let mut record = vec![
            l.participant_id.clone(),
            l.trial_id.to_string(),
            l.word_index.to_string(),
            l.word_type.as_str().to_string(),
            l.relevance.as_str().to_string(),
        ];
        record.extend(word.values.iter().map(|v| v.to_string()));
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features(path: &Path) -> Result<Vec<WordFeatureVector>> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::Io(std::io::Error::other(format!("{}: {e}", path.display()))))?;
    let header = r.headers().map_err(csv_err)?.clone();
    let expected: Vec<String> = LABEL_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(feature_names())
        .collect();
    let got: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    if got != expected {
        return Err(Error::Parse(format!(
            "{}: unexpected feature CSV header ({} columns, expected {})",
            path.display(),
            got.len(),
            expected.len()
        )));
    }
    let mut out = Vec::new();
    for (row, record) in r.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let field = |i: usize| -> Result<&str> {
            record.get(i).ok_or_else(|| {
                Error::Parse(format!("{}: row {} is short", path.display(), row + 2))
            })
        };
        let label = WordLabel {
            participant_id: field(0)?.to_string(),
            trial_id: parse_num(field(1)?, path, row)?,
            word_index: parse_num(field(2)?, path, row)?,
            word_type: WordType::parse(field(3)?)?,
            relevance: SentenceRelevance::parse(field(4)?)?,
        };
        let mut values = [0.0f64; FEATURE_DIM];
        for (i, v) in values.iter_mut().enumerate() {
            let raw = field(5 + i)?;
            *v = raw.parse().map_err(|_| {
                Error::Parse(format!(
                    "{}: row {}: bad float '{raw}' in column {}",
                    path.display(),
                    row + 2,
                    5 + i
                ))
            })?;
        }
        out.push(WordFeatureVector { values, label, standardized: false });
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(raw: &str, path: &Path, row: usize) -> Result<T> {
    raw.parse().map_err(|_| {
        Error::Parse(format!("{}: row {}: bad integer '{raw}'", path.display(), row + 2))
    })
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}
