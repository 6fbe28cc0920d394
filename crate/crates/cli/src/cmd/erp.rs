//! `uercm erp`: grand-average waveforms, global field power, data-driven
//! component windows, and repeated-measures statistics across the cohort.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Parser;
use ndarray::Array2;

use uercm_core::erp::stats::rm_anova;
use uercm_core::erp::{
    epoch_roi_mean, global_field_power, grand_average, segment_time_windows, ConditionWaveform,
    TimeWindows,
};
use uercm_core::error::{Error, Result};
use uercm_core::montage::{Roi, RoiMap};
use uercm_core::session_io::{read_epochs, EPOCHS_MANIFEST_FILE};
use uercm_core::signal::{EpochMatrix, WordType};

use crate::cmd::{discover_dirs, path_str};
use crate::plot::{line_plot, Series, PALETTE};
use crate::runlock::write_run_lock;

#[derive(Parser)]
pub struct Args {
    /// Epoch archive directory, or a directory of archives. Repeatable;
    /// statistics need archives from at least two participants.
    #[arg(long = "epochs", required = true)]
    pub epochs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Component measures reported in the statistics file: name, region, and
/// the value taken per epoch once the windows are segmented.
const MEASURES: [(&str, Roi); 3] =
    [("n100_p200", Roi::Central), ("n400", Roi::Central), ("p600", Roi::LTemporal)];

pub fn run(args: &Args) -> Result<()> {
    let dirs = discover_dirs(&args.epochs, EPOCHS_MANIFEST_FILE, "epoch archive")?;
    let mut by_participant: BTreeMap<String, Vec<EpochMatrix>> = BTreeMap::new();
    for dir in &dirs {
        let (epochs, report) = read_epochs(dir)?;
        by_participant.entry(report.participant_id).or_default().extend(epochs);
    }
    let all: Vec<EpochMatrix> = by_participant.values().flatten().cloned().collect();
    if all.is_empty() {
        return Err(Error::Data("no epochs in the given archives".into()));
    }

    let names = all[0].channel_names.clone();
    let conditions = grand_average(&all)?;
    let overall = pooled_waveform(&conditions);
    let windows = segment_time_windows(&global_field_power(&overall)?, overall.rate_hz);
    let roi_map = RoiMap::default();

    std::fs::create_dir_all(&args.out)?;
    for c in &conditions {
        write_waveform_csv(
            &args.out.join(format!("waveform_{}.csv", c.condition.as_str())),
            c,
            &names,
        )?;
        write_topography_csv(
            &args.out.join(format!("topography_{}.csv", c.condition.as_str())),
            c,
            &names,
            &windows,
        )?;
    }
    write_gfp_csv(&args.out.join("gfp.csv"), &conditions)?;
    write_anova_text(&args.out.join("anova.txt"), &by_participant, &windows, &roi_map)?;

    let central = roi_map.indices(Roi::Central, &names)?;
    std::fs::write(
        args.out.join("waveforms.svg"),
        waveform_svg(&conditions, &central)?,
    )?;
    std::fs::write(args.out.join("gfp.svg"), gfp_svg(&conditions)?)?;

    println!(
        "{} participants, {} epochs; windows n100 {:?} p200 {:?} n400 {:?} p600 {:?}",
        by_participant.len(),
        all.len(),
        windows.n100,
        windows.p200,
        windows.n400,
        windows.p600
    );

    let inputs: Vec<String> = dirs.iter().map(|d| path_str(d)).collect();
    write_run_lock(
        &args.out,
        "erp",
        &[("epochs", inputs.join(","))],
    )
}

/// Epoch-count-weighted mean across conditions; the all-epochs average.
fn pooled_waveform(conditions: &[ConditionWaveform]) -> ConditionWaveform {
    let first = &conditions[0];
    let mut acc = Array2::<f64>::zeros(first.data.dim());
    let mut n = 0usize;
    for c in conditions {
        acc += &(&c.data * c.n_epochs as f64);
        n += c.n_epochs;
    }
    acc /= n as f64;
    ConditionWaveform {
        condition: first.condition,
        data: acc,
        n_epochs: n,
        rate_hz: first.rate_hz,
        t0_ms: first.t0_ms,
    }
}

fn write_waveform_csv(path: &Path, w: &ConditionWaveform, names: &[String]) -> Result<()> {
    let mut text = String::from("time_ms");
    for name in names {
        let _ = write!(text, ",{name}");
    }
    text.push('\n');
    let step = 1000.0 / w.rate_hz;
    for s in 0..w.data.ncols() {
        let _ = write!(text, "{}", trim(w.t0_ms + s as f64 * step));
        for ch in 0..w.data.nrows() {
            let _ = write!(text, ",{:.6}", w.data[[ch, s]]);
        }
        text.push('\n');
    }
    Ok(std::fs::write(path, text)?)
}

fn write_gfp_csv(path: &Path, conditions: &[ConditionWaveform]) -> Result<()> {
    let mut series = Vec::new();
    for c in conditions {
        series.push((c.condition.as_str(), global_field_power(c)?));
    }
    let mut text = String::from("time_ms");
    for (name, _) in &series {
        let _ = write!(text, ",{name}");
    }
    text.push('\n');
    let step = 1000.0 / conditions[0].rate_hz;
    for s in 0..series[0].1.len() {
        let _ = write!(text, "{}", trim(s as f64 * step));
        for (_, g) in &series {
            let _ = write!(text, ",{:.6}", g[s]);
        }
        text.push('\n');
    }
    Ok(std::fs::write(path, text)?)
}

/// Per-electrode mean voltage in each component window.
fn write_topography_csv(
    path: &Path,
    w: &ConditionWaveform,
    names: &[String],
    windows: &TimeWindows,
) -> Result<()> {
    let mut text = String::from("channel,n100,p200,n400,p600\n");
    for (ch, name) in names.iter().enumerate() {
        let _ = write!(text, "{name}");
        for win in [windows.n100, windows.p200, windows.n400, windows.p600] {
            let range = w.window_range(win.0, win.1)?;
            let mean =
                range.clone().map(|s| w.data[[ch, s]]).sum::<f64>() / range.len() as f64;
            let _ = write!(text, ",{mean:.6}");
        }
        text.push('\n');
    }
    Ok(std::fs::write(path, text)?)
}

/// Participant-by-condition matrix of one component measure.
fn measure_matrix(
    by_participant: &BTreeMap<String, Vec<EpochMatrix>>,
    measure: &str,
    roi: &[usize],
    windows: &TimeWindows,
) -> Result<Array2<f64>> {
    let mut rows = Vec::new();
    for (id, epochs) in by_participant {
        let mut row = Vec::with_capacity(WordType::ALL.len());
        for wt in WordType::ALL {
            let mut acc = 0.0;
            let mut n = 0usize;
            for e in epochs.iter().filter(|e| e.label.word_type == wt) {
                acc += match measure {
                    "n100_p200" => {
                        epoch_roi_mean(e, roi, windows.p200)? - epoch_roi_mean(e, roi, windows.n100)?
                    }
                    "n400" => epoch_roi_mean(e, roi, windows.n400)?,
                    _ => epoch_roi_mean(e, roi, windows.p600)?,
                };
                n += 1;
            }
            if n == 0 {
                return Err(Error::Data(format!(
                    "participant {id} has no {} epochs; cannot form the condition matrix",
                    wt.as_str()
                )));
            }
            row.push(acc / n as f64);
        }
        rows.push(row);
    }
    let n = rows.len();
    Ok(Array2::from_shape_fn((n, WordType::ALL.len()), |(i, j)| rows[i][j]))
}

fn write_anova_text(
    path: &Path,
    by_participant: &BTreeMap<String, Vec<EpochMatrix>>,
    windows: &TimeWindows,
    roi_map: &RoiMap,
) -> Result<()> {
    let mut text = String::new();
    let _ = writeln!(
        text,
        "conditions: {}",
        WordType::ALL.map(|w| w.as_str()).join(", ")
    );
    let _ = writeln!(
        text,
        "windows_ms: n100=({:.0},{:.0}) p200=({:.0},{:.0}) n400=({:.0},{:.0}) p600=({:.0},{:.0})",
        windows.n100.0,
        windows.n100.1,
        windows.p200.0,
        windows.p200.1,
        windows.n400.0,
        windows.n400.1,
        windows.p600.0,
        windows.p600.1
    );
    let _ = writeln!(text, "participants: {}", by_participant.len());

    if by_participant.len() < 2 {
        let _ = writeln!(
            text,
            "anova: skipped (repeated-measures statistics need at least 2 participants)"
        );
        return Ok(std::fs::write(path, text)?);
    }

    let names: Vec<&String> = by_participant.keys().collect();
    for (measure, roi) in MEASURES {
        let indices = {
            let first = by_participant.values().next().expect("non-empty");
            roi_map.indices(roi, &first[0].channel_names)?
        };
        let m = measure_matrix(by_participant, measure, &indices, windows)?;
        let _ = writeln!(text, "\n[{measure} @ {roi:?}]");
        for (i, id) in names.iter().enumerate() {
            let _ = writeln!(
                text,
                "  {id}: {:.4}, {:.4}, {:.4}",
                m[[i, 0]],
                m[[i, 1]],
                m[[i, 2]]
            );
        }
        match rm_anova(&m) {
            Ok(r) => {
                let _ = writeln!(
                    text,
                    "  F({},{}) = {:.4}  p = {:.6}  gg_epsilon = {:.4}  \
                     df_corrected = ({:.2},{:.2})  p_uncorrected = {:.6}",
                    r.df.0, r.df.1, r.f_value, r.p_value, r.gg_epsilon,
                    r.df_corrected.0, r.df_corrected.1, r.p_uncorrected
                );
                for pw in &r.pairwise {
                    let a = WordType::ALL[pw.pair.0].as_str();
                    let b = WordType::ALL[pw.pair.1].as_str();
                    let _ = writeln!(
                        text,
                        "  {a} vs {b}: t = {:.4}  p_raw = {:.6}  p_adjusted = {:.6}",
                        pw.t, pw.p_raw, pw.p_adjusted
                    );
                }
            }
            Err(e) => {
                let _ = writeln!(text, "  anova failed: {e}");
            }
        }
    }
    Ok(std::fs::write(path, text)?)
}

fn waveform_svg(conditions: &[ConditionWaveform], central: &[usize]) -> Result<String> {
    let mut series = Vec::new();
    for (i, c) in conditions.iter().enumerate() {
        let step = 1000.0 / c.rate_hz;
        let points = (0..c.data.ncols())
            .map(|s| {
                let mean =
                    central.iter().map(|&ch| c.data[[ch, s]]).sum::<f64>() / central.len() as f64;
                (c.t0_ms + s as f64 * step, mean)
            })
            .collect();
        series.push(Series {
            name: format!("{} (n={})", c.condition.as_str(), c.n_epochs),
            color: PALETTE[i % PALETTE.len()],
            points,
        });
    }
    Ok(line_plot("central region grand average", "time (ms)", "uV", &series))
}

fn gfp_svg(conditions: &[ConditionWaveform]) -> Result<String> {
    let mut series = Vec::new();
    for (i, c) in conditions.iter().enumerate() {
        let g = global_field_power(c)?;
        let step = 1000.0 / c.rate_hz;
        series.push(Series {
            name: c.condition.as_str().to_string(),
            color: PALETTE[i % PALETTE.len()],
            points: g.iter().enumerate().map(|(s, v)| (s as f64 * step, *v)).collect(),
        });
    }
    Ok(line_plot("global field power", "time (ms)", "uV", &series))
}

/// Shortest clean decimal for time axes (2.0 -> "2", 2.5 -> "2.5").
fn trim(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}
