//! `uercm report`: collect `report.toml` files from evaluate runs into
//! one comparison table (text and CSV) and a per-fold AUC plot.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Parser;

use uercm_core::error::{Error, Result};
use uercm_core::eval::EvalReport;

use crate::cmd::path_str;
use crate::plot::{line_plot, Series, PALETTE};
use crate::runlock::write_run_lock;

#[derive(Parser)]
pub struct Args {
    /// Evaluate output directory (holds report.toml). Repeatable.
    #[arg(long = "run", required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &Args) -> Result<()> {
    let mut reports = Vec::new();
    for dir in &args.runs {
        let path = dir.join("report.toml");
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let report: EvalReport = toml::from_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        reports.push(report);
    }
    if reports.is_empty() {
        return Err(Error::Config("no runs given".into()));
    }
    reports.sort_by(|a, b| {
        (a.task.as_str(), a.scheme.as_str(), a.model.as_str()).cmp(&(
            b.task.as_str(),
            b.scheme.as_str(),
            b.model.as_str(),
        ))
    });

    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("summary.csv"), summary_csv(&reports))?;
    std::fs::write(args.out.join("summary.txt"), summary_text(&reports))?;
    std::fs::write(args.out.join("fold_auc.svg"), fold_plot(&reports))?;
    println!(
        "summarized {} runs -> {}",
        reports.len(),
        args.out.join("summary.txt").display()
    );

    let inputs: Vec<String> = args.runs.iter().map(|p| path_str(p)).collect();
    write_run_lock(
        &args.out,
        "report",
        &[("runs", inputs.join(","))],
    )
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

fn opt_signed(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:+.4}"))
}

fn summary_csv(reports: &[EvalReport]) -> String {
    let mut text = String::from(
        "task,scheme,model,seed,n_instances,auc,macro_auc,reference_auc,delta_auc,map,reference_map,delta_map\n",
    );
    for r in reports {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{},{},{}",
            r.task.as_str(),
            r.scheme.as_str(),
            r.model.as_str(),
            r.seed,
            r.n_instances,
            r.auc,
            r.macro_auc,
            r.reference_auc,
            r.delta_auc,
            r.map.map_or_else(|| "-".to_string(), |x| format!("{x:.6}")),
            r.reference_map.map_or_else(|| "-".to_string(), |x| format!("{x:.6}")),
            r.delta_map.map_or_else(|| "-".to_string(), |x| format!("{x:.6}")),
        );
    }
    text
}

fn summary_text(reports: &[EvalReport]) -> String {
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:<14} {:<6} {:<10} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
        "task", "scheme", "model", "auc", "ref", "dAUC", "map", "refMAP", "dMAP"
    );
    for r in reports {
        let _ = writeln!(
            text,
            "{:<14} {:<6} {:<10} {:>7.4} {:>7.4} {:>+7.4} {:>7} {:>7} {:>7}",
            r.task.as_str(),
            r.scheme.as_str(),
            r.model.as_str(),
            r.auc,
            r.reference_auc,
            r.delta_auc,
            opt(r.map),
            opt(r.reference_map),
            opt_signed(r.delta_map),
        );
    }
    text
}

fn fold_plot(reports: &[EvalReport]) -> String {
    let series: Vec<Series> = reports
        .iter()
        .enumerate()
        .map(|(i, r)| Series {
            name: format!("{}/{}/{}", r.task.as_str(), r.scheme.as_str(), r.model.as_str()),
            color: PALETTE[i % PALETTE.len()],
            points: r
                .folds
                .iter()
                .map(|f| (f.fold as f64, f.auc))
                .collect(),
        })
        .collect();
    line_plot("Per-fold AUC", "fold", "AUC", &series)
}
