//! Black-box tests against the compiled `uercm` binary: determinism,
//! the generator-truth closed loop, the full pipeline smoke run, and the
//! error surface.

use std::path::{Path, PathBuf};
use std::process::Command;

use uercm_core::eval::EvalReport;
use uercm_core::synth::{cohort_session, CohortConfig, EffectSpec, SynthConfig};

fn uercm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uercm"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("spawn uercm");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("stdout utf8")
}

fn run_err(cmd: &mut Command) -> (i32, String) {
    let out = cmd.output().expect("spawn uercm");
    assert!(!out.status.success(), "command unexpectedly succeeded");
    (
        out.status.code().expect("exit code"),
        String::from_utf8(out.stderr).expect("stderr utf8"),
    )
}

/// Sorted relative paths of every file under `root`.
fn file_list(root: &Path) -> Vec<PathBuf> {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<PathBuf>) {
        for entry in std::fs::read_dir(dir).expect("read_dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                walk(&path, root, out);
            } else {
                out.push(path.strip_prefix(root).expect("prefix").to_path_buf());
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

/// Byte-level snapshot of a directory tree.
fn snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    file_list(root)
        .into_iter()
        .map(|rel| {
            let bytes = std::fs::read(root.join(&rel)).expect("read file");
            (rel, bytes)
        })
        .collect()
}

fn assert_identical_trees(a: &Path, b: &Path) {
    let files_a = file_list(a);
    let files_b = file_list(b);
    assert_eq!(files_a, files_b, "{} and {} hold different files", a.display(), b.display());
    for rel in &files_a {
        let bytes_a = std::fs::read(a.join(rel)).expect("read");
        let bytes_b = std::fs::read(b.join(rel)).expect("read");
        assert_eq!(bytes_a, bytes_b, "{} differs between runs", rel.display());
    }
}

fn count_rows(csv_path: &Path, kind: &str) -> usize {
    let text = std::fs::read_to_string(csv_path).expect("read csv");
    text.lines().skip(1).filter(|l| l.starts_with(kind)).count()
}

#[test]
fn synth_rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let stdout = run_ok(uercm().args([
            "synth",
            "--trials",
            "150",
            "--participants",
            "2",
            "--seed",
            "7",
            "--out",
            dir.to_str().unwrap(),
        ]));
        assert!(stdout.contains("p00") && stdout.contains("p01"), "stdout: {stdout}");
    }
    assert!(a.join("p00/manifest").is_file() && a.join("p01/manifest").is_file());
    assert!(a.join("run.lock").is_file());
    assert_identical_trees(&a, &b);
}

#[test]
fn full_pipeline_smoke() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let root = tmp.path();
    let sessions = root.join("sessions");
    let epochs = root.join("epochs");

    run_ok(uercm().args([
        "synth",
        "--trials",
        "60",
        "--words",
        "2",
        "--participants",
        "2",
        "--seed",
        "11",
        "--effects",
        "strong",
        "--out",
        sessions.to_str().unwrap(),
    ]));
    let sessions_before = snapshot(&sessions);

    run_ok(uercm().args([
        "preprocess",
        "--session",
        sessions.to_str().unwrap(),
        "--out",
        epochs.to_str().unwrap(),
    ]));

    // Closed loop against the generator: rejected epochs are exactly the
    // words where an artifact was injected, and nothing is skipped.
    let cohort = CohortConfig {
        base: SynthConfig {
            n_trials: 60,
            words_per_sentence: 2,
            effects: EffectSpec::strong(),
            seed: 11,
        },
        n_participants: 2,
        gain_jitter: 0.1,
    };
    for p in 0..2usize {
        let (rec, truth) = cohort_session(&cohort, p).expect("regenerate");
        let dir = epochs.join(&rec.participant_id);
        let rejections = dir.join("rejections.csv");
        let n_rejected = count_rows(&rejections, "rejected");
        let n_skipped = count_rows(&rejections, "skipped");
        let n_truth = truth.words.iter().filter(|w| w.artifact).count();
        assert_eq!(n_rejected, n_truth, "{}: rejection count vs generator truth", rec.participant_id);
        assert_eq!(n_skipped, 0);
        let kept = std::fs::read_to_string(dir.join("epoch_index.csv"))
            .expect("epoch index")
            .lines()
            .count()
            - 1;
        assert_eq!(kept + n_rejected, truth.words.len());
    }

    // Worker count must not change the bytes.
    let epochs_one_worker = root.join("epochs_w1");
    run_ok(
        uercm()
            .env("UERCM_WORKERS", "1")
            .args([
                "preprocess",
                "--session",
                sessions.to_str().unwrap(),
                "--out",
                epochs_one_worker.to_str().unwrap(),
            ]),
    );
    assert_identical_trees(&epochs, &epochs_one_worker);

    let erp_out = root.join("erp");
    run_ok(uercm().args([
        "erp",
        "--epochs",
        epochs.to_str().unwrap(),
        "--out",
        erp_out.to_str().unwrap(),
    ]));
    for name in [
        "waveform_answer.csv",
        "waveform_semantic_related.csv",
        "waveform_ordinary.csv",
        "topography_answer.csv",
        "topography_semantic_related.csv",
        "topography_ordinary.csv",
        "gfp.csv",
        "anova.txt",
        "waveforms.svg",
        "gfp.svg",
        "run.lock",
    ] {
        assert!(erp_out.join(name).is_file(), "missing erp artifact {name}");
    }
    let svg = std::fs::read_to_string(erp_out.join("waveforms.svg")).expect("svg");
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));

    let feat = root.join("features");
    run_ok(uercm().args([
        "features",
        "--epochs",
        epochs.to_str().unwrap(),
        "--out",
        feat.to_str().unwrap(),
    ]));
    let features_csv = feat.join("features.csv");
    assert!(features_csv.is_file());

    let train_out = root.join("train");
    run_ok(uercm().args([
        "train",
        "--features",
        features_csv.to_str().unwrap(),
        "--task",
        "extraction",
        "--seed",
        "5",
        "--max-epochs",
        "40",
        "--out",
        train_out.to_str().unwrap(),
    ]));
    let ckpt = std::fs::read(train_out.join("model.ckpt")).expect("checkpoint");
    assert_eq!(&ckpt[..6], b"UERCM\0");
    assert!(train_out.join("history.csv").is_file());

    let eval_u = root.join("eval_uercm");
    let eval_args = [
        "evaluate",
        "--features",
        features_csv.to_str().unwrap(),
        "--task",
        "extraction",
        "--scheme",
        "cvot",
        "--folds",
        "5",
        "--seed",
        "5",
        "--max-epochs",
        "40",
        "--out",
    ];
    let stdout = run_ok(uercm().args(eval_args).arg(eval_u.to_str().unwrap()));
    assert!(stdout.contains("AUC"), "stdout: {stdout}");
    let report: EvalReport =
        toml::from_str(&std::fs::read_to_string(eval_u.join("report.toml")).expect("report"))
            .expect("report parses");
    assert!(
        report.delta_auc > 0.0,
        "smoke run must beat its shuffled reference (delta {})",
        report.delta_auc
    );
    assert_eq!(report.folds.len(), 5);

    // Rerunning the identical invocation rewrites the same bytes.
    let before = snapshot(&eval_u);
    run_ok(uercm().args(eval_args).arg(eval_u.to_str().unwrap()));
    assert_eq!(before, snapshot(&eval_u), "evaluate rerun changed outputs");

    let eval_ref = root.join("eval_untrained");
    run_ok(uercm().args([
        "evaluate",
        "--features",
        features_csv.to_str().unwrap(),
        "--task",
        "extraction",
        "--scheme",
        "cvot",
        "--folds",
        "5",
        "--seed",
        "5",
        "--model",
        "untrained",
        "--out",
        eval_ref.to_str().unwrap(),
    ]));

    let rep = root.join("report");
    run_ok(uercm().args([
        "report",
        "--run",
        eval_u.to_str().unwrap(),
        "--run",
        eval_ref.to_str().unwrap(),
        "--out",
        rep.to_str().unwrap(),
    ]));
    let summary = std::fs::read_to_string(rep.join("summary.txt")).expect("summary");
    assert!(summary.contains("uercm") && summary.contains("untrained"));
    let csv = std::fs::read_to_string(rep.join("summary.csv")).expect("summary csv");
    assert_eq!(csv.lines().count(), 3);
    assert!(rep.join("fold_auc.svg").is_file());

    // No subcommand touched its inputs.
    assert_eq!(sessions_before, snapshot(&sessions), "session inputs were mutated");
}

#[test]
fn error_surface_is_single_line_and_coded() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let out = tmp.path().join("out");

    // Missing input file: data-class failure, exit 3.
    let (code, stderr) = run_err(uercm().args([
        "evaluate",
        "--features",
        tmp.path().join("absent.csv").to_str().unwrap(),
        "--task",
        "extraction",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert_eq!(code, 3, "stderr: {stderr}");
    assert_eq!(stderr.lines().count(), 1);
    assert!(stderr.starts_with("error["), "stderr: {stderr}");

    // Invalid configuration: exit 2.
    let (code, stderr) = run_err(uercm().args([
        "synth",
        "--participants",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert_eq!(code, 2, "stderr: {stderr}");
    assert!(stderr.starts_with("error[config]"), "stderr: {stderr}");

    // Unknown enum value: parse failure before any file is read.
    let (code, stderr) = run_err(uercm().args([
        "evaluate",
        "--features",
        tmp.path().join("absent.csv").to_str().unwrap(),
        "--task",
        "extraction",
        "--scheme",
        "bogus",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert_eq!(code, 3, "stderr: {stderr}");
    assert!(stderr.starts_with("error[parse]"), "stderr: {stderr}");
}
