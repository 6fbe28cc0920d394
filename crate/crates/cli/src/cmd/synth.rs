//! `uercm synth`: deterministic cohort generation into per-participant
//! session directories.

use std::path::PathBuf;

use clap::Parser;

use uercm_core::error::{Error, Result};
use uercm_core::session_io::write_session;
use uercm_core::synth::{cohort_session, CohortConfig, EffectSpec, SynthConfig};

use crate::runlock::write_run_lock;
use crate::workers::{parallel_map, worker_count};

#[derive(Parser)]
pub struct Args {
    /// Output directory; one session directory per participant appears
    /// under it.
    #[arg(long)]
    pub out: PathBuf,
    /// Trials (sentences) per participant.
    #[arg(long, default_value_t = 150)]
    pub trials: usize,
    /// Words per sentence.
    #[arg(long, default_value_t = 3)]
    pub words: usize,
    /// Cohort size.
    #[arg(long, default_value_t = 2)]
    pub participants: usize,
    /// Master seed; every derived stream is deterministic in it.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Per-participant multiplicative gain jitter.
    #[arg(long, default_value_t = 0.1)]
    pub jitter: f64,
    /// Injected component strength: default, strong, or zero.
    #[arg(long, default_value = "default")]
    pub effects: String,
}

pub fn effects_by_name(name: &str) -> Result<EffectSpec> {
    match name {
        "default" => Ok(EffectSpec::default()),
        "strong" => Ok(EffectSpec::strong()),
        "zero" => Ok(EffectSpec::zero()),
        other => Err(Error::Config(format!(
            "unknown effects preset '{other}' (default, strong, zero)"
        ))),
    }
}

pub fn run(args: &Args) -> Result<()> {
    let cohort = CohortConfig {
        base: SynthConfig {
            n_trials: args.trials,
            words_per_sentence: args.words,
            effects: effects_by_name(&args.effects)?,
            seed: args.seed,
        },
        n_participants: args.participants,
        gain_jitter: args.jitter,
    };
    cohort.validate()?;

    std::fs::create_dir_all(&args.out)?;
    let outcomes = parallel_map(args.participants, worker_count()?, |p| {
        let (rec, truth) = cohort_session(&cohort, p)?;
        let dir = args.out.join(&rec.participant_id);
        write_session(&dir, &rec)?;
        Ok((rec.participant_id.clone(), truth.words.len()))
    })?;
    for (id, n_words) in &outcomes {
        println!("{id}: {} trials, {n_words} word epochs", args.trials);
    }

    write_run_lock(
        &args.out,
        "synth",
        &[
            ("trials", args.trials.to_string()),
            ("words", args.words.to_string()),
            ("participants", args.participants.to_string()),
            ("seed", args.seed.to_string()),
            ("jitter", args.jitter.to_string()),
            ("effects", args.effects.clone()),
        ],
    )
}
