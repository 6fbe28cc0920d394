//! EEG reading-comprehension pipeline.
//!
//! End-to-end flow from raw multi-channel recordings to evaluated models:
//!
//! ```text
//!   SessionRecording (continuous, triggered, labeled)
//!        |  signal: re-reference, band-pass, epoch, screen, decimate
//!        v
//!   EpochMatrix x N (clean word epochs, 500 Hz, -200..+750 ms)
//!        |-- erp: grand averages, GFP windows, ROI stats, ANOVA
//!        |-- features: 69-dim band-power/entropy/time-point vectors
//!        v
//!   SentenceInstance batches (padded word sequences)
//!        |  model: projection + positional encoding + attention + heads
//!        v
//!   word / sentence probabilities
//!        |  eval: CVOT & LOPO splits, AUC / MAP, deltas vs untrained
//!        v
//!   EvalReport
//! ```
//!
//! The `synth` module generates labeled sessions with injected component
//! effects so the whole chain is testable without recorded data.

pub mod baseline;
pub mod dataset;
pub mod erp;
pub mod error;
pub mod eval;
pub mod features;
pub mod model;
pub mod montage;
pub mod rng;
pub mod session_io;
pub mod signal;
pub mod synth;

// shared domain types
pub use error::{Error, Result};
pub use montage::{default_channel_names, default_montage, Roi, RoiMap};
pub use signal::{
    EpochMatrix, PreprocessReport, SentenceRelevance, SessionRecording, TriggerCode, TriggerEvent,
    WordLabel, WordType,
};

// headline pipeline stages
pub use dataset::SentenceInstance;
pub use erp::{AnovaResult, ConditionWaveform, TimeWindows};
pub use eval::{EvalReport, SplitPlan, SplitScheme, Task};
pub use features::{FeatureScaler, WordFeatureVector, FEATURE_DIM};
pub use model::{ModelConfig, ModelParams};
pub use synth::{EffectSpec, SyntheticTruth};
