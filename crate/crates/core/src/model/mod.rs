//! The attention sequence model: input projection, learnable positional
//! encoding, one masked multi-head self-attention layer, batch
//! normalization, and two task heads (per-word answer scoring and
//! whole-sentence relevance). Gradients are hand-derived in `backward`
//! and finite-difference checked in the test suite.

mod backward;
mod checkpoint;
mod forward;
mod train;

pub use backward::{backward, ModelGrads};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use forward::{forward, loss, predict, sentence_positive_probability, ForwardTrace, Mode};
pub use train::{grid_search, train, Adam, EpochStats, GridTrial, TrainHistory, HP_GRID_HEADS, HP_GRID_HIDDEN, HP_GRID_LR};

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Batch-norm epsilon.
pub const BN_EPS: f64 = 1e-5;
/// Running-statistics momentum: running = (1-m)*running + m*batch.
pub const BN_MOMENTUM: f64 = 0.1;
/// Probability clamp applied before every log in the losses.
pub const PROB_CLAMP: f64 = 1e-7;

/// Which task head is being trained or scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainTask {
    /// Per-word answer scoring.
    Token,
    /// Per-sentence relevance classification.
    Sentence,
}

/// Hyperparameters and shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Input feature length per word.
    pub d: usize,
    /// Hidden size.
    pub h: usize,
    pub heads: usize,
    /// Padding target; no training sentence may be longer.
    pub t_max: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Early-stop patience in epochs.
    pub patience: usize,
    /// Hard cap on training epochs.
    pub max_epochs: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// Paper-mirroring defaults for the 69-dim features.
    pub fn default_for(d: usize, t_max: usize, seed: u64) -> Self {
        ModelConfig {
            d,
            h: 16,
            heads: 4,
            t_max,
            lr: 1e-3,
            batch_size: 8,
            patience: 5,
            max_epochs: 200,
            seed,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.h / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.h == 0 || self.heads == 0 || self.t_max == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if self.h % self.heads != 0 {
            return Err(Error::Config(format!(
                "hidden size {} must be divisible by head count {}",
                self.h, self.heads
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// All model tensors. Running statistics are state, not learnables; they
/// are excluded from [`ModelParams::learnables_mut`] and updated only by
/// the training loop.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// d x h input projection.
    pub w_h: Array2<f64>,
    /// h, broadcast over positions.
    pub b_h: Array1<f64>,
    /// t_max x h learnable positional table.
    pub p: Array2<f64>,
    /// Per head: h x d_k query/key/value projections.
    pub w_q: Vec<Array2<f64>>,
    pub w_k: Vec<Array2<f64>>,
    pub w_v: Vec<Array2<f64>>,
    /// Per head: d_k x h output mix, summed over heads.
    pub w_m: Vec<Array2<f64>>,
    /// Batch-norm affine, per hidden dim.
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    /// Batch-norm running statistics (eval mode), per hidden dim.
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    /// (t_max*h) x 2 sentence head.
    pub w_s: Array2<f64>,
    pub b_s: Array1<f64>,
    /// h x 2 token head.
    pub w_o: Array2<f64>,
    pub b_o: Array1<f64>,
}

/// Parameter RNG stream id (distinct from shuffling and scoring streams).
const PARAM_STREAM: u64 = 0x5052;

impl ModelParams {
    /// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init for weights and
    /// biases; positional table starts at zero (so the model is initially
    /// position-equivariant); batch-norm affine starts at identity.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = stream_rng(config.seed, PARAM_STREAM);
        let dk = config.head_dim();
        let mut uniform = |rows: usize, cols: usize, fan_in: usize| -> Array2<f64> {
            let bound = 1.0 / (fan_in as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
        };
        let w_h = uniform(config.d, config.h, config.d);
        let b_h = uniform(1, config.h, config.d).row(0).to_owned();
        let w_q: Vec<_> = (0..config.heads).map(|_| uniform(config.h, dk, config.h)).collect();
        let w_k: Vec<_> = (0..config.heads).map(|_| uniform(config.h, dk, config.h)).collect();
        let w_v: Vec<_> = (0..config.heads).map(|_| uniform(config.h, dk, config.h)).collect();
        let w_m: Vec<_> = (0..config.heads).map(|_| uniform(dk, config.h, dk)).collect();
        let th = config.t_max * config.h;
        let w_s = uniform(th, 2, th);
        let b_s = uniform(1, 2, th).row(0).to_owned();
        let w_o = uniform(config.h, 2, config.h);
        let b_o = uniform(1, 2, config.h).row(0).to_owned();
        Ok(ModelParams {
            w_h,
            b_h,
            p: Array2::zeros((config.t_max, config.h)),
            w_q,
            w_k,
            w_v,
            w_m,
            gamma: Array1::ones(config.h),
            beta: Array1::zeros(config.h),
            running_mean: Array1::zeros(config.h),
            running_var: Array1::ones(config.h),
            w_s,
            b_s,
            w_o,
            b_o,
        })
    }

    /// All-zero tensors with the config's shapes (gradient accumulators).
    pub fn zeros(config: &ModelConfig) -> Self {
        let dk = config.head_dim();
        let zeros2 = |r, c| Array2::<f64>::zeros((r, c));
        ModelParams {
            w_h: zeros2(config.d, config.h),
            b_h: Array1::zeros(config.h),
            p: zeros2(config.t_max, config.h),
            w_q: (0..config.heads).map(|_| zeros2(config.h, dk)).collect(),
            w_k: (0..config.heads).map(|_| zeros2(config.h, dk)).collect(),
            w_v: (0..config.heads).map(|_| zeros2(config.h, dk)).collect(),
            w_m: (0..config.heads).map(|_| zeros2(dk, config.h)).collect(),
            gamma: Array1::zeros(config.h),
            beta: Array1::zeros(config.h),
            running_mean: Array1::zeros(config.h),
            running_var: Array1::zeros(config.h),
            w_s: zeros2(config.t_max * config.h, 2),
            b_s: Array1::zeros(2),
            w_o: zeros2(config.h, 2),
            b_o: Array1::zeros(2),
        }
    }

    /// Named mutable views of every learnable tensor, in a frozen order.
    /// Running statistics are deliberately absent.
    pub fn learnables_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = Vec::new();
        out.push(("w_h".into(), self.w_h.as_slice_mut().expect("standard layout")));
        out.push(("b_h".into(), self.b_h.as_slice_mut().expect("standard layout")));
        out.push(("p".into(), self.p.as_slice_mut().expect("standard layout")));
        for (i, t) in self.w_q.iter_mut().enumerate() {
            out.push((format!("w_q.{i}"), t.as_slice_mut().expect("standard layout")));
        }
        for (i, t) in self.w_k.iter_mut().enumerate() {
            out.push((format!("w_k.{i}"), t.as_slice_mut().expect("standard layout")));
        }
        for (i, t) in self.w_v.iter_mut().enumerate() {
            out.push((format!("w_v.{i}"), t.as_slice_mut().expect("standard layout")));
        }
        for (i, t) in self.w_m.iter_mut().enumerate() {
            out.push((format!("w_m.{i}"), t.as_slice_mut().expect("standard layout")));
        }
        out.push(("gamma".into(), self.gamma.as_slice_mut().expect("standard layout")));
        out.push(("beta".into(), self.beta.as_slice_mut().expect("standard layout")));
        out.push(("w_s".into(), self.w_s.as_slice_mut().expect("standard layout")));
        out.push(("b_s".into(), self.b_s.as_slice_mut().expect("standard layout")));
        out.push(("w_o".into(), self.w_o.as_slice_mut().expect("standard layout")));
        out.push(("b_o".into(), self.b_o.as_slice_mut().expect("standard layout")));
        out
    }

    /// Total learnable coordinate count.
    pub fn n_learnable(&mut self) -> usize {
        self.learnables_mut().iter().map(|(_, s)| s.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let mut c = ModelConfig::default_for(69, 6, 0);
        c.validate().unwrap();
        c.h = 30;
        c.heads = 4;
        assert!(c.validate().is_err(), "30 not divisible by 4");
        c.h = 16;
        c.lr = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn init_is_deterministic_and_in_bounds() {
        let c = ModelConfig::default_for(10, 4, 99);
        let a = ModelParams::init(&c).unwrap();
        let b = ModelParams::init(&c).unwrap();
        assert_eq!(a, b);
        let bound = 1.0 / (10.0_f64).sqrt();
        assert!(a.w_h.iter().all(|v| v.abs() < bound));
        assert!(a.p.iter().all(|v| *v == 0.0), "positional table starts at zero");
        assert!(a.gamma.iter().all(|v| *v == 1.0));
        assert!(a.running_var.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn different_seeds_differ() {
        let c = ModelConfig::default_for(10, 4, 1);
        let mut c2 = c.clone();
        c2.seed = 2;
        let a = ModelParams::init(&c).unwrap();
        let b = ModelParams::init(&c2).unwrap();
        assert!(a.w_h != b.w_h);
    }

    #[test]
    fn learnables_cover_expected_count() {
        let c = ModelConfig::default_for(69, 6, 0);
        let mut p = ModelParams::init(&c).unwrap();
        let dk = c.head_dim();
        let expected = 69 * 16 + 16                       // projection
            + 6 * 16                                      // positional
            + 4 * (3 * 16 * dk + dk * 16)                 // attention
            + 16 + 16                                     // bn affine
            + 6 * 16 * 2 + 2                              // sentence head
            + 16 * 2 + 2; // token head
        assert_eq!(p.n_learnable(), expected);
        let names: Vec<String> = p.learnables_mut().into_iter().map(|(n, _)| n).collect();
        assert!(names.contains(&"running_mean".to_string()) == false);
        assert!(names.contains(&"w_q.3".to_string()));
    }
}
