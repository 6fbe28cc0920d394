//! Pure forward pass. Never mutates parameters (running statistics are
//! updated by the training loop, not here), so finite-difference probes
//! can call it freely.

use ndarray::{Array1, Array2, Array3, Axis};

use crate::dataset::TrainingBatch;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams, TrainTask, BN_EPS, PROB_CLAMP};

/// Whether batch statistics (training) or running statistics (scoring)
/// normalize the attention output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Every intermediate the backward pass needs.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub mode: Mode,
    /// B x T x H projected input plus positional rows.
    pub u_prime: Array3<f64>,
    /// Per head: B x T x d_k.
    pub q: Vec<Array3<f64>>,
    pub k: Vec<Array3<f64>>,
    pub v: Vec<Array3<f64>>,
    /// Per head: B x T x T attention weights; masked keys hold exact zeros.
    pub attn: Vec<Array3<f64>>,
    /// B x T x H attention block output, before normalization.
    pub z: Array3<f64>,
    /// Statistics used for normalization (batch stats in train mode).
    pub bn_mean: Array1<f64>,
    pub bn_var: Array1<f64>,
    /// B x T x H normalized (pre-affine) values.
    pub x_hat: Array3<f64>,
    /// B x T x H normalized output after the affine.
    pub z_prime: Array3<f64>,
    /// B x (T*H) concatenation: padded positions zeroed, then ReLU.
    pub relu_concat: Array2<f64>,
    /// B x 2 sentence-head logits and P(relevant).
    pub sent_logits: Array2<f64>,
    pub sent_prob: Array1<f64>,
    /// B x T x 2 token-head logits and B x T P(answer).
    pub tok_logits: Array3<f64>,
    pub tok_prob: Array2<f64>,
    /// Number of unmasked (sentence, position) pairs in the batch.
    pub m_count: usize,
}

fn softmax2(l0: f64, l1: f64) -> f64 {
    // P(class 1) of a two-logit softmax = sigmoid(l1 - l0).
    let d = l1 - l0;
    if d >= 0.0 {
        1.0 / (1.0 + (-d).exp())
    } else {
        let e = d.exp();
        e / (1.0 + e)
    }
}

/// Run the full network on a padded batch.
pub fn forward(
    config: &ModelConfig,
    params: &ModelParams,
    batch: &TrainingBatch,
    mode: Mode,
) -> Result<ForwardTrace> {
    let (b_n, t_n, d_n) = batch.x.dim();
    if t_n != config.t_max || d_n != config.d {
        return Err(Error::Shape(format!(
            "batch shape {}x{}x{} does not match model (t_max {}, d {})",
            b_n, t_n, d_n, config.t_max, config.d
        )));
    }
    if batch.mask.dim() != (b_n, t_n) {
        return Err(Error::Shape("mask shape does not match batch".into()));
    }
    if b_n == 0 {
        return Err(Error::Shape("empty batch".into()));
    }
    for b in 0..b_n {
        if !(0..t_n).any(|t| batch.mask[[b, t]]) {
            return Err(Error::Shape(format!("sentence {b} in batch has no unmasked positions")));
        }
    }
    let h_n = config.h;
    let heads = config.heads;
    let dk = config.head_dim();
    let scale = 1.0 / (dk as f64).sqrt();

    // Projection plus positional rows. Padded positions are computed too;
    // masking excludes them from attention keys, normalization statistics,
    // the heads, and every gradient, so their values are inert.
    let mut u_prime = Array3::<f64>::zeros((b_n, t_n, h_n));
    for b in 0..b_n {
        let xb = batch.x.index_axis(Axis(0), b);
        let u = xb.dot(&params.w_h) + &params.b_h + &params.p;
        u_prime.index_axis_mut(Axis(0), b).assign(&u);
    }

    // Masked multi-head scaled dot-product self-attention.
    let mut q_all = Vec::with_capacity(heads);
    let mut k_all = Vec::with_capacity(heads);
    let mut v_all = Vec::with_capacity(heads);
    let mut attn_all = Vec::with_capacity(heads);
    let mut z = Array3::<f64>::zeros((b_n, t_n, h_n));
    for head in 0..heads {
        let mut q_h = Array3::<f64>::zeros((b_n, t_n, dk));
        let mut k_h = Array3::<f64>::zeros((b_n, t_n, dk));
        let mut v_h = Array3::<f64>::zeros((b_n, t_n, dk));
        let mut a_h = Array3::<f64>::zeros((b_n, t_n, t_n));
        for b in 0..b_n {
            let u = u_prime.index_axis(Axis(0), b);
            let q = u.dot(&params.w_q[head]);
            let k = u.dot(&params.w_k[head]);
            let v = u.dot(&params.w_v[head]);
            let mut s = q.dot(&k.t());
            s *= scale;
            // Softmax over unmasked keys only.
            let mut a = Array2::<f64>::zeros((t_n, t_n));
            for i in 0..t_n {
                let mut max = f64::NEG_INFINITY;
                for j in 0..t_n {
                    if batch.mask[[b, j]] && s[[i, j]] > max {
                        max = s[[i, j]];
                    }
                }
                let mut sum = 0.0;
                for j in 0..t_n {
                    if batch.mask[[b, j]] {
                        let e = (s[[i, j]] - max).exp();
                        a[[i, j]] = e;
                        sum += e;
                    }
                }
                for j in 0..t_n {
                    a[[i, j]] /= sum;
                }
            }
            let head_out = a.dot(&v);
            let mix = head_out.dot(&params.w_m[head]);
            let mut zb = z.index_axis_mut(Axis(0), b);
            zb += &mix;
            q_h.index_axis_mut(Axis(0), b).assign(&q);
            k_h.index_axis_mut(Axis(0), b).assign(&k);
            v_h.index_axis_mut(Axis(0), b).assign(&v);
            a_h.index_axis_mut(Axis(0), b).assign(&a);
        }
        q_all.push(q_h);
        k_all.push(k_h);
        v_all.push(v_h);
        attn_all.push(a_h);
    }

    // Batch normalization per hidden dim over unmasked positions.
    let mut m_count = 0usize;
    for b in 0..b_n {
        for t in 0..t_n {
            if batch.mask[[b, t]] {
                m_count += 1;
            }
        }
    }
    let (bn_mean, bn_var) = match mode {
        Mode::Train => {
            let mut mean = Array1::<f64>::zeros(h_n);
            for b in 0..b_n {
                for t in 0..t_n {
                    if batch.mask[[b, t]] {
                        for j in 0..h_n {
                            mean[j] += z[[b, t, j]];
                        }
                    }
                }
            }
            mean /= m_count as f64;
            let mut var = Array1::<f64>::zeros(h_n);
            for b in 0..b_n {
                for t in 0..t_n {
                    if batch.mask[[b, t]] {
                        for j in 0..h_n {
                            let d = z[[b, t, j]] - mean[j];
                            var[j] += d * d;
                        }
                    }
                }
            }
            var /= m_count as f64;
            (mean, var)
        }
        Mode::Eval => (params.running_mean.clone(), params.running_var.clone()),
    };

    let mut x_hat = Array3::<f64>::zeros((b_n, t_n, h_n));
    let mut z_prime = Array3::<f64>::zeros((b_n, t_n, h_n));
    for b in 0..b_n {
        for t in 0..t_n {
            for j in 0..h_n {
                let xh = (z[[b, t, j]] - bn_mean[j]) / (bn_var[j] + BN_EPS).sqrt();
                x_hat[[b, t, j]] = xh;
                z_prime[[b, t, j]] = params.gamma[j] * xh + params.beta[j];
            }
        }
    }

    // Sentence head: zero padded positions, concatenate, ReLU, project.
    let mut relu_concat = Array2::<f64>::zeros((b_n, t_n * h_n));
    for b in 0..b_n {
        for t in 0..t_n {
            if batch.mask[[b, t]] {
                for j in 0..h_n {
                    relu_concat[[b, t * h_n + j]] = z_prime[[b, t, j]].max(0.0);
                }
            }
        }
    }
    let sent_logits = relu_concat.dot(&params.w_s) + &params.b_s;
    let sent_prob = Array1::from_iter(
        (0..b_n).map(|b| softmax2(sent_logits[[b, 0]], sent_logits[[b, 1]])),
    );

    // Token head: ReLU(z'_i) per position.
    let mut tok_logits = Array3::<f64>::zeros((b_n, t_n, 2));
    let mut tok_prob = Array2::<f64>::zeros((b_n, t_n));
    for b in 0..b_n {
        for t in 0..t_n {
            let mut l = [params.b_o[0], params.b_o[1]];
            for j in 0..h_n {
                let r = z_prime[[b, t, j]].max(0.0);
                l[0] += r * params.w_o[[j, 0]];
                l[1] += r * params.w_o[[j, 1]];
            }
            tok_logits[[b, t, 0]] = l[0];
            tok_logits[[b, t, 1]] = l[1];
            tok_prob[[b, t]] = softmax2(l[0], l[1]);
        }
    }

    Ok(ForwardTrace {
        mode,
        u_prime,
        q: q_all,
        k: k_all,
        v: v_all,
        attn: attn_all,
        z,
        bn_mean,
        bn_var,
        x_hat,
        z_prime,
        relu_concat,
        sent_logits,
        sent_prob,
        tok_logits,
        tok_prob,
        m_count,
    })
}

fn bce(p: f64, y: f64) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Batch loss for one task: sentence loss is the batch mean of per-sentence
/// cross-entropy; token loss sums over unmasked words first, then takes
/// the batch mean.
pub fn loss(trace: &ForwardTrace, batch: &TrainingBatch, task: TrainTask) -> f64 {
    let (b_n, t_n, _) = trace.z_prime.dim();
    match task {
        TrainTask::Sentence => {
            let mut total = 0.0;
            for b in 0..b_n {
                total += bce(trace.sent_prob[b], batch.y_s[b]);
            }
            total / b_n as f64
        }
        TrainTask::Token => {
            let mut total = 0.0;
            for b in 0..b_n {
                for t in 0..t_n {
                    if batch.mask[[b, t]] {
                        total += bce(trace.tok_prob[[b, t]], batch.y_o[[b, t]]);
                    }
                }
            }
            total / b_n as f64
        }
    }
}

/// P(relevant) per sentence, eval mode.
pub fn sentence_positive_probability(
    config: &ModelConfig,
    params: &ModelParams,
    batch: &TrainingBatch,
) -> Result<Array1<f64>> {
    let trace = forward(config, params, batch, Mode::Eval)?;
    Ok(trace.sent_prob)
}

/// Eval-mode scores for a batch: per-word answer probabilities at unmasked
/// positions (token task) or per-sentence relevance probabilities
/// (sentence task). Word scores are returned flattened in
/// (sentence, position) order.
pub fn predict(
    config: &ModelConfig,
    params: &ModelParams,
    batch: &TrainingBatch,
    task: TrainTask,
) -> Result<Vec<f64>> {
    let trace = forward(config, params, batch, Mode::Eval)?;
    let (b_n, t_n, _) = trace.z_prime.dim();
    match task {
        TrainTask::Sentence => Ok(trace.sent_prob.to_vec()),
        TrainTask::Token => {
            let mut out = Vec::new();
            for b in 0..b_n {
                for t in 0..t_n {
                    if batch.mask[[b, t]] {
                        out.push(trace.tok_prob[[b, t]]);
                    }
                }
            }
            Ok(out)
        }
    }
}
