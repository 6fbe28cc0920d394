//! Hand-derived gradients for the full network, one task head at a time.
//! The finite-difference suite in `tests` probes every tensor.

use ndarray::{Array1, Array2, Axis};

use crate::dataset::TrainingBatch;
use crate::error::{Error, Result};
use crate::model::{ForwardTrace, Mode, ModelConfig, ModelParams, TrainTask, BN_EPS, PROB_CLAMP};

/// Gradient accumulator with the same tensor layout as the parameters.
/// The running-statistics fields stay zero; they are state, not
/// learnables.
pub type ModelGrads = ModelParams;

/// Gradient of the batch loss with respect to every learnable tensor.
/// `trace` must come from a `Mode::Train` forward over the same batch.
pub fn backward(
    config: &ModelConfig,
    params: &ModelParams,
    batch: &TrainingBatch,
    trace: &ForwardTrace,
    task: TrainTask,
) -> Result<ModelGrads> {
    if trace.mode != Mode::Train {
        return Err(Error::Training("backward requires a train-mode forward trace".into()));
    }
    let (b_n, t_n, h_n) = trace.z_prime.dim();
    let dk = config.head_dim();
    let scale = 1.0 / (dk as f64).sqrt();
    let inv_b = 1.0 / b_n as f64;
    let mut g = ModelGrads::zeros(config);

    // Head gradients. Two-logit softmax with cross-entropy gives
    // dL/dl1 = p - y and dL/dl0 = -(p - y); a clamped probability sits on
    // a flat stretch of the loss, so its gradient is exactly zero.
    let mut d_zp = ndarray::Array3::<f64>::zeros((b_n, t_n, h_n));
    match task {
        TrainTask::Sentence => {
            for b in 0..b_n {
                let p = trace.sent_prob[b];
                if p <= PROB_CLAMP || p >= 1.0 - PROB_CLAMP {
                    continue;
                }
                let d1 = (p - batch.y_s[b]) * inv_b;
                let d0 = -d1;
                for c in 0..t_n * h_n {
                    let r = trace.relu_concat[[b, c]];
                    g.w_s[[c, 0]] += r * d0;
                    g.w_s[[c, 1]] += r * d1;
                }
                g.b_s[0] += d0;
                g.b_s[1] += d1;
                for t in 0..t_n {
                    for j in 0..h_n {
                        let c = t * h_n + j;
                        if trace.relu_concat[[b, c]] > 0.0 {
                            d_zp[[b, t, j]] +=
                                params.w_s[[c, 0]] * d0 + params.w_s[[c, 1]] * d1;
                        }
                    }
                }
            }
        }
        TrainTask::Token => {
            for b in 0..b_n {
                for t in 0..t_n {
                    if !batch.mask[[b, t]] {
                        continue;
                    }
                    let p = trace.tok_prob[[b, t]];
                    if p <= PROB_CLAMP || p >= 1.0 - PROB_CLAMP {
                        continue;
                    }
                    let d1 = (p - batch.y_o[[b, t]]) * inv_b;
                    let d0 = -d1;
                    for j in 0..h_n {
                        let r = trace.z_prime[[b, t, j]].max(0.0);
                        g.w_o[[j, 0]] += r * d0;
                        g.w_o[[j, 1]] += r * d1;
                        if trace.z_prime[[b, t, j]] > 0.0 {
                            d_zp[[b, t, j]] +=
                                params.w_o[[j, 0]] * d0 + params.w_o[[j, 1]] * d1;
                        }
                    }
                    g.b_o[0] += d0;
                    g.b_o[1] += d1;
                }
            }
        }
    }

    // Batch-norm backward over the unmasked set M (|M| = m). With
    // xhat = (z - mu)/sqrt(var + eps) and mu, var computed from M:
    //   dz = (1/(m*sqrt(var+eps))) * (m*dxhat - sum(dxhat) - xhat*sum(dxhat*xhat))
    let m = trace.m_count as f64;
    let mut s1 = Array1::<f64>::zeros(h_n);
    let mut s2 = Array1::<f64>::zeros(h_n);
    for b in 0..b_n {
        for t in 0..t_n {
            if !batch.mask[[b, t]] {
                continue;
            }
            for j in 0..h_n {
                let dzp = d_zp[[b, t, j]];
                let xh = trace.x_hat[[b, t, j]];
                g.gamma[j] += dzp * xh;
                g.beta[j] += dzp;
                let dxh = dzp * params.gamma[j];
                s1[j] += dxh;
                s2[j] += dxh * xh;
            }
        }
    }
    let mut d_z = ndarray::Array3::<f64>::zeros((b_n, t_n, h_n));
    for b in 0..b_n {
        for t in 0..t_n {
            if !batch.mask[[b, t]] {
                continue;
            }
            for j in 0..h_n {
                let dxh = d_zp[[b, t, j]] * params.gamma[j];
                let xh = trace.x_hat[[b, t, j]];
                let denom = m * (trace.bn_var[j] + BN_EPS).sqrt();
                d_z[[b, t, j]] = (m * dxh - s1[j] - xh * s2[j]) / denom;
            }
        }
    }

    // Attention backward, per head and sample. Masked queries carry
    // dz = 0 and masked keys carry zero attention weight, so every
    // masked row of dU' comes out exactly zero.
    let mut d_up = ndarray::Array3::<f64>::zeros((b_n, t_n, h_n));
    for head in 0..config.heads {
        for b in 0..b_n {
            let dz_b = d_z.index_axis(Axis(0), b);
            let a_b = trace.attn[head].index_axis(Axis(0), b);
            let q_b = trace.q[head].index_axis(Axis(0), b);
            let k_b = trace.k[head].index_axis(Axis(0), b);
            let v_b = trace.v[head].index_axis(Axis(0), b);
            let u_b = trace.u_prime.index_axis(Axis(0), b);

            let head_out = a_b.dot(&v_b);
            g.w_m[head] += &head_out.t().dot(&dz_b);
            let d_head_out = dz_b.dot(&params.w_m[head].t());
            let d_a = d_head_out.dot(&v_b.t());
            let d_v = a_b.t().dot(&d_head_out);
            // Softmax rows: ds_ij = a_ij * (da_ij - sum_k a_ik * da_ik).
            let mut d_s = Array2::<f64>::zeros((t_n, t_n));
            for i in 0..t_n {
                let mut dot = 0.0;
                for j in 0..t_n {
                    dot += a_b[[i, j]] * d_a[[i, j]];
                }
                for j in 0..t_n {
                    d_s[[i, j]] = a_b[[i, j]] * (d_a[[i, j]] - dot);
                }
            }
            d_s *= scale;
            let d_q = d_s.dot(&k_b);
            let d_k = d_s.t().dot(&q_b);
            g.w_q[head] += &u_b.t().dot(&d_q);
            g.w_k[head] += &u_b.t().dot(&d_k);
            g.w_v[head] += &u_b.t().dot(&d_v);
            let mut dup_b = d_up.index_axis_mut(Axis(0), b);
            dup_b += &d_q.dot(&params.w_q[head].t());
            dup_b += &d_k.dot(&params.w_k[head].t());
            dup_b += &d_v.dot(&params.w_v[head].t());
        }
    }

    // Projection and positional table.
    for b in 0..b_n {
        let dup_b = d_up.index_axis(Axis(0), b);
        let xb = batch.x.index_axis(Axis(0), b);
        g.w_h += &xb.t().dot(&dup_b);
        g.p += &dup_b;
        for t in 0..t_n {
            for j in 0..h_n {
                g.b_h[j] += dup_b[[t, j]];
            }
        }
    }

    Ok(g)
}

/// Fail training fast if any gradient coordinate is non-finite, naming
/// the offending tensor.
pub fn check_finite(grads: &mut ModelGrads) -> Result<()> {
    for (name, slice) in grads.learnables_mut() {
        if slice.iter().any(|v| !v.is_finite()) {
            return Err(Error::Training(format!("non-finite gradient in {name}")));
        }
    }
    Ok(())
}
