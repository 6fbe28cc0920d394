//! Reference scorers the attention model is compared against: random
//! scores, a regularized logistic word scorer, and the word-to-sentence
//! score aggregation rule.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Independent uniform scores in [0, 1): the untrained reference.
pub fn untrained_scores(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

/// Sentence score from its word scores: mean of maximum, mean, and
/// median. The median of an even count averages the two middle values.
pub fn aggregate_sentence_score(word_scores: &[f64]) -> Result<f64> {
    if word_scores.is_empty() {
        return Err(Error::Config("cannot aggregate an empty score list".into()));
    }
    if word_scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Metric("non-finite word score".into()));
    }
    let max = word_scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = word_scores.iter().sum::<f64>() / word_scores.len() as f64;
    let mut sorted = word_scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok((max + mean + median) / 3.0)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// L2-regularized logistic regression trained by full-batch gradient
/// descent from a zero init. The bias is unregularized.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticScorer {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LogisticScorer {
    pub fn fit(x: &Array2<f64>, y: &[f64], steps: usize, lr: f64, l2: f64) -> Result<Self> {
        let (n, d) = x.dim();
        if n == 0 || d == 0 {
            return Err(Error::Config("empty design matrix".into()));
        }
        if y.len() != n {
            return Err(Error::Shape(format!("{} rows vs {} labels", n, y.len())));
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite value in training data".into()));
        }
        let mut w = vec![0.0f64; d];
        let mut b = 0.0f64;
        let inv_n = 1.0 / n as f64;
        for _ in 0..steps {
            let mut gw = vec![0.0f64; d];
            let mut gb = 0.0f64;
            for i in 0..n {
                let mut z = b;
                for j in 0..d {
                    z += x[[i, j]] * w[j];
                }
                let g = sigmoid(z) - y[i];
                for j in 0..d {
                    gw[j] += x[[i, j]] * g;
                }
                gb += g;
            }
            for j in 0..d {
                w[j] -= lr * (gw[j] * inv_n + l2 * w[j]);
            }
            b -= lr * gb * inv_n;
        }
        Ok(LogisticScorer { w, b })
    }

    pub fn predict(&self, x: &Array2<f64>) -> Vec<f64> {
        let (n, d) = x.dim();
        debug_assert_eq!(d, self.w.len());
        (0..n)
            .map(|i| {
                let mut z = self.b;
                for j in 0..d.min(self.w.len()) {
                    z += x[[i, j]] * self.w[j];
                }
                sigmoid(z)
            })
            .collect()
    }

    /// Mean cross-entropy (with a 1e-12 floor inside the logs) plus the
    /// L2 penalty 0.5*l2*|w|^2.
    pub fn loss(&self, x: &Array2<f64>, y: &[f64], l2: f64) -> f64 {
        let p = self.predict(x);
        let eps = 1e-12;
        let bce = -p
            .iter()
            .zip(y)
            .map(|(p, y)| y * (p + eps).ln() + (1.0 - y) * (1.0 - p + eps).ln())
            .sum::<f64>()
            / y.len() as f64;
        bce + 0.5 * l2 * self.w.iter().map(|w| w * w).sum::<f64>()
    }
}
