//! Repeated-measures statistics: one-way RM ANOVA with Greenhouse-Geisser
//! correction, Bonferroni-adjusted pairwise t-tests, and a sign-flip
//! permutation test.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Sphericity rule: the Greenhouse-Geisser correction is applied when the
/// estimated epsilon falls below this value.
pub const GG_EPSILON_THRESHOLD: f64 = 0.95;

/// One pairwise paired t-test within the ANOVA family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairwiseTest {
    /// Condition (column) indices compared.
    pub pair: (usize, usize),
    pub t: f64,
    pub p_raw: f64,
    /// Bonferroni: min(1, m * p_raw) with m = k(k-1)/2.
    pub p_adjusted: f64,
}

/// One-way repeated-measures ANOVA result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f_value: f64,
    /// Uncorrected degrees of freedom (k-1, (k-1)(n-1)).
    pub df: (usize, usize),
    /// Epsilon-scaled degrees of freedom actually used when the correction
    /// applies; equals `df` otherwise.
    pub df_corrected: (f64, f64),
    pub gg_epsilon: f64,
    pub correction_applied: bool,
    /// Headline p-value: corrected when epsilon < 0.95, raw otherwise.
    pub p_value: f64,
    pub p_uncorrected: f64,
    pub pairwise: Vec<PairwiseTest>,
}

/// Survival function of the F distribution via the regularized incomplete
/// beta function; `d1`, `d2` may be fractional (epsilon-scaled).
fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    beta_reg(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
}

/// Two-sided paired t-test; returns (t, p).
pub fn paired_t(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("paired samples differ: {} vs {}", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Config("paired t-test needs at least two subjects".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Ok(if mean == 0.0 { (0.0, 1.0) } else { (f64::INFINITY * mean.signum(), 0.0) });
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .map_err(|e| Error::Metric(format!("t distribution: {e}")))?;
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok((t, p.clamp(0.0, 1.0)))
}

fn validate_matrix(values: &Array2<f64>) -> Result<(usize, usize)> {
    let (n, k) = values.dim();
    if n < 2 || k < 2 {
        return Err(Error::Config(format!(
            "repeated-measures ANOVA needs >=2 subjects and >=2 conditions, got {n}x{k}"
        )));
    }
    if !values.iter().all(|v| v.is_finite()) {
        return Err(Error::Data("missing or non-finite cells; no imputation is performed".into()));
    }
    Ok((n, k))
}

/// One-way repeated-measures ANOVA over a subjects x conditions matrix,
/// with Greenhouse-Geisser epsilon from the double-centered condition
/// covariance and Bonferroni pairwise tests.
pub fn rm_anova(values: &Array2<f64>) -> Result<AnovaResult> {
    let (n, k) = validate_matrix(values)?;
    let nf = n as f64;
    let kf = k as f64;

    let grand = values.sum() / (nf * kf);
    let cond_means: Vec<f64> = (0..k).map(|j| values.column(j).sum() / nf).collect();
    let subj_means: Vec<f64> = (0..n).map(|i| values.row(i).sum() / kf).collect();

    let ss_cond: f64 = nf * cond_means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>();
    let ss_subj: f64 = kf * subj_means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>();
    let ss_total: f64 = values.iter().map(|v| (v - grand) * (v - grand)).sum();
    let ss_err = (ss_total - ss_cond - ss_subj).max(0.0);

    let df1 = k - 1;
    let df2 = (k - 1) * (n - 1);
    let scale = 1.0 + ss_total;
    let (f_value, degenerate) = if ss_cond < 1e-12 * scale {
        (0.0, true)
    } else if ss_err < 1e-12 * scale {
        (f64::INFINITY, false)
    } else {
        ((ss_cond / df1 as f64) / (ss_err / df2 as f64), false)
    };

    let eps = gg_epsilon(values, n, k);
    let p_uncorrected = if degenerate { 1.0 } else { f_sf(f_value, df1 as f64, df2 as f64) };
    let correction_applied = eps < GG_EPSILON_THRESHOLD && !degenerate;
    let df_corrected = if correction_applied {
        (eps * df1 as f64, eps * df2 as f64)
    } else {
        (df1 as f64, df2 as f64)
    };
    let p_value = if degenerate {
        1.0
    } else if correction_applied {
        f_sf(f_value, df_corrected.0, df_corrected.1)
    } else {
        p_uncorrected
    };

    Ok(AnovaResult {
        f_value,
        df: (df1, df2),
        df_corrected,
        gg_epsilon: eps,
        correction_applied,
        p_value,
        p_uncorrected,
        pairwise: bonferroni_pairwise(values)?,
    })
}

/// Greenhouse-Geisser epsilon from the double-centered covariance of the
/// condition columns: tr(S*)^2 / ((k-1) tr(S*^2)). Degenerate covariance
/// (zero trace) reports epsilon 1.
fn gg_epsilon(values: &Array2<f64>, n: usize, k: usize) -> f64 {
    let nf = n as f64;
    let cond_means: Vec<f64> = (0..k).map(|j| values.column(j).sum() / nf).collect();
    // sample covariance of condition columns, ddof = 1
    let mut s = Array2::<f64>::zeros((k, k));
    for a in 0..k {
        for b in 0..k {
            let mut acc = 0.0;
            for i in 0..n {
                acc += (values[[i, a]] - cond_means[a]) * (values[[i, b]] - cond_means[b]);
            }
            s[[a, b]] = acc / (nf - 1.0);
        }
    }
    // double-center: S* = J S J with J = I - 11'/k
    let row_means: Vec<f64> = (0..k).map(|a| s.row(a).sum() / k as f64).collect();
    let col_means: Vec<f64> = (0..k).map(|b| s.column(b).sum() / k as f64).collect();
    let total_mean = s.sum() / (k * k) as f64;
    let mut star = Array2::<f64>::zeros((k, k));
    for a in 0..k {
        for b in 0..k {
            star[[a, b]] = s[[a, b]] - row_means[a] - col_means[b] + total_mean;
        }
    }
    let tr: f64 = (0..k).map(|i| star[[i, i]]).sum();
    let tr_sq: f64 = star.iter().map(|v| v * v).sum(); // tr(S*^2) for symmetric S*
    if tr.abs() < 1e-300 || tr_sq < 1e-300 {
        return 1.0;
    }
    let eps = tr * tr / ((k - 1) as f64 * tr_sq);
    eps.clamp(1.0 / (k - 1) as f64, 1.0)
}

/// All pairwise paired t-tests with Bonferroni adjustment.
pub fn bonferroni_pairwise(values: &Array2<f64>) -> Result<Vec<PairwiseTest>> {
    let (_, k) = validate_matrix(values)?;
    let m = (k * (k - 1) / 2) as f64;
    let mut out = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let col_a: Vec<f64> = values.column(a).to_vec();
            let col_b: Vec<f64> = values.column(b).to_vec();
            let (t, p_raw) = paired_t(&col_a, &col_b)?;
            out.push(PairwiseTest {
                pair: (a, b),
                t,
                p_raw,
                p_adjusted: (m * p_raw).min(1.0),
            });
        }
    }
    Ok(out)
}

/// Paired sign-flip permutation test, two-sided, with +1 smoothing:
/// p = (1 + #{|t*| >= |t_obs|}) / (1 + n_perm). Permutation `i` draws its
/// flips from a stream derived from `(seed, i)`, so the test is
/// deterministic and parallelizable.
pub fn permutation_paired_test(a: &[f64], b: &[f64], n_perm: usize, seed: u64) -> Result<f64> {
    if n_perm < 100 {
        return Err(Error::Config(format!("need at least 100 permutations, got {n_perm}")));
    }
    if a.len() != b.len() {
        return Err(Error::Shape(format!("paired samples differ: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::Config("permutation test needs at least two subjects".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let t_obs = t_of_differences(&d).abs();

    let mut exceed = 0usize;
    let mut flipped = vec![0.0; d.len()];
    for i in 0..n_perm {
        let mut rng = stream_rng(seed, i as u64);
        for (dst, &v) in flipped.iter_mut().zip(&d) {
            *dst = if rng.gen::<bool>() { -v } else { v };
        }
        if t_of_differences(&flipped).abs() >= t_obs {
            exceed += 1;
        }
    }
    Ok((1 + exceed) as f64 / (1 + n_perm) as f64)
}

/// t statistic of a difference vector against zero; 0 when the vector is
/// identically zero (so a/b equality gives p = 1 upstream).
fn t_of_differences(d: &[f64]) -> f64 {
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return if mean == 0.0 { 0.0 } else { f64::INFINITY * mean.signum() };
    }
    mean / (var / n).sqrt()
}
