//! Two-sample Kolmogorov–Smirnov test, Bonferroni correction and the Wilson
//! score interval.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    /// sup |ECDF_a − ECDF_b|
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

/// Two-sample KS test on unsorted samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidDataset("non-finite value in KS sample".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(ks_two_sample_sorted(&a, &b))
}

/// KS test on samples already sorted ascending. Both must be non-empty.
pub fn ks_two_sample_sorted(a: &[f64], b: &[f64]) -> KsResult {
    debug_assert!(!a.is_empty() && !b.is_empty());
    let statistic = ks_statistic_sorted(a, b);
    KsResult {
        statistic,
        p_value: ks_p_value(statistic, a.len(), b.len()),
        n1: a.len(),
        n2: b.len(),
    }
}

/// Exact D by a merge sweep over the pooled order statistics. Ties advance
/// both samples together, giving right-continuous ECDFs.
pub fn ks_statistic_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (n1, n2) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n1 && j < n2 {
        let x = a[i].min(b[j]);
        while i < n1 && a[i] <= x {
            i += 1;
        }
        while j < n2 && b[j] <= x {
            j += 1;
        }
        let diff = (i as f64 / n1 as f64 - j as f64 / n2 as f64).abs();
        d = d.max(diff);
    }
    // past the end of either sample the remaining gap only shrinks
    d
}

/// Two-sided asymptotic p-value with effective size n1·n2/(n1+n2).
pub fn ks_p_value(statistic: f64, n1: usize, n2: usize) -> f64 {
    if statistic <= 0.0 {
        return 1.0;
    }
    let en = (n1 as f64 * n2 as f64 / (n1 + n2) as f64).sqrt();
    kolmogorov_survival(en * statistic)
}

/// P(K > λ) for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let q = if lambda < 1.0 {
        // the alternating series converges slowly here; use the theta-function
        // form of the CDF instead
        let factor = (2.0 * std::f64::consts::PI).sqrt() / lambda;
        let w = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let mut cdf = 0.0;
        for j in 1..=100u32 {
            let odd = (2 * j - 1) as f64;
            let term = (-odd * odd * w).exp();
            cdf += term;
            if term < 1e-12 {
                break;
            }
        }
        1.0 - factor * cdf
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for j in 1..=100u32 {
            let jf = j as f64;
            let term = (-2.0 * jf * jf * lambda * lambda).exp();
            sum += sign * term;
            if term < 1e-12 {
                break;
            }
            sign = -sign;
        }
        2.0 * sum
    };
    q.clamp(0.0, 1.0)
}

/// Per-comparison significance level `alpha / comparisons`.
pub fn bonferroni_threshold(alpha: f64, comparisons: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if comparisons == 0 {
        return Err(Error::InvalidConfig("at least one comparison required".into()));
    }
    Ok(alpha / comparisons as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilsonInterval {
    /// Wilson centre, the shrunk proportion estimate.
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub confidence: f64,
}

impl WilsonInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Two-sided normal quantile for the given confidence level.
pub fn normal_quantile(confidence: f64) -> f64 {
    let normal = Normal::standard();
    normal.inverse_cdf(1.0 - (1.0 - confidence) / 2.0)
}

pub fn wilson_interval(successes: usize, trials: usize, confidence: f64) -> Result<WilsonInterval> {
    if trials == 0 || successes > trials {
        return Err(Error::InvalidCounts { successes, trials });
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    let z = normal_quantile(confidence);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let point = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // clamp rounding at the 0/n boundaries, where the bound is exactly 0 or 1
    let lower = if successes == 0 { 0.0 } else { (point - half).max(0.0) };
    let upper = if successes == trials { 1.0 } else { (point + half).min(1.0) };
    Ok(WilsonInterval {
        point,
        lower,
        upper,
        confidence,
    })
}
