//! Small statistics toolkit: deterministic reductions, Monte-Carlo error
//! estimates, log-log fits and the two-sample Kolmogorov–Smirnov test.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Neumaier-compensated sum in the given order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Mean that depends only on the multiset of values: they are sorted before
/// the compensated sum, so any permutation or partitioning of the particles
/// gives the same bits.
pub fn order_free_mean(values: &[f64], scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend_from_slice(values);
    scratch.sort_unstable_by(f64::total_cmp);
    compensated_sum(scratch.iter().copied()) / values.len() as f64
}

pub fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    compensated_sum(values.iter().map(|v| (v - m) * (v - m))) / (values.len() as f64 - 1.0)
}

/// Monte-Carlo estimate of an expectation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
    pub confidence_halfwidth_95: f64,
}

impl ErrorEstimate {
    pub fn lower(&self) -> f64 {
        self.mean - self.confidence_halfwidth_95
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.confidence_halfwidth_95
    }

    pub fn overlaps(&self, other: &ErrorEstimate) -> bool {
        self.lower() <= other.upper() && other.lower() <= self.upper()
    }
}

pub fn estimate_error(samples: &[f64]) -> Result<ErrorEstimate> {
    if samples.len() < 2 {
        return Err(param("samples", format!("need n >= 2, got {}", samples.len())));
    }
    let n = samples.len();
    let std_error = (sample_variance(samples) / n as f64).sqrt();
    Ok(ErrorEstimate {
        mean: mean(samples),
        std_error,
        n,
        confidence_halfwidth_95: 1.96 * std_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Weighted least squares `y ≈ intercept + slope·x`. Unit weights give the
/// ordinary fit.
pub fn fit_line(x: &[f64], y: &[f64], w: Option<&[f64]>) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(param("fit", "need at least two (x, y) pairs of equal length"));
    }
    let ones = vec![1.0; x.len()];
    let w = w.unwrap_or(&ones);
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * dy;
        syy += w[i] * dy * dy;
    }
    if sxx == 0.0 {
        return Err(param("fit", "x values are all equal"));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Two-sample KS statistic `sup |F_a - F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic critical value of the two-sample KS statistic at level `alpha`:
/// `sqrt(-ln(alpha/2)/2) · sqrt((n+m)/(n·m))`.
pub fn ks_critical(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    let (n, m) = (n as f64, m as f64);
    c * ((n + m) / (n * m)).sqrt()
}
