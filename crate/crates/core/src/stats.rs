//! Estimators and test statistics shared by the Monte Carlo checks.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: u64,
    pub mean: f64,
    /// Unbiased sample variance (0 for a single sample).
    pub variance: f64,
    /// `sqrt(variance / count)`.
    pub se: f64,
}

impl Summary {
    /// A known constant, with zero standard error.
    pub fn exact(value: f64, count: u64) -> Self {
        Self { count, mean: value, variance: 0.0, se: 0.0 }
    }
}

/// Mean, unbiased variance and standard error. Uses Welford's update.
pub fn summary_stats(samples: &[f64]) -> Result<Summary> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (k, &x) in samples.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (x - mean);
    }
    let count = samples.len() as u64;
    let variance = if count > 1 { (m2 / (count - 1) as f64).max(0.0) } else { 0.0 };
    Ok(Summary { count, mean, variance, se: (variance / count as f64).sqrt() })
}

/// `(mean_a − mean_b) / sqrt(se_a² + se_b²)`, with `0/0 = 0`.
pub fn z_score(mean_a: f64, se_a: f64, mean_b: f64, se_b: f64) -> f64 {
    let diff = mean_a - mean_b;
    let scale = (se_a * se_a + se_b * se_b).sqrt();
    if scale == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    } else {
        diff / scale
    }
}

/// Two-sample z statistic of two sample sets.
pub fn two_sample_z(a: &[f64], b: &[f64]) -> Result<f64> {
    let (sa, sb) = (summary_stats(a)?, summary_stats(b)?);
    Ok(z_score(sa.mean, sa.se, sb.mean, sb.se))
}

/// Ratio estimator `Σx / Σy` over paired replicates with its delta-method
/// standard error.
pub fn ratio_estimate(numerators: &[f64], denominators: &[f64]) -> Result<(f64, f64)> {
    if numerators.is_empty() || numerators.len() != denominators.len() {
        return Err(Error::EmptySample);
    }
    let n = numerators.len() as f64;
    let mx = numerators.iter().sum::<f64>() / n;
    let my = denominators.iter().sum::<f64>() / n;
    if my == 0.0 {
        return Ok((0.0, 0.0));
    }
    let r = mx / my;
    if numerators.len() < 2 {
        return Ok((r, 0.0));
    }
    let resid: f64 = numerators.iter().zip(denominators).map(|(x, y)| (x - r * y).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((r, (resid / n).sqrt() / my))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
}

/// Pearson goodness-of-fit of observed counts against cell probabilities.
/// Cells with expected count below `min_expected` are pooled, in order,
/// into their neighbour before the statistic is formed.
pub fn chi_square_gof(observed: &[u64], probabilities: &[f64], min_expected: f64) -> Result<ChiSquareResult> {
    if observed.len() != probabilities.len() || observed.is_empty() {
        return Err(Error::InvalidParams("observed and probability vectors must match and be nonempty".into()));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(Error::EmptySample);
    }
    let mass: f64 = probabilities.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pending = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probabilities) {
        pending.0 += o as f64;
        pending.1 += p / mass * total as f64;
        if pending.1 >= min_expected {
            cells.push(pending);
            pending = (0.0, 0.0);
        }
    }
    if pending.1 > 0.0 || pending.0 > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += pending.0;
                last.1 += pending.1;
            }
            None => cells.push(pending),
        }
    }
    if cells.len() < 2 {
        return Ok(ChiSquareResult { statistic: 0.0, dof: 0, p_value: 1.0 });
    }
    let statistic: f64 = cells.iter().map(|(o, e)| if *e > 0.0 { (o - e).powi(2) / e } else { 0.0 }).sum();
    let dof = cells.len() as u64 - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidParams(e.to_string()))?;
    Ok(ChiSquareResult { statistic, dof, p_value: 1.0 - dist.cdf(statistic) })
}

/// Least-squares line through `(ln x, ln y)`; returns `(slope, intercept)`.
/// Points with a nonpositive coordinate are dropped. `None` with fewer than
/// two usable points.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> =
        xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Two-sample Kolmogorov–Smirnov distance between empirical distributions.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Critical KS distance at level 1% for two samples of sizes `n` and `m`.
pub fn ks_critical_1pct(n: usize, m: usize) -> f64 {
    1.628 * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}
