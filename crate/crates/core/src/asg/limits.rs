//! Generator limits of the lineage counting process and the monotonicity of
//! its jump probabilities in the population size.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::graphical::Band;
use super::transition::{p_minus, p_plus, transition_components};
use crate::error::Result;
use crate::measures::{build_coupling, LawFamily, ModelParams};
use crate::weight::{Rational, Weight};

/// Event-size cutoff `κ_L = 1/(20L)` for the auxiliary coupling.
pub fn kappa_for(big_l: u64) -> f64 {
    1.0 / (20.0 * big_l.max(1) as f64)
}

/// One row of the limit table: `K² Σ_{(i,j)} p(n; i, j, K) ν_K(i, j)` for
/// the branching, coalescence and residual probabilities, evaluated at
/// `N = K` in exact arithmetic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    #[serde(rename = "K")]
    pub k: u64,
    pub n: u64,
    pub plus_sum: f64,
    pub minus_sum: f64,
    pub bar_sum: f64,
    /// `n·𝔰`.
    pub plus_target: f64,
    /// `C(n, 2)(𝔪 + 𝔳⁻)`.
    pub minus_target: f64,
}

impl LimitRow {
    pub fn plus_relative_error(&self) -> f64 {
        relative(self.plus_sum, self.plus_target)
    }

    pub fn minus_relative_error(&self) -> f64 {
        relative(self.minus_sum, self.minus_target)
    }
}

fn relative(value: f64, target: f64) -> f64 {
    if target == 0.0 {
        value.abs()
    } else {
        (value - target).abs() / target.abs()
    }
}

/// Exact limit sums for `1 ≤ n ≤ n_max` and every `K` in `ks`.
pub fn generator_limit_probe(family: &LawFamily, n_max: u64, ks: &[u64]) -> Result<Vec<LimitRow>> {
    let s = (family.s_plus() - family.s_minus()).to_f64();
    let coalescence = (family.m() + family.v_minus()).to_f64();
    let mut rows = Vec::new();
    for &k in ks {
        let params = ModelParams::from_family(family, k, 0.0, 0.0)?;
        let nu = build_coupling(&params)?;
        let scale = Rational::from_u64(k) * Rational::from_u64(k);
        for n in 1..=n_max.min(k) {
            let mut plus = Rational::zero();
            let mut minus = Rational::zero();
            let mut bar = Rational::zero();
            for ((i, j), mass) in nu.atoms() {
                let (i, j) = (i as u64, j as u64);
                plus += p_plus::<Rational>(i, j, n, k)? * mass;
                minus += p_minus::<Rational>(i, j, n, k)? * mass;
                bar += transition_components::<Rational>(i, j, n, k)?.p_bar() * mass;
            }
            rows.push(LimitRow {
                k,
                n,
                plus_sum: (plus * &scale).to_f64(),
                minus_sum: (minus * &scale).to_f64(),
                bar_sum: (bar * &scale).to_f64(),
                plus_target: n as f64 * s,
                minus_target: (n * (n - 1) / 2) as f64 * coalescence,
            });
        }
    }
    Ok(rows)
}

/// Whether `N ↦ p^±(n, N)` is nonincreasing on the default band for every
/// `n ≤ L` and every atom `(i, j)` of `ν_K` with `i, j ≤ κ_L·K`.
pub fn is_monotone_at(family: &LawFamily, big_l: u64, k: u64) -> Result<bool> {
    let params = ModelParams::from_family(family, k, 0.0, 0.0)?;
    let nu = build_coupling(&params)?;
    let band = Band::default_for(k);
    let cutoff = kappa_for(big_l) * k as f64;
    for &((i, j), _) in nu.atoms_f64() {
        let (i, j) = (i as u64, j as u64);
        if i as f64 > cutoff || j as f64 > cutoff || i + 2 * j > band.lower {
            continue;
        }
        for n in 1..=big_l.min(band.lower) {
            let mut prev: Option<(f64, f64)> = None;
            for big_n in band.lower.max(1)..=band.upper {
                let cur = (p_plus::<f64>(i, j, n, big_n)?, p_minus::<f64>(i, j, n, big_n)?);
                if let Some((pp, pm)) = prev {
                    let slack = 1e-12;
                    if cur.0 > pp * (1.0 + slack) + f64::MIN_POSITIVE || cur.1 > pm * (1.0 + slack) + f64::MIN_POSITIVE
                    {
                        return Ok(false);
                    }
                }
                prev = Some(cur);
            }
        }
    }
    Ok(true)
}

/// Outcome of the search for a carrying capacity beyond which the
/// monotonicity holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub big_l: u64,
    /// `(K, holds)` for every candidate, in increasing `K`.
    pub checked: Vec<(u64, bool)>,
    /// Smallest candidate from which the property holds at every larger
    /// candidate.
    pub threshold: Option<u64>,
}

pub fn search_monotonicity_threshold(family: &LawFamily, big_l: u64, candidates: &[u64]) -> Result<MonotonicityReport> {
    let mut ks = candidates.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let checked = ks.iter().map(|&k| Ok((k, is_monotone_at(family, big_l, k)?))).collect::<Result<Vec<_>>>()?;
    let threshold = checked
        .iter()
        .rposition(|&(_, ok)| !ok)
        .map_or(checked.first().map(|c| c.0), |idx| checked.get(idx + 1).map(|c| c.0));
    Ok(MonotonicityReport { big_l, checked, threshold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    #[test]
    fn kappa_values() {
        assert_eq!(kappa_for(1), 0.05);
        assert_eq!(kappa_for(10), 0.005);
        assert!(kappa_for(3) > kappa_for(4));
    }

    #[test]
    fn moran_limits_small_k() {
        let family = LawFamily::moran(Rational::one());
        let rows = generator_limit_probe(&family, 3, &[100, 1000]).unwrap();
        assert_eq!(rows.len(), 6);
        // One lineage at a (1, 1) event branches with probability exactly 1/K.
        assert_eq!(rows[0].plus_sum, 1.0);
        assert_eq!(rows[0].minus_sum, 0.0);
        assert!(rows[5].plus_relative_error() < rows[2].plus_relative_error());
        assert!(rows[5].minus_relative_error() < rows[2].minus_relative_error());
    }
}
