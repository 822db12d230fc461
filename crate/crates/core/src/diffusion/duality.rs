//! The moment duality `E[W(t)ⁿ | W(0) = w] = E[w^{A(t)} | A(0) = n]`.

use serde::{Deserialize, Serialize};

use super::dual::dual_at_times;
use super::params::{diffusion_coefficient, drift, DiffusionParams};
use super::sde::sde_at_times;
use crate::error::{Error, Result};
use crate::parallel::try_map_replicates;
use crate::rng::substream_seed;
use crate::stats::{summary_stats, z_score, Summary};

/// Frequency generator applied to `w ↦ wⁿ` minus the dual generator applied
/// to `k ↦ w^k` at `n`. Both are polynomials in `w` and agree identically.
pub fn generator_duality_residual(w: f64, n: u64, p: &DiffusionParams) -> Result<f64> {
    p.check_dual()?;
    let nf = n as f64;
    let pow = |k: i64| if k < 0 { 0.0 } else { w.powi(k as i32) };
    let n_i = n as i64;
    let forward = drift(w, p) * nf * pow(n_i - 1) + 0.5 * diffusion_coefficient(w, p)? * nf * (nf - 1.0) * pow(n_i - 2);
    let (up, down) = p.dual_rates(n);
    let backward = up * (pow(n_i + 1) - pow(n_i)) + if n > 0 { down * (pow(n_i - 1) - pow(n_i)) } else { 0.0 };
    Ok(forward - backward)
}

/// Monte Carlo comparison of both sides of the duality at one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub w0: f64,
    pub n0: u64,
    pub t: f64,
    pub lhs_mean: f64,
    pub lhs_se: f64,
    pub rhs_mean: f64,
    pub rhs_se: f64,
    pub z: f64,
    pub replicates: u64,
    pub seed: u64,
}

/// Settings shared by every cell of a duality grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DualityGrid {
    pub w0s: Vec<f64>,
    pub n0s: Vec<u64>,
    pub times: Vec<f64>,
    pub replicates: u64,
    pub dt: Option<f64>,
}

fn cell_summary(values: impl Iterator<Item = f64>) -> Result<Summary> {
    summary_stats(&values.collect::<Vec<_>>())
}

/// Run a grid of duality checks. Each diffusion path serves every `n0` and
/// `t` for its `w0`, and each dual path serves every `w0` and `t` for its
/// `n0`. The two sides use disjoint seed streams.
pub fn duality_grid(grid: &DualityGrid, p: &DiffusionParams, seed: u64, jobs: usize) -> Result<Vec<DualityReport>> {
    p.check_dual()?;
    if grid.replicates == 0 {
        return Err(Error::EmptySample);
    }
    let mut times = grid.times.clone();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let positive: Vec<f64> = times.iter().copied().filter(|&t| t > 0.0).collect();
    let dt = grid.dt.unwrap_or_else(|| p.default_dt());

    let forward: Vec<Vec<Vec<f64>>> = grid
        .w0s
        .iter()
        .enumerate()
        .map(|(idx, &w0)| {
            try_map_replicates(grid.replicates, substream_seed(seed, 1000 + idx as u64), jobs, |_, s| {
                sde_at_times(w0, p, &positive, dt, s)
            })
        })
        .collect::<Result<_>>()?;
    let backward: Vec<Vec<Vec<u64>>> = grid
        .n0s
        .iter()
        .map(|&n0| {
            try_map_replicates(grid.replicates, substream_seed(seed, 2000 + n0), jobs, |_, s| {
                dual_at_times(n0, p, &positive, s)
            })
        })
        .collect::<Result<_>>()?;

    let mut reports = Vec::new();
    for (wi, &w0) in grid.w0s.iter().enumerate() {
        for (ni, &n0) in grid.n0s.iter().enumerate() {
            for &t in &grid.times {
                let exact = w0.powi(n0 as i32);
                let (lhs, rhs) = match positive.iter().position(|&x| x == t) {
                    None => (Summary::exact(exact, grid.replicates), Summary::exact(exact, grid.replicates)),
                    Some(ti) => (
                        cell_summary(forward[wi].iter().map(|path| path[ti].powi(n0 as i32)))?,
                        cell_summary(backward[ni].iter().map(|path| w0.powi(path[ti] as i32)))?,
                    ),
                };
                reports.push(DualityReport {
                    w0,
                    n0,
                    t,
                    lhs_mean: lhs.mean,
                    lhs_se: lhs.se,
                    rhs_mean: rhs.mean,
                    rhs_se: rhs.se,
                    z: z_score(lhs.mean, lhs.se, rhs.mean, rhs.se),
                    replicates: grid.replicates,
                    seed,
                });
            }
        }
    }
    Ok(reports)
}

/// Single-cell duality check.
pub fn duality_check(
    w0: f64,
    n0: u64,
    t: f64,
    p: &DiffusionParams,
    replicates: u64,
    seed: u64,
    jobs: usize,
) -> Result<DualityReport> {
    let grid = DualityGrid { w0s: vec![w0], n0s: vec![n0], times: vec![t], replicates, dt: None };
    Ok(duality_grid(&grid, p, seed, jobs)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_lineage_identity() {
        let p = DiffusionParams::new(1.0, 2.0, 0.5, 1.5, 1.0, 0.0, 0.0).unwrap();
        assert!(generator_duality_residual(0.3, 1, &p).unwrap().abs() < 1e-15);
        for n in 0..8 {
            assert!(generator_duality_residual(0.0, n, &p).unwrap().abs() < 1e-15);
            assert!(generator_duality_residual(1.0, n, &p).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn time_zero_gives_zero_z() {
        let p = DiffusionParams::moran(1.0, 0.5, 0.0).unwrap();
        let r = duality_check(0.4, 3, 0.0, &p, 10, 1, 1).unwrap();
        assert_eq!(r.z, 0.0);
        assert!((r.lhs_mean - 0.064).abs() < 1e-15);
        assert_eq!(r.lhs_mean, r.rhs_mean);
    }

    #[test]
    fn no_lineages_gives_one() {
        let p = DiffusionParams::moran(1.0, 0.5, 0.0).unwrap();
        let r = duality_check(0.4, 0, 0.2, &p, 50, 1, 1).unwrap();
        assert_eq!((r.lhs_mean, r.rhs_mean, r.z), (1.0, 1.0, 0.0));
    }
}
