//! The branching–coalescing dual chain of the frequency diffusion.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::params::DiffusionParams;
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, SimRng};

/// Jump times and values of the dual chain; `0` is absorbing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPath {
    pub points: Vec<(f64, u64)>,
    pub horizon: f64,
}

impl DualPath {
    pub fn value_at(&self, t: f64) -> u64 {
        let idx = self.points.partition_point(|p| p.0 <= t);
        self.points[idx.saturating_sub(1)].1
    }

    /// CSV `t,value`.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "t,value")?;
        for (t, n) in &self.points {
            writeln!(out, "{t},{n}")?;
        }
        Ok(())
    }
}

/// One Gillespie step from `n`: `(waiting time, next state)`, or `None` if
/// absorbed.
fn step(n: u64, p: &DiffusionParams, rng: &mut SimRng) -> Option<(f64, u64)> {
    let (up, down) = p.dual_rates(n);
    let total = up + down;
    if total <= 0.0 {
        return None;
    }
    let wait: f64 = Exp1.sample(rng);
    let next = if rng.random::<f64>() * total < up { n + 1 } else { n - 1 };
    Some((wait / total, next))
}

pub fn simulate_dual(n0: u64, p: &DiffusionParams, horizon: f64, seed: u64) -> Result<DualPath> {
    p.check_dual()?;
    let mut rng = rng_from_seed(seed);
    let mut points = vec![(0.0, n0)];
    let (mut t, mut n) = (0.0, n0);
    while let Some((wait, next)) = step(n, p, &mut rng) {
        if t + wait > horizon {
            break;
        }
        t += wait;
        n = next;
        points.push((t, n));
    }
    Ok(DualPath { points, horizon })
}

/// Values of one dual path at the given increasing times.
pub fn dual_at_times(n0: u64, p: &DiffusionParams, times: &[f64], seed: u64) -> Result<Vec<u64>> {
    p.check_dual()?;
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(times.len());
    let (mut t, mut n) = (0.0, n0);
    let mut pending = step(n, p, &mut rng);
    for &target in times {
        while let Some((wait, next)) = pending {
            if t + wait > target {
                break;
            }
            t += wait;
            n = next;
            pending = step(n, p, &mut rng);
        }
        // Keep the pending jump, measured from the observation time.
        if let Some((wait, _)) = &mut pending {
            *wait -= target - t;
        }
        t = target.max(t);
        out.push(n);
    }
    Ok(out)
}

/// Two dual chains from `low ≤ high` on one probability space. They move
/// independently while apart and together once they meet; since jumps are
/// `±1` and never simultaneous, the order is preserved. Returns the values
/// at `horizon`.
pub fn coupled_duals(low: u64, high: u64, p: &DiffusionParams, horizon: f64, seed: u64) -> Result<(u64, u64)> {
    p.check_dual()?;
    if low > high {
        return Err(Error::InvalidParams(format!("need low <= high, got {low} > {high}")));
    }
    let mut rng = rng_from_seed(seed);
    let (mut t, mut a, mut b) = (0.0, low, high);
    loop {
        if a == b {
            while let Some((wait, next)) = step(a, p, &mut rng) {
                if t + wait > horizon {
                    break;
                }
                t += wait;
                a = next;
            }
            return Ok((a, a));
        }
        let (ua, da) = p.dual_rates(a);
        let (ub, db) = p.dual_rates(b);
        let total = ua + da + ub + db;
        if total <= 0.0 {
            return Ok((a, b));
        }
        let wait: f64 = Exp1.sample(&mut rng);
        t += wait / total;
        if t > horizon {
            return Ok((a, b));
        }
        let u = rng.random::<f64>() * total;
        if u < ua {
            a += 1;
        } else if u < ua + da {
            a -= 1;
        } else if u < ua + da + ub {
            b += 1;
        } else {
            b -= 1;
        }
    }
}

/// Law of the dual chain at time `t` from `n0`, computed by uniformization
/// on `{0, …, n_max}` with branching switched off at `n_max`.
pub fn dual_pmf(n0: u64, p: &DiffusionParams, t: f64, n_max: u64) -> Result<Vec<f64>> {
    p.check_dual()?;
    if n0 > n_max {
        return Err(Error::InvalidParams(format!("n0 = {n0} exceeds truncation {n_max}")));
    }
    let size = n_max as usize + 1;
    let rates: Vec<(f64, f64)> = (0..=n_max)
        .map(|n| {
            let (up, down) = p.dual_rates(n);
            (if n == n_max { 0.0 } else { up }, down)
        })
        .collect();
    let lambda = rates.iter().map(|(u, d)| u + d).fold(0.0, f64::max);
    let mut pmf = vec![0.0; size];
    pmf[n0 as usize] = 1.0;
    if lambda == 0.0 || t == 0.0 {
        return Ok(pmf);
    }
    // Split the horizon so that each piece has a moderate Poisson mean.
    let pieces = (lambda * t / 20.0).ceil().max(1.0) as usize;
    let mean = lambda * t / pieces as f64;
    for _ in 0..pieces {
        let mut term = pmf.clone();
        let mut weight = (-mean).exp();
        let mut out: Vec<f64> = term.iter().map(|x| x * weight).collect();
        let mut accumulated = weight;
        let mut k = 0u64;
        while 1.0 - accumulated > 1e-16 && k < 10_000 {
            k += 1;
            let mut next = vec![0.0; size];
            for (n, &mass) in term.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                let (up, down) = rates[n];
                let stay = 1.0 - (up + down) / lambda;
                next[n] += mass * stay;
                if up > 0.0 {
                    next[n + 1] += mass * up / lambda;
                }
                if down > 0.0 {
                    next[n - 1] += mass * down / lambda;
                }
            }
            term = next;
            weight *= mean / k as f64;
            accumulated += weight;
            for (o, x) in out.iter_mut().zip(&term) {
                *o += weight * x;
            }
        }
        pmf = out;
    }
    Ok(pmf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_one_are_fixed_without_drift() {
        let p = DiffusionParams::moran(0.0, 0.0, 0.0).unwrap();
        assert_eq!(simulate_dual(0, &p, 5.0, 1).unwrap().points, vec![(0.0, 0)]);
        assert_eq!(simulate_dual(1, &p, 5.0, 1).unwrap().points, vec![(0.0, 1)]);
    }

    #[test]
    fn invalid_dual_params() {
        let p = DiffusionParams::moran(1.0, 0.0, 0.3).unwrap();
        assert!(matches!(simulate_dual(2, &p, 1.0, 1), Err(Error::InvalidDualParams(_))));
    }

    #[test]
    fn times_match_full_path() {
        let p = DiffusionParams::moran(1.0, 0.5, 0.0).unwrap();
        for seed in 0..20 {
            let path = simulate_dual(3, &p, 1.0, seed).unwrap();
            let at = dual_at_times(3, &p, &[1.0], seed).unwrap();
            assert_eq!(at[0], path.value_at(1.0));
        }
    }

    #[test]
    fn pmf_sums_to_one() {
        let p = DiffusionParams::moran(1.0, 0.5, 0.0).unwrap();
        let pmf = dual_pmf(3, &p, 1.0, 40).unwrap();
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(pmf.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn pure_death_pmf() {
        // Only annihilation at rate θ⁺ from one lineage: P(A(t) = 1) = e^{−θ⁺t}.
        let p = DiffusionParams::moran(0.0, 0.7, 0.0).unwrap();
        let pmf = dual_pmf(1, &p, 2.0, 5).unwrap();
        assert!((pmf[1] - (-1.4f64).exp()).abs() < 1e-12);
        assert!((pmf[0] - (1.0 - (-1.4f64).exp())).abs() < 1e-12);
    }
}
