use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::params::{diffusion_coefficient, drift, DiffusionParams};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, SimRng};

/// A scalar path sampled at increasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarPath {
    pub points: Vec<(f64, f64)>,
}

impl ScalarPath {
    /// CSV `t,value`.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "t,value")?;
        for (t, v) in &self.points {
            writeln!(out, "{t},{v}")?;
        }
        Ok(())
    }

    pub fn last_value(&self) -> f64 {
        self.points.last().map_or(f64::NAN, |p| p.1)
    }
}

/// One Euler–Maruyama step of size `h`, clamped to `[0, 1]`.
fn em_step(w: f64, h: f64, p: &DiffusionParams, rng: &mut SimRng) -> Result<f64> {
    let z: f64 = StandardNormal.sample(rng);
    let sigma2 = diffusion_coefficient(w, p)?;
    Ok((w + drift(w, p) * h + (sigma2 * h).sqrt() * z).clamp(0.0, 1.0))
}

fn check_inputs(w0: f64, dt: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&w0) {
        return Err(Error::InvalidParams(format!("w0 must lie in [0, 1], got {w0}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParams(format!("dt must be positive, got {dt}")));
    }
    Ok(())
}

/// Advance from `w` at time `from` to time `to` with full steps of `dt` and
/// one final partial step.
fn advance(mut w: f64, from: f64, to: f64, dt: f64, p: &DiffusionParams, rng: &mut SimRng) -> Result<f64> {
    let steps = ((to - from) / dt).floor() as u64;
    for _ in 0..steps {
        w = em_step(w, dt, p, rng)?;
    }
    let rest = (to - from) - steps as f64 * dt;
    if rest > 1e-15 {
        w = em_step(w, rest, p, rng)?;
    }
    Ok(w)
}

/// Full Euler–Maruyama path on `[0, horizon]`, one point per step.
pub fn simulate_sde(w0: f64, p: &DiffusionParams, horizon: f64, dt: f64, seed: u64) -> Result<ScalarPath> {
    check_inputs(w0, dt)?;
    let mut rng = rng_from_seed(seed);
    let mut points = vec![(0.0, w0)];
    let steps = (horizon / dt).floor() as u64;
    let mut w = w0;
    for k in 1..=steps {
        w = em_step(w, dt, p, &mut rng)?;
        points.push((k as f64 * dt, w));
    }
    let t_last = steps as f64 * dt;
    if horizon - t_last > 1e-15 {
        w = em_step(w, horizon - t_last, p, &mut rng)?;
        points.push((horizon, w));
    }
    Ok(ScalarPath { points })
}

/// Values of one path at the given increasing times.
pub fn sde_at_times(w0: f64, p: &DiffusionParams, times: &[f64], dt: f64, seed: u64) -> Result<Vec<f64>> {
    check_inputs(w0, dt)?;
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(times.len());
    let (mut t, mut w) = (0.0, w0);
    for &target in times {
        if target < t {
            return Err(Error::InvalidParams("observation times must be increasing".into()));
        }
        w = advance(w, t, target, dt, p, &mut rng)?;
        t = target;
        out.push(w);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absorbing_boundaries() {
        let p = DiffusionParams::moran(1.0, 0.0, 0.0).unwrap();
        let zero = simulate_sde(0.0, &p, 0.1, 1e-3, 3).unwrap();
        assert!(zero.points.iter().all(|&(_, w)| w == 0.0));
        let one = simulate_sde(1.0, &p, 0.1, 1e-3, 3).unwrap();
        assert!(one.points.iter().all(|&(_, w)| w == 1.0));
    }

    #[test]
    fn path_ends_at_horizon() {
        let p = DiffusionParams::moran(1.0, 0.5, 0.0).unwrap();
        let path = simulate_sde(0.5, &p, 0.105, 0.01, 1).unwrap();
        assert!((path.points.last().unwrap().0 - 0.105).abs() < 1e-12);
        let direct = sde_at_times(0.5, &p, &[0.105], 0.01, 1).unwrap();
        assert_eq!(direct[0], path.last_value());
    }

    #[test]
    fn bad_step_rejected() {
        let p = DiffusionParams::moran(1.0, 0.0, 0.0).unwrap();
        assert!(simulate_sde(0.5, &p, 1.0, 0.0, 1).is_err());
        assert!(simulate_sde(1.5, &p, 1.0, 0.1, 1).is_err());
    }
}
