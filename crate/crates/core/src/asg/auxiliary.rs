//! The auxiliary process `B` coupled to the lineage counting process `A`.
//!
//! `B` only uses the transition probabilities at the band's upper size
//! `N↑`, which makes it independent of the population path. While `A = B`
//! and an event is accepted, `B` follows `A`'s simple jumps with the ratios
//! `q^± = p^±(n, N↑) / (p^±(n, N) + p̂^±(n, N))`; otherwise it jumps on its
//! own with probabilities `p^±(B, N↑)`. If the run froze, or some event has
//! `i + j > κ_L·K`, the coupling is abandoned and `B` jumps on its own at
//! every event.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graphical::{EventRecord, EventSource};
use super::limits::kappa_for;
use super::lineage::{LineageCounter, LineagePath, LineagePoint};
use super::transition::{p_hat_minus, p_hat_plus, p_minus, p_plus, JumpSampler};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, substream_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryRun {
    pub a: LineagePath,
    pub b: LineagePath,
    /// First backward time with `A ≠ B`.
    pub tau: Option<f64>,
    /// First backward time with `B ≥ L`.
    pub sigma: Option<f64>,
    /// Whether `B` ran uncoupled from the start.
    pub fallback: bool,
}

impl AuxiliaryRun {
    /// `τ < σ`, both observed before the horizon (`σ = ∞` if never hit).
    pub fn decoupled_before_sigma(&self) -> bool {
        match (self.tau, self.sigma) {
            (Some(tau), Some(sigma)) => tau < sigma,
            (Some(_), None) => true,
            _ => false,
        }
    }
}

/// `x / y` with `0/0 = 0` and `c/0 = ∞`.
fn ratio(x: f64, y: f64) -> f64 {
    if y > 0.0 {
        x / y
    } else if x > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

fn probs(i: u64, j: u64, n: u64, big_n: u64) -> (f64, f64, f64, f64) {
    let or_zero = |r: Result<f64>| r.unwrap_or(0.0);
    (
        or_zero(p_plus(i, j, n, big_n)),
        or_zero(p_hat_plus(i, j, n, big_n)),
        or_zero(p_minus(i, j, n, big_n)),
        or_zero(p_hat_minus(i, j, n, big_n)),
    )
}

/// Joint backward pass of `A` and `B` from `m` sampled lineages.
pub fn auxiliary_process(
    source: &dyn EventSource,
    sample_size: u64,
    big_l: u64,
    k: u64,
    seed: u64,
) -> Result<AuxiliaryRun> {
    if big_l < 2 {
        return Err(Error::InvalidParams(format!("L must be >= 2, got {big_l}")));
    }
    let size = source.final_size();
    if sample_size > size {
        return Err(Error::SampleTooLarge { m: sample_size, size });
    }
    let horizon = source.horizon();
    let upper = source.band().upper;
    let fallback = source.frozen_at().is_some() || source.max_event_size() as f64 > kappa_for(big_l) * k as f64;
    let sampler = JumpSampler;
    let mut a = LineageCounter::new(sample_size, horizon, substream_seed(seed, 0), true);
    let mut rng = rng_from_seed(substream_seed(seed, 1));
    let mut b = sample_size;
    let mut b_points = vec![LineagePoint { t_backward: 0.0, count: Some(b) }];
    let mut tau = None;
    let mut sigma = (b >= big_l).then_some(0.0);

    source.for_each_reverse(&mut |ev: &EventRecord| {
        let s = horizon - ev.t;
        let (i, j) = (ev.i as u64, ev.j as u64);
        let before = a.count();
        a.on_event(ev, &sampler);
        let after = a.count();
        let v: f64 = rng.random();
        let coupled = !fallback && ev.accepted && before == Some(b);
        let next_b = if !coupled {
            let pp_up = p_plus::<f64>(i, j, b, upper).unwrap_or(0.0);
            let pm_up = p_minus::<f64>(i, j, b, upper).unwrap_or(0.0);
            if v <= pp_up {
                b + 1
            } else if v - pp_up > 0.0 && v - pp_up <= pm_up {
                b - 1
            } else {
                b
            }
        } else if after == before {
            b
        } else {
            let big_n = ev.post_size.unwrap_or(upper);
            let (pp, php, pm, phm) = probs(i, j, b, big_n);
            let (pp_up, _, pm_up, _) = probs(i, j, b, upper);
            match after.map(|c| c as i64 - b as i64) {
                Some(1) if v <= ratio(pp_up, pp + php) => b + 1,
                Some(-1) if v <= ratio(pm_up, pm + phm) => b - 1,
                _ => b,
            }
        };
        if next_b != b {
            b = next_b;
            b_points.push(LineagePoint { t_backward: s, count: Some(b) });
            if sigma.is_none() && b >= big_l {
                sigma = Some(s);
            }
        }
        if tau.is_none() && a.count() != Some(b) {
            tau = Some(s);
        }
    });

    let (_, a_points) = a.finish();
    let a_path = LineagePath { sample_size, horizon, points: a_points.unwrap_or_default() };
    let b_path = LineagePath { sample_size, horizon, points: b_points };
    Ok(AuxiliaryRun { a: a_path, b: b_path, tau, sigma, fallback })
}
