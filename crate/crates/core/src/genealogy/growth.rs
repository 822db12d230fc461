//! Descendant fractions at the end of the growth phase, compared with the
//! asymptotic fraction in the branching process with the limiting laws.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::coupled::{CoupledLaws, CoupledPair, CoupledSim, SplitCounts};
use super::label::{IndividualLabel, LabeledPopulation};
use super::labeled::OffspringTable;
use crate::error::{Error, Result};
use crate::forward::t_beta_threshold;
use crate::measures::ReproductionLaw;
use crate::parallel::try_map_replicates;
use crate::rng::{rng_from_seed, substream_seed, SimRng};
use crate::types::Type;

/// Default population size at which the asymptotic fraction is read off.
pub const DEFAULT_STOP_SIZE: u64 = 100_000;

/// The estimate of `F_∞^u(∞)` with the settings that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionEstimate {
    pub value: f64,
    /// The branching process died out; `value` is then 0.
    pub extinct: bool,
    /// Population size when the estimate was taken.
    pub size: u64,
    pub stop_size: u64,
}

fn run_split_counts(
    mut counts: SplitCounts,
    tables: &[OffspringTable; 2],
    stop_size: u64,
    rng: &mut SimRng,
) -> FractionEstimate {
    let size = |c: &SplitCounts| c.iter().flatten().sum::<u64>();
    loop {
        let n = size(&counts);
        if n == 0 {
            return FractionEstimate { value: 0.0, extinct: true, size: 0, stop_size };
        }
        if n >= stop_size {
            let from_u = counts[1][0] + counts[1][1];
            return FractionEstimate { value: from_u as f64 / n as f64, extinct: false, size: n, stop_size };
        }
        let mut rates = [0.0; 4];
        for (slot, rate) in rates.iter_mut().enumerate() {
            *rate = counts[slot / 2][slot % 2] as f64 * tables[slot % 2].total();
        }
        let total: f64 = rates.iter().sum();
        if total <= 0.0 {
            // Nobody reproduces or dies: the size is frozen below the target.
            let from_u = counts[1][0] + counts[1][1];
            return FractionEstimate { value: from_u as f64 / n as f64, extinct: false, size: n, stop_size };
        }
        // Only the jump chain matters here, so holding times are not drawn.
        let mut u = rng.random::<f64>() * total;
        let mut slot = 0;
        while slot < 3 && (u >= rates[slot] || rates[slot] == 0.0) {
            u -= rates[slot];
            slot += 1;
        }
        let offspring = tables[slot % 2].sample(rng) as u64;
        let c = &mut counts[slot / 2][slot % 2];
        *c = *c - 1 + offspring;
    }
}

fn split_counts(pop: &LabeledPopulation, u: &IndividualLabel) -> SplitCounts {
    let mut counts = [[0; 2]; 2];
    for ty in Type::BOTH {
        let below = pop.set(ty).range(u.clone()..).take_while(|v| u.is_ancestor_of(v)).count() as u64;
        counts[1][ty.index()] = below;
        counts[0][ty.index()] = pop.set(ty).len() as u64 - below;
    }
    counts
}

fn check_supercritical(plus: &ReproductionLaw, minus: &ReproductionLaw) -> Result<()> {
    if plus.mean_rate_f64() > 0.0 && minus.mean_rate_f64() > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams("the limiting laws must both have positive mean growth rate".into()))
    }
}

/// Run the branching process with laws `(plus, minus)` from `initial`
/// until its size reaches `stop_size` or it dies out, and report the
/// fraction descending from `u` at that moment.
///
/// Without competition or mutation, descent from `u` and type are both
/// inherited, so only the four counts by descent and type are tracked.
pub fn asymptotic_fraction_estimate(
    plus: &ReproductionLaw,
    minus: &ReproductionLaw,
    u: &IndividualLabel,
    initial: &LabeledPopulation,
    stop_size: u64,
    seed: u64,
) -> Result<FractionEstimate> {
    check_supercritical(plus, minus)?;
    let tables = [OffspringTable::new(plus), OffspringTable::new(minus)];
    let mut rng = rng_from_seed(seed);
    Ok(run_split_counts(split_counts(initial, u), &tables, stop_size, &mut rng))
}

/// Settings of the growth experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthOptions {
    pub beta: f64,
    /// Natural-time cap on the coupled phase.
    pub horizon: f64,
    pub stop_size: u64,
}

impl GrowthOptions {
    pub fn new(beta: f64) -> Self {
        Self { beta, horizon: f64::INFINITY, stop_size: DEFAULT_STOP_SIZE }
    }
}

/// One replicate of the growth experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthSample {
    /// `F_K^u` when the capacity-`K` population first reaches `K − K^β`.
    pub f_k: f64,
    /// Estimate of `F_∞^u(∞)` continuing the coupled `𝒩_∞`.
    pub f_inf: FractionEstimate,
    /// Natural time at which the coupled phase ended.
    pub t_end: f64,
    /// The capacity-`K` population reached `K − K^β`.
    pub reached: bool,
    /// The capacity-`K` population died out first.
    pub k_extinct: bool,
}

impl GrowthSample {
    pub fn difference(&self) -> f64 {
        self.f_k - self.f_inf.value
    }
}

fn growth_replicate(
    laws: &CoupledLaws,
    u: &IndividualLabel,
    initial: &LabeledPopulation,
    options: &GrowthOptions,
    seed: u64,
) -> Result<GrowthSample> {
    coupled_phase(laws, u, initial, options, seed, true)
}

fn coupled_phase(
    laws: &CoupledLaws,
    u: &IndividualLabel,
    initial: &LabeledPopulation,
    options: &GrowthOptions,
    seed: u64,
    detach: bool,
) -> Result<GrowthSample> {
    let threshold = t_beta_threshold(laws.params.k(), options.beta);
    let mut sim = CoupledSim::new(&CoupledPair::identical(initial.clone()), laws)?;
    if detach {
        sim.detach_unreachable(u);
    }
    let mut rng = rng_from_seed(seed);
    let (mut reached, mut k_extinct) = (false, false);
    loop {
        let n_k = sim.k.total();
        if n_k as f64 >= threshold {
            reached = true;
            break;
        }
        if n_k == 0 {
            k_extinct = true;
            break;
        }
        let Some((wait, action)) = sim.propose(&mut rng)? else { break };
        if sim.time + wait > options.horizon {
            break;
        }
        sim.time += wait;
        sim.apply(action);
    }
    let u_id = sim.find(u);
    let f_k = match (u_id, sim.k.total()) {
        (Some(id), n) if n > 0 => sim.k.descendants(id) as f64 / n as f64,
        _ => 0.0,
    };
    let inf = sim.inf_split_counts().unwrap_or_else(|| split_counts(&sim.inf.snapshot(&sim.arena), u));
    let tables = [OffspringTable::new(&laws.inf_plus), OffspringTable::new(&laws.inf_minus)];
    let mut tail_rng = rng_from_seed(substream_seed(seed, 1));
    let f_inf = run_split_counts(inf, &tables, options.stop_size, &mut tail_rng);
    Ok(GrowthSample { f_k, f_inf, t_end: sim.time, reached, k_extinct })
}

/// Run the coupled pair from `initial` until the capacity-`K` population
/// first reaches `K − K^β` (or dies out, or the horizon passes), record
/// `F_K^u`, then let `𝒩_∞` grow alone to `stop_size` for the asymptotic
/// fraction. Replicate `r` uses `replicate_seed(seed, r)`.
pub fn growth_experiment(
    laws: &CoupledLaws,
    u: &IndividualLabel,
    initial: &LabeledPopulation,
    options: &GrowthOptions,
    replicates: u64,
    seed: u64,
    jobs: usize,
) -> Result<Vec<GrowthSample>> {
    check_supercritical(&laws.inf_plus, &laws.inf_minus)?;
    if !(options.beta > 0.0 && options.beta < 1.0) {
        return Err(Error::InvalidParams(format!("beta must lie in (0, 1), got {}", options.beta)));
    }
    try_map_replicates(replicates, seed, jobs, |_, s| growth_replicate(laws, u, initial, options, s))
}
