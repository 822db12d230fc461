//! The labelled population at capacity `K` coupled with the branching
//! process `𝒩_∞` driven by the limiting laws.
//!
//! An individual present in both populations with the same type reproduces
//! jointly at rate `μ_∞(i) ∧ μ_K(i)`. The remaining reproduction mass of
//! each side fires alone, and competition deaths and mutations happen in
//! the capacity-`K` population only. An individual whose types differ
//! between the two populations counts as absent from the intersection, so
//! both sides reproduce it at their full rates.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::arena::{LabelArena, Members, NodeId};
use super::label::{IndividualLabel, LabeledPopulation};
use super::labeled::{OffspringTable, Recorder};
use crate::error::{Error, Result};
use crate::forward::{PopulationState, Recording, StopReason, DEFAULT_MAX_RATE};
use crate::measures::{ModelParams, ReproductionLaw};
use crate::rng::{rng_from_seed, SimRng};
use crate::types::Type;
use crate::weight::{rational_from_f64, Rational};

/// Capacity-`K` parameters together with the limiting laws `μ_∞^±`.
#[derive(Debug, Clone)]
pub struct CoupledLaws {
    pub params: ModelParams,
    pub inf_plus: ReproductionLaw,
    pub inf_minus: ReproductionLaw,
}

impl CoupledLaws {
    pub fn new(params: ModelParams, inf_plus: ReproductionLaw, inf_minus: ReproductionLaw) -> Self {
        Self { params, inf_plus, inf_minus }
    }

    /// Limiting laws taken from the family behind `params`.
    pub fn from_params(params: &ModelParams) -> Result<Self> {
        let family = params
            .family()
            .ok_or_else(|| Error::InvalidParams("coupling needs a law family or explicit limiting laws".into()))?;
        Ok(Self::new(params.clone(), family.limit_plus().clone(), family.limit_minus().clone()))
    }

    pub fn inf_law(&self, ty: Type) -> &ReproductionLaw {
        match ty {
            Type::Plus => &self.inf_plus,
            Type::Minus => &self.inf_minus,
        }
    }
}

/// The pair `(𝒩_∞, 𝒩_K)` as plain label sets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoupledPair {
    pub pop_inf: LabeledPopulation,
    pub pop_k: LabeledPopulation,
}

impl CoupledPair {
    /// Both populations start equal, as the coupling requires.
    pub fn identical(pop: LabeledPopulation) -> Self {
        Self { pop_inf: pop.clone(), pop_k: pop }
    }

    /// Labels present in both populations with the same type.
    pub fn shared(&self) -> LabeledPopulation {
        LabeledPopulation {
            plus: self.pop_inf.plus.intersection(&self.pop_k.plus).cloned().collect(),
            minus: self.pop_inf.minus.intersection(&self.pop_k.minus).cloned().collect(),
        }
    }
}

/// One transition of the coupled chain at a given state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CoupledMove {
    Joint { label: IndividualLabel, ty: Type, offspring: u32 },
    SoloInf { label: IndividualLabel, ty: Type, offspring: u32 },
    SoloK { label: IndividualLabel, ty: Type, offspring: u32 },
    CompetitionDeath { label: IndividualLabel, ty: Type },
    Mutation { label: IndividualLabel, from: Type },
}

impl CoupledMove {
    /// Change of the capacity-`K` type counts, `(Δn⁺, Δn⁻)`.
    pub fn k_displacement(&self) -> (i64, i64) {
        let signed = |ty: Type, d: i64| if ty == Type::Plus { (d, 0) } else { (0, d) };
        match self {
            CoupledMove::Joint { ty, offspring, .. } | CoupledMove::SoloK { ty, offspring, .. } => {
                signed(*ty, *offspring as i64 - 1)
            }
            CoupledMove::SoloInf { .. } => (0, 0),
            CoupledMove::CompetitionDeath { ty, .. } => signed(*ty, -1),
            CoupledMove::Mutation { from: Type::Plus, .. } => (-1, 1),
            CoupledMove::Mutation { from: Type::Minus, .. } => (1, -1),
        }
    }

    /// Change of the `𝒩_∞` type counts.
    pub fn inf_displacement(&self) -> (i64, i64) {
        let signed = |ty: Type, d: i64| if ty == Type::Plus { (d, 0) } else { (0, d) };
        match self {
            CoupledMove::Joint { ty, offspring, .. } | CoupledMove::SoloInf { ty, offspring, .. } => {
                signed(*ty, *offspring as i64 - 1)
            }
            _ => (0, 0),
        }
    }
}

fn rational_or_err(x: f64, what: &str) -> Result<Rational> {
    rational_from_f64(x).ok_or_else(|| Error::InvalidParams(format!("{what} = {x} is not finite")))
}

/// Exact rates of every transition out of `pair`, with zero rows dropped.
pub fn coupled_rates(pair: &CoupledPair, laws: &CoupledLaws) -> Result<Vec<(CoupledMove, Rational)>> {
    let k = Rational::from_integer(laws.params.k().into());
    let per_pair = rational_or_err(laws.params.competition(), "competition")? / &k;
    let n_k = Rational::from_integer((pair.pop_k.len() as u64).into());
    let zero = Rational::from_integer(0.into());
    let mut rows = Vec::new();
    let mut push = |mv: CoupledMove, rate: Rational| {
        if rate > zero {
            rows.push((mv, rate));
        }
    };
    for ty in Type::BOTH {
        let law_inf = laws.inf_law(ty);
        let law_k = laws.params.law(ty);
        let theta = rational_or_err(laws.params.theta(ty), "theta")? / &k;
        let mut offspring: Vec<u32> = law_inf.atoms().map(|(i, _)| i).chain(law_k.atoms().map(|(i, _)| i)).collect();
        offspring.sort_unstable();
        offspring.dedup();
        for label in pair.pop_inf.set(ty) {
            let in_k = pair.pop_k.set(ty).contains(label);
            for &i in &offspring {
                let (a, b) = (law_inf.mass(i), law_k.mass(i));
                let joint = if in_k { a.clone().min(b) } else { zero.clone() };
                push(CoupledMove::Joint { label: label.clone(), ty, offspring: i }, joint.clone());
                push(CoupledMove::SoloInf { label: label.clone(), ty, offspring: i }, a - joint);
            }
        }
        for label in pair.pop_k.set(ty) {
            let in_inf = pair.pop_inf.set(ty).contains(label);
            for &i in &offspring {
                let (a, b) = (law_inf.mass(i), law_k.mass(i));
                let joint = if in_inf { a.min(b.clone()) } else { zero.clone() };
                push(CoupledMove::SoloK { label: label.clone(), ty, offspring: i }, b - joint);
            }
            push(CoupledMove::CompetitionDeath { label: label.clone(), ty }, n_k.clone() * &per_pair);
            push(CoupledMove::Mutation { label: label.clone(), from: ty }, theta.clone());
        }
    }
    Ok(rows)
}

/// Aggregate coupled rates by the resulting capacity-`K` counts, skipping
/// moves that leave them unchanged.
pub fn project_k_rates(pair: &CoupledPair, rows: &[(CoupledMove, Rational)]) -> BTreeMap<(u64, u64), Rational> {
    let here = pair.pop_k.counts();
    let mut out: BTreeMap<(u64, u64), Rational> = BTreeMap::new();
    for (mv, rate) in rows {
        let (dp, dm) = mv.k_displacement();
        if (dp, dm) == (0, 0) {
            continue;
        }
        let next = here.displaced(dp, dm).expect("counts stay nonnegative");
        *out.entry((next.n_plus, next.n_minus)).or_insert_with(|| Rational::from_integer(0.into())) += rate;
    }
    out
}

/// Dense mass lookup by offspring number.
#[derive(Debug, Clone)]
struct MassByOffspring(Vec<f64>);

impl MassByOffspring {
    fn new(law: &ReproductionLaw) -> Self {
        let len = law.max_offspring().map_or(0, |m| m as usize + 1);
        let mut masses = vec![0.0; len];
        for &(i, m) in law.atoms_f64() {
            masses[i as usize] = m;
        }
        Self(masses)
    }

    fn get(&self, i: u32) -> f64 {
        self.0.get(i as usize).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone)]
struct SideLaws {
    table: OffspringTable,
    mass: MassByOffspring,
}

impl SideLaws {
    fn new(law: &ReproductionLaw) -> Self {
        Self { table: OffspringTable::new(law), mass: MassByOffspring::new(law) }
    }
}

/// Effect of one candidate event of the coupled chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum CoupledAction {
    /// `𝒩_∞` reproduces `id`; `joint` when `𝒩_K` follows.
    InfReproduction {
        id: NodeId,
        offspring: u32,
        joint: bool,
    },
    /// `𝒩_K` alone reproduces `id`.
    KReproduction {
        id: NodeId,
        offspring: u32,
    },
    Competition {
        id: NodeId,
    },
    Mutation {
        id: NodeId,
    },
    /// A detached `𝒩_∞` individual reproduces.
    DetachedReproduction {
        descends: bool,
        ty: Type,
        offspring: u32,
    },
    /// A thinned candidate with no effect.
    Rejected,
}

/// Counts indexed `[descends from the tracked label][type]`.
pub(crate) type SplitCounts = [[u64; 2]; 2];

/// `𝒩_∞` individuals that can never again share an event with `𝒩_K`,
/// kept as counts only.
#[derive(Debug, Clone)]
struct Detached {
    tracked: Option<NodeId>,
    counts: SplitCounts,
    /// Labelled `𝒩_∞` size at which the next sweep runs.
    next_sweep: u64,
}

impl Detached {
    fn of_type(&self, ty: Type) -> u64 {
        self.counts[0][ty.index()] + self.counts[1][ty.index()]
    }
}

/// Stepper for the coupled chain in natural time, by thinning.
pub(crate) struct CoupledSim {
    pub arena: LabelArena,
    pub inf: Members,
    pub k: Members,
    inf_laws: [SideLaws; 2],
    k_laws: [SideLaws; 2],
    theta: [f64; 2],
    competition: f64,
    detached: Option<Detached>,
    pub time: f64,
}

impl CoupledSim {
    pub fn new(initial: &CoupledPair, laws: &CoupledLaws) -> Result<Self> {
        if initial.pop_inf != initial.pop_k {
            return Err(Error::InvalidParams("the coupled populations must start equal".into()));
        }
        let mut arena = LabelArena::default();
        let inf = Members::load(&mut arena, &initial.pop_inf)?;
        let k = inf.clone();
        let kf = laws.params.k() as f64;
        Ok(Self {
            arena,
            inf,
            k,
            inf_laws: [SideLaws::new(&laws.inf_plus), SideLaws::new(&laws.inf_minus)],
            k_laws: [SideLaws::new(laws.params.law(Type::Plus)), SideLaws::new(laws.params.law(Type::Minus))],
            theta: [laws.params.theta(Type::Plus) / kf, laws.params.theta(Type::Minus) / kf],
            competition: laws.params.competition_per_pair(),
            detached: None,
            time: 0.0,
        })
    }

    /// Draw the next candidate event: the waiting time and its effect.
    /// `None` once both populations are empty.
    pub fn propose(&self, rng: &mut SimRng) -> Result<Option<(f64, CoupledAction)>> {
        let inf_sizes = Type::BOTH.map(|ty| self.inf.count(ty) + self.detached.as_ref().map_or(0, |d| d.of_type(ty)));
        let inf_rates = Type::BOTH.map(|ty| inf_sizes[ty.index()] as f64 * self.inf_laws[ty.index()].table.total());
        let k_rates = Type::BOTH.map(|ty| self.k.count(ty) as f64 * self.k_laws[ty.index()].table.total());
        let n_k = self.k.total() as f64;
        let competition = n_k * n_k * self.competition;
        let mutation = Type::BOTH.map(|ty| self.k.count(ty) as f64 * self.theta[ty.index()]);
        let streams = [inf_rates[0], inf_rates[1], k_rates[0], k_rates[1], competition, mutation[0], mutation[1]];
        let total: f64 = streams.iter().sum();
        if !(total <= DEFAULT_MAX_RATE) {
            return Err(Error::RateOverflow { rate: total, bound: DEFAULT_MAX_RATE });
        }
        if total <= 0.0 {
            return Ok(None);
        }
        let wait = Distribution::<f64>::sample(&Exp1, rng) / total;
        let mut u = rng.random::<f64>() * total;
        let mut stream = 0;
        while stream + 1 < streams.len() && (u >= streams[stream] || streams[stream] == 0.0) {
            u -= streams[stream];
            stream += 1;
        }
        let action = match stream {
            0 | 1 => {
                let ty = Type::BOTH[stream];
                let side = &self.inf_laws[ty.index()];
                let pick = rng.random_range(0..inf_sizes[stream]);
                if pick >= self.inf.count(ty) {
                    let d = self.detached.as_ref().expect("detached individuals exist");
                    let descends = pick - self.inf.count(ty) < d.counts[1][ty.index()];
                    let offspring = side.table.sample(rng);
                    return Ok(Some((wait, CoupledAction::DetachedReproduction { descends, ty, offspring })));
                }
                let id = self.inf.uniform(ty, rng);
                let offspring = side.table.sample(rng);
                let joint = self.k.type_of(id) == Some(ty) && {
                    let (a, b) = (side.mass.get(offspring), self.k_laws[ty.index()].mass.get(offspring));
                    rng.random::<f64>() * a < a.min(b)
                };
                CoupledAction::InfReproduction { id, offspring, joint }
            }
            2 | 3 => {
                let ty = Type::BOTH[stream - 2];
                let id = self.k.uniform(ty, rng);
                let side = &self.k_laws[ty.index()];
                let offspring = side.table.sample(rng);
                let accept = self.inf.type_of(id) != Some(ty) || {
                    let (a, b) = (self.inf_laws[ty.index()].mass.get(offspring), side.mass.get(offspring));
                    rng.random::<f64>() * b >= a.min(b)
                };
                if accept {
                    CoupledAction::KReproduction { id, offspring }
                } else {
                    CoupledAction::Rejected
                }
            }
            4 => CoupledAction::Competition { id: self.k.uniform_any(rng) },
            _ => CoupledAction::Mutation { id: self.k.uniform(Type::BOTH[stream - 5], rng) },
        };
        Ok(Some((wait, action)))
    }

    pub fn apply(&mut self, action: CoupledAction) {
        match action {
            CoupledAction::InfReproduction { id, offspring, joint } => {
                self.inf.reproduce(&mut self.arena, id, offspring);
                if joint {
                    self.k.reproduce(&mut self.arena, id, offspring);
                }
            }
            CoupledAction::KReproduction { id, offspring } => self.k.reproduce(&mut self.arena, id, offspring),
            CoupledAction::Competition { id } => {
                self.k.remove(&self.arena, id);
            }
            CoupledAction::Mutation { id } => self.k.flip(id),
            CoupledAction::DetachedReproduction { descends, ty, offspring } => {
                let d = self.detached.as_mut().expect("detached individuals exist");
                let c = &mut d.counts[descends as usize][ty.index()];
                *c = *c - 1 + offspring as u64;
            }
            CoupledAction::Rejected => {}
        }
        if self.detached.as_ref().is_some_and(|d| self.inf.total() >= d.next_sweep) {
            self.sweep();
        }
    }

    /// From now on, move `𝒩_∞` individuals that have no ancestor and no
    /// descendant in `𝒩_K` to counts split by descent from `tracked`.
    /// Such an individual's line never meets `𝒩_K` again: `𝒩_K` only gains
    /// children of its own members.
    pub fn detach_unreachable(&mut self, tracked: &IndividualLabel) {
        let tracked = self.arena.find(tracked);
        self.detached = Some(Detached { tracked, counts: [[0; 2]; 2], next_sweep: 0 });
        self.sweep();
    }

    fn sweep(&mut self) {
        let Some(mut d) = self.detached.take() else { return };
        let candidates: Vec<NodeId> = self.inf.live_ids().collect();
        for id in candidates {
            if self.k.descendants(id) > 0 {
                continue;
            }
            let mut descends = d.tracked == Some(id);
            let mut reachable = false;
            let mut cur = self.arena.parent(id);
            while let Some(a) = cur {
                if self.k.type_of(a).is_some() {
                    reachable = true;
                    break;
                }
                descends |= d.tracked == Some(a);
                cur = self.arena.parent(a);
            }
            if !reachable {
                let ty = self.inf.remove(&self.arena, id);
                d.counts[descends as usize][ty.index()] += 1;
            }
        }
        d.next_sweep = (2 * self.inf.total()).max(64);
        self.detached = Some(d);
    }

    /// `𝒩_∞` counts split by descent from the tracked label, detached
    /// individuals included.
    pub fn inf_split_counts(&self) -> Option<SplitCounts> {
        let d = self.detached.as_ref()?;
        let mut counts = d.counts;
        for id in self.inf.live_ids() {
            let ty = self.inf.type_of(id).expect("live ids are present");
            let descends = d.tracked.is_some_and(|t| self.arena.is_ancestor(t, id));
            counts[descends as usize][ty.index()] += 1;
        }
        Some(counts)
    }

    pub fn find(&self, label: &IndividualLabel) -> Option<NodeId> {
        self.arena.find(label)
    }

    pub fn snapshot(&self) -> CoupledPair {
        CoupledPair { pop_inf: self.inf.snapshot(&self.arena), pop_k: self.k.snapshot(&self.arena) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledSnapshot {
    pub t: f64,
    pub pair: CoupledPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledPath {
    pub snapshots: Vec<CoupledSnapshot>,
    pub end_time: f64,
    pub stop: StopReason,
}

impl CoupledPath {
    pub fn last(&self) -> &CoupledPair {
        &self.snapshots.last().expect("path has an initial snapshot").pair
    }
}

/// Exact path of the coupled pair until `horizon` (natural time), the first
/// event after which `stop(t, counts_K, counts_∞)` holds, or joint
/// extinction. With [`Recording::Full`] every candidate event is recorded,
/// including thinned ones that change nothing.
pub fn simulate_coupled(
    initial: &CoupledPair,
    laws: &CoupledLaws,
    horizon: f64,
    recording: &Recording,
    mut stop: impl FnMut(f64, &PopulationState, &PopulationState) -> bool,
    seed: u64,
) -> Result<CoupledPath> {
    if !(horizon >= 0.0) {
        return Err(Error::InvalidParams(format!("horizon must be >= 0, got {horizon}")));
    }
    let mut sim = CoupledSim::new(initial, laws)?;
    let mut rng = rng_from_seed(seed);
    let mut rec = Recorder::new(recording, initial.clone());
    let finish = |items: Vec<(f64, CoupledPair)>, end_time, stop| CoupledPath {
        snapshots: items.into_iter().map(|(t, pair)| CoupledSnapshot { t, pair }).collect(),
        end_time,
        stop,
    };
    if stop(0.0, &sim.k.counts(), &sim.inf.counts()) {
        return Ok(finish(rec.items, 0.0, StopReason::Predicate));
    }
    let mut reason = StopReason::Horizon;
    let mut end_time = horizon;
    loop {
        let Some((wait, action)) = sim.propose(&mut rng)? else {
            reason = StopReason::Absorbed;
            break;
        };
        let t_new = sim.time + wait;
        if t_new > horizon {
            break;
        }
        rec.before_event(t_new, || sim.snapshot());
        sim.time = t_new;
        sim.apply(action);
        rec.after_event(sim.time, || sim.snapshot());
        if stop(sim.time, &sim.k.counts(), &sim.inf.counts()) {
            reason = StopReason::Predicate;
            end_time = sim.time;
            break;
        }
    }
    rec.finish(end_time, sim.time, || sim.snapshot());
    Ok(finish(rec.items, end_time, reason))
}
