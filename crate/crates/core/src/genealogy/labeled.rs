//! Exact simulation of the labelled population.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::arena::{LabelArena, Members, NodeId};
use super::label::{IndividualLabel, LabeledPopulation};
use crate::error::{Error, Result};
use crate::forward::{PopulationState, Recording, StopReason, Trajectory, TrajectoryPoint, DEFAULT_MAX_RATE};
use crate::measures::{ModelParams, ReproductionLaw};
use crate::rng::{rng_from_seed, SimRng};
use crate::types::Type;

/// Offspring sampler for one law: cumulative masses over all atoms,
/// including `0` (death) and `1` (relabelling).
#[derive(Debug, Clone)]
pub(crate) struct OffspringTable {
    cumulative: Vec<(u32, f64)>,
    total: f64,
}

impl OffspringTable {
    pub fn new(law: &ReproductionLaw) -> Self {
        let mut acc = 0.0;
        let cumulative = law
            .atoms_f64()
            .iter()
            .map(|&(i, m)| {
                acc += m;
                (i, acc)
            })
            .collect();
        Self { cumulative, total: acc }
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn sample(&self, rng: &mut SimRng) -> u32 {
        let u = rng.random::<f64>() * self.total;
        self.cumulative.iter().find(|(_, c)| u < *c).or(self.cumulative.last()).map_or(0, |(i, _)| *i)
    }
}

/// One recorded state of a labelled path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSnapshot {
    pub t: f64,
    pub population: LabeledPopulation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPath {
    pub snapshots: Vec<LabeledSnapshot>,
    pub end_time: f64,
    pub stop: StopReason,
}

/// One line of the JSONL snapshot export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub t: f64,
    #[serde(rename = "type")]
    pub ty: Type,
    pub label: IndividualLabel,
}

impl LabeledPath {
    pub fn last(&self) -> &LabeledPopulation {
        &self.snapshots.last().expect("path has an initial snapshot").population
    }

    /// The type counts along the path.
    pub fn counts(&self) -> Trajectory {
        Trajectory {
            points: self.snapshots.iter().map(|s| TrajectoryPoint { t: s.t, state: s.population.counts() }).collect(),
            end_time: self.end_time,
            stop: self.stop,
        }
    }

    /// One JSON record `{t, type, label}` per member of every snapshot.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for snap in &self.snapshots {
            for (label, ty) in snap.population.members() {
                serde_json::to_writer(&mut out, &LabelRecord { t: snap.t, ty, label })?;
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

/// Records snapshots according to a [`Recording`] policy.
pub(crate) struct Recorder<'a, S> {
    recording: &'a Recording,
    pub items: Vec<(f64, S)>,
    next_grid: usize,
    counter: u64,
}

impl<'a, S: Clone> Recorder<'a, S> {
    pub fn new(recording: &'a Recording, initial: S) -> Self {
        let next_grid = match recording {
            Recording::Grid(g) => g.partition_point(|&x| x <= 0.0),
            _ => 0,
        };
        Self { recording, items: vec![(0.0, initial)], next_grid, counter: 0 }
    }

    /// Called before the event at `t_new` is applied, with the current state.
    pub fn before_event(&mut self, t_new: f64, current: impl Fn() -> S) {
        if let Recording::Grid(grid) = self.recording {
            while self.next_grid < grid.len() && grid[self.next_grid] < t_new {
                self.items.push((grid[self.next_grid], current()));
                self.next_grid += 1;
            }
        }
    }

    pub fn after_event(&mut self, t: f64, current: impl Fn() -> S) {
        self.counter += 1;
        let keep = match self.recording {
            Recording::Full => true,
            Recording::EveryNth(k) => self.counter % (*k).max(1) == 0,
            Recording::Grid(_) | Recording::Endpoints => false,
        };
        if keep {
            self.items.push((t, current()));
        }
    }

    pub fn finish(&mut self, end_time: f64, last_event: f64, current: impl Fn() -> S) {
        if let Recording::Grid(grid) = self.recording {
            while self.next_grid < grid.len() && grid[self.next_grid] <= end_time {
                self.items.push((grid[self.next_grid], current()));
                self.next_grid += 1;
            }
        }
        let needs_final = matches!(self.recording, Recording::EveryNth(_) | Recording::Endpoints)
            && self.counter > 0
            && self.items.last().is_none_or(|(t, _)| *t < last_event);
        if needs_final {
            self.items.push((last_event, current()));
        }
    }
}

/// What happened to the chosen individual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LabeledEvent {
    Reproduce(u32),
    Death,
    Mutate,
}

/// Stepper for the labelled chain in natural time.
pub(crate) struct LabeledSim {
    pub arena: LabelArena,
    pub members: Members,
    tables: [OffspringTable; 2],
    theta: [f64; 2],
    competition: f64,
    max_rate: f64,
    pub time: f64,
}

impl LabeledSim {
    pub fn new(params: &ModelParams, initial: &LabeledPopulation) -> Result<Self> {
        let mut arena = LabelArena::default();
        let members = Members::load(&mut arena, initial)?;
        let k = params.k() as f64;
        Ok(Self {
            arena,
            members,
            tables: [OffspringTable::new(params.law(Type::Plus)), OffspringTable::new(params.law(Type::Minus))],
            theta: [params.theta(Type::Plus) / k, params.theta(Type::Minus) / k],
            competition: params.competition_per_pair(),
            max_rate: DEFAULT_MAX_RATE,
            time: 0.0,
        })
    }

    fn per_individual(&self, ty: Type) -> f64 {
        self.tables[ty.index()].total() + self.members.total() as f64 * self.competition + self.theta[ty.index()]
    }

    /// Next event: waiting time, individual and what happens to it.
    pub fn propose(&self, rng: &mut SimRng) -> Result<Option<(f64, NodeId, LabeledEvent)>> {
        let rates = Type::BOTH.map(|ty| self.members.count(ty) as f64 * self.per_individual(ty));
        let total = rates[0] + rates[1];
        if !(total <= self.max_rate) {
            return Err(Error::RateOverflow { rate: total, bound: self.max_rate });
        }
        if total <= 0.0 {
            return Ok(None);
        }
        let wait = Distribution::<f64>::sample(&Exp1, rng) / total;
        let ty = if rng.random::<f64>() * total < rates[0] { Type::Plus } else { Type::Minus };
        let id = self.members.uniform(ty, rng);
        let table = &self.tables[ty.index()];
        let death = self.members.total() as f64 * self.competition;
        let u = rng.random::<f64>() * self.per_individual(ty);
        let event = if u < table.total() {
            LabeledEvent::Reproduce(table.sample(rng))
        } else if u < table.total() + death {
            LabeledEvent::Death
        } else {
            LabeledEvent::Mutate
        };
        Ok(Some((wait, id, event)))
    }

    pub fn apply(&mut self, id: NodeId, event: LabeledEvent) {
        match event {
            LabeledEvent::Reproduce(i) => self.members.reproduce(&mut self.arena, id, i),
            LabeledEvent::Death => {
                self.members.remove(&self.arena, id);
            }
            LabeledEvent::Mutate => self.members.flip(id),
        }
    }

    pub fn snapshot(&self) -> LabeledPopulation {
        self.members.snapshot(&self.arena)
    }
}

/// Exact path of the labelled population until `horizon` (natural time),
/// the first event after which `stop` holds, or extinction.
///
/// A type-`±` individual `u` is replaced by `u1, …, ui` at rate `μ^±(i)`
/// (`i = 0` removes it), dies at rate `N·𝔪/K` and changes type at rate
/// `θ^±/K`. The initial labels must form an antichain.
pub fn simulate_labeled(
    initial: &LabeledPopulation,
    params: &ModelParams,
    horizon: f64,
    recording: &Recording,
    mut stop: impl FnMut(f64, &PopulationState) -> bool,
    seed: u64,
) -> Result<LabeledPath> {
    if !(horizon >= 0.0) {
        return Err(Error::InvalidParams(format!("horizon must be >= 0, got {horizon}")));
    }
    let mut sim = LabeledSim::new(params, initial)?;
    let mut rng = rng_from_seed(seed);
    let mut rec = Recorder::new(recording, initial.clone());
    if stop(0.0, &initial.counts()) {
        return Ok(finish_path(rec.items, 0.0, StopReason::Predicate));
    }
    let mut reason = StopReason::Horizon;
    let mut end_time = horizon;
    loop {
        let Some((wait, id, event)) = sim.propose(&mut rng)? else {
            reason = StopReason::Absorbed;
            break;
        };
        let t_new = sim.time + wait;
        if t_new > horizon {
            break;
        }
        rec.before_event(t_new, || sim.snapshot());
        sim.time = t_new;
        sim.apply(id, event);
        rec.after_event(sim.time, || sim.snapshot());
        if stop(sim.time, &sim.members.counts()) {
            reason = StopReason::Predicate;
            end_time = sim.time;
            break;
        }
    }
    rec.finish(end_time, sim.time, || sim.snapshot());
    Ok(finish_path(rec.items, end_time, reason))
}

fn finish_path(items: Vec<(f64, LabeledPopulation)>, end_time: f64, stop: StopReason) -> LabeledPath {
    LabeledPath {
        snapshots: items.into_iter().map(|(t, population)| LabeledSnapshot { t, population }).collect(),
        end_time,
        stop,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genealogy::descendant_fraction;
    use crate::weight::Rational;

    fn pure_birth() -> ModelParams {
        let law = ReproductionLaw::new([(2, Rational::from_integer(1.into()))]).unwrap();
        ModelParams::custom(10, law.clone(), law, 0.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn first_birth_splits_the_root() {
        let pop = LabeledPopulation::new([IndividualLabel::root(1)], []).unwrap();
        let path =
            simulate_labeled(&pop, &pure_birth(), f64::INFINITY, &Recording::Full, |_, s| s.total() >= 2, 5).unwrap();
        assert_eq!(path.snapshots.len(), 2);
        let expected: Vec<IndividualLabel> = vec!["1.1".parse().unwrap(), "1.2".parse().unwrap()];
        assert_eq!(path.last().plus.iter().cloned().collect::<Vec<_>>(), expected);
    }

    #[test]
    fn empty_population_is_constant() {
        let path =
            simulate_labeled(&LabeledPopulation::default(), &pure_birth(), 3.0, &Recording::Full, |_, _| false, 1)
                .unwrap();
        assert_eq!(path.snapshots.len(), 1);
        assert_eq!(path.stop, StopReason::Absorbed);
        assert!(path.last().is_empty());
    }

    #[test]
    fn rejects_related_founders() {
        let pop = LabeledPopulation::new([IndividualLabel::root(1)], ["1.1".parse().unwrap()]).unwrap();
        assert!(simulate_labeled(&pop, &pure_birth(), 1.0, &Recording::Full, |_, _| false, 1).is_err());
    }

    #[test]
    fn jsonl_records() {
        let pop = LabeledPopulation::founders(1, 1);
        let path = simulate_labeled(&pop, &pure_birth(), 0.0, &Recording::Endpoints, |_, _| false, 1).unwrap();
        let mut buf = Vec::new();
        path.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "{\"t\":0.0,\"type\":\"+\",\"label\":\"1\"}\n{\"t\":0.0,\"type\":\"-\",\"label\":\"2\"}\n");
    }

    #[test]
    fn fractions_partition_over_founders() {
        let pop = LabeledPopulation::founders(2, 2);
        let params = ModelParams::custom(
            30,
            ReproductionLaw::from_f64([(0, 0.2), (2, 1.0), (3, 0.1)]).unwrap(),
            ReproductionLaw::from_f64([(1, 0.3), (2, 0.9)]).unwrap(),
            1.0,
            0.5,
            0.5,
        )
        .unwrap();
        let path = simulate_labeled(&pop, &params, 2.0, &Recording::EveryNth(7), |_, _| false, 11).unwrap();
        for snap in &path.snapshots {
            assert!(snap.population.is_antichain());
            if !snap.population.is_empty() {
                let sum: f64 = (1..=4).map(|k| descendant_fraction(&snap.population, &IndividualLabel::root(k))).sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }
}
