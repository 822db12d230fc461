//! Poisson graphical construction of the population at carrying capacity.
//!
//! Time is measured on the rescaled scale (natural time divided by `K`).
//! Candidate reproduction events arrive at the homogeneous rate
//! `K·N↑·‖ν‖` with marks `(i, j) ~ ν/‖ν‖` and are accepted when an
//! independent uniform satisfies `U ≤ N/N↑`. The accepted parent is `+` with
//! probability `n⁺/N`; a `−` parent is replaced by `i` children and a `+`
//! parent by `i + j`. Competition deaths form a second stream of rate
//! `N↑²·𝔪`, thinned by `(N/N↑)²`, and are logged as accepted `(0, 0)`
//! events. Mutations flip one individual's type; they never touch the
//! lineage structure and are therefore not logged.
//!
//! The process freezes at the first event that would leave `[N↓, N↑]` or
//! that would have `N < i + 2j` afterwards. That event is not applied and
//! the population no longer changes. Candidate reproduction events keep
//! arriving (as rejected events) because the auxiliary process reads them.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{PopulationState, StopReason, Trajectory, TrajectoryPoint};
use crate::measures::{CouplingMeasure, ModelParams};
use crate::rng::{rng_from_seed, SimRng};
use crate::types::Type;

/// One point of the candidate stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub i: u32,
    pub j: u32,
    pub accepted: bool,
    /// `N` just after an accepted event.
    pub post_size: Option<u64>,
    pub parent_type: Option<Type>,
}

impl EventRecord {
    /// Whether the event can move any lineage: it needs two blue labels or
    /// one red label.
    pub fn touches_lineages(&self) -> bool {
        self.i >= 2 || self.j >= 1
    }
}

/// The population band `[N↓, N↑]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Band {
    pub lower: u64,
    pub upper: u64,
}

impl Band {
    /// `N↓ = ⌊(1 − ε)K⌋`, `N↑ = ⌈(1 + ε)K⌉`.
    pub fn new(k: u64, epsilon: f64) -> Self {
        let kf = k as f64;
        Self { lower: ((1.0 - epsilon) * kf).floor().max(0.0) as u64, upper: ((1.0 + epsilon) * kf).ceil() as u64 }
    }

    /// Band with the default width `ε = K^{-1/4}`.
    pub fn default_for(k: u64) -> Self {
        Self::new(k, default_epsilon(k))
    }

    pub fn contains(&self, n: u64) -> bool {
        (self.lower..=self.upper).contains(&n)
    }
}

pub fn default_epsilon(k: u64) -> f64 {
    (k as f64).powf(-0.25)
}

/// Alias-free categorical sampler over the atoms of `ν`.
#[derive(Debug, Clone)]
struct PairSampler {
    atoms: Vec<(u32, u32)>,
    cumulative: Vec<f64>,
}

impl PairSampler {
    fn new(nu: &CouplingMeasure) -> Self {
        let mut atoms = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for &((i, j), w) in nu.atoms_f64() {
            if w > 0.0 {
                acc += w;
                atoms.push((i, j));
                cumulative.push(acc);
            }
        }
        for c in &mut cumulative {
            *c /= acc;
        }
        Self { atoms, cumulative }
    }

    fn sample(&self, u: f64) -> (u32, u32) {
        let idx = self.cumulative.partition_point(|&c| c <= u).min(self.atoms.len() - 1);
        self.atoms[idx]
    }
}

/// Forward stepper of the construction. It is `Clone`, including its RNG,
/// so a snapshot can regenerate the exact same events later.
#[derive(Debug, Clone)]
pub struct GraphicalStepper {
    t: f64,
    state: PopulationState,
    frozen_at: Option<f64>,
    band: Band,
    pairs: PairSampler,
    repro_rate: f64,
    competition_rate: f64,
    mutation_rate: f64,
    theta: [f64; 2],
    theta_max: f64,
    rng: SimRng,
}

/// What one call to [`GraphicalStepper::advance`] produced.
enum Step {
    Logged(EventRecord),
    Silent,
    PastHorizon,
}

impl GraphicalStepper {
    pub fn new(
        params: &ModelParams,
        nu: &CouplingMeasure,
        band: Band,
        initial: PopulationState,
        seed: u64,
    ) -> Result<Self> {
        if !band.contains(initial.total()) {
            return Err(Error::InvalidParams(format!(
                "initial size {} outside the band [{}, {}]",
                initial.total(),
                band.lower,
                band.upper
            )));
        }
        if band.upper == 0 {
            return Err(Error::InvalidParams("band upper bound must be positive".into()));
        }
        let up = band.upper as f64;
        let theta = [params.theta_plus(), params.theta_minus()];
        let theta_max = theta[0].max(theta[1]);
        Ok(Self {
            t: 0.0,
            state: initial,
            frozen_at: None,
            band,
            pairs: PairSampler::new(nu),
            repro_rate: params.k() as f64 * up * nu.total_mass_f64(),
            competition_rate: up * up * params.competition(),
            mutation_rate: theta_max * up,
            theta,
            theta_max,
            rng: rng_from_seed(seed),
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> PopulationState {
        self.state
    }

    pub fn frozen_at(&self) -> Option<f64> {
        self.frozen_at
    }

    pub fn band(&self) -> Band {
        self.band
    }

    /// Next logged event at or before `horizon`, or `None` once the next
    /// candidate falls past it.
    pub fn next_event(&mut self, horizon: f64) -> Option<EventRecord> {
        loop {
            match self.advance(horizon) {
                Step::Logged(ev) => return Some(ev),
                Step::Silent => continue,
                Step::PastHorizon => return None,
            }
        }
    }

    fn advance(&mut self, horizon: f64) -> Step {
        let frozen = self.frozen_at.is_some();
        let total = if frozen { self.repro_rate } else { self.repro_rate + self.competition_rate + self.mutation_rate };
        if total <= 0.0 {
            return Step::PastHorizon;
        }
        let wait: f64 = Exp1.sample(&mut self.rng);
        let t = self.t + wait / total;
        if t > horizon {
            return Step::PastHorizon;
        }
        self.t = t;
        let pick = self.rng.random::<f64>() * total;
        let n = self.state.total() as f64;
        let up = self.band.upper as f64;
        if pick < self.repro_rate {
            let (i, j) = self.pairs.sample(self.rng.random::<f64>());
            let u: f64 = self.rng.random();
            if frozen || u > n / up {
                return Step::Logged(EventRecord { t, i, j, accepted: false, post_size: None, parent_type: None });
            }
            let parent = if self.rng.random::<f64>() * n < self.state.n_plus as f64 { Type::Plus } else { Type::Minus };
            let children = match parent {
                Type::Plus => (i + j) as i64,
                Type::Minus => i as i64,
            };
            let next = match parent {
                Type::Plus => self.state.displaced(children - 1, 0),
                Type::Minus => self.state.displaced(0, children - 1),
            };
            match next {
                Some(next) if self.band.contains(next.total()) && next.total() >= i as u64 + 2 * j as u64 => {
                    self.state = next;
                    Step::Logged(EventRecord {
                        t,
                        i,
                        j,
                        accepted: true,
                        post_size: Some(next.total()),
                        parent_type: Some(parent),
                    })
                }
                _ => {
                    self.frozen_at = Some(t);
                    Step::Logged(EventRecord { t, i, j, accepted: false, post_size: None, parent_type: None })
                }
            }
        } else if pick < self.repro_rate + self.competition_rate {
            let u: f64 = self.rng.random();
            if u > (n / up) * (n / up) {
                return Step::Silent;
            }
            let victim = if self.rng.random::<f64>() * n < self.state.n_plus as f64 { Type::Plus } else { Type::Minus };
            let next = match victim {
                Type::Plus => self.state.displaced(-1, 0),
                Type::Minus => self.state.displaced(0, -1),
            };
            match next {
                Some(next) if self.band.contains(next.total()) => {
                    self.state = next;
                    Step::Logged(EventRecord {
                        t,
                        i: 0,
                        j: 0,
                        accepted: true,
                        post_size: Some(next.total()),
                        parent_type: Some(victim),
                    })
                }
                _ => {
                    self.frozen_at = Some(t);
                    Step::Silent
                }
            }
        } else {
            let plus_rate = self.theta[0] * self.state.n_plus as f64;
            let minus_rate = self.theta[1] * self.state.n_minus as f64;
            let u = self.rng.random::<f64>() * self.theta_max * up;
            if u < plus_rate {
                self.state = PopulationState::new(self.state.n_plus - 1, self.state.n_minus + 1);
            } else if u < plus_rate + minus_rate {
                self.state = PopulationState::new(self.state.n_plus + 1, self.state.n_minus - 1);
            }
            Step::Silent
        }
    }
}

/// Events in reverse time order, together with what a backward pass needs
/// to know about the forward run.
pub trait EventSource {
    fn horizon(&self) -> f64;

    /// Population size at the horizon (the frozen size if the run froze).
    fn final_size(&self) -> u64;

    fn frozen_at(&self) -> Option<f64>;

    fn band(&self) -> Band;

    /// Largest `i + j` over all logged events.
    fn max_event_size(&self) -> u64;

    /// Visit every event that can move a lineage, latest first.
    fn for_each_reverse(&self, f: &mut dyn FnMut(&EventRecord));
}

/// A fully materialized run.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub events: Vec<EventRecord>,
    pub horizon: f64,
    pub band: Band,
    pub final_state: PopulationState,
    pub frozen_at: Option<f64>,
}

impl EventLog {
    /// One JSON object per line.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for ev in &self.events {
            serde_json::to_writer(&mut out, ev)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

impl EventSource for EventLog {
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn final_size(&self) -> u64 {
        self.final_state.total()
    }

    fn frozen_at(&self) -> Option<f64> {
        self.frozen_at
    }

    fn band(&self) -> Band {
        self.band
    }

    fn max_event_size(&self) -> u64 {
        self.events.iter().map(|e| (e.i + e.j) as u64).max().unwrap_or(0)
    }

    fn for_each_reverse(&self, f: &mut dyn FnMut(&EventRecord)) {
        self.events.iter().rev().filter(|e| e.touches_lineages()).for_each(|e| f(e));
    }
}

/// Run the construction on `[0, horizon]` and keep every event, together
/// with the forward count path.
pub fn simulate_graphical(
    params: &ModelParams,
    nu: &CouplingMeasure,
    horizon: f64,
    initial: PopulationState,
    band: Band,
    seed: u64,
) -> Result<(EventLog, Trajectory)> {
    if !(horizon >= 0.0) {
        return Err(Error::InvalidParams(format!("horizon must be >= 0, got {horizon}")));
    }
    let mut stepper = GraphicalStepper::new(params, nu, band, initial, seed)?;
    let mut events = Vec::new();
    let mut points = vec![TrajectoryPoint { t: 0.0, state: initial }];
    while let Some(ev) = stepper.next_event(horizon) {
        events.push(ev);
        if stepper.state() != points.last().map(|p| p.state).unwrap_or(initial) {
            points.push(TrajectoryPoint { t: ev.t, state: stepper.state() });
        }
    }
    let stop = if stepper.frozen_at().is_some() { StopReason::Predicate } else { StopReason::Horizon };
    let trajectory = Trajectory { points, end_time: horizon, stop };
    let log = EventLog { events, horizon, band, final_state: stepper.state(), frozen_at: stepper.frozen_at() };
    Ok((log, trajectory))
}

/// A run that stores only periodic snapshots of the stepper and regenerates
/// the events block by block when walked backward. Memory is proportional
/// to the number of blocks rather than the number of events.
#[derive(Debug, Clone)]
pub struct CheckpointedRun {
    snapshots: Vec<GraphicalStepper>,
    block: usize,
    horizon: f64,
    band: Band,
    final_state: PopulationState,
    frozen_at: Option<f64>,
    max_event_size: u64,
    event_count: u64,
}

impl CheckpointedRun {
    pub const DEFAULT_BLOCK: usize = 1 << 16;

    pub fn generate(
        params: &ModelParams,
        nu: &CouplingMeasure,
        horizon: f64,
        initial: PopulationState,
        band: Band,
        seed: u64,
    ) -> Result<Self> {
        Self::generate_with_block(params, nu, horizon, initial, band, seed, Self::DEFAULT_BLOCK)
    }

    pub fn generate_with_block(
        params: &ModelParams,
        nu: &CouplingMeasure,
        horizon: f64,
        initial: PopulationState,
        band: Band,
        seed: u64,
        block: usize,
    ) -> Result<Self> {
        if !(horizon >= 0.0) {
            return Err(Error::InvalidParams(format!("horizon must be >= 0, got {horizon}")));
        }
        let block = block.max(1);
        let mut stepper = GraphicalStepper::new(params, nu, band, initial, seed)?;
        let mut snapshots = Vec::new();
        let mut max_event_size = 0u64;
        let mut event_count = 0u64;
        'outer: loop {
            snapshots.push(stepper.clone());
            for _ in 0..block {
                match stepper.next_event(horizon) {
                    Some(ev) => {
                        event_count += 1;
                        max_event_size = max_event_size.max((ev.i + ev.j) as u64);
                    }
                    None => break 'outer,
                }
            }
        }
        Ok(Self {
            snapshots,
            block,
            horizon,
            band,
            final_state: stepper.state(),
            frozen_at: stepper.frozen_at(),
            max_event_size,
            event_count,
        })
    }

    pub fn event_count(&self) -> u64 {
        self.event_count
    }

    pub fn final_state(&self) -> PopulationState {
        self.final_state
    }
}

impl EventSource for CheckpointedRun {
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn final_size(&self) -> u64 {
        self.final_state.total()
    }

    fn frozen_at(&self) -> Option<f64> {
        self.frozen_at
    }

    fn band(&self) -> Band {
        self.band
    }

    fn max_event_size(&self) -> u64 {
        self.max_event_size
    }

    fn for_each_reverse(&self, f: &mut dyn FnMut(&EventRecord)) {
        let mut buffer = Vec::with_capacity(self.block);
        for snapshot in self.snapshots.iter().rev() {
            let mut stepper = snapshot.clone();
            buffer.clear();
            for _ in 0..self.block {
                match stepper.next_event(self.horizon) {
                    Some(ev) if ev.touches_lineages() => buffer.push(ev),
                    Some(_) => {}
                    None => break,
                }
            }
            buffer.iter().rev().for_each(|e| f(e));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{coupling_for_laws, LawFamily, ReproductionLaw};
    use crate::weight::Rational;
    use num_traits::One;

    fn moran(k: u64) -> (ModelParams, CouplingMeasure) {
        let family = LawFamily::moran(Rational::one());
        let params = ModelParams::from_family(&family, k, 0.0, 0.0).unwrap();
        let nu = crate::measures::build_coupling(&params).unwrap();
        (params, nu)
    }

    #[test]
    fn checkpointed_run_replays_the_log() {
        let (params, nu) = moran(50);
        let band = Band::default_for(50);
        let initial = PopulationState::new(25, 25);
        let (log, _) = simulate_graphical(&params, &nu, 0.5, initial, band, 9).unwrap();
        let run = CheckpointedRun::generate_with_block(&params, &nu, 0.5, initial, band, 9, 37).unwrap();
        let mut replay = Vec::new();
        run.for_each_reverse(&mut |e| replay.push(*e));
        let mut direct = Vec::new();
        log.for_each_reverse(&mut |e| direct.push(*e));
        assert!(!direct.is_empty());
        assert_eq!(replay, direct);
        assert_eq!(run.final_size(), log.final_size());
        assert_eq!(run.event_count(), log.events.len() as u64);
    }

    #[test]
    fn unit_events_keep_the_population_constant() {
        let one = ReproductionLaw::from_atoms_allow_empty([(1, Rational::one())]).unwrap();
        let nu = coupling_for_laws(&one, &one).unwrap();
        let params = ModelParams::custom(20, one.clone(), one, 0.0, 0.0, 0.0).unwrap();
        let (log, traj) =
            simulate_graphical(&params, &nu, 2.0, PopulationState::new(10, 10), Band::default_for(20), 3).unwrap();
        assert!(log.events.iter().any(|e| e.accepted));
        assert!(log.events.iter().filter(|e| e.accepted).all(|e| e.post_size == Some(20)));
        assert_eq!(traj.points.len(), 1);
    }

    #[test]
    fn initial_state_outside_band_is_rejected() {
        let (params, nu) = moran(100);
        let err = GraphicalStepper::new(&params, &nu, Band::default_for(100), PopulationState::new(10, 0), 1);
        assert!(err.is_err());
    }
}
