//! Exact event-driven simulation of the two-type population sizes.
//!
//! A type-`±` individual with offspring law `μ^±` reproduces into `i ≥ 1`
//! individuals at rate `μ^±(i)`, dies at rate `μ^±(0) + N·𝔪/K`, and mutates
//! to the other type at rate `θ^±/K`. Simulation runs in natural time; the
//! rescaled frequency process is obtained with [`rescale_frequency`].

use std::io::Write;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::ModelParams;
use crate::parallel::try_map_replicates;
use crate::rng::{rng_from_seed, SimRng};
use crate::types::Type;

/// Default guard against runaway event rates.
pub const DEFAULT_MAX_RATE: f64 = 1e15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PopulationState {
    pub n_plus: u64,
    pub n_minus: u64,
}

impl PopulationState {
    pub fn new(n_plus: u64, n_minus: u64) -> Self {
        Self { n_plus, n_minus }
    }

    pub fn total(&self) -> u64 {
        self.n_plus + self.n_minus
    }

    pub fn count(&self, ty: Type) -> u64 {
        match ty {
            Type::Plus => self.n_plus,
            Type::Minus => self.n_minus,
        }
    }

    pub fn is_extinct(&self) -> bool {
        self.total() == 0
    }

    /// Apply a signed displacement; `None` if a count would go negative.
    pub fn displaced(&self, d_plus: i64, d_minus: i64) -> Option<Self> {
        Some(Self {
            n_plus: self.n_plus.checked_add_signed(d_plus)?,
            n_minus: self.n_minus.checked_add_signed(d_minus)?,
        })
    }
}

/// The kinds of transition in the rate table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransitionKind {
    /// A parent of type `ty` is replaced by `offspring ≥ 1` children.
    Birth { ty: Type, offspring: u32 },
    /// An individual of type `ty` dies (natural or competition death).
    Death { ty: Type },
    /// An individual of type `from` switches to the other type.
    Mutation { from: Type },
}

impl TransitionKind {
    pub fn displacement(&self) -> (i64, i64) {
        let signed = |ty: Type, d: i64| match ty {
            Type::Plus => (d, 0),
            Type::Minus => (0, d),
        };
        match *self {
            TransitionKind::Birth { ty, offspring } => signed(ty, offspring as i64 - 1),
            TransitionKind::Death { ty } => signed(ty, -1),
            TransitionKind::Mutation { from: Type::Plus } => (-1, 1),
            TransitionKind::Mutation { from: Type::Minus } => (1, -1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub rate: f64,
    pub kind: TransitionKind,
    pub next: PopulationState,
}

/// All transitions out of `state` with positive rate.
///
/// Reproduction into a single child (`i = 1`) appears as a row whose next
/// state equals the current one; simulators skip these self-loops because
/// they do not change the counts.
pub fn transition_rates(state: &PopulationState, params: &ModelParams) -> Vec<Transition> {
    let mut rows = Vec::new();
    let total = state.total() as f64;
    for ty in Type::BOTH {
        let n = state.count(ty) as f64;
        if n == 0.0 {
            continue;
        }
        let law = params.law(ty);
        let mut push = |rate: f64, kind: TransitionKind| {
            if rate > 0.0 {
                let (dp, dm) = kind.displacement();
                let next = state.displaced(dp, dm).expect("counts stay nonnegative");
                rows.push(Transition { rate, kind, next });
            }
        };
        for &(i, m) in law.atoms_f64() {
            if i >= 1 {
                push(n * m, TransitionKind::Birth { ty, offspring: i });
            }
        }
        push(n * law.mass_f64(0) + n * total * params.competition_per_pair(), TransitionKind::Death { ty });
        push(n * params.theta(ty) / params.k() as f64, TransitionKind::Mutation { from: ty });
    }
    rows
}

/// Per-type rate constants in the form the stepper needs.
#[derive(Debug, Clone)]
struct TypeRates {
    /// `(offspring, cumulative mass)` over atoms with at least two children.
    births: Vec<(u32, f64)>,
    birth_total: f64,
    death: f64,
    mutation: f64,
}

impl TypeRates {
    fn new(params: &ModelParams, ty: Type) -> Self {
        let law = params.law(ty);
        let mut births = Vec::new();
        let mut acc = 0.0;
        for &(i, m) in law.atoms_f64() {
            if i >= 2 {
                acc += m;
                births.push((i, acc));
            }
        }
        Self { births, birth_total: acc, death: law.mass_f64(0), mutation: params.theta(ty) / params.k() as f64 }
    }

    /// The offspring number when only one birth atom exists.
    fn single_birth(&self) -> Option<u32> {
        match self.births.as_slice() {
            [(i, _)] => Some(*i),
            _ => None,
        }
    }

    fn offspring(&self, u: f64) -> u32 {
        self.births.iter().find(|(_, c)| u < *c).or(self.births.last()).map_or(2, |(i, _)| *i)
    }
}

/// Reusable exact stepper for the population-size chain.
#[derive(Debug, Clone)]
pub struct ForwardSim {
    plus: TypeRates,
    minus: TypeRates,
    competition: f64,
    max_rate: f64,
    state: PopulationState,
    time: f64,
}

impl ForwardSim {
    pub fn new(params: &ModelParams, initial: PopulationState) -> Self {
        Self {
            plus: TypeRates::new(params, Type::Plus),
            minus: TypeRates::new(params, Type::Minus),
            competition: params.competition_per_pair(),
            max_rate: DEFAULT_MAX_RATE,
            state: initial,
            time: 0.0,
        }
    }

    pub fn with_max_rate(mut self, bound: f64) -> Self {
        self.max_rate = bound;
        self
    }

    pub fn state(&self) -> PopulationState {
        self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Total rate of count-changing transitions in the current state.
    pub fn total_rate(&self) -> f64 {
        self.rates().iter().sum()
    }

    #[inline]
    fn rates(&self) -> [f64; 6] {
        let np = self.state.n_plus as f64;
        let nm = self.state.n_minus as f64;
        let comp = (np + nm) * self.competition;
        [
            np * self.plus.birth_total,
            nm * self.minus.birth_total,
            np * (self.plus.death + comp),
            nm * (self.minus.death + comp),
            np * self.plus.mutation,
            nm * self.minus.mutation,
        ]
    }

    /// Sample the next transition without applying it. Returns the waiting
    /// time and the transition, or `None` in an absorbing state.
    #[inline]
    fn propose(&self, rng: &mut SimRng) -> Result<Option<(f64, TransitionKind)>> {
        let r = self.rates();
        let total: f64 = r.iter().sum();
        if total <= 0.0 {
            return Ok(None);
        }
        if total > self.max_rate {
            return Err(Error::RateOverflow { rate: total, bound: self.max_rate });
        }
        let wait: f64 = rng.sample::<f64, _>(Exp1) / total;
        let mut u = rng.random::<f64>() * total;
        let mut chosen = None;
        for (category, &rate) in r.iter().enumerate() {
            if u < rate {
                chosen = Some(category);
                break;
            }
            u -= rate;
        }
        // Rounding can leave `u` past the last positive rate.
        let category = chosen.unwrap_or_else(|| r.iter().rposition(|&x| x > 0.0).expect("total rate is positive"));
        let kind = match category {
            0 => TransitionKind::Birth { ty: Type::Plus, offspring: self.plus.offspring(u / self.state.n_plus as f64) },
            1 => TransitionKind::Birth {
                ty: Type::Minus,
                offspring: self.minus.offspring(u / self.state.n_minus as f64),
            },
            2 => TransitionKind::Death { ty: Type::Plus },
            3 => TransitionKind::Death { ty: Type::Minus },
            4 => TransitionKind::Mutation { from: Type::Plus },
            _ => TransitionKind::Mutation { from: Type::Minus },
        };
        Ok(Some((wait, kind)))
    }

    fn apply(&mut self, kind: TransitionKind) {
        let (dp, dm) = kind.displacement();
        self.state = self.state.displaced(dp, dm).expect("rate table never empties a class");
    }

    /// Perform one transition. Returns the event time and kind, or `None`
    /// if the state is absorbing.
    pub fn step(&mut self, rng: &mut SimRng) -> Result<Option<(f64, TransitionKind)>> {
        match self.propose(rng)? {
            Some((wait, kind)) => {
                self.time += wait;
                self.apply(kind);
                Ok(Some((self.time, kind)))
            }
            None => Ok(None),
        }
    }

    /// Run until time `t_end` (or absorption) without reporting events.
    ///
    /// Same law and the same random draws as [`ForwardSim::advance_to`], but
    /// the category is chosen by branch-free comparisons against cumulative
    /// rates, which roughly halves the cost per event in long runs.
    pub fn run_until(&mut self, t_end: f64, rng: &mut SimRng) -> Result<()> {
        let single = [self.plus.single_birth(), self.minus.single_birth()];
        let growth = |k: usize| single[k].map_or(0, |i| i as i64 - 1);
        let d_plus: [i64; 6] = [growth(0), 0, -1, 0, -1, 1];
        let d_minus: [i64; 6] = [0, growth(1), 0, -1, 1, -1];
        let lookup = [single[0].is_none(), single[1].is_none(), false, false, false, false];
        let mut time = self.time;
        // Signed counts convert to floats faster than unsigned ones.
        let (mut np, mut nm) = (self.state.n_plus as i64, self.state.n_minus as i64);
        let outcome = loop {
            let (fp, fm) = (np as f64, nm as f64);
            let comp = (fp + fm) * self.competition;
            let c0 = fp * self.plus.birth_total;
            let c1 = c0 + fm * self.minus.birth_total;
            let c2 = c1 + fp * (self.plus.death + comp);
            let c3 = c2 + fm * (self.minus.death + comp);
            let c4 = c3 + fp * self.plus.mutation;
            let total = c4 + fm * self.minus.mutation;
            if total <= 0.0 {
                break Ok(());
            }
            if total > self.max_rate {
                break Err(Error::RateOverflow { rate: total, bound: self.max_rate });
            }
            let wait: f64 = rng.sample::<f64, _>(Exp1) / total;
            if time + wait > t_end {
                break Ok(());
            }
            time += wait;
            let u = rng.random::<f64>() * total;
            let mut category =
                (u >= c0) as usize + (u >= c1) as usize + (u >= c2) as usize + (u >= c3) as usize + (u >= c4) as usize;
            if u >= total {
                // Rounding pushed `u` onto the upper end; take the last category with positive width.
                let cumulative = [c0, c1, c2, c3, c4, total];
                let width = |k: usize| cumulative[k] - if k == 0 { 0.0 } else { cumulative[k - 1] };
                category = (0..6).rev().find(|&k| width(k) > 0.0).expect("total rate is positive");
            }
            if lookup[category] {
                let (rates, n, start) = if category == 0 { (&self.plus, fp, 0.0) } else { (&self.minus, fm, c0) };
                let offspring = rates.offspring((u - start) / n) as i64;
                if category == 0 {
                    np += offspring - 1;
                } else {
                    nm += offspring - 1;
                }
            } else {
                np += d_plus[category];
                nm += d_minus[category];
            }
        };
        self.state = PopulationState::new(np as u64, nm as u64);
        self.time = time;
        if outcome.is_ok() {
            self.time = self.time.max(t_end);
        }
        outcome
    }

    /// Run until time `t_end` (or absorption), calling `on_event` after every
    /// transition. Exact by memorylessness: a proposal past `t_end` is
    /// discarded and the clock set to `t_end`. Returns `false` if `on_event`
    /// asked to stop early.
    pub fn advance_to(
        &mut self,
        t_end: f64,
        rng: &mut SimRng,
        mut on_event: impl FnMut(f64, &PopulationState, TransitionKind) -> bool,
    ) -> Result<bool> {
        while let Some((wait, kind)) = self.propose(rng)? {
            if self.time + wait > t_end {
                break;
            }
            self.time += wait;
            self.apply(kind);
            if !on_event(self.time, &self.state, kind) {
                return Ok(false);
            }
        }
        self.time = self.time.max(t_end);
        Ok(true)
    }
}

/// How much of a path to keep.
#[derive(Debug, Clone, PartialEq)]
pub enum Recording {
    /// Every event.
    Full,
    /// Every `k`-th event, plus the initial and final state.
    EveryNth(u64),
    /// The càdlàg value at each listed time (natural time, increasing).
    Grid(Vec<f64>),
    /// Initial and final state only.
    Endpoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Horizon,
    Predicate,
    Absorbed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub state: PopulationState,
}

/// A recorded path. With full recording, consecutive points differ by one
/// transition of the rate table; `end_time` is when recording stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub end_time: f64,
    pub stop: StopReason,
}

impl Trajectory {
    pub fn constant(state: PopulationState, end_time: f64) -> Self {
        Self { points: vec![TrajectoryPoint { t: 0.0, state }], end_time, stop: StopReason::Horizon }
    }

    pub fn initial(&self) -> PopulationState {
        self.points[0].state
    }

    pub fn last(&self) -> PopulationState {
        self.points.last().expect("trajectory has an initial point").state
    }

    /// Càdlàg value at time `t`.
    pub fn state_at(&self, t: f64) -> PopulationState {
        let idx = self.points.partition_point(|p| p.t <= t);
        self.points[idx.saturating_sub(1)].state
    }

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "t,n_plus,n_minus")?;
        for p in &self.points {
            writeln!(out, "{},{},{}", p.t, p.state.n_plus, p.state.n_minus)?;
        }
        Ok(())
    }
}

/// Simulation controls beyond the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub horizon: f64,
    pub recording: Recording,
    pub max_rate: f64,
}

impl SimOptions {
    pub fn new(horizon: f64) -> Self {
        Self { horizon, recording: Recording::Full, max_rate: DEFAULT_MAX_RATE }
    }

    pub fn recording(mut self, recording: Recording) -> Self {
        self.recording = recording;
        self
    }
}

/// Exact path up to `min(horizon, stop time, absorption)`, fully recorded.
pub fn simulate(
    initial: PopulationState,
    params: &ModelParams,
    horizon: f64,
    stop: impl FnMut(f64, &PopulationState) -> bool,
    seed: u64,
) -> Result<Trajectory> {
    simulate_with(initial, params, &SimOptions::new(horizon), stop, seed)
}

pub fn simulate_with(
    initial: PopulationState,
    params: &ModelParams,
    options: &SimOptions,
    mut stop: impl FnMut(f64, &PopulationState) -> bool,
    seed: u64,
) -> Result<Trajectory> {
    if !(options.horizon >= 0.0) {
        return Err(Error::InvalidParams(format!("horizon must be >= 0, got {}", options.horizon)));
    }
    let mut rng = rng_from_seed(seed);
    let mut sim = ForwardSim::new(params, initial).with_max_rate(options.max_rate);
    let mut points = vec![TrajectoryPoint { t: 0.0, state: initial }];
    if stop(0.0, &initial) {
        return Ok(Trajectory { points, end_time: 0.0, stop: StopReason::Predicate });
    }
    let grid: &[f64] = match &options.recording {
        Recording::Grid(times) => times,
        _ => &[],
    };
    let mut next_grid = grid.partition_point(|&g| g <= 0.0);
    let mut counter = 0u64;
    let mut reason = StopReason::Horizon;
    let mut end_time = options.horizon;
    loop {
        let Some((wait, kind)) = sim.propose(&mut rng)? else {
            reason = StopReason::Absorbed;
            break;
        };
        let t_new = sim.time + wait;
        if t_new > options.horizon {
            break;
        }
        while next_grid < grid.len() && grid[next_grid] < t_new {
            points.push(TrajectoryPoint { t: grid[next_grid], state: sim.state });
            next_grid += 1;
        }
        sim.time = t_new;
        sim.apply(kind);
        counter += 1;
        let keep = match &options.recording {
            Recording::Full => true,
            Recording::EveryNth(k) => counter % (*k).max(1) == 0,
            Recording::Grid(_) | Recording::Endpoints => false,
        };
        if keep {
            points.push(TrajectoryPoint { t: sim.time, state: sim.state });
        }
        if stop(sim.time, &sim.state) {
            reason = StopReason::Predicate;
            end_time = sim.time;
            break;
        }
    }
    if reason == StopReason::Absorbed {
        end_time = options.horizon;
    }
    while next_grid < grid.len() && grid[next_grid] <= end_time {
        points.push(TrajectoryPoint { t: grid[next_grid], state: sim.state });
        next_grid += 1;
    }
    let needs_final = matches!(options.recording, Recording::EveryNth(_) | Recording::Endpoints)
        && points.last().is_none_or(|p| p.t < sim.time);
    if needs_final && counter > 0 {
        points.push(TrajectoryPoint { t: sim.time, state: sim.state });
    }
    Ok(Trajectory { points, end_time, stop: reason })
}

/// First recorded time with `N ≥ K − K^β`.
pub fn stopping_time_t_beta(traj: &Trajectory, k: u64, beta: f64) -> Option<f64> {
    let threshold = t_beta_threshold(k, beta);
    traj.points.iter().find(|p| p.state.total() as f64 >= threshold).map(|p| p.t)
}

/// The level `K − K^β` defining the end of the growth phase.
pub fn t_beta_threshold(k: u64, beta: f64) -> f64 {
    let k = k as f64;
    k - k.powf(beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPoint {
    pub t: f64,
    pub x_plus: f64,
    pub x_minus: f64,
}

impl FrequencyPoint {
    /// Frequency of the minus type, `x⁻/(x⁺ + x⁻)` (zero on extinction).
    pub fn minus_frequency(&self) -> f64 {
        let total = self.x_plus + self.x_minus;
        if total > 0.0 {
            self.x_minus / total
        } else {
            0.0
        }
    }
}

/// `X_K(t) = N_K(Kt)/K`, sampled at the rescaled event times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPath {
    pub points: Vec<FrequencyPoint>,
}

impl FrequencyPath {
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "t,x_plus,x_minus")?;
        for p in &self.points {
            writeln!(out, "{},{},{}", p.t, p.x_plus, p.x_minus)?;
        }
        Ok(())
    }

    pub fn value_at(&self, t: f64) -> FrequencyPoint {
        let idx = self.points.partition_point(|p| p.t <= t);
        self.points[idx.saturating_sub(1)]
    }
}

pub fn rescale_frequency(traj: &Trajectory, k: u64) -> FrequencyPath {
    let kf = k as f64;
    FrequencyPath {
        points: traj
            .points
            .iter()
            .map(|p| FrequencyPoint {
                t: p.t / kf,
                x_plus: p.state.n_plus as f64 / kf,
                x_minus: p.state.n_minus as f64 / kf,
            })
            .collect(),
    }
}

/// Fraction of replicates whose `N_K(t)/K` stays in `[1 − ε, 1 + ε]` for all
/// rescaled `t ∈ [0, T]`.
pub fn concentration_probe(
    params: &ModelParams,
    initial: PopulationState,
    horizon: f64,
    epsilon: f64,
    replicates: u64,
    seed: u64,
    jobs: usize,
) -> Result<f64> {
    if replicates == 0 {
        return Err(Error::EmptySample);
    }
    let k = params.k() as f64;
    let inside = |s: &PopulationState| ((s.total() as f64) / k - 1.0).abs() <= epsilon;
    let hits = try_map_replicates(replicates, seed, jobs, |_, s| -> Result<bool> {
        if !inside(&initial) {
            return Ok(false);
        }
        let mut rng = rng_from_seed(s);
        let mut sim = ForwardSim::new(params, initial);
        sim.advance_to(horizon * k, &mut rng, |_, st, _| inside(st))
    })?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / replicates as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{LawFamily, ReproductionLaw};

    fn moran(s: f64, k: u64) -> ModelParams {
        ModelParams::from_family(&LawFamily::moran_f64(s).unwrap(), k, 0.0, 0.0).unwrap()
    }

    #[test]
    fn moran_total_rate_example() {
        let rows = transition_rates(&PopulationState::new(5, 5), &moran(1.0, 10));
        let total: f64 = rows.iter().map(|r| r.rate).sum();
        // Oracle: 5·1.1 (plus births) + 5·1 (minus births) + 10·10/10 (competition).
        assert!((total - 20.5).abs() < 1e-12);
        assert_eq!(rows.len(), 4);
    }

    #[test]
    fn quiet_run_matches_reported_run() {
        let mixed = ModelParams::custom(
            30,
            ReproductionLaw::from_f64([(0, 0.2), (2, 1.0), (3, 0.3)]).unwrap(),
            ReproductionLaw::from_f64([(1, 0.5), (2, 0.7), (4, 0.1)]).unwrap(),
            1.0,
            0.8,
            0.4,
        )
        .unwrap();
        for params in [moran(1.0, 50), mixed] {
            for seed in 0..20 {
                let start = PopulationState::new(12, 9);
                let mut a = ForwardSim::new(&params, start);
                let mut b = ForwardSim::new(&params, start);
                let (mut ra, mut rb) = (crate::rng::rng_from_seed(seed), crate::rng::rng_from_seed(seed));
                a.advance_to(3.0, &mut ra, |_, _, _| true).unwrap();
                b.run_until(3.0, &mut rb).unwrap();
                assert_eq!((a.state(), a.time()), (b.state(), b.time()), "seed {seed}");
            }
        }
    }

    #[test]
    fn extinction_has_no_rows() {
        assert!(transition_rates(&PopulationState::new(0, 0), &moran(1.0, 10)).is_empty());
    }

    #[test]
    fn pure_death_row() {
        let death = ReproductionLaw::from_f64([(0, 1.0)]).unwrap();
        let params = ModelParams::custom(10, death.clone(), death, 1.0, 0.0, 0.0).unwrap();
        let rows = transition_rates(&PopulationState::new(1, 0), &params);
        assert_eq!(rows.len(), 1);
        assert!((rows[0].rate - 1.1).abs() < 1e-15);
        assert_eq!(rows[0].next, PopulationState::new(0, 0));
    }

    #[test]
    fn absorbing_and_one_sided() {
        let traj = simulate(PopulationState::default(), &moran(1.0, 100), 10.0, |_, _| false, 1).unwrap();
        assert_eq!(traj.points.len(), 1);
        assert_eq!(traj.stop, StopReason::Absorbed);

        let traj = simulate(PopulationState::new(100, 0), &moran(1.0, 100), 20.0, |_, _| false, 2).unwrap();
        assert!(traj.points.iter().all(|p| p.state.n_minus == 0));
        assert!(traj.points.len() > 100);
    }

    #[test]
    fn t_beta_examples() {
        let traj = simulate(PopulationState::new(0, 100), &moran(0.0, 100), 0.0, |_, _| false, 1).unwrap();
        assert_eq!(stopping_time_t_beta(&traj, 100, 0.5), Some(0.0));
        let small = Trajectory::constant(PopulationState::new(10, 10), 5.0);
        assert_eq!(stopping_time_t_beta(&small, 100, 0.5), None);
        assert_eq!(t_beta_threshold(100, 0.5), 90.0);
    }

    #[test]
    fn rescaling_examples() {
        let traj = Trajectory {
            points: vec![
                TrajectoryPoint { t: 0.0, state: PopulationState::new(10, 0) },
                TrajectoryPoint { t: 3.0, state: PopulationState::new(11, 0) },
            ],
            end_time: 5.0,
            stop: StopReason::Horizon,
        };
        let path = rescale_frequency(&traj, 10);
        assert_eq!(path.points[0].x_plus, 1.0);
        assert!((path.points[1].t - 0.3).abs() < 1e-15);
        let one = rescale_frequency(&Trajectory::constant(PopulationState::new(90, 30), 1.0), 120);
        assert_eq!((one.points[0].x_plus, one.points[0].x_minus), (0.75, 0.25));
    }

    #[test]
    fn grid_recording_matches_full_path() {
        let params = moran(1.0, 50);
        let init = PopulationState::new(25, 25);
        let full = simulate(init, &params, 30.0, |_, _| false, 11).unwrap();
        let grid: Vec<f64> = (0..=30).map(|t| t as f64).collect();
        let sparse = simulate_with(
            init,
            &params,
            &SimOptions::new(30.0).recording(Recording::Grid(grid.clone())),
            |_, _| false,
            11,
        )
        .unwrap();
        for p in &sparse.points[1..] {
            assert_eq!(p.state, full.state_at(p.t));
        }
        let thin =
            simulate_with(init, &params, &SimOptions::new(30.0).recording(Recording::EveryNth(7)), |_, _| false, 11)
                .unwrap();
        assert_eq!(thin.last(), full.last());
    }

    #[test]
    fn same_seed_same_path() {
        let params = moran(1.0, 30);
        let a = simulate(PopulationState::new(15, 15), &params, 50.0, |_, _| false, 99).unwrap();
        let b = simulate(PopulationState::new(15, 15), &params, 50.0, |_, _| false, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rate_overflow_guard() {
        let params = moran(1.0, 10);
        let mut sim = ForwardSim::new(&params, PopulationState::new(100, 100)).with_max_rate(10.0);
        assert!(matches!(sim.step(&mut rng_from_seed(1)), Err(Error::RateOverflow { .. })));
    }

    #[test]
    fn concentration_full_band() {
        // With ε = 1 the band is [0, 2K]. A pure-death population can never
        // leave it; a Moran population at K = 500 would need an excursion of
        // about 20 standard deviations.
        let death = ReproductionLaw::from_f64([(0, 1.0)]).unwrap();
        let dying = ModelParams::custom(50, death.clone(), death, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(concentration_probe(&dying, PopulationState::new(25, 25), 1.0, 1.0, 20, 3, 1).unwrap(), 1.0);
        let p = concentration_probe(&moran(1.0, 500), PopulationState::new(250, 250), 1.0, 1.0, 20, 3, 1).unwrap();
        assert_eq!(p, 1.0);
    }
}
