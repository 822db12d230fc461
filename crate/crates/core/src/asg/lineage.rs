//! The lineage counting process, read backward through an event source.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graphical::{EventRecord, EventSource};
use super::transition::{JumpSampler, LineageOutcome};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, SimRng};

/// A point of the backward path; `count = None` is the cemetery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineagePoint {
    pub t_backward: f64,
    pub count: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineagePath {
    pub sample_size: u64,
    pub horizon: f64,
    /// Starts at `(0, m)`; one point per jump.
    pub points: Vec<LineagePoint>,
}

impl LineagePath {
    pub fn final_count(&self) -> Option<u64> {
        self.points.last().and_then(|p| p.count)
    }

    pub fn hit_cemetery(&self) -> bool {
        self.points.last().is_some_and(|p| p.count.is_none())
    }

    /// Value at backward time `s` (right-continuous).
    pub fn count_at(&self, s: f64) -> Option<u64> {
        let idx = self.points.partition_point(|p| p.t_backward <= s);
        self.points[idx.saturating_sub(1)].count
    }

    /// CSV `t_backward,count` with `-1` for the cemetery.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "t_backward,count")?;
        for p in &self.points {
            match p.count {
                Some(c) => writeln!(out, "{},{}", p.t_backward, c)?,
                None => writeln!(out, "{},-1", p.t_backward)?,
            }
        }
        Ok(())
    }
}

/// Jump counts and exposure of one backward pass. Branch and coalescence
/// rates are estimated as `branches / lineage_time` and
/// `coalescences / pair_time`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LineageStats {
    pub branches: u64,
    pub coalescences: u64,
    pub multi_mergers: u64,
    /// `∫ A(s) ds` up to the horizon or absorption.
    pub lineage_time: f64,
    /// `∫ C(A(s), 2) ds` up to the horizon or absorption.
    pub pair_time: f64,
    pub absorbed_at: Option<f64>,
    /// `A` at the horizon, `None` if absorbed.
    pub final_count: Option<u64>,
}

impl LineageStats {
    pub fn merge(&mut self, other: &LineageStats) {
        self.branches += other.branches;
        self.coalescences += other.coalescences;
        self.multi_mergers += other.multi_mergers;
        self.lineage_time += other.lineage_time;
        self.pair_time += other.pair_time;
    }
}

/// One backward chain, fed events latest first.
#[derive(Debug, Clone)]
pub struct LineageCounter {
    count: Option<u64>,
    horizon: f64,
    last_s: f64,
    stats: LineageStats,
    path: Option<Vec<LineagePoint>>,
    rng: SimRng,
}

impl LineageCounter {
    pub fn new(sample_size: u64, horizon: f64, seed: u64, keep_path: bool) -> Self {
        let path = keep_path.then(|| vec![LineagePoint { t_backward: 0.0, count: Some(sample_size) }]);
        Self {
            count: Some(sample_size),
            horizon,
            last_s: 0.0,
            stats: LineageStats::default(),
            path,
            rng: rng_from_seed(seed),
        }
    }

    pub fn count(&self) -> Option<u64> {
        self.count
    }

    fn expose(&mut self, s: f64) {
        if let Some(n) = self.count {
            let dt = s - self.last_s;
            self.stats.lineage_time += n as f64 * dt;
            self.stats.pair_time += (n * n.saturating_sub(1) / 2) as f64 * dt;
        }
        self.last_s = s;
    }

    /// Process one accepted event.
    pub fn on_event(&mut self, ev: &EventRecord, sampler: &JumpSampler) {
        let Some(n) = self.count else { return };
        let (true, Some(big_n)) = (ev.accepted, ev.post_size) else { return };
        let s = self.horizon - ev.t;
        let u: f64 = self.rng.random();
        let outcome = sampler.sample(ev.i as u64, ev.j as u64, n, big_n, u);
        self.jump(s, n, outcome);
    }

    fn jump(&mut self, s: f64, n: u64, outcome: LineageOutcome) {
        if outcome == LineageOutcome::Stay {
            return;
        }
        self.expose(s);
        match outcome {
            LineageOutcome::Up => self.stats.branches += 1,
            LineageOutcome::Down => self.stats.coalescences += 1,
            LineageOutcome::Merge(_) => self.stats.multi_mergers += 1,
            LineageOutcome::Cemetery => self.stats.absorbed_at = Some(s),
            LineageOutcome::Stay => {}
        }
        self.count = outcome.apply(n);
        if let Some(path) = &mut self.path {
            path.push(LineagePoint { t_backward: s, count: self.count });
        }
    }

    pub fn finish(mut self) -> (LineageStats, Option<Vec<LineagePoint>>) {
        if self.count.is_some() {
            self.expose(self.horizon);
        }
        self.stats.final_count = self.count;
        (self.stats, self.path)
    }
}

fn check_sample(source: &dyn EventSource, sample_size: u64) -> Result<()> {
    let size = source.final_size();
    if sample_size > size {
        return Err(Error::SampleTooLarge { m: sample_size, size });
    }
    Ok(())
}

/// One backward pass from `m` lineages sampled at the horizon.
pub fn lineage_counting(source: &dyn EventSource, sample_size: u64, seed: u64) -> Result<LineagePath> {
    check_sample(source, sample_size)?;
    let sampler = JumpSampler;
    let mut counter = LineageCounter::new(sample_size, source.horizon(), seed, true);
    source.for_each_reverse(&mut |ev| counter.on_event(ev, &sampler));
    let (_, points) = counter.finish();
    Ok(LineagePath { sample_size, horizon: source.horizon(), points: points.unwrap_or_default() })
}

/// `chains` independent backward passes over the same events in a single
/// sweep. Chain `c` uses the seed `substream_seed(seed, c)`.
pub fn lineage_rate_sweep(
    source: &dyn EventSource,
    sample_size: u64,
    chains: u64,
    seed: u64,
) -> Result<Vec<LineageStats>> {
    check_sample(source, sample_size)?;
    let sampler = JumpSampler;
    let mut counters: Vec<LineageCounter> = (0..chains)
        .map(|c| LineageCounter::new(sample_size, source.horizon(), crate::rng::substream_seed(seed, c), false))
        .collect();
    source.for_each_reverse(&mut |ev| {
        for counter in counters.iter_mut() {
            counter.on_event(ev, &sampler);
        }
    });
    Ok(counters.into_iter().map(|c| c.finish().0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asg::graphical::{Band, EventLog};
    use crate::forward::PopulationState;

    fn log(events: Vec<EventRecord>, size: u64) -> EventLog {
        EventLog {
            events,
            horizon: 1.0,
            band: Band { lower: 1, upper: 100 },
            final_state: PopulationState::new(size, 0),
            frozen_at: None,
        }
    }

    fn accepted(t: f64, i: u32, j: u32, n: u64) -> EventRecord {
        EventRecord { t, i, j, accepted: true, post_size: Some(n), parent_type: Some(crate::Type::Plus) }
    }

    #[test]
    fn single_lineage_without_red_labels_stays() {
        let events = (0..200).map(|k| accepted(k as f64 / 200.0, 2 + k % 3, 0, 10)).collect();
        let path = lineage_counting(&log(events, 10), 1, 4).unwrap();
        assert_eq!(path.points.len(), 1);
        assert_eq!(path.final_count(), Some(1));
    }

    #[test]
    fn oversized_sample_is_an_error() {
        assert!(matches!(lineage_counting(&log(vec![], 4), 5, 1), Err(Error::SampleTooLarge { .. })));
    }

    #[test]
    fn exposure_without_events() {
        let stats = lineage_rate_sweep(&log(vec![], 10), 3, 2, 1).unwrap();
        assert_eq!(stats.len(), 2);
        assert_eq!(stats[0].lineage_time, 3.0);
        assert_eq!(stats[0].pair_time, 3.0);
    }

    #[test]
    fn path_csv_marks_cemetery() {
        let path = LineagePath {
            sample_size: 2,
            horizon: 1.0,
            points: vec![
                LineagePoint { t_backward: 0.0, count: Some(2) },
                LineagePoint { t_backward: 0.5, count: None },
            ],
        };
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t_backward,count\n0,2\n0.5,-1\n");
        assert!(path.hit_cemetery());
    }
}
