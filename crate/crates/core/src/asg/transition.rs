//! Exact law of a lineage-count jump at one reproduction event.
//!
//! At an event `(i, j)` with `N` labels after the event, the lowest `i`
//! labels are blue (children of the parent), the next `j` are red (the
//! selective children of a `+` parent) and the topmost `j` labels hold the
//! individuals displaced by those red children. Among `n` lineages placed
//! uniformly without replacement, let `b`, `r`, `m` be the numbers on blue,
//! red and top labels. Then:
//!
//! * `r ≥ 1` and `m ≥ 1`: the outcome depends on the parent's type and the
//!   count is sent to the cemetery `∗`;
//! * otherwise the new count is `n − b + 𝟙{b + r ≥ 1}`, since blue lineages
//!   merge into the parent and each red lineage branches onto the parent and
//!   onto one displaced individual.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::weight::{Rational, Weight};

/// Effect of one event on the number of lineages `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LineageOutcome {
    Stay,
    /// `n ↦ n + 1`.
    Up,
    /// `n ↦ n − 1`.
    Down,
    /// `k ≥ 3` lineages merge: `n ↦ n − k + 1`.
    Merge(u32),
    Cemetery,
}

impl LineageOutcome {
    /// New count, or `None` for the cemetery.
    pub fn apply(self, n: u64) -> Option<u64> {
        match self {
            LineageOutcome::Stay => Some(n),
            LineageOutcome::Up => Some(n + 1),
            LineageOutcome::Down => Some(n - 1),
            LineageOutcome::Merge(k) => Some(n + 1 - k as u64),
            LineageOutcome::Cemetery => None,
        }
    }

    /// Classify hit counts on blue, red and top labels.
    pub fn from_hits(b: u64, r: u64, m: u64) -> Self {
        if r >= 1 && m >= 1 {
            LineageOutcome::Cemetery
        } else if b == 0 && r >= 1 {
            LineageOutcome::Up
        } else if b <= 1 {
            LineageOutcome::Stay
        } else if b == 2 {
            LineageOutcome::Down
        } else {
            LineageOutcome::Merge(b as u32)
        }
    }
}

/// Probabilities of all outcomes at one event.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDistribution<W> {
    pub n: u64,
    pub stay: W,
    pub up: W,
    pub down: W,
    /// `merge[k − 3]` is the probability of `n ↦ n − k + 1` for `3 ≤ k ≤ n`.
    pub merge: Vec<W>,
    pub cemetery: W,
}

impl<W: Weight> TransitionDistribution<W> {
    fn empty(n: u64) -> Self {
        Self {
            n,
            stay: W::zero(),
            up: W::zero(),
            down: W::zero(),
            merge: vec![W::zero(); n.saturating_sub(2) as usize],
            cemetery: W::zero(),
        }
    }

    fn add(&mut self, outcome: LineageOutcome, w: W) {
        let slot = match outcome {
            LineageOutcome::Stay => &mut self.stay,
            LineageOutcome::Up => &mut self.up,
            LineageOutcome::Down => &mut self.down,
            LineageOutcome::Merge(k) => &mut self.merge[k as usize - 3],
            LineageOutcome::Cemetery => &mut self.cemetery,
        };
        *slot = slot.clone() + w;
    }

    pub fn probability(&self, outcome: LineageOutcome) -> W {
        match outcome {
            LineageOutcome::Stay => self.stay.clone(),
            LineageOutcome::Up => self.up.clone(),
            LineageOutcome::Down => self.down.clone(),
            LineageOutcome::Merge(k) if (3..=self.n).contains(&(k as u64)) => self.merge[k as usize - 3].clone(),
            LineageOutcome::Merge(_) => W::zero(),
            LineageOutcome::Cemetery => self.cemetery.clone(),
        }
    }

    pub fn outcomes(&self) -> Vec<(LineageOutcome, W)> {
        let mut out = vec![
            (LineageOutcome::Stay, self.stay.clone()),
            (LineageOutcome::Up, self.up.clone()),
            (LineageOutcome::Down, self.down.clone()),
        ];
        out.extend(self.merge.iter().enumerate().map(|(idx, w)| (LineageOutcome::Merge(idx as u32 + 3), w.clone())));
        out.push((LineageOutcome::Cemetery, self.cemetery.clone()));
        out
    }

    pub fn total(&self) -> W {
        self.outcomes().into_iter().fold(W::zero(), |acc, (_, w)| acc + w)
    }

    pub fn to_f64(&self) -> TransitionDistribution<f64> {
        TransitionDistribution {
            n: self.n,
            stay: self.stay.to_f64(),
            up: self.up.to_f64(),
            down: self.down.to_f64(),
            merge: self.merge.iter().map(Weight::to_f64).collect(),
            cemetery: self.cemetery.to_f64(),
        }
    }
}

/// The named components of the jump law.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionComponents<W> {
    /// Exactly one red hit, no blue or top hit.
    pub p_plus: W,
    /// At least two red hits, no blue or top hit.
    pub p_hat_plus: W,
    /// Exactly two blue hits, no red hit (top hits allowed).
    pub p_minus: W,
    /// Exactly two blue hits, at least one red hit, no top hit.
    pub p_hat_minus: W,
    /// At least one red and at least one top hit.
    pub p_star: W,
    /// `p_k[k − 3]`: exactly `k ≥ 3` blue hits, not in the cemetery case.
    pub p_k: Vec<W>,
}

impl<W: Weight> TransitionComponents<W> {
    /// `p̄ = p* + p̂⁺ + p̂⁻ + Σ_k p^k`, the mass of every outcome that is not a
    /// simple branching or pairwise coalescence.
    pub fn p_bar(&self) -> W {
        self.p_k
            .iter()
            .fold(self.p_star.clone() + self.p_hat_plus.clone() + self.p_hat_minus.clone(), |acc, w| acc + w.clone())
    }
}

fn check_geometry(i: u64, j: u64, n: u64, big_n: u64) -> Result<()> {
    if n > big_n {
        return Err(Error::SampleExceedsPopulation { n, big_n });
    }
    if big_n < i + 2 * j {
        return Err(Error::GeometryViolation { i, j, big_n });
    }
    Ok(())
}

/// `C(R, q) / C(N, n)` with `R = N − i − 2j` uncoloured labels, evaluated as
/// a product of ratios so that it stays accurate in floating point.
fn uncoloured_ratio<W: Weight>(rest: u64, q: u64, big_n: u64, n: u64) -> W {
    if q > rest {
        return W::zero();
    }
    let mut acc = W::one();
    for t in 0..q {
        acc = acc * W::from_u64(rest - t) / W::from_u64(big_n - t);
    }
    for t in q..n {
        acc = acc * W::from_u64(t + 1) / W::from_u64(big_n - t);
    }
    acc
}

/// Visit every hit-count triple `(b, r, m)` with its multivariate
/// hypergeometric weight.
fn for_each_triple<W: Weight>(i: u64, j: u64, n: u64, big_n: u64, mut f: impl FnMut(u64, u64, u64, W)) {
    let rest = big_n - i - 2 * j;
    for b in 0..=i.min(n) {
        let cb = W::binomial(i, b);
        for r in 0..=j.min(n - b) {
            let cr = W::binomial(j, r);
            for m in 0..=j.min(n - b - r) {
                let q = n - b - r - m;
                if q > rest {
                    continue;
                }
                let w = cb.clone() * cr.clone() * W::binomial(j, m) * uncoloured_ratio::<W>(rest, q, big_n, n);
                f(b, r, m, w);
            }
        }
    }
}

/// Full law of the lineage-count jump for `n` lineages among `N` labels at
/// event `(i, j)`.
pub fn transition_distribution<W: Weight>(i: u64, j: u64, n: u64, big_n: u64) -> Result<TransitionDistribution<W>> {
    check_geometry(i, j, n, big_n)?;
    let mut dist = TransitionDistribution::empty(n);
    for_each_triple::<W>(i, j, n, big_n, |b, r, m, w| dist.add(LineageOutcome::from_hits(b, r, m), w));
    Ok(dist)
}

/// The components `p⁺, p̂⁺, p⁻, p̂⁻, p*, p^k` by enumeration.
pub fn transition_components<W: Weight>(i: u64, j: u64, n: u64, big_n: u64) -> Result<TransitionComponents<W>> {
    check_geometry(i, j, n, big_n)?;
    let mut c = TransitionComponents {
        p_plus: W::zero(),
        p_hat_plus: W::zero(),
        p_minus: W::zero(),
        p_hat_minus: W::zero(),
        p_star: W::zero(),
        p_k: vec![W::zero(); n.saturating_sub(2) as usize],
    };
    for_each_triple::<W>(i, j, n, big_n, |b, r, m, w| {
        let slot = if r >= 1 && m >= 1 {
            &mut c.p_star
        } else if b == 0 && r == 1 && m == 0 {
            &mut c.p_plus
        } else if b == 0 && r >= 2 && m == 0 {
            &mut c.p_hat_plus
        } else if b == 2 && r == 0 {
            &mut c.p_minus
        } else if b == 2 && r >= 1 && m == 0 {
            &mut c.p_hat_minus
        } else if b >= 3 {
            &mut c.p_k[b as usize - 3]
        } else {
            return;
        };
        *slot = slot.clone() + w;
    });
    Ok(c)
}

/// Closed form `p⁺ = n (j/N) ∏_{k=1}^{n−1} (1 − (i + 2j − 1)/(N − k))`.
pub fn p_plus<W: Weight>(i: u64, j: u64, n: u64, big_n: u64) -> Result<W> {
    check_geometry(i, j, n, big_n)?;
    if n == 0 || j == 0 {
        return Ok(W::zero());
    }
    // 1 − (i + 2j − 1)/(N − k) = (R + 1 − k)/(N − k) with R = N − i − 2j.
    let rest = big_n - i - 2 * j;
    let mut acc = W::from_u64(n) * W::from_u64(j) / W::from_u64(big_n);
    for k in 1..n {
        if rest + 1 <= k {
            return Ok(W::zero());
        }
        acc = acc * W::from_u64(rest + 1 - k) / W::from_u64(big_n - k);
    }
    Ok(acc)
}

/// `p̂⁺ = Σ_{ℓ ≥ 2} C(j, ℓ) C(N − i − 2j, n − ℓ) / C(N, n)`.
pub fn p_hat_plus<W: Weight>(i: u64, j: u64, n: u64, big_n: u64) -> Result<W> {
    check_geometry(i, j, n, big_n)?;
    let rest = big_n - i - 2 * j;
    let mut acc = W::zero();
    for l in 2..=n.min(j) {
        acc = acc + W::binomial(j, l) * uncoloured_ratio::<W>(rest, n - l, big_n, n);
    }
    Ok(acc)
}

/// Closed form `p⁻ = C(n,2) i(i−1)/(N(N−1)) ∏_{k=2}^{n−1} (1 − (i + j − 2)/(N − k))`.
pub fn p_minus<W: Weight>(i: u64, j: u64, n: u64, big_n: u64) -> Result<W> {
    check_geometry(i, j, n, big_n)?;
    if n < 2 || i < 2 {
        return Ok(W::zero());
    }
    // 1 − (i + j − 2)/(N − k) = (N − i − j + 2 − k)/(N − k).
    let free = big_n + 2 - i - j;
    let mut acc = W::binomial(n, 2) * W::from_u64(i * (i - 1)) / W::from_u64(big_n * (big_n - 1));
    for k in 2..n {
        if free <= k {
            return Ok(W::zero());
        }
        acc = acc * W::from_u64(free - k) / W::from_u64(big_n - k);
    }
    Ok(acc)
}

/// `p̂⁻ = Σ_{ℓ ≥ 1} C(i, 2) C(j, ℓ) C(N − i − 2j, n − 2 − ℓ) / C(N, n)`.
pub fn p_hat_minus<W: Weight>(i: u64, j: u64, n: u64, big_n: u64) -> Result<W> {
    check_geometry(i, j, n, big_n)?;
    if n < 3 {
        return Ok(W::zero());
    }
    let rest = big_n - i - 2 * j;
    let ci2 = W::binomial(i, 2);
    let mut acc = W::zero();
    for l in 1..=(n - 2).min(j) {
        acc = acc + ci2.clone() * W::binomial(j, l) * uncoloured_ratio::<W>(rest, n - 2 - l, big_n, n);
    }
    Ok(acc)
}

/// Brute-force law obtained by listing all `C(N, n)` placements of the
/// lineages and following each one through the relabelling of a `+`-parent
/// event. Intended for `N ≤ 16`.
///
/// Post-event label `L` (1-based) traces back as follows: blue labels go to
/// the parent; red label `i + k` goes to the parent and to the pre-event
/// individual `1 + k`; top label `N − j + k` is that same individual `1 + k`;
/// any other label `L` is the pre-event individual `L − i + 1`.
pub fn enumerate_by_subsets(i: u64, j: u64, n: u64, big_n: u64) -> Result<TransitionDistribution<Rational>> {
    check_geometry(i, j, n, big_n)?;
    if big_n > 16 {
        return Err(Error::InvalidParams(format!("subset enumeration is limited to N <= 16, got {big_n}")));
    }
    let mut counts: BTreeMap<LineageOutcome, u64> = BTreeMap::new();
    let mut total = 0u64;
    for mask in 0u32..(1u32 << big_n) {
        if mask.count_ones() as u64 != n {
            continue;
        }
        total += 1;
        let mut red_hit = false;
        let mut top_hit = false;
        let mut targets: Vec<u64> = Vec::new();
        for bit in 0..big_n {
            if mask & (1 << bit) == 0 {
                continue;
            }
            let label = bit + 1;
            if label <= i {
                targets.push(1);
            } else if label <= i + j {
                red_hit = true;
                targets.push(1);
                targets.push(1 + (label - i));
            } else if label > big_n - j {
                top_hit = true;
                targets.push(1 + (label - (big_n - j)));
            } else {
                targets.push(label - i + 1);
            }
        }
        let outcome = if red_hit && top_hit {
            LineageOutcome::Cemetery
        } else {
            targets.sort_unstable();
            targets.dedup();
            let new = targets.len() as u64;
            match new as i64 - n as i64 {
                1 => LineageOutcome::Up,
                0 => LineageOutcome::Stay,
                -1 => LineageOutcome::Down,
                d => LineageOutcome::Merge((1 - d) as u32),
            }
        };
        *counts.entry(outcome).or_default() += 1;
    }
    let mut dist = TransitionDistribution::<Rational>::empty(n);
    let denom = Rational::from_u64(total);
    for (outcome, c) in counts {
        dist.add(outcome, Rational::from_u64(c) / denom.clone());
    }
    Ok(dist)
}

/// Fast sampler for the jump law in floating point, used by the backward
/// passes. Most events hit no lineage; that case costs `O(n)`.
#[derive(Debug, Default, Clone)]
pub struct JumpSampler;

impl JumpSampler {
    /// Sample an outcome from `u ∈ [0, 1)`. Preconditions as for
    /// [`transition_distribution`]; they are checked only in debug builds.
    pub fn sample(&self, i: u64, j: u64, n: u64, big_n: u64, u: f64) -> LineageOutcome {
        debug_assert!(n <= big_n && i + 2 * j <= big_n);
        if n == 0 || (i + j == 0) {
            return LineageOutcome::Stay;
        }
        let rest = big_n - i - 2 * j;
        let p0: f64 = uncoloured_ratio(rest, n, big_n, n);
        if u < p0 {
            return LineageOutcome::Stay;
        }
        let mut acc = p0;
        let mut last = LineageOutcome::Stay;
        let mut found = None;
        for_each_triple::<f64>(i, j, n, big_n, |b, r, m, w| {
            if found.is_some() || (b, r, m) == (0, 0, 0) || w <= 0.0 {
                return;
            }
            acc += w;
            last = LineageOutcome::from_hits(b, r, m);
            if u < acc {
                found = Some(last);
            }
        });
        found.unwrap_or(last)
    }
}

/// `P(b = r = m = 0)`: probability that the event touches no lineage.
pub fn untouched_probability<W: Weight>(i: u64, j: u64, n: u64, big_n: u64) -> W {
    if n == 0 {
        return W::one();
    }
    uncoloured_ratio(big_n - i - 2 * j, n, big_n, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weight::parse_rational;
    use num_traits::{One, Zero};

    fn is_exact_one(x: &Rational) -> bool {
        x.is_one()
    }

    fn is_exact_zero(x: &Rational) -> bool {
        x.is_zero()
    }

    fn q(text: &str) -> Rational {
        parse_rational(text).unwrap()
    }

    #[test]
    fn six_label_example() {
        let d = transition_distribution::<Rational>(2, 1, 2, 6).unwrap();
        assert_eq!(d.up, q("2/15"));
        assert_eq!(d.down, q("1/15"));
        assert_eq!(d.cemetery, q("1/15"));
        assert!(is_exact_one(&d.total()));
        assert_eq!(d, enumerate_by_subsets(2, 1, 2, 6).unwrap());
    }

    #[test]
    fn closed_form_example() {
        assert_eq!(p_plus::<Rational>(2, 1, 2, 6).unwrap(), q("2/15"));
        for (i, j, big_n) in [(0, 0, 5), (3, 1, 7), (2, 2, 9)] {
            assert!(is_exact_zero(&p_minus::<Rational>(i, j, 1, big_n).unwrap()));
        }
        assert!(is_exact_zero(&p_hat_plus::<Rational>(3, 0, 4, 8).unwrap()));
    }

    #[test]
    fn no_red_labels_no_branching() {
        let d = transition_distribution::<Rational>(3, 0, 4, 9).unwrap();
        assert!(is_exact_zero(&d.up) && is_exact_zero(&d.cemetery));
    }

    #[test]
    fn zero_lineages_stay() {
        let d = transition_distribution::<Rational>(2, 1, 0, 6).unwrap();
        assert!(is_exact_one(&d.stay));
    }

    #[test]
    fn geometry_errors() {
        assert!(matches!(transition_distribution::<f64>(3, 2, 1, 6), Err(Error::GeometryViolation { .. })));
        assert!(matches!(p_plus::<f64>(1, 1, 7, 6), Err(Error::SampleExceedsPopulation { .. })));
    }

    #[test]
    fn sampler_matches_law() {
        let d = transition_distribution::<f64>(3, 2, 4, 11).unwrap();
        let sampler = JumpSampler;
        let steps = 200_000;
        let mut counts: BTreeMap<LineageOutcome, u64> = BTreeMap::new();
        for s in 0..steps {
            let u = (s as f64 + 0.5) / steps as f64;
            *counts.entry(sampler.sample(3, 2, 4, 11, u)).or_default() += 1;
        }
        for (outcome, p) in d.outcomes() {
            let freq = *counts.get(&outcome).unwrap_or(&0) as f64 / steps as f64;
            assert!((freq - p).abs() < 1e-4, "{outcome:?}: {freq} vs {p}");
        }
    }
}
