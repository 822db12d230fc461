use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::weight::{format_rational, rational_from_f64, rational_to_f64, Rational};

/// A finite measure on offspring counts with exact rational masses.
///
/// Float inputs are converted to the rational they denote exactly, so all
/// identities checked on laws (marginals, means) hold without rounding.
/// A float view of the masses is cached for samplers.
#[derive(Clone, PartialEq)]
pub struct ReproductionLaw {
    atoms: BTreeMap<u32, Rational>,
    approx: Vec<(u32, f64)>,
}

impl ReproductionLaw {
    /// Build a law from `(offspring count, mass)` pairs. Repeated counts are
    /// summed, zero masses dropped. The total mass must be positive.
    pub fn new(atoms: impl IntoIterator<Item = (u32, Rational)>) -> Result<Self> {
        let law = Self::from_atoms_allow_empty(atoms)?;
        if law.atoms.is_empty() {
            return Err(Error::InvalidLaw("total mass must be positive".into()));
        }
        Ok(law)
    }

    pub fn from_f64(atoms: impl IntoIterator<Item = (u32, f64)>) -> Result<Self> {
        let mut exact = Vec::new();
        for (i, m) in atoms {
            let q = rational_from_f64(m).ok_or_else(|| Error::InvalidLaw(format!("mass at {i} is not finite")))?;
            exact.push((i, q));
        }
        Self::new(exact)
    }

    /// Like [`ReproductionLaw::new`] but accepts the zero measure. Used for
    /// restrictions of a law to positive offspring counts, which may vanish.
    pub fn from_atoms_allow_empty(atoms: impl IntoIterator<Item = (u32, Rational)>) -> Result<Self> {
        let mut map: BTreeMap<u32, Rational> = BTreeMap::new();
        for (i, m) in atoms {
            if m.is_negative() {
                return Err(Error::InvalidLaw(format!("negative mass {m} at offspring count {i}")));
            }
            *map.entry(i).or_insert_with(Rational::zero) += m;
        }
        map.retain(|_, m| !m.is_zero());
        Ok(Self::from_map(map))
    }

    fn from_map(atoms: BTreeMap<u32, Rational>) -> Self {
        let approx = atoms.iter().map(|(&i, m)| (i, rational_to_f64(m))).collect();
        Self { atoms, approx }
    }

    pub fn zero() -> Self {
        Self::from_map(BTreeMap::new())
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mass(&self, i: u32) -> Rational {
        self.atoms.get(&i).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn mass_f64(&self, i: u32) -> f64 {
        self.approx.iter().find(|(k, _)| *k == i).map_or(0.0, |(_, m)| *m)
    }

    /// Atoms in increasing offspring count.
    pub fn atoms(&self) -> impl Iterator<Item = (u32, &Rational)> + '_ {
        self.atoms.iter().map(|(&i, m)| (i, m))
    }

    pub fn atoms_f64(&self) -> &[(u32, f64)] {
        &self.approx
    }

    pub fn max_offspring(&self) -> Option<u32> {
        self.atoms.keys().next_back().copied()
    }

    pub fn total_mass(&self) -> Rational {
        self.atoms.values().fold(Rational::zero(), |acc, m| acc + m)
    }

    /// `Σ (i − 1) μ(i)`: the net growth rate per individual.
    pub fn mean_rate(&self) -> Rational {
        self.central_moment(1)
    }

    pub fn mean_rate_f64(&self) -> f64 {
        rational_to_f64(&self.mean_rate())
    }

    /// `Σ (i − 1)^ℓ μ(i)`, the moments about one offspring.
    pub fn central_moment(&self, order: u32) -> Rational {
        self.atoms.iter().fold(Rational::zero(), |acc, (&i, m)| {
            let centered = Rational::from_integer((i as i64 - 1).into());
            acc + num_traits::pow(centered, order as usize) * m
        })
    }

    /// The second moment about one, written 𝔳 in the model's notation.
    pub fn second_moment(&self) -> Rational {
        self.central_moment(2)
    }

    /// Restriction to positive offspring counts (possibly the zero measure).
    pub fn restrict_positive(&self) -> Self {
        Self::from_map(self.atoms.iter().filter(|(&i, _)| i >= 1).map(|(&i, m)| (i, m.clone())).collect())
    }

    pub fn with_added_mass(&self, i: u32, extra: &Rational) -> Result<Self> {
        let mut map = self.atoms.clone();
        *map.entry(i).or_insert_with(Rational::zero) += extra;
        if map.values().any(|m| m.is_negative()) {
            return Err(Error::InvalidLaw(format!("adding {extra} at {i} makes a mass negative")));
        }
        map.retain(|_, m| !m.is_zero());
        Ok(Self::from_map(map))
    }

    /// Mass of `[i, ∞)`.
    pub fn tail(&self, i: u32) -> Rational {
        self.atoms.range(i..).fold(Rational::zero(), |acc, (_, m)| acc + m)
    }

    /// Pairs `(count, "p/q")` for serialization.
    pub fn to_string_atoms(&self) -> Vec<(u32, String)> {
        self.atoms.iter().map(|(&i, m)| (i, format_rational(m))).collect()
    }
}

impl fmt::Debug for ReproductionLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut map = f.debug_map();
        for (i, m) in &self.atoms {
            map.entry(i, &format_rational(m));
        }
        map.finish()
    }
}

/// Outcome of the two ordering checks needed by the genealogy construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderingReport {
    /// First `i ≥ 1` with `μ⁻([i,∞)) > μ⁺([i,∞))`, if any.
    pub tail_violation: Option<u32>,
    /// Whether `μ⁺(0) ≤ μ⁻(0)` fails.
    pub death_violation: bool,
}

impl OrderingReport {
    pub fn tail_holds(&self) -> bool {
        self.tail_violation.is_none()
    }

    pub fn death_holds(&self) -> bool {
        !self.death_violation
    }

    pub fn holds(&self) -> bool {
        self.tail_holds() && self.death_holds()
    }
}

/// Check that the plus law dominates the minus law in its tails on `i ≥ 1`
/// and has the smaller death mass.
pub fn check_orderings(minus: &ReproductionLaw, plus: &ReproductionLaw) -> OrderingReport {
    let top = minus.max_offspring().unwrap_or(0).max(plus.max_offspring().unwrap_or(0));
    let tail_violation = (1..=top).find(|&i| minus.tail(i) > plus.tail(i));
    OrderingReport { tail_violation, death_violation: plus.mass(0) > minus.mass(0) }
}

/// Pad the lighter of two laws with mass at one offspring so both carry the
/// same total. Adding at `i = 1` changes neither `mean_rate` nor any tail
/// `[i,∞)` with `i ≥ 2`.
pub fn equalize_mass(minus: &ReproductionLaw, plus: &ReproductionLaw) -> (ReproductionLaw, ReproductionLaw) {
    let gap = plus.total_mass() - minus.total_mass();
    if gap.is_zero() {
        return (minus.clone(), plus.clone());
    }
    if gap.is_positive() {
        (minus.with_added_mass(1, &gap).expect("positive mass"), plus.clone())
    } else {
        (minus.clone(), plus.with_added_mass(1, &(-gap)).expect("positive mass"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weight::parse_rational;

    fn q(text: &str) -> Rational {
        parse_rational(text).unwrap()
    }

    fn law(pairs: &[(u32, &str)]) -> ReproductionLaw {
        ReproductionLaw::new(pairs.iter().map(|&(i, m)| (i, q(m)))).unwrap()
    }

    #[test]
    fn mean_rate_examples() {
        assert_eq!(law(&[(2, "1")]).mean_rate(), q("1"));
        assert_eq!(law(&[(2, "11/10")]).mean_rate(), q("1.1"));
        assert_eq!(law(&[(0, "1/2"), (2, "1/2")]).mean_rate(), q("0"));
    }

    #[test]
    fn central_moment_examples() {
        assert_eq!(law(&[(2, "1")]).central_moment(2), q("1"));
        assert_eq!(law(&[(0, "1")]).central_moment(2), q("1"));
        assert_eq!(law(&[(0, "1/2"), (3, "1/2")]).central_moment(3), q("3.5"));
    }

    #[test]
    fn rejects_invalid_masses() {
        assert!(ReproductionLaw::new([(0, q("-1"))]).is_err());
        assert!(ReproductionLaw::new([(0, q("0"))]).is_err());
        assert!(ReproductionLaw::from_f64([(1, f64::INFINITY)]).is_err());
        assert!(ReproductionLaw::from_atoms_allow_empty([]).unwrap().is_empty());
    }

    #[test]
    fn ordering_examples() {
        let moran = check_orderings(&law(&[(1, "1/10"), (2, "1")]), &law(&[(2, "11/10")]));
        assert!(moran.holds());
        assert!(check_orderings(&law(&[(2, "1")]), &law(&[(2, "1")])).holds());
        let bad = check_orderings(&law(&[(3, "1")]), &law(&[(2, "1")]));
        assert_eq!(bad.tail_violation, Some(3));
        assert!(bad.death_holds());
        let deaths = check_orderings(&law(&[(0, "1/10"), (2, "1")]), &law(&[(0, "1/5"), (2, "1")]));
        assert!(deaths.death_violation);
    }

    #[test]
    fn equalize_examples() {
        let (m, p) = equalize_mass(&law(&[(2, "1")]), &law(&[(2, "1.1")]));
        assert_eq!(m, law(&[(1, "0.1"), (2, "1")]));
        assert_eq!(p, law(&[(2, "1.1")]));

        let same = law(&[(2, "1"), (3, "1/3")]);
        let (m, p) = equalize_mass(&same, &same);
        assert_eq!((m, p), (same.clone(), same));

        let (m, p) = equalize_mass(&law(&[(1, "0.3"), (2, "1")]), &law(&[(2, "1")]));
        assert_eq!(m, law(&[(1, "0.3"), (2, "1")]));
        assert_eq!(p, law(&[(1, "0.3"), (2, "1")]));
    }
}
