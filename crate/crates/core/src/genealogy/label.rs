//! Ulam–Harris labels and labelled two-type populations.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::forward::PopulationState;
use crate::types::Type;

/// A finite nonempty tuple of positive integers. The parent of `(u₁,…,u_m)`
/// is `(u₁,…,u_{m−1})` and its `k`-th child is `(u₁,…,u_m,k)`.
///
/// The derived order is lexicographic, so the descendants of `u` form a
/// contiguous range starting at `u` in any sorted collection.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndividualLabel(Vec<u32>);

impl IndividualLabel {
    pub fn new(parts: Vec<u32>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidLabel("a label needs at least one component".into()));
        }
        if parts.contains(&0) {
            return Err(Error::InvalidLabel(format!("components must be positive, got {parts:?}")));
        }
        Ok(Self(parts))
    }

    /// The one-component label `(k)`.
    pub fn root(k: u32) -> Self {
        assert!(k > 0, "label components are positive");
        Self(vec![k])
    }

    pub fn parts(&self) -> &[u32] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn parent(&self) -> Option<Self> {
        (self.0.len() > 1).then(|| Self(self.0[..self.0.len() - 1].to_vec()))
    }

    pub fn child(&self, k: u32) -> Self {
        assert!(k > 0, "label components are positive");
        let mut parts = self.0.clone();
        parts.push(k);
        Self(parts)
    }

    /// `self ⪯ other`: `self` is a prefix of `other` (every label is its own
    /// ancestor).
    pub fn is_ancestor_of(&self, other: &Self) -> bool {
        other.0.starts_with(&self.0)
    }

    /// Neither label is an ancestor of the other.
    pub fn is_unrelated_to(&self, other: &Self) -> bool {
        !self.is_ancestor_of(other) && !other.is_ancestor_of(self)
    }
}

impl fmt::Display for IndividualLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (idx, part) in self.0.iter().enumerate() {
            if idx > 0 {
                f.write_str(".")?;
            }
            write!(f, "{part}")?;
        }
        Ok(())
    }
}

impl FromStr for IndividualLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts = s
            .split('.')
            .map(|p| p.trim().parse::<u32>().map_err(|_| Error::InvalidLabel(format!("cannot parse {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(parts)
    }
}

impl Serialize for IndividualLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for IndividualLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// A finite population with each label carrying a type.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPopulation {
    pub plus: BTreeSet<IndividualLabel>,
    pub minus: BTreeSet<IndividualLabel>,
}

impl LabeledPopulation {
    pub fn new(
        plus: impl IntoIterator<Item = IndividualLabel>,
        minus: impl IntoIterator<Item = IndividualLabel>,
    ) -> Result<Self> {
        let pop = Self { plus: plus.into_iter().collect(), minus: minus.into_iter().collect() };
        if let Some(shared) = pop.plus.intersection(&pop.minus).next() {
            return Err(Error::InvalidLabel(format!("label {shared} carries both types")));
        }
        Ok(pop)
    }

    /// Founders `(1), …, (n⁺)` of type `+` followed by `(n⁺+1), …` of type `−`.
    pub fn founders(n_plus: u32, n_minus: u32) -> Self {
        Self {
            plus: (1..=n_plus).map(IndividualLabel::root).collect(),
            minus: (n_plus + 1..=n_plus + n_minus).map(IndividualLabel::root).collect(),
        }
    }

    pub fn set(&self, ty: Type) -> &BTreeSet<IndividualLabel> {
        match ty {
            Type::Plus => &self.plus,
            Type::Minus => &self.minus,
        }
    }

    pub fn len(&self) -> usize {
        self.plus.len() + self.minus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn counts(&self) -> PopulationState {
        PopulationState::new(self.plus.len() as u64, self.minus.len() as u64)
    }

    pub fn type_of(&self, label: &IndividualLabel) -> Option<Type> {
        if self.plus.contains(label) {
            Some(Type::Plus)
        } else if self.minus.contains(label) {
            Some(Type::Minus)
        } else {
            None
        }
    }

    pub fn contains(&self, label: &IndividualLabel) -> bool {
        self.type_of(label).is_some()
    }

    /// All labels with their types, in label order.
    pub fn members(&self) -> Vec<(IndividualLabel, Type)> {
        let mut all: Vec<_> = self
            .plus
            .iter()
            .map(|l| (l.clone(), Type::Plus))
            .chain(self.minus.iter().map(|l| (l.clone(), Type::Minus)))
            .collect();
        all.sort();
        all
    }

    /// `D^u`, the number of members descending from `u` (including `u`).
    /// Walks only the contiguous range of descendants in each set.
    pub fn descendant_count(&self, u: &IndividualLabel) -> usize {
        let count =
            |set: &BTreeSet<IndividualLabel>| set.range(u.clone()..).take_while(|v| u.is_ancestor_of(v)).count();
        count(&self.plus) + count(&self.minus)
    }

    /// No member is a strict ancestor of another.
    pub fn is_antichain(&self) -> bool {
        let all = self.members();
        // In sorted order an ancestor immediately precedes some descendant,
        // so checking neighbours suffices.
        all.windows(2).all(|w| !w[0].0.is_ancestor_of(&w[1].0))
    }
}

/// `F^u = D^u / N`, with value 0 on the empty population.
pub fn descendant_fraction(pop: &LabeledPopulation, u: &IndividualLabel) -> f64 {
    if pop.is_empty() {
        0.0
    } else {
        pop.descendant_count(u) as f64 / pop.len() as f64
    }
}
