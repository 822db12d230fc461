use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, Zero};

use super::law::{check_orderings, equalize_mass, ReproductionLaw};
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::weight::{format_rational, rational_to_f64, Rational};

/// A finite measure on offspring pairs `(i, j)`: `i` children shared by both
/// types and `j` extra children produced only by a type-`+` parent.
#[derive(Clone, PartialEq)]
pub struct CouplingMeasure {
    atoms: BTreeMap<(u32, u32), Rational>,
    approx: Vec<((u32, u32), f64)>,
    total: Rational,
}

impl CouplingMeasure {
    /// Build from raw atoms, enforcing nonnegativity, positive total mass and
    /// `ν(0, j) = 0` for `j > 1`.
    pub fn from_atoms(atoms: impl IntoIterator<Item = ((u32, u32), Rational)>) -> Result<Self> {
        let mut map: BTreeMap<(u32, u32), Rational> = BTreeMap::new();
        for (key, m) in atoms {
            if m.is_negative() {
                return Err(Error::InvalidLaw(format!("negative coupling mass at {key:?}")));
            }
            *map.entry(key).or_insert_with(Rational::zero) += m;
        }
        map.retain(|_, m| !m.is_zero());
        if let Some((&(i, j), _)) = map.iter().find(|(&(i, j), _)| i == 0 && j > 1) {
            return Err(Error::InvalidLaw(format!("coupling mass at ({i}, {j}) is not allowed")));
        }
        let total = map.values().fold(Rational::zero(), |acc, m| acc + m);
        if total.is_zero() {
            return Err(Error::InvalidLaw("coupling measure has zero total mass".into()));
        }
        let approx = map.iter().map(|(&k, m)| (k, rational_to_f64(m))).collect();
        Ok(Self { atoms: map, approx, total })
    }

    pub fn mass(&self, i: u32, j: u32) -> Rational {
        self.atoms.get(&(i, j)).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn atoms(&self) -> impl Iterator<Item = ((u32, u32), &Rational)> + '_ {
        self.atoms.iter().map(|(&k, m)| (k, m))
    }

    pub fn atoms_f64(&self) -> &[((u32, u32), f64)] {
        &self.approx
    }

    pub fn total_mass(&self) -> &Rational {
        &self.total
    }

    pub fn total_mass_f64(&self) -> f64 {
        rational_to_f64(&self.total)
    }

    /// `Σ_{i,j} f(i, j) ν(i, j)` in exact arithmetic.
    pub fn integrate(&self, f: impl Fn(u32, u32) -> i64) -> Rational {
        self.atoms.iter().fold(Rational::zero(), |acc, (&(i, j), m)| acc + Rational::from_integer(f(i, j).into()) * m)
    }

    /// Largest `i + j` in the support.
    pub fn max_event_size(&self) -> u32 {
        self.atoms.keys().map(|&(i, j)| i + j).max().unwrap_or(0)
    }

    /// First marginal on `i ≥ 1`.
    pub fn minus_marginal(&self) -> ReproductionLaw {
        ReproductionLaw::from_atoms_allow_empty(
            self.atoms.iter().filter(|(&(i, _), _)| i >= 1).map(|(&(i, _), m)| (i, m.clone())),
        )
        .expect("masses are nonnegative")
    }

    /// Pushforward under `(i, j) ↦ i + j`, restricted to `i ≥ 1`.
    pub fn plus_marginal(&self) -> ReproductionLaw {
        ReproductionLaw::from_atoms_allow_empty(
            self.atoms.iter().filter(|(&(i, _), _)| i >= 1).map(|(&(i, j), m)| (i + j, m.clone())),
        )
        .expect("masses are nonnegative")
    }

    /// `Σ j ν(i, j)`, the selective surplus per event.
    pub fn selective_mass(&self) -> Rational {
        self.integrate(|_, j| j as i64)
    }
}

impl fmt::Debug for CouplingMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut map = f.debug_map();
        for (k, m) in &self.atoms {
            map.entry(k, &format_rational(m));
        }
        map.finish()
    }
}

/// `Σ j ν(i, j)`; equals `mean_rate(μ⁺) − mean_rate(μ⁻)` for any coupling
/// built by [`build_coupling`].
pub fn coupling_selective_mass(nu: &CouplingMeasure) -> Rational {
    nu.selective_mass()
}

/// Comonotone coupling of two laws on `ℕ` with equal total mass: atoms
/// `(y⁻, y⁺ − y⁻)` obtained by matching quantiles.
///
/// Fails if some matched pair has `y⁺ < y⁻`, which cannot happen when the
/// plus law dominates in its tails.
pub fn quantile_coupling(minus: &ReproductionLaw, plus: &ReproductionLaw) -> Result<BTreeMap<(u32, u32), Rational>> {
    if minus.total_mass() != plus.total_mass() {
        return Err(Error::InvalidLaw("quantile coupling needs equal total masses".into()));
    }
    let mut out: BTreeMap<(u32, u32), Rational> = BTreeMap::new();
    let mut lhs = minus.atoms().map(|(i, m)| (i, m.clone())).collect::<Vec<_>>().into_iter();
    let mut rhs = plus.atoms().map(|(i, m)| (i, m.clone())).collect::<Vec<_>>().into_iter();
    let mut a = lhs.next();
    let mut b = rhs.next();
    while let (Some((ya, ma)), Some((yb, mb))) = (a.clone(), b.clone()) {
        if yb < ya {
            return Err(Error::OrderingViolation(format!(
                "quantile coupling pairs {ya} minus-offspring with {yb} plus-offspring"
            )));
        }
        let take = if ma < mb { ma.clone() } else { mb.clone() };
        *out.entry((ya, yb - ya)).or_insert_with(Rational::zero) += &take;
        let ra = ma - &take;
        let rb = mb - &take;
        a = if ra.is_zero() { lhs.next() } else { Some((ya, ra)) };
        b = if rb.is_zero() { rhs.next() } else { Some((yb, rb)) };
    }
    Ok(out)
}

/// Build the event measure `ν_K` driving the genealogy construction:
/// the quantile coupling of the mass-equalized restrictions `ν̂_K^±` of the
/// offspring laws to `ℕ`, plus the two death atoms
/// `μ⁺(0) δ_(0,0) + (μ⁻(0) − μ⁺(0)) δ_(0,1)`.
///
/// The orderings are checked on the equalized laws. Equalizing only moves
/// mass onto one offspring, which leaves every tail `[i, ∞)` with `i ≥ 2`
/// unchanged, so this is the same condition as on the raw laws for `i ≥ 2`.
pub fn build_coupling(params: &ModelParams) -> Result<CouplingMeasure> {
    coupling_for_laws(params.minus_law(), params.plus_law())
}

pub fn coupling_for_laws(minus: &ReproductionLaw, plus: &ReproductionLaw) -> Result<CouplingMeasure> {
    let (hat_minus, hat_plus) = equalize_mass(&minus.restrict_positive(), &plus.restrict_positive());
    let report = check_orderings(&hat_minus, &hat_plus);
    if let Some(i) = report.tail_violation {
        return Err(Error::OrderingViolation(format!("tail ordering fails at i = {i}")));
    }
    let death_plus = plus.mass(0);
    let death_minus = minus.mass(0);
    if death_plus > death_minus {
        return Err(Error::OrderingViolation(format!(
            "plus death mass {} exceeds minus death mass {}",
            format_rational(&death_plus),
            format_rational(&death_minus)
        )));
    }
    let mut atoms = quantile_coupling(&hat_minus, &hat_plus)?;
    let extra = &death_minus - &death_plus;
    atoms.insert((0, 0), death_plus);
    atoms.insert((0, 1), extra);
    CouplingMeasure::from_atoms(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::family::LawFamily;
    use crate::weight::parse_rational;

    fn q(text: &str) -> Rational {
        parse_rational(text).unwrap()
    }

    fn law(pairs: &[(u32, &str)]) -> ReproductionLaw {
        ReproductionLaw::new(pairs.iter().map(|&(i, m)| (i, q(m)))).unwrap()
    }

    #[test]
    fn moran_coupling() {
        let params = ModelParams::from_family(&LawFamily::moran(q("1")), 10, 0.0, 0.0).unwrap();
        let nu = build_coupling(&params).unwrap();
        let expected = CouplingMeasure::from_atoms([((2, 0), q("1")), ((1, 1), q("1/10"))]).unwrap();
        assert_eq!(nu, expected);
        assert_eq!(coupling_selective_mass(&nu), q("1/10"));
    }

    #[test]
    fn identical_laws_give_diagonal() {
        let mu = law(&[(1, "1/3"), (2, "1"), (4, "1/7")]);
        let nu = coupling_for_laws(&mu, &mu).unwrap();
        for (i, m) in mu.atoms() {
            assert_eq!(nu.mass(i, 0), *m);
        }
        assert!(nu.atoms().all(|((_, j), _)| j == 0));
        assert_eq!(coupling_selective_mass(&nu), q("0"));
    }

    #[test]
    fn death_atoms() {
        let minus = law(&[(0, "1/2"), (2, "1")]);
        let plus = law(&[(0, "1/5"), (2, "13/10")]);
        let nu = coupling_for_laws(&minus, &plus).unwrap();
        assert_eq!(nu.mass(0, 0), q("1/5"));
        assert_eq!(nu.mass(0, 1), q("3/10"));
        assert_eq!(nu.selective_mass(), plus.mean_rate() - minus.mean_rate());
    }

    #[test]
    fn single_selective_atom() {
        let nu = CouplingMeasure::from_atoms([((0, 1), q("0.3")), ((2, 0), q("1"))]).unwrap();
        assert_eq!(coupling_selective_mass(&nu), q("0.3"));
    }

    #[test]
    fn ordering_violations_are_errors() {
        let err = coupling_for_laws(&law(&[(3, "1")]), &law(&[(2, "1")])).unwrap_err();
        assert!(matches!(err, Error::OrderingViolation(_)));
        let err = coupling_for_laws(&law(&[(2, "1")]), &law(&[(0, "1/10"), (2, "1")])).unwrap_err();
        assert!(matches!(err, Error::OrderingViolation(_)));
    }

    #[test]
    fn rejects_wide_death_atoms() {
        assert!(CouplingMeasure::from_atoms([((0, 2), q("1"))]).is_err());
    }
}
