use lbp_core::measures::{
    build_coupling, central_moment, check_orderings, coupling_for_laws, mean_rate, LawFamily, ModelParams,
    ReproductionLaw,
};
use lbp_core::weight::{rational_to_f64, Rational};
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

fn ratio(p: u64, q: u64) -> Rational {
    Rational::new(p.into(), q.into())
}

/// A law on `{0, …, 5}` with small rational masses, and a second law
/// obtained by moving part of each atom's mass upward. Moving mass up
/// makes every tail heavier and cannot increase the mass at 0, so the pair
/// satisfies both orderings.
fn ordered_pair() -> impl Strategy<Value = (ReproductionLaw, ReproductionLaw)> {
    proptest::collection::vec((0u32..6, 1u64..6, 0u64..6, 1u32..4), 1..5).prop_map(|atoms| {
        let mut minus = Vec::new();
        let mut plus = Vec::new();
        for (i, mass, moved, shift) in atoms {
            let total = ratio(mass, 4);
            let up = ratio(mass * moved.min(5), 4 * 5);
            minus.push((i, total.clone()));
            plus.push((i, &total - &up));
            plus.push((i + shift, up));
        }
        (ReproductionLaw::new(minus).unwrap(), ReproductionLaw::new(plus).unwrap())
    })
}

fn direct_moment(law: &ReproductionLaw, order: i32) -> f64 {
    law.atoms_f64().iter().map(|&(i, m)| (i as f64 - 1.0).powi(order) * m).sum()
}

fn moran(k: u64) -> ModelParams {
    ModelParams::from_family(&LawFamily::moran(Rational::one()), k, 0.0, 0.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moments_match_direct_summation((law, _) in ordered_pair(), order in 2u32..5) {
        let oracle_mean = direct_moment(&law, 1);
        let got = rational_to_f64(&mean_rate(&law));
        prop_assert!((got - oracle_mean).abs() <= 1e-12 * oracle_mean.abs().max(1.0));
        let oracle = direct_moment(&law, order as i32);
        let got = rational_to_f64(&central_moment(&law, order));
        prop_assert!((got - oracle).abs() <= 1e-12 * oracle.abs().max(1.0));
    }

    #[test]
    fn coupling_marginals_are_exact((minus, plus) in ordered_pair()) {
        prop_assert!(check_orderings(&minus, &plus).holds());
        let nu = coupling_for_laws(&minus, &plus).unwrap();
        let hat_minus = minus.restrict_positive();
        let hat_plus = plus.restrict_positive();
        // Equalizing puts the mass difference on the atom 1 of the lighter law.
        let gap = hat_plus.total_mass() - hat_minus.total_mass();
        let pad = |i: u32, lighter: bool| if i == 1 && lighter { gap.clone().abs() } else { Rational::zero() };
        let minus_lighter = gap > Rational::zero();
        let top = nu.max_event_size() + 1;
        for i in 1..=top {
            let first: Rational = nu.atoms().filter(|((a, _), _)| *a == i).map(|(_, m)| m.clone()).sum();
            prop_assert_eq!(first, hat_minus.mass(i) + pad(i, minus_lighter));
            let pushed: Rational =
                nu.atoms().filter(|((a, b), _)| *a >= 1 && a + b == i).map(|(_, m)| m.clone()).sum();
            prop_assert_eq!(pushed, hat_plus.mass(i) + pad(i, !minus_lighter && !gap.is_zero()));
        }
        prop_assert_eq!(nu.mass(0, 0), plus.mass(0));
        prop_assert_eq!(nu.mass(0, 1), minus.mass(0) - plus.mass(0));
        for j in 2..=top {
            prop_assert!(nu.mass(0, j).is_zero());
        }
        // Selective mass equals the difference of the mean rates.
        prop_assert_eq!(nu.selective_mass(), mean_rate(&plus) - mean_rate(&minus));
        // Σ i(i−1)ν = 𝔳⁻ + 𝔪⁻ for the minus law.
        let falling: Rational = nu
            .atoms()
            .map(|((i, _), m)| Rational::from_integer((i as i64 * (i as i64 - 1)).into()) * m)
            .sum();
        prop_assert_eq!(falling, central_moment(&minus, 2) + mean_rate(&minus));
    }

    #[test]
    fn quantile_support_is_comonotone((minus, plus) in ordered_pair()) {
        let nu = coupling_for_laws(&minus, &plus).unwrap();
        let mut support: Vec<(u32, u32)> = nu.atoms().filter(|((i, _), _)| *i >= 1).map(|(a, _)| a).collect();
        support.sort_unstable();
        for w in support.windows(2) {
            prop_assert!(w[0].0 + w[0].1 <= w[1].0 + w[1].1, "support {:?}", support);
        }
    }
}

#[test]
fn moran_coupling_marginals_and_death_atoms() {
    for k in [1, 2, 10, 1000] {
        let params = moran(k);
        let nu = build_coupling(&params).unwrap();
        let s_over_k = ratio(1, k);
        assert_eq!(nu.mass(2, 0), Rational::one());
        assert_eq!(nu.mass(1, 1), s_over_k);
        assert!(nu.mass(0, 0).is_zero() && nu.mass(0, 1).is_zero());
        assert_eq!(nu.selective_mass(), s_over_k);
        assert_eq!(nu.plus_marginal().mass(2), Rational::one() + &s_over_k);
    }
}

#[test]
fn selective_moments_vanish_along_k() {
    let poisson = LawFamily::poisson(Rational::one(), 2.0, 2.0, 12, Rational::one(), Rational::zero()).unwrap();
    for family in [LawFamily::moran(Rational::one()), poisson] {
        let sums: Vec<(f64, f64)> = [100u64, 1000, 10_000]
            .iter()
            .map(|&k| {
                let nu = build_coupling(&ModelParams::from_family(&family, k, 0.0, 0.0).unwrap()).unwrap();
                let jj: f64 = nu.atoms_f64().iter().map(|&((_, j), m)| (j * j) as f64 * m).sum();
                let ij: f64 = nu.atoms_f64().iter().map(|&((i, j), m)| (i * j) as f64 * m).sum();
                (jj, ij)
            })
            .collect();
        assert!(sums.windows(2).all(|w| w[1].0 < w[0].0 && w[1].1 < w[0].1), "{sums:?}");
    }
}
