//! Quick exact checks for CI: the lineage transition law against subset
//! enumeration, and the coupling marginals.

use lbp_core::asg::{enumerate_by_subsets, transition_distribution};
use lbp_core::measures::{build_coupling, coupling_for_laws, equalize_mass, LawFamily, ModelParams, ReproductionLaw};
use lbp_core::weight::{parse_rational, Rational};

const MAX_N: u64 = 9;

fn transition_law_matches_enumeration() -> Result<String, String> {
    let mut cases = 0;
    for big_n in 0..=MAX_N {
        for n in 0..=big_n {
            for j in 0..=big_n / 2 {
                for i in 0..=big_n - 2 * j {
                    let exact = transition_distribution::<Rational>(i, j, n, big_n).map_err(|e| e.to_string())?;
                    let brute = enumerate_by_subsets(i, j, n, big_n).map_err(|e| e.to_string())?;
                    if exact != brute {
                        return Err(format!("(i, j, n, N) = ({i}, {j}, {n}, {big_n})"));
                    }
                    cases += 1;
                }
            }
        }
    }
    Ok(format!("{cases} cases with N <= {MAX_N}"))
}

fn law(atoms: &[(u32, &str)]) -> ReproductionLaw {
    ReproductionLaw::new(atoms.iter().map(|&(i, m)| (i, parse_rational(m).expect("literal mass"))))
        .expect("literal law")
}

fn marginals_hold(minus: &ReproductionLaw, plus: &ReproductionLaw) -> Result<(), String> {
    let nu = coupling_for_laws(minus, plus).map_err(|e| e.to_string())?;
    let (hat_minus, hat_plus) = equalize_mass(&minus.restrict_positive(), &plus.restrict_positive());
    if nu.minus_marginal() != hat_minus || nu.plus_marginal() != hat_plus {
        return Err(format!("marginals differ for {minus:?} / {plus:?}"));
    }
    if nu.mass(0, 0) != plus.mass(0) || nu.mass(0, 1) != minus.mass(0) - plus.mass(0) {
        return Err(format!("death atoms differ for {minus:?} / {plus:?}"));
    }
    Ok(())
}

fn coupling_marginals() -> Result<String, String> {
    let family = LawFamily::moran(parse_rational("1").expect("literal"));
    for k in [1, 10, 1000] {
        let params = ModelParams::from_family(&family, k, 0.0, 0.0).map_err(|e| e.to_string())?;
        build_coupling(&params).map_err(|e| e.to_string())?;
        marginals_hold(params.minus_law(), params.plus_law())?;
    }
    let pairs = [
        (law(&[(0, "1/2"), (2, "1")]), law(&[(0, "1/4"), (2, "1"), (3, "1/4")])),
        (law(&[(1, "3/10"), (2, "1")]), law(&[(2, "1")])),
        (law(&[(0, "1"), (1, "1/3"), (4, "1/6")]), law(&[(0, "1/2"), (2, "1/2"), (5, "1/2")])),
    ];
    for (minus, plus) in &pairs {
        marginals_hold(minus, plus)?;
    }
    Ok(format!("Moran at 3 values of K and {} fixed pairs", pairs.len()))
}

/// Runs every check and prints one line each; true if all pass.
pub fn run() -> bool {
    let checks: [(&str, fn() -> Result<String, String>); 2] = [
        ("transition law vs subset enumeration", transition_law_matches_enumeration),
        ("coupling marginals and death atoms", coupling_marginals),
    ];
    let mut ok = true;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                ok = false;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    ok
}
