use lbp_core::asg::{
    auxiliary_process, enumerate_by_subsets, lineage_rate_sweep, p_hat_minus, p_hat_plus, p_minus, p_plus,
    search_monotonicity_threshold, simulate_graphical, transition_components, transition_distribution, Band,
    CheckpointedRun, GraphicalStepper,
};
use lbp_core::forward::{transition_rates, PopulationState};
use lbp_core::measures::{build_coupling, LawFamily, ModelParams, ReproductionLaw};
use lbp_core::rng::replicate_seed;
use lbp_core::stats::{chi_square_gof, ratio_estimate, summary_stats};
use lbp_core::weight::Rational;
use num_traits::One;

fn moran(k: u64) -> ModelParams {
    ModelParams::from_family(&LawFamily::moran(Rational::one()), k, 0.0, 0.0).unwrap()
}

/// Every `(N ≤ 12, n ≤ N, i + 2j ≤ N)`: the hit-count law equals the
/// label-tracing enumeration over all `C(N, n)` subsets, and the closed
/// forms equal the enumerated component masses, all exactly.
#[test]
fn exact_law_matches_subset_enumeration() {
    let mut cases = 0;
    for big_n in 0..=12u64 {
        for n in 0..=big_n {
            for j in 0..=big_n / 2 {
                for i in 0..=big_n - 2 * j {
                    let law = transition_distribution::<Rational>(i, j, n, big_n).unwrap();
                    assert_eq!(law.total(), Rational::one());
                    assert_eq!(
                        law,
                        enumerate_by_subsets(i, j, n, big_n).unwrap(),
                        "(i, j, n, N) = {:?}",
                        (i, j, n, big_n)
                    );
                    let parts = transition_components::<Rational>(i, j, n, big_n).unwrap();
                    assert_eq!(p_plus::<Rational>(i, j, n, big_n).unwrap(), parts.p_plus);
                    assert_eq!(p_hat_plus::<Rational>(i, j, n, big_n).unwrap(), parts.p_hat_plus);
                    assert_eq!(p_minus::<Rational>(i, j, n, big_n).unwrap(), parts.p_minus);
                    assert_eq!(p_hat_minus::<Rational>(i, j, n, big_n).unwrap(), parts.p_hat_minus);
                    cases += 1;
                }
            }
        }
    }
    assert!(cases > 1000);
}

/// The first change of the counts in the graphical construction has the
/// jump-chain law of the forward rate table.
#[test]
fn graphical_counts_step_like_the_forward_chain() {
    let k = 20;
    let params = moran(k);
    let nu = build_coupling(&params).unwrap();
    let start = PopulationState::new(9, 9);
    let rows: Vec<_> = transition_rates(&start, &params).into_iter().filter(|r| r.next != start).collect();
    let total: f64 = rows.iter().map(|r| r.rate).sum();
    let probabilities: Vec<f64> = rows.iter().map(|r| r.rate / total).collect();
    let mut observed = vec![0u64; rows.len()];
    for r in 0..20_000 {
        let mut stepper =
            GraphicalStepper::new(&params, &nu, Band::default_for(k), start, replicate_seed(6, r)).unwrap();
        let next = loop {
            stepper.next_event(f64::INFINITY).expect("events keep arriving");
            if stepper.state() != start {
                break stepper.state();
            }
        };
        let bin = rows.iter().position(|row| row.next == next).expect("a forward transition");
        observed[bin] += 1;
    }
    let result = chi_square_gof(&observed, &probabilities, 5.0).unwrap();
    assert!(result.p_value > 1e-3, "{result:?} {observed:?}");
}

/// With one-child events only, the size stays at `N` and accepted events
/// arrive at rate `K·N·‖ν‖` in rescaled time.
#[test]
fn accepted_events_have_the_thinned_intensity() {
    let one = ReproductionLaw::from_f64([(1, 1.0)]).unwrap();
    let (k, n, horizon) = (20u64, 15u64, 2.0);
    let params = ModelParams::custom(k, one.clone(), one, 0.0, 0.0, 0.0).unwrap();
    let nu = build_coupling(&params).unwrap();
    let counts: Vec<f64> = (0..100)
        .map(|r| {
            let (log, traj) =
                simulate_graphical(&params, &nu, horizon, PopulationState::new(8, 7), Band::default_for(k), r).unwrap();
            assert_eq!(traj.last().total(), n);
            log.events.iter().filter(|e| e.accepted).count() as f64
        })
        .collect();
    let s = summary_stats(&counts).unwrap();
    let oracle = (k * n) as f64 * horizon;
    assert!((s.mean - oracle).abs() < 3.0 * s.se, "{} ± {} vs {oracle}", s.mean, s.se);
}

#[test]
fn monotonicity_threshold_is_found_for_moran() {
    let family = LawFamily::moran(Rational::one());
    let report = search_monotonicity_threshold(&family, 3, &[100, 1000, 5000]).unwrap();
    let threshold = report.threshold.expect("a working K_L");
    assert!(report.checked.iter().filter(|c| c.0 >= threshold).all(|c| c.1));
}

#[test]
#[ignore = "about a minute of forward runs at K = 2000"]
fn lineage_rates_at_moderate_k() {
    let k = 2000;
    let params = moran(k);
    let nu = build_coupling(&params).unwrap();
    let (mut branches, mut lineage_time, mut coalescences, mut pair_time) = (vec![], vec![], vec![], vec![]);
    for r in 0..40 {
        let run =
            CheckpointedRun::generate(&params, &nu, 1.0, PopulationState::new(k / 2, k / 2), Band::default_for(k), r)
                .unwrap();
        let stats = lineage_rate_sweep(&run, 5, 4, r + 1000).unwrap();
        branches.push(stats.iter().map(|s| s.branches as f64).sum());
        lineage_time.push(stats.iter().map(|s| s.lineage_time).sum());
        coalescences.push(stats.iter().map(|s| s.coalescences as f64).sum());
        pair_time.push(stats.iter().map(|s| s.pair_time).sum());
    }
    let (up, _) = ratio_estimate(&branches, &lineage_time).unwrap();
    let (down, _) = ratio_estimate(&coalescences, &pair_time).unwrap();
    assert!((up - 1.0).abs() <= 0.15, "branch rate {up}");
    assert!((down - 2.0).abs() <= 0.15 * 2.0, "coalescence rate {down}");
}

#[test]
#[ignore = "several minutes of forward runs at K = 5000"]
fn auxiliary_decoupling_becomes_rarer() {
    let frequency = |k: u64| {
        let params = moran(k);
        let nu = build_coupling(&params).unwrap();
        let runs = 60;
        let hits = (0..runs)
            .filter(|&r| {
                let run = CheckpointedRun::generate(
                    &params,
                    &nu,
                    1.0,
                    PopulationState::new(k / 2, k / 2),
                    Band::default_for(k),
                    replicate_seed(k, r),
                )
                .unwrap();
                (0..4)
                    .filter(|&c| {
                        auxiliary_process(&run, 5, 10, k, replicate_seed(r, c)).unwrap().decoupled_before_sigma()
                    })
                    .count()
                    > 0
            })
            .count();
        hits as f64 / runs as f64
    };
    let (small, large) = (frequency(500), frequency(5000));
    assert!(large < small, "{small} vs {large}");
}
