use lbp_core::diffusion::{
    coupled_duals, dual_at_times, dual_pmf, duality_grid, gamma_projection, generator_duality_residual,
    katzenberger_flow, sde_at_times, DiffusionParams, DualityGrid, PlanePoint,
};
use lbp_core::rng::replicate_seed;
use lbp_core::stats::{chi_square_gof, summary_stats};
use proptest::prelude::*;

/// Constants satisfying the dual conditions: `𝔳⁺ ≥ 𝔳⁻`, `Δ ≥ 0`, `θ⁻ = 0`,
/// and a nonnegative diffusion coefficient.
fn dual_params() -> impl Strategy<Value = DiffusionParams> {
    (0.1f64..3.0, 0.1f64..2.0, 0.0f64..1.0, 0.0f64..2.0, 0.0f64..2.0, 0.0f64..2.0).prop_map(
        |(m, v_minus, spread, s_minus, extra, theta)| {
            let v_plus = v_minus + spread * (m + v_minus);
            let s_plus = s_minus + (v_plus - v_minus) + extra;
            DiffusionParams::new(m, s_plus, s_minus, v_plus, v_minus, theta, 0.0).unwrap()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generators_are_dual(p in dual_params(), w in 0.0f64..=1.0, n in 0u64..12) {
        let residual = generator_duality_residual(w, n, &p).unwrap();
        prop_assert!(residual.abs() <= 1e-10, "residual {residual}");
    }

    #[test]
    fn flow_fixes_the_line_and_converges_to_the_projection(
        x_plus in 0.01f64..3.0,
        x_minus in 0.01f64..3.0,
        m in 0.2f64..3.0,
    ) {
        let x = PlanePoint::new(x_plus, x_minus);
        let on_line = gamma_projection(&x).unwrap();
        prop_assert!(katzenberger_flow(&on_line, 5.0, m).unwrap().distance(&on_line) <= 1e-8);
        let limit = katzenberger_flow(&x, 20.0 / m, m).unwrap();
        prop_assert!(limit.distance(&on_line) <= 1e-6, "{limit:?} vs {on_line:?}");
    }
}

/// The total mass solves the logistic equation `r' = m(1 − r)r`, and the
/// direction `x⁺/x⁻` is constant.
#[test]
fn flow_matches_the_logistic_solution() {
    let m = 1.7;
    for (x_plus, x_minus) in [(0.05, 0.15), (1.0, 2.5), (0.3, 0.0)] {
        let x = PlanePoint::new(x_plus, x_minus);
        let r0 = x.total();
        for t in [0.1, 0.7, 2.0, 6.0] {
            let y = katzenberger_flow(&x, t, m).unwrap();
            let r = 1.0 / (1.0 + (1.0 / r0 - 1.0) * (-m * t).exp());
            assert!((y.total() - r).abs() < 1e-8, "t = {t}: {} vs {r}", y.total());
            assert!((y.x_plus * r0 - x_plus * y.total()).abs() < 1e-8);
        }
    }
}

/// Without selection or mutation the frequency is a martingale.
#[test]
fn neutral_frequency_is_a_martingale() {
    let p = DiffusionParams::moran(0.0, 0.0, 0.0).unwrap();
    let w0 = 0.3;
    let values: Vec<f64> =
        (0..100_000).map(|r| sde_at_times(w0, &p, &[1.0], 1e-3, replicate_seed(11, r)).unwrap()[0]).collect();
    let s = summary_stats(&values).unwrap();
    assert!((s.mean - w0).abs() < 3.0 * s.se, "{} ± {}", s.mean, s.se);
}

/// With only one-way mutation, `E W(t) = 1 − (1 − w₀)e^{−θ⁺t}`.
#[test]
fn mutation_pulls_the_mean_upward() {
    let theta = 0.8;
    let p = DiffusionParams::moran(0.0, theta, 0.0).unwrap();
    let w0 = 0.2;
    let times = [0.5, 1.0];
    let paths: Vec<Vec<f64>> =
        (0..40_000).map(|r| sde_at_times(w0, &p, &times, 1e-3, replicate_seed(12, r)).unwrap()).collect();
    for (ti, &t) in times.iter().enumerate() {
        let s = summary_stats(&paths.iter().map(|v| v[ti]).collect::<Vec<_>>()).unwrap();
        let oracle = 1.0 - (1.0 - w0) * (-theta * t).exp();
        assert!((s.mean - oracle).abs() < 3.5 * s.se, "t = {t}: {} ± {} vs {oracle}", s.mean, s.se);
    }
}

#[test]
fn coupled_duals_stay_ordered() {
    let p = DiffusionParams::moran(1.0, 0.5, 0.0).unwrap();
    for r in 0..2000 {
        let (low, high) = (r % 4, r % 4 + 1 + r % 3);
        let (a, b) = coupled_duals(low, high, &p, 1.5, replicate_seed(13, r)).unwrap();
        assert!(a <= b, "seed {r}: {a} > {b}");
    }
}

#[test]
fn dual_paths_follow_the_uniformized_law() {
    let p = DiffusionParams::new(1.0, 2.5, 0.5, 1.5, 1.0, 0.4, 0.0).unwrap();
    let (n0, t) = (3, 0.8);
    let n_max = 60;
    let pmf = dual_pmf(n0, &p, t, n_max).unwrap();
    assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    let mut observed = vec![0u64; pmf.len()];
    for r in 0..20_000 {
        let n = dual_at_times(n0, &p, &[t], replicate_seed(14, r)).unwrap()[0];
        observed[(n as usize).min(n_max as usize)] += 1;
    }
    let result = chi_square_gof(&observed, &pmf, 5.0).unwrap();
    assert!(result.p_value > 1e-3, "{result:?}");
}

/// Truncated at two lineages, the Moran dual without mutation is the
/// two-state chain `1 → 2` at rate 1 and `2 → 1` at rate 2, so
/// `P(A(t) = 1) = 2/3 + e^{−3t}/3`.
#[test]
fn truncated_dual_law_is_exact() {
    let p = DiffusionParams::moran(1.0, 0.0, 0.0).unwrap();
    for t in [0.1, 0.3, 1.0, 4.0] {
        let pmf = dual_pmf(1, &p, t, 2).unwrap();
        let one = 2.0 / 3.0 + (-3.0 * t).exp() / 3.0;
        assert_eq!(pmf[0], 0.0);
        assert!((pmf[1] - one).abs() < 1e-12, "t = {t}: {} vs {one}", pmf[1]);
        assert!((pmf[2] - (1.0 - one)).abs() < 1e-12);
    }
}

#[test]
fn moment_duality_holds_on_a_small_grid() {
    let p = DiffusionParams::moran(1.0, 0.5, 0.0).unwrap();
    let grid = DualityGrid {
        w0s: vec![0.2, 0.7],
        n0s: vec![1, 3],
        times: vec![0.0, 0.5, 1.0],
        replicates: 20_000,
        dt: Some(2.5e-4),
    };
    let reports = duality_grid(&grid, &p, 15, 1).unwrap();
    assert_eq!(reports.len(), 12);
    for r in reports {
        assert!(r.z.abs() <= 4.0, "{r:?}");
    }
}
