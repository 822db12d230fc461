//! The experiment runners. Each one is a pure function of its spec; `jobs`
//! only sets the worker count.

use serde_json::json;

use super::report::{Check, StatCell, StatReport, TrendCheck};
use super::spec::{ExperimentKind, ExperimentSpec};
use crate::asg::{generator_limit_probe, lineage_rate_sweep, Band, CheckpointedRun, EventSource};
use crate::diffusion::{dual_pmf, duality_grid, sde_at_times, DiffusionParams, DualityGrid};
use crate::error::{Error, Result};
use crate::forward::{t_beta_threshold, ForwardSim, PopulationState};
use crate::genealogy::{growth_experiment, CoupledLaws, GrowthOptions, IndividualLabel, LabeledPopulation};
use crate::measures::build_coupling;
use crate::parallel::try_map_replicates;
use crate::rng::{rng_from_seed, substream_seed};
use crate::stats::{chi_square_gof, loglog_slope, ratio_estimate, summary_stats, Summary};
use crate::types::Type;

/// Run whichever experiment `spec` describes.
pub fn run_experiment(spec: &ExperimentSpec, jobs: usize) -> Result<StatReport> {
    spec.validate()?;
    match spec.kind {
        ExperimentKind::Growth => run_growth(spec, jobs),
        ExperimentKind::FrequencyConvergence => run_frequency_convergence(spec, jobs),
        ExperimentKind::Duality => run_duality(spec, jobs),
        ExperimentKind::AsgRates => run_asg_rates(spec, jobs),
        ExperimentKind::DecayProbe => run_decay_probe(spec, jobs),
        ExperimentKind::LimitsProbe => run_limits_probe(spec),
    }
}

fn require(spec: &ExperimentSpec, kind: ExperimentKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::InvalidParams(format!("expected a {} spec, got {}", kind.name(), spec.kind.name())));
    }
    spec.validate()
}

fn sorted_times(times: &[f64]) -> Vec<f64> {
    let mut t = times.to_vec();
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

fn binomial_cell(name: &str, hits: usize, count: usize) -> StatCell {
    let p = hits as f64 / count as f64;
    StatCell::new(name, p, (p * (1.0 - p) / count as f64).sqrt(), count as u64)
}

fn max_abs_z(cells: &[StatCell]) -> f64 {
    cells.iter().filter_map(|c| c.z).map(f64::abs).fold(0.0, f64::max)
}

/// Descendant fraction of founder `(1)` at the end of the growth phase
/// against the asymptotic fraction in the coupled limiting process.
pub fn run_growth(spec: &ExperimentSpec, jobs: usize) -> Result<StatReport> {
    require(spec, ExperimentKind::Growth)?;
    let family = spec.family()?;
    let initial = LabeledPopulation::founders(spec.founders_plus, spec.founders_minus);
    let u = IndividualLabel::root(1);
    let mut options = GrowthOptions::new(spec.beta);
    options.stop_size = spec.stop_size;
    let mut report = StatReport::new(
        spec,
        "During the growth phase the descendant fraction of a founder in the capacity-K population \
         approaches the asymptotic fraction in the coupled branching process as K grows.",
    );
    let mut trend = Vec::new();
    for &k in &spec.ks {
        let laws = CoupledLaws::from_params(&spec.params(&family, k)?)?;
        let samples =
            growth_experiment(&laws, &u, &initial, &options, spec.replicates, substream_seed(spec.seed, k), jobs)?;
        let abs: Vec<f64> = samples.iter().map(|s| s.difference().abs()).collect();
        let signed: Vec<f64> = samples.iter().map(|s| s.difference()).collect();
        let a = summary_stats(&abs)?;
        trend.push((k, a.mean));
        let s = summary_stats(&signed)?;
        let n = samples.len();
        report.cells.push(StatCell::new("mean_abs_difference", a.mean, a.se, a.count).at_k(k));
        report.cells.push(StatCell::new("mean_difference", s.mean, s.se, s.count).at_k(k));
        report
            .cells
            .push(binomial_cell("k_extinct_fraction", samples.iter().filter(|s| s.k_extinct).count(), n).at_k(k));
        report.cells.push(
            binomial_cell("limit_extinct_fraction", samples.iter().filter(|s| s.f_inf.extinct).count(), n).at_k(k),
        );
        report.cells.push(binomial_cell("reached_fraction", samples.iter().filter(|s| s.reached).count(), n).at_k(k));
    }
    report.trends.extend(TrendCheck::decreasing("mean_abs_difference", &trend));
    Ok(report)
}

/// Moments of the rescaled minus frequency at capacity `K` against the
/// diffusion, both started from `w0`.
pub fn run_frequency_convergence(spec: &ExperimentSpec, jobs: usize) -> Result<StatReport> {
    require(spec, ExperimentKind::FrequencyConvergence)?;
    let family = spec.family()?;
    let (tp, tm) = spec.thetas();
    let diffusion = DiffusionParams::from_constants(&family.constants(), tp, tm)?;
    let dt = spec.dt.unwrap_or_else(|| diffusion.default_dt());
    let times = sorted_times(&spec.times);
    let mut report = StatReport::new(
        spec,
        "The minus-type frequency of the capacity-K process, with time sped up by K, converges to the \
         selection-mutation diffusion with the type-dependent variance term.",
    );
    for &k in &spec.ks {
        let params = spec.params(&family, k)?;
        let n_minus = (spec.w0 * k as f64).ceil() as u64;
        let initial = PopulationState::new(k - n_minus.min(k), n_minus.min(k));
        let forward: Vec<Option<Vec<f64>>> =
            try_map_replicates(spec.replicates, substream_seed(spec.seed, 2 * k), jobs, |_, seed| {
                let mut sim = ForwardSim::new(&params, initial);
                let mut rng = rng_from_seed(seed);
                let mut out = Vec::with_capacity(times.len());
                for &t in &times {
                    sim.run_until(k as f64 * t, &mut rng)?;
                    let state = sim.state();
                    if state.is_extinct() {
                        return Ok::<_, Error>(None);
                    }
                    out.push(state.count(Type::Minus) as f64 / state.total() as f64);
                }
                Ok(Some(out))
            })?;
        let survivors: Vec<Vec<f64>> = forward.iter().flatten().cloned().collect();
        report.cells.push(binomial_cell("extinct_fraction", forward.len() - survivors.len(), forward.len()).at_k(k));
        let limit: Vec<Vec<f64>> =
            try_map_replicates(spec.replicates, substream_seed(spec.seed, 2 * k + 1), jobs, |_, seed| {
                sde_at_times(spec.w0, &diffusion, &times, dt, seed)
            })?;
        for (ti, &t) in times.iter().enumerate() {
            for r in 1..=2 {
                let fw: Vec<f64> = survivors.iter().map(|p| p[ti].powi(r)).collect();
                let lim: Vec<f64> = limit.iter().map(|p| p[ti].powi(r)).collect();
                let (a, b) = (summary_stats(&fw)?, summary_stats(&lim)?);
                report.cells.push(
                    StatCell::new(format!("moment_{r}"), a.mean, a.se, a.count).at_k(k).at_t(t).against(b.mean, b.se),
                );
            }
        }
    }
    report.checks.push(Check::at_most("max_abs_z", max_abs_z(&report.cells), spec.z_threshold));
    Ok(report)
}

/// Monte Carlo check of the moment duality over a grid of `(w0, n0, t)`.
pub fn run_duality(spec: &ExperimentSpec, jobs: usize) -> Result<StatReport> {
    require(spec, ExperimentKind::Duality)?;
    let (tp, tm) = spec.thetas();
    let diffusion = DiffusionParams::from_constants(&spec.family()?.constants(), tp, tm)?;
    let grid = DualityGrid {
        w0s: spec.w0s.clone(),
        n0s: spec.n0s.clone(),
        times: spec.times.clone(),
        replicates: spec.replicates,
        dt: spec.dt,
    };
    let mut report = StatReport::new(
        spec,
        "The n-th moment of the diffusion from w0 equals the expectation of w0 raised to the \
         dual counting chain started from n.",
    );
    for r in duality_grid(&grid, &diffusion, spec.seed, jobs)? {
        let mut cell = StatCell::new("moment_duality", r.lhs_mean, r.lhs_se, r.replicates).at_t(r.t);
        cell.w0 = Some(r.w0);
        cell.n0 = Some(r.n0);
        cell.reference = Some(r.rhs_mean);
        cell.reference_se = Some(r.rhs_se);
        cell.z = Some(r.z);
        report.cells.push(cell);
    }
    report.checks.push(Check::at_most("max_abs_z", max_abs_z(&report.cells), spec.z_threshold));
    Ok(report)
}

/// Per-replicate totals of one forward run and its backward chains.
struct AsgReplicate {
    branches: f64,
    coalescences: f64,
    lineage_time: f64,
    pair_time: f64,
    absorbed: usize,
    multi_mergers: u64,
    final_counts: Vec<u64>,
    froze: bool,
}

/// Branching and coalescence rates of the lineage counting process at
/// capacity `K` and the law of its value at the horizon.
pub fn run_asg_rates(spec: &ExperimentSpec, jobs: usize) -> Result<StatReport> {
    require(spec, ExperimentKind::AsgRates)?;
    let family = spec.family()?;
    let constants = family.constants();
    let dual = DiffusionParams::from_constants(&constants, 0.0, 0.0)?;
    let branch_target = constants.s();
    let coalescence_target = constants.m + constants.v_minus;
    let m = spec.sample_size;
    let mut report = StatReport::new(
        spec,
        "Backward in time at carrying capacity, the lineage count of a sample branches at rate s per \
         lineage and coalesces at rate m + v- per pair, and the cemetery becomes unlikely as K grows.",
    );
    let mut errors = Vec::new();
    let mut cemetery = Vec::new();
    let mut chi = Vec::new();
    for &k in &spec.ks {
        let params = spec.params(&family, k)?;
        let nu = build_coupling(&params)?;
        let band = Band::default_for(k);
        let initial = PopulationState::new(k / 2, k - k / 2);
        let runs = try_map_replicates(spec.replicates, substream_seed(spec.seed, k), jobs, |_, seed| {
            let run = CheckpointedRun::generate(&params, &nu, spec.horizon, initial, band, seed)?;
            let stats = lineage_rate_sweep(&run, m, spec.chains, substream_seed(seed, 1))?;
            Ok::<_, Error>(AsgReplicate {
                branches: stats.iter().map(|s| s.branches as f64).sum(),
                coalescences: stats.iter().map(|s| s.coalescences as f64).sum(),
                lineage_time: stats.iter().map(|s| s.lineage_time).sum(),
                pair_time: stats.iter().map(|s| s.pair_time).sum(),
                absorbed: stats.iter().filter(|s| s.absorbed_at.is_some()).count(),
                multi_mergers: stats.iter().map(|s| s.multi_mergers).sum(),
                final_counts: stats.iter().filter_map(|s| s.final_count).collect(),
                froze: run.frozen_at().is_some(),
            })
        })?;
        let chains = runs.len() * spec.chains as usize;
        let column = |f: fn(&AsgReplicate) -> f64| runs.iter().map(f).collect::<Vec<_>>();
        let (branch, branch_se) = ratio_estimate(&column(|r| r.branches), &column(|r| r.lineage_time))?;
        let (coal, coal_se) = ratio_estimate(&column(|r| r.coalescences), &column(|r| r.pair_time))?;
        let branch_cell =
            StatCell::new("branch_rate", branch, branch_se, chains as u64).at_k(k).against(branch_target, 0.0);
        let coal_cell =
            StatCell::new("coalescence_rate", coal, coal_se, chains as u64).at_k(k).against(coalescence_target, 0.0);
        errors.push((k, branch_cell.relative_error(), branch_se, coal_cell.relative_error(), coal_se));
        report.cells.push(branch_cell);
        report.cells.push(coal_cell);
        let absorbed: usize = runs.iter().map(|r| r.absorbed).sum();
        let cem = binomial_cell("cemetery_frequency", absorbed, chains).at_k(k);
        cemetery.push((k, cem.mean));
        report.cells.push(cem);
        report
            .cells
            .push(binomial_cell("frozen_run_fraction", runs.iter().filter(|r| r.froze).count(), runs.len()).at_k(k));
        let mergers: u64 = runs.iter().map(|r| r.multi_mergers).sum();
        report
            .cells
            .push(StatCell::new("multi_mergers_per_chain", mergers as f64 / chains as f64, 0.0, chains as u64).at_k(k));

        // Law of A_K(T) among chains that escaped the cemetery, against the
        // dual chain without mutation.
        let finals: Vec<u64> = runs.iter().flat_map(|r| r.final_counts.iter().copied()).collect();
        if !finals.is_empty() {
            let n_max = (*finals.iter().max().unwrap()).max(m) + 20;
            let pmf = dual_pmf(m, &dual, spec.horizon, n_max)?;
            let mut observed = vec![0u64; n_max as usize];
            for &a in &finals {
                observed[(a.clamp(1, n_max) - 1) as usize] += 1;
            }
            let result = chi_square_gof(&observed, &pmf[1..], 5.0)?;
            let mean = summary_stats(&finals.iter().map(|&a| a as f64).collect::<Vec<_>>())?;
            let dual_mean: f64 = pmf.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
            report
                .cells
                .push(StatCell::new("final_count", mean.mean, mean.se, mean.count).at_k(k).against(dual_mean, 0.0));
            chi.push(json!({"K": k, "statistic": result.statistic, "dof": result.dof, "p_value": result.p_value}));
        }
    }
    report.trends.extend(TrendCheck::decreasing("cemetery_frequency", &cemetery));
    if let (Some(first), Some(last)) = (errors.first(), errors.last()) {
        let (b_last, c_last) = (last.1.unwrap_or(f64::INFINITY), last.3.unwrap_or(f64::INFINITY));
        report.checks.push(Check::at_most("branch_rate_relative_error", b_last, spec.relative_tolerance));
        report.checks.push(Check::at_most("coalescence_rate_relative_error", c_last, spec.relative_tolerance));
        if errors.len() > 1 {
            // The error at the largest K may not exceed the error at the
            // smallest by more than three standard errors of the former.
            let slack = |err: f64, se: f64, target: f64| err - 3.0 * se / target.abs();
            let b_first = first.1.unwrap_or(f64::INFINITY);
            let c_first = first.3.unwrap_or(f64::INFINITY);
            report.checks.push(Check::at_most(
                "branch_rate_error_growth",
                slack(b_last, last.2, branch_target) - b_first,
                0.0,
            ));
            report.checks.push(Check::at_most(
                "coalescence_rate_error_growth",
                slack(c_last, last.4, coalescence_target) - c_first,
                0.0,
            ));
        }
    }
    if let Some(p) = chi.last().and_then(|c| c["p_value"].as_f64()) {
        report.checks.push(Check::at_least("final_count_chi_square_p", p, spec.p_threshold));
    }
    report.details = json!({ "chi_square": chi });
    Ok(report)
}

/// `E[1{N > 0, t < T^β} / N(t)]` on a grid of natural times from a small
/// founding population, with the fitted log-log slope.
pub fn run_decay_probe(spec: &ExperimentSpec, jobs: usize) -> Result<StatReport> {
    require(spec, ExperimentKind::DecayProbe)?;
    let family = spec.family()?;
    let times = sorted_times(&spec.times);
    let exponent = 1.0 / (1.0 - spec.beta);
    let mut report = StatReport::new(
        spec,
        "Before the population first reaches K - K^beta, the expected inverse population size \
         decays in time at least polynomially, uniformly in K.",
    );
    let n0 = spec.initial_size;
    let initial = PopulationState::new(n0 - n0 / 2, n0 / 2);
    let mut fits = Vec::new();
    for &k in &spec.ks {
        let params = spec.params(&family, k)?;
        let threshold = t_beta_threshold(k, spec.beta);
        let values = try_map_replicates(spec.replicates, substream_seed(spec.seed, k), jobs, |_, seed| {
            let mut sim = ForwardSim::new(&params, initial);
            let mut rng = rng_from_seed(seed);
            let mut grown = initial.total() as f64 >= threshold;
            let mut out = Vec::with_capacity(times.len());
            for &t in &times {
                if !grown {
                    grown = !sim.advance_to(t, &mut rng, |_, state, _| (state.total() as f64) < threshold)?;
                }
                let n = sim.state().total();
                out.push(if grown || n == 0 { 0.0 } else { 1.0 / n as f64 });
            }
            Ok::<_, Error>(out)
        })?;
        let mut summaries: Vec<Summary> = Vec::new();
        for (ti, &t) in times.iter().enumerate() {
            let s = summary_stats(&values.iter().map(|v| v[ti]).collect::<Vec<_>>())?;
            report.cells.push(StatCell::new("inverse_size", s.mean, s.se, s.count).at_k(k).at_t(t));
            summaries.push(s);
        }
        let means: Vec<f64> = summaries.iter().map(|s| s.mean).collect();
        let slope = loglog_slope(&times, &means);
        // The smallest constant for which the bound holds on the grid, and
        // the time at which it is attained.
        let (argmax, b) = times
            .iter()
            .zip(&means)
            .map(|(t, m)| (*t, m * t.powf(exponent)))
            .fold((times[0], 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if let Some((slope, _)) = slope {
            report.checks.push(Check::at_most(&format!("slope_K{k}"), slope, spec.slope_threshold));
        }
        fits.push(json!({
            "K": k,
            "slope": slope.map(|s| s.0),
            "intercept": slope.map(|s| s.1),
            "bound_exponent": -exponent,
            "bound_constant": b,
            "bound_attained_at": argmax,
        }));
    }
    report.details = json!({ "fits": fits });
    Ok(report)
}

/// Exact scaled transition sums of the lineage counting process against
/// their limits.
pub fn run_limits_probe(spec: &ExperimentSpec) -> Result<StatReport> {
    require(spec, ExperimentKind::LimitsProbe)?;
    let family = spec.family()?;
    let rows = generator_limit_probe(&family, spec.n_max, &spec.ks)?;
    let mut report = StatReport::new(
        spec,
        "Scaled by K squared, the exact branching and coalescence probabilities of the lineage \
         counting process converge to n s and C(n, 2)(m + v-), and the remaining jumps vanish.",
    );
    let exact = |name: &str, row: &crate::asg::LimitRow, value: f64, target: f64| {
        let mut cell = StatCell::new(name, value, 0.0, 1).at_k(row.k);
        cell.n0 = Some(row.n);
        cell.reference = Some(target);
        cell
    };
    for row in &rows {
        report.cells.push(exact("plus_sum", row, row.plus_sum, row.plus_target));
        report.cells.push(exact("minus_sum", row, row.minus_sum, row.minus_target));
        report.cells.push(exact("bar_sum", row, row.bar_sum, 0.0));
    }
    let largest = *spec.ks.iter().max().expect("validated nonempty");
    let at_largest: Vec<_> = rows.iter().filter(|r| r.k == largest).collect();
    let worst = |f: fn(&crate::asg::LimitRow) -> f64| at_largest.iter().map(|r| f(r)).fold(0.0, f64::max);
    report.checks.push(Check::at_most(
        "plus_relative_error",
        worst(|r| r.plus_relative_error()),
        spec.relative_tolerance,
    ));
    report.checks.push(Check::at_most(
        "minus_relative_error",
        worst(|r| r.minus_relative_error()),
        spec.relative_tolerance,
    ));
    report.checks.push(Check::at_most("bar_sum", worst(|r| r.bar_sum.abs()), BAR_SUM_TOLERANCE));
    Ok(report)
}

/// Bound on the scaled mass of jumps other than one branch or one
/// coalescence at the largest probed `K`.
pub const BAR_SUM_TOLERANCE: f64 = 0.05;
