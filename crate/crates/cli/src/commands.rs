use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use lbp_core::asg::{lineage_counting, simulate_graphical, Band};
use lbp_core::diffusion::{simulate_dual, simulate_sde, DiffusionParams};
use lbp_core::forward::{self, PopulationState};
use lbp_core::harness::{run_experiment, ExperimentKind, StatReport, Timing};
use lbp_core::measures::build_coupling;

use crate::config::{
    create_dir, output_dir, resolve_experiment, resolve_path_settings, run_err, Failure, PathSettings,
};
use crate::CommonArgs;

fn write_file(
    dir: &Path,
    name: &str,
    body: impl FnOnce(&mut BufWriter<File>) -> anyhow::Result<()>,
) -> Result<PathBuf, Failure> {
    create_dir(dir)?;
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("cannot create {}", path.display())).map_err(run_err)?;
    let mut out = BufWriter::new(file);
    body(&mut out)
        .and_then(|_| Ok(out.flush()?))
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(run_err)?;
    Ok(path)
}

fn diffusion_params(settings: &PathSettings) -> Result<DiffusionParams, Failure> {
    let (theta_plus, theta_minus) = settings.spec.thetas();
    DiffusionParams::from_constants(&settings.family.constants(), theta_plus, theta_minus).map_err(Failure::from_run)
}

pub fn simulate(args: &CommonArgs, n_plus: Option<u64>, n_minus: Option<u64>) -> Result<String, Failure> {
    let settings = resolve_path_settings(args)?;
    let k = settings.params.k();
    let initial = PopulationState::new(n_plus.unwrap_or(k / 2), n_minus.unwrap_or(k - k / 2));
    let horizon = settings.spec.horizon;
    let traj = forward::simulate(initial, &settings.params, horizon, |_, _| false, settings.spec.seed)
        .map_err(Failure::from_run)?;
    let path = write_file(&settings.out_dir, "trajectory.csv", |out| Ok(traj.write_csv(out)?))?;
    let last = traj.last();
    Ok(format!(
        "simulate: K = {k}, T = {horizon}, {} jumps, final (n+, n-) = ({}, {}) -> {}",
        traj.points.len() - 1,
        last.n_plus,
        last.n_minus,
        path.display()
    ))
}

pub fn asg(args: &CommonArgs, sample_size: Option<u64>) -> Result<String, Failure> {
    let settings = resolve_path_settings(args)?;
    let k = settings.params.k();
    let m = sample_size.unwrap_or(settings.spec.sample_size);
    let nu = build_coupling(&settings.params).map_err(Failure::from_run)?;
    let horizon = settings.spec.horizon;
    let initial = PopulationState::new(k / 2, k - k / 2);
    let (log, traj) =
        simulate_graphical(&settings.params, &nu, horizon, initial, Band::default_for(k), settings.spec.seed)
            .map_err(Failure::from_run)?;
    let lineages =
        lineage_counting(&log, m, lbp_core::rng::substream_seed(settings.spec.seed, 1)).map_err(Failure::from_run)?;
    write_file(&settings.out_dir, "events.jsonl", |out| Ok(log.write_jsonl(out)?))?;
    write_file(&settings.out_dir, "trajectory.csv", |out| Ok(traj.write_csv(out)?))?;
    let path = write_file(&settings.out_dir, "lineages.csv", |out| Ok(lineages.write_csv(out)?))?;
    let end = match lineages.final_count() {
        Some(n) => format!("A(T) = {n}"),
        None => "absorbed in the cemetery".to_string(),
    };
    Ok(format!(
        "asg: K = {k}, T = {horizon}, {} events, {m} sampled lineages, {end}{} -> {}",
        log.events.len(),
        if log.frozen_at.is_some() { " (population left the band and froze)" } else { "" },
        path.display()
    ))
}

pub fn dual(args: &CommonArgs, n0: u64) -> Result<String, Failure> {
    let settings = resolve_path_settings(args)?;
    let p = diffusion_params(&settings)?;
    let horizon = settings.spec.horizon;
    let path = simulate_dual(n0, &p, horizon, settings.spec.seed).map_err(Failure::from_run)?;
    let file = write_file(&settings.out_dir, "dual.csv", |out| Ok(path.write_csv(out)?))?;
    Ok(format!("dual: n0 = {n0}, T = {horizon}, A(T) = {} -> {}", path.value_at(horizon), file.display()))
}

pub fn sde(args: &CommonArgs, w0: Option<f64>, dt: Option<f64>) -> Result<String, Failure> {
    let settings = resolve_path_settings(args)?;
    let p = diffusion_params(&settings)?;
    let w0 = w0.unwrap_or(settings.spec.w0);
    let dt = dt.or(settings.spec.dt).unwrap_or_else(|| p.default_dt());
    let horizon = settings.spec.horizon;
    let path = simulate_sde(w0, &p, horizon, dt, settings.spec.seed).map_err(Failure::from_run)?;
    let file = write_file(&settings.out_dir, "sde.csv", |out| Ok(path.write_csv(out)?))?;
    Ok(format!("sde: w0 = {w0}, T = {horizon}, dt = {dt}, W(T) = {:.6} -> {}", path.last_value(), file.display()))
}

fn headline(report: &StatReport) -> String {
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .chain(report.trends.iter().filter(|t| !t.strictly_decreasing).map(|t| t.statistic.as_str()))
        .collect();
    let mut parts: Vec<String> = report.checks.iter().map(|c| format!("{} = {:.4}", c.name, c.value)).collect();
    parts.extend(report.trends.iter().map(|t| {
        let values: Vec<String> = t.values.iter().map(|v| format!("{v:.4}")).collect();
        format!("{} over K = {:?}: [{}]", t.statistic, t.ks, values.join(", "))
    }));
    let verdict = if failed.is_empty() { "PASS".to_string() } else { format!("FAIL ({})", failed.join(", ")) };
    format!("{verdict}; {}", parts.join("; "))
}

pub fn experiment(args: &CommonArgs, kind: Option<ExperimentKind>) -> Result<String, Failure> {
    let spec = resolve_experiment(args, kind)?;
    let dir = output_dir(&spec);
    let start = Instant::now();
    let report = run_experiment(&spec, args.jobs.max(1)).map_err(Failure::from_run)?;
    let timing = Timing { kind: spec.kind, wall_seconds: start.elapsed().as_secs_f64(), jobs: args.jobs.max(1) };
    create_dir(&dir)?;
    report.write_to_dir(&dir).map_err(run_err)?;
    timing.write_to_dir(&dir).map_err(run_err)?;
    Ok(format!("{}: {} | {} -> {}", spec.kind.name(), headline(&report), report.claim, dir.display()))
}
