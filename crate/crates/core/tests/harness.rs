use lbp_core::harness::{run_experiment, ExperimentKind, ExperimentSpec, StatReport, Timing};
use serde_json::json;

fn small(kind: ExperimentKind) -> ExperimentSpec {
    let overrides = match kind {
        ExperimentKind::Growth => json!({ "K": [50, 200], "replicates": 20 }),
        ExperimentKind::FrequencyConvergence => json!({ "K": [200], "replicates": 40, "dt": 1e-3 }),
        ExperimentKind::Duality => json!({ "replicates": 200, "dt": 1e-3, "w0s": [0.3], "n0s": [1, 2] }),
        ExperimentKind::AsgRates => json!({ "K": [100], "replicates": 3, "chains": 2 }),
        ExperimentKind::DecayProbe => json!({ "K": [500], "replicates": 40 }),
        ExperimentKind::LimitsProbe => json!({ "K": [100, 1000] }),
    };
    let mut text = overrides;
    text["kind"] = json!(kind.name());
    text["seed"] = json!(17);
    ExperimentSpec::from_json(&text.to_string()).unwrap()
}

#[test]
fn reports_do_not_depend_on_the_worker_count() {
    for kind in ExperimentKind::ALL {
        let spec = small(kind);
        let serial = run_experiment(&spec, 1).unwrap().to_json().unwrap();
        let parallel = run_experiment(&spec, 2).unwrap().to_json().unwrap();
        assert_eq!(serial, parallel, "{}", kind.name());
    }
}

#[test]
fn different_seeds_give_different_samples() {
    let spec = small(ExperimentKind::Growth);
    let mut other = spec.clone();
    other.seed += 1;
    let a = run_experiment(&spec, 1).unwrap();
    let b = run_experiment(&other, 1).unwrap();
    assert_ne!(a.cells, b.cells);
}

/// Pure splitting at rate 1 from one individual with negligible competition
/// is a Yule process: `N(t)` is geometric with parameter `e^{−t}`, so
/// `E[1/N(t)] = t e^{−t} / (1 − e^{−t})`.
#[test]
fn decay_probe_matches_the_yule_process() {
    let text = json!({
        "kind": "decay_probe",
        "model": { "family": "table", "atoms": [[2, "1"]] },
        "K": [1_000_000_000_000u64],
        "initial_size": 1,
        "replicates": 20_000,
        "times": [0.5, 1.0, 2.0, 3.0],
        "seed": 3,
    });
    let spec = ExperimentSpec::from_json(&text.to_string()).unwrap();
    let report = run_experiment(&spec, 1).unwrap();
    for cell in report.cells.iter().filter(|c| c.name == "inverse_size") {
        let t = cell.t.unwrap();
        let oracle = t * (-t).exp() / (1.0 - (-t).exp());
        assert!((cell.mean - oracle).abs() < 4.0 * cell.se, "t = {t}: {} ± {} vs {oracle}", cell.mean, cell.se);
    }
}

#[test]
fn a_single_time_gives_no_slope() {
    let mut spec = small(ExperimentKind::DecayProbe);
    spec.times = vec![2.0];
    let report = run_experiment(&spec, 1).unwrap();
    assert!(report.checks.iter().all(|c| !c.name.starts_with("slope")));
    assert_eq!(report.details["fits"][0]["slope"], serde_json::Value::Null);
}

#[test]
fn a_single_k_gives_no_trend() {
    let mut spec = small(ExperimentKind::Growth);
    spec.ks = vec![50];
    let report = run_experiment(&spec, 1).unwrap();
    assert!(report.trends.is_empty());
}

#[test]
fn time_zero_matches_the_initial_moments_exactly() {
    let mut spec = small(ExperimentKind::FrequencyConvergence);
    spec.times = vec![0.0];
    let report = run_experiment(&spec, 1).unwrap();
    let moment = report.cell("moment_1", Some(200)).unwrap();
    assert_eq!(moment.z, Some(0.0));
    assert_eq!(moment.mean, 0.5);
}

#[test]
fn unknown_fields_and_bad_values_are_rejected() {
    assert!(ExperimentSpec::from_json(r#"{"kind":"growth","replicate":5}"#).is_err());
    assert!(ExperimentSpec::from_json(r#"{"kind":"growth","K":[]}"#).is_err());
    assert!(ExperimentSpec::from_json(r#"{"kind":"growth","beta":1.5}"#).is_err());
    assert!(ExperimentSpec::from_json(r#"{"kind":"nothing"}"#).is_err());
    assert!(ExperimentSpec::from_json(r#"{"replicates":5}"#).is_err());
}

#[test]
fn reports_round_trip_through_files() {
    let dir = std::env::temp_dir().join(format!("lbp-harness-{}", std::process::id()));
    let spec = small(ExperimentKind::LimitsProbe);
    let report = run_experiment(&spec, 1).unwrap();
    let written = report.write_to_dir(&dir).unwrap();
    assert_eq!(written.len(), 2);
    let parsed: StatReport = serde_json::from_str(&std::fs::read_to_string(&written[0]).unwrap()).unwrap();
    assert_eq!(parsed, report);
    let csv = std::fs::read_to_string(&written[1]).unwrap();
    assert_eq!(csv.lines().count(), report.cells.len() + 1);
    assert!(csv.starts_with("experiment,name,K,t,w0,n0,mean,se,count,reference,reference_se,z"));
    let timing = Timing { kind: spec.kind, wall_seconds: 0.5, jobs: 1 }.write_to_dir(&dir).unwrap();
    assert!(timing.ends_with("limits_probe_timing.json"));
    std::fs::remove_dir_all(&dir).unwrap();
}
