use std::path::Path;
use std::process::{Command, Output};

fn lbp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lbp"))
        .args(args)
        .current_dir(dir)
        .env_remove("LBP_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn simulate_with_zero_horizon_writes_the_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = lbp(dir.path(), &["simulate", "-K", "40", "-T", "0", "--out", "run"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(dir.path().join("run/trajectory.csv")), "t,n_plus,n_minus\n0,20,20\n");
}

#[test]
fn fixed_seed_gives_byte_identical_output() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let out = lbp(dir.path(), &["simulate", "-K", "60", "-T", "3", "--seed", "11", "--out", name]);
        assert_eq!(code(&out), 0);
    }
    let a = read(dir.path().join("a/trajectory.csv"));
    assert!(a.lines().count() > 10);
    assert_eq!(a, read(dir.path().join("b/trajectory.csv")));
}

#[test]
fn missing_model_file_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = lbp(dir.path(), &["simulate", "--model", "absent.json"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.json"));
    assert!(!dir.path().join("lbp-out").exists());
}

#[test]
fn unknown_command_prints_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = lbp(dir.path(), &["frobnicate"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn invalid_dual_parameters_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("m.json"), r#"{"family":"moran","s":1,"theta_minus":0.3}"#).unwrap();
    let out = lbp(dir.path(), &["dual", "--model", "m.json"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn duality_at_time_zero_has_zero_z() {
    let dir = tempfile::tempdir().unwrap();
    let out = lbp(dir.path(), &["duality", "--times", "0", "--replicates", "20", "--out", "d"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&read(dir.path().join("d/duality_report.json"))).unwrap();
    let cells = report["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 9);
    assert!(cells.iter().all(|c| c["z"] == 0.0));
    assert!(dir.path().join("d/duality_timing.json").exists());
}

#[test]
fn limits_approach_the_selection_coefficient() {
    let dir = tempfile::tempdir().unwrap();
    let out = lbp(dir.path(), &["limits", "-K", "1000,10000", "--out", "l"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("limits_probe: PASS"));
    let csv = read(dir.path().join("l/limits_probe_cells.csv"));
    let plus: Vec<f64> = csv
        .lines()
        .filter(|l| l.starts_with("limits_probe,plus_sum,") && l.split(',').nth(5) == Some("5"))
        .map(|l| l.split(',').nth(6).unwrap().parse().unwrap())
        .collect();
    assert_eq!(plus.len(), 2);
    assert!((plus[1] - 5.0).abs() < (plus[0] - 5.0).abs());
}

#[test]
fn flags_override_files_and_env_sets_the_default_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("m.json"), r#"{"family":"moran","s":1,"K":30}"#).unwrap();
    std::fs::write(dir.path().join("e.json"), r#"{"kind":"limits_probe","K":[50],"output":"from_file"}"#).unwrap();

    let out = lbp(dir.path(), &["simulate", "--model", "m.json", "-T", "0", "--out", "m"]);
    assert_eq!(code(&out), 0);
    assert_eq!(read(dir.path().join("m/trajectory.csv")).lines().nth(1), Some("0,15,15"));

    let out = lbp(dir.path(), &["run", "--experiment", "e.json", "--model", "m.json"]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value =
        serde_json::from_str(&read(dir.path().join("from_file/limits_probe_report.json"))).unwrap();
    assert_eq!(report["spec"]["K"], serde_json::json!([50]));

    let out = Command::new(env!("CARGO_BIN_EXE_lbp"))
        .args(["dual", "-T", "0.5"])
        .current_dir(dir.path())
        .env("LBP_OUT_DIR", "from_env")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(dir.path().join("from_env/dual.csv").exists());
}

#[test]
fn experiment_kind_must_match_the_command() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("e.json"), r#"{"kind":"limits_probe"}"#).unwrap();
    let out = lbp(dir.path(), &["growth", "--experiment", "e.json"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = lbp(dir.path(), &["--selftest"]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 2);
}

#[test]
fn asg_writes_events_and_lineages() {
    let dir = tempfile::tempdir().unwrap();
    let out = lbp(dir.path(), &["asg", "-K", "60", "-T", "0.2", "--sample-size", "3", "--out", "g"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let lineages = read(dir.path().join("g/lineages.csv"));
    assert!(lineages.lines().nth(1).unwrap().ends_with(",3"), "{lineages}");
    assert!(read(dir.path().join("g/events.jsonl")).lines().count() > 0);
}
