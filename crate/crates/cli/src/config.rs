//! Turning flags and files into validated settings.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use lbp_core::harness::{ExperimentKind, ExperimentSpec};
use lbp_core::measures::{FamilySpec, LawFamily, ModelParams};
use serde_json::Value;

use crate::CommonArgs;

pub const OUT_DIR_ENV: &str = "LBP_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "lbp-out";
const DEFAULT_K: u64 = 1000;

/// A failed command: bad configuration (exit 2) or a failed run (exit 3).
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Run(_) => 3,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Run(e) => e,
        }
    }

    /// Classify an engine error raised while running: parameter problems
    /// are configuration errors, everything else is a simulation error.
    pub fn from_run(err: lbp_core::Error) -> Self {
        use lbp_core::Error as E;
        match err {
            E::InvalidLaw(_) | E::InvalidParams(_) | E::OrderingViolation(_) | E::InvalidDualParams(_) => {
                Failure::Config(err.into())
            }
            other => Failure::Run(other.into()),
        }
    }
}

pub fn config_err(err: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(err.into())
}

pub fn run_err(err: impl Into<anyhow::Error>) -> Failure {
    Failure::Run(err.into())
}

fn read(path: &Path, what: &str) -> Result<String, Failure> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {what} {}", path.display())).map_err(config_err)
}

pub fn load_model(path: Option<&Path>) -> Result<Option<FamilySpec>, Failure> {
    let Some(path) = path else { return Ok(None) };
    let text = read(path, "model file")?;
    let spec = FamilySpec::from_json(&text)
        .with_context(|| format!("bad model file {}", path.display()))
        .map_err(config_err)?;
    spec.build().with_context(|| format!("bad model file {}", path.display())).map_err(config_err)?;
    Ok(Some(spec))
}

/// The experiment in force: the file merged over the kind defaults, then the
/// model file, then the flags.
pub fn resolve_experiment(args: &CommonArgs, expected: Option<ExperimentKind>) -> Result<ExperimentSpec, Failure> {
    let model = load_model(args.model.as_deref())?;
    let (mut spec, given) = match &args.experiment {
        Some(path) => {
            let text = read(path, "experiment file")?;
            let raw: Value = serde_json::from_str(&text)
                .with_context(|| format!("bad experiment file {}", path.display()))
                .map_err(config_err)?;
            let spec = ExperimentSpec::from_json(&text)
                .with_context(|| format!("bad experiment file {}", path.display()))
                .map_err(config_err)?;
            (spec, raw)
        }
        None => {
            let kind = expected.ok_or_else(|| config_err(anyhow!("`run` needs --experiment")))?;
            (ExperimentSpec::defaults_for(kind), Value::Null)
        }
    };
    if let Some(kind) = expected {
        if spec.kind != kind {
            return Err(config_err(anyhow!(
                "experiment file describes {}, expected {}",
                spec.kind.name(),
                kind.name()
            )));
        }
    }
    let in_file = |key: &str| given.get(key).is_some();
    if let Some(model) = model {
        // Model-file defaults only fill what the experiment file left open.
        if let (Some(k), false) = (model.k, in_file("K")) {
            spec.ks = vec![k];
        }
        if model.theta_plus.is_some() && !in_file("theta_plus") {
            spec.theta_plus = None;
        }
        if model.theta_minus.is_some() && !in_file("theta_minus") {
            spec.theta_minus = None;
        }
        spec.model = Some(model);
    }
    if !args.ks.is_empty() {
        spec.ks = args.ks.clone();
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(t) = args.horizon {
        spec.horizon = t;
    }
    if let Some(r) = args.replicates {
        spec.replicates = r;
    }
    if !args.times.is_empty() {
        spec.times = args.times.clone();
    }
    spec.theta_plus = args.theta_plus.or(spec.theta_plus);
    spec.theta_minus = args.theta_minus.or(spec.theta_minus);
    if let Some(out) = &args.out {
        spec.output = Some(out.clone());
    }
    spec.validate().map_err(config_err)?;
    spec.family().map_err(config_err)?;
    Ok(spec)
}

/// Settings for the single-path commands.
pub struct PathSettings {
    pub family: LawFamily,
    pub params: ModelParams,
    pub spec: ExperimentSpec,
    pub out_dir: PathBuf,
}

/// Single-path commands read the same files as the experiments: the model
/// plus seed, the first `K`, the horizon, mutation and the other knobs of an
/// experiment file if given. `K` falls back to the model file, then 1000.
pub fn resolve_path_settings(args: &CommonArgs) -> Result<PathSettings, Failure> {
    let mut spec = if args.experiment.is_some() {
        resolve_experiment(args, None)?
    } else {
        let mut spec = ExperimentSpec::defaults_for(ExperimentKind::AsgRates);
        spec.ks = vec![];
        spec.model = load_model(args.model.as_deref())?;
        spec.theta_plus = args.theta_plus;
        spec.theta_minus = args.theta_minus;
        if let Some(seed) = args.seed {
            spec.seed = seed;
        }
        if let Some(t) = args.horizon {
            spec.horizon = t;
        }
        if let Some(out) = &args.out {
            spec.output = Some(out.clone());
        }
        spec
    };
    if !args.ks.is_empty() {
        spec.ks = args.ks.clone();
    }
    let k = spec.ks.first().copied().or(spec.model.as_ref().and_then(|m| m.k)).unwrap_or(DEFAULT_K);
    spec.ks = vec![k];
    if !(spec.horizon >= 0.0 && spec.horizon.is_finite()) {
        return Err(config_err(anyhow!("the horizon must be finite and >= 0, got {}", spec.horizon)));
    }
    let family = spec.family().map_err(config_err)?;
    let params = spec.params(&family, k).map_err(config_err)?;
    let out_dir = output_dir(&spec);
    Ok(PathSettings { family, params, spec, out_dir })
}

/// `--out`, then the experiment file, then `LBP_OUT_DIR`, then `lbp-out`.
pub fn output_dir(spec: &ExperimentSpec) -> PathBuf {
    spec.output
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

pub fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display())).map_err(run_err)
}
