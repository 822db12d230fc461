//! Experiment descriptions read from JSON.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::measures::{FamilySpec, LawFamily, MassValue, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Growth,
    FrequencyConvergence,
    Duality,
    AsgRates,
    DecayProbe,
    LimitsProbe,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Growth,
        ExperimentKind::FrequencyConvergence,
        ExperimentKind::Duality,
        ExperimentKind::AsgRates,
        ExperimentKind::DecayProbe,
        ExperimentKind::LimitsProbe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Growth => "growth",
            ExperimentKind::FrequencyConvergence => "frequency_convergence",
            ExperimentKind::Duality => "duality",
            ExperimentKind::AsgRates => "asg_rates",
            ExperimentKind::DecayProbe => "decay_probe",
            ExperimentKind::LimitsProbe => "limits_probe",
        }
    }
}

/// Everything an experiment needs. Fields that do not apply to a kind are
/// ignored by it. [`ExperimentSpec::defaults_for`] gives the standard
/// setting of each kind; a JSON file only has to list what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Law family; the Moran family with `s = 1` when absent.
    pub model: Option<FamilySpec>,
    /// Carrying capacities.
    #[serde(rename = "K")]
    pub ks: Vec<u64>,
    pub replicates: u64,
    pub seed: u64,
    pub output: Option<PathBuf>,
    /// Mutation intensities; fall back to the model file, then to 0.
    pub theta_plus: Option<f64>,
    pub theta_minus: Option<f64>,
    /// End-of-growth exponent: the phase ends at `K − K^β`.
    pub beta: f64,
    /// Horizon `T` (rescaled time) of the backward pass.
    pub horizon: f64,
    /// Observation times. Rescaled time except for the decay probe, which
    /// works in natural time.
    pub times: Vec<f64>,
    /// Initial minus frequency of the frequency comparison.
    pub w0: f64,
    pub w0s: Vec<f64>,
    pub n0s: Vec<u64>,
    /// Sample size `m` of the lineage counting process.
    pub sample_size: u64,
    /// Backward chains per forward run.
    pub chains: u64,
    /// Founders of the growth experiment.
    pub founders_plus: u32,
    pub founders_minus: u32,
    /// Initial size of the decay probe.
    pub initial_size: u64,
    /// Size at which the asymptotic fraction is read off.
    pub stop_size: u64,
    /// Largest lineage number in the limit probe.
    pub n_max: u64,
    /// Euler step of the diffusion; the default rule when absent.
    pub dt: Option<f64>,
    pub z_threshold: f64,
    pub p_threshold: f64,
    pub relative_tolerance: f64,
    pub slope_threshold: f64,
}

impl ExperimentSpec {
    pub fn defaults_for(kind: ExperimentKind) -> Self {
        let mut spec = Self {
            kind,
            model: None,
            ks: vec![],
            replicates: 1000,
            seed: 1,
            output: None,
            theta_plus: None,
            theta_minus: None,
            beta: 0.5,
            horizon: 1.0,
            times: vec![],
            w0: 0.5,
            w0s: vec![],
            n0s: vec![],
            sample_size: 5,
            chains: 4,
            founders_plus: 1,
            founders_minus: 1,
            initial_size: 10,
            stop_size: crate::genealogy::DEFAULT_STOP_SIZE,
            n_max: 5,
            dt: None,
            z_threshold: 4.0,
            p_threshold: 0.01,
            relative_tolerance: 0.15,
            slope_threshold: -1.5,
        };
        match kind {
            ExperimentKind::Growth => {
                spec.ks = vec![50, 500, 2000];
                spec.replicates = 500;
            }
            ExperimentKind::FrequencyConvergence => {
                spec.ks = vec![2000];
                spec.replicates = 10_000;
                spec.times = vec![0.5, 1.0];
                spec.theta_plus = Some(0.5);
            }
            ExperimentKind::Duality => {
                spec.replicates = 100_000;
                spec.w0s = vec![0.2, 0.5, 0.8];
                spec.n0s = vec![1, 2, 3];
                spec.times = vec![0.5, 1.0];
                spec.theta_plus = Some(0.5);
            }
            ExperimentKind::AsgRates => {
                spec.ks = vec![500, 5000];
                spec.replicates = 60;
                spec.chains = 16;
            }
            ExperimentKind::DecayProbe => {
                spec.ks = vec![10_000];
                spec.replicates = 1000;
                spec.times = log_grid(1.0, 6.0, 8);
            }
            ExperimentKind::LimitsProbe => {
                spec.ks = vec![1000, 10_000];
                spec.relative_tolerance = 0.02;
            }
        }
        spec
    }

    /// Parse a spec, filling unspecified fields from the kind's defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let given: Value = serde_json::from_str(text)?;
        let Value::Object(fields) = given else {
            return Err(Error::InvalidParams("an experiment file must be a JSON object".into()));
        };
        let kind: ExperimentKind = serde_json::from_value(
            fields.get("kind").cloned().ok_or_else(|| Error::InvalidParams("experiment file needs `kind`".into()))?,
        )?;
        let mut merged = serde_json::to_value(Self::defaults_for(kind))?;
        let target = merged.as_object_mut().expect("specs serialize to objects");
        for (key, value) in fields {
            target.insert(key, value);
        }
        let spec: Self = serde_json::from_value(merged)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.replicates == 0 && self.kind != ExperimentKind::LimitsProbe {
            return bad("replicates must be >= 1".into());
        }
        let needs_k = !matches!(self.kind, ExperimentKind::Duality);
        if needs_k && self.ks.is_empty() {
            return bad("the K grid must not be empty".into());
        }
        if self.ks.contains(&0) {
            return bad("carrying capacities must be positive".into());
        }
        if self.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return bad(format!("observation times must be finite and >= 0, got {:?}", self.times));
        }
        match self.kind {
            ExperimentKind::Growth => {
                if !(self.beta > 0.0 && self.beta < 1.0) {
                    return bad(format!("beta must lie in (0, 1), got {}", self.beta));
                }
                if self.founders_plus + self.founders_minus == 0 {
                    return bad("the growth experiment needs at least one founder".into());
                }
            }
            ExperimentKind::FrequencyConvergence => {
                if !(0.0..=1.0).contains(&self.w0) {
                    return bad(format!("w0 must lie in [0, 1], got {}", self.w0));
                }
            }
            ExperimentKind::Duality => {
                if self.w0s.is_empty() || self.n0s.is_empty() || self.times.is_empty() {
                    return bad("the duality grid needs w0s, n0s and times".into());
                }
            }
            ExperimentKind::AsgRates => {
                if self.sample_size == 0 || self.chains == 0 || !(self.horizon > 0.0) {
                    return bad("need sample_size >= 1, chains >= 1 and horizon > 0".into());
                }
            }
            ExperimentKind::DecayProbe => {
                if self.times.is_empty() || self.initial_size == 0 {
                    return bad("the decay probe needs times and a positive initial size".into());
                }
                if !(self.beta > 0.0 && self.beta < 1.0) {
                    return bad(format!("beta must lie in (0, 1), got {}", self.beta));
                }
            }
            ExperimentKind::LimitsProbe => {
                if self.n_max == 0 {
                    return bad("n_max must be >= 1".into());
                }
            }
        }
        Ok(())
    }

    /// The family spec in force: the experiment's own or the Moran family
    /// with `s = 1`.
    pub fn family_spec(&self) -> FamilySpec {
        self.model.clone().unwrap_or_else(|| FamilySpec {
            family: "moran".into(),
            s: Some(MassValue::Text("1".into())),
            ..FamilySpec::default()
        })
    }

    pub fn family(&self) -> Result<LawFamily> {
        self.family_spec().build()
    }

    /// Mutation intensities after applying the model-file defaults.
    pub fn thetas(&self) -> (f64, f64) {
        let model = self.family_spec();
        (self.theta_plus.or(model.theta_plus).unwrap_or(0.0), self.theta_minus.or(model.theta_minus).unwrap_or(0.0))
    }

    pub fn params(&self, family: &LawFamily, k: u64) -> Result<ModelParams> {
        let (tp, tm) = self.thetas();
        ModelParams::from_family(family, k, tp, tm)
    }
}

/// `count` points spaced evenly in `log t` from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_files_take_kind_defaults() {
        let spec = ExperimentSpec::from_json(r#"{"kind": "growth", "K": [50, 100], "seed": 9}"#).unwrap();
        assert_eq!(spec.ks, vec![50, 100]);
        assert_eq!(spec.seed, 9);
        assert_eq!(spec.replicates, 500);
        assert_eq!(spec.beta, 0.5);
        let round = ExperimentSpec::from_json(&spec.to_json().unwrap()).unwrap();
        assert_eq!(round, spec);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(ExperimentSpec::from_json(r#"{"K": [50]}"#).is_err());
        assert!(ExperimentSpec::from_json(r#"{"kind": "growth", "K": []}"#).is_err());
        assert!(ExperimentSpec::from_json(r#"{"kind": "growth", "replicates": 0}"#).is_err());
        assert!(ExperimentSpec::from_json(r#"{"kind": "growth", "colour": 1}"#).is_err());
        assert!(ExperimentSpec::from_json(r#"{"kind": "nonsense"}"#).is_err());
    }

    #[test]
    fn theta_precedence() {
        let mut spec = ExperimentSpec::defaults_for(ExperimentKind::Growth);
        assert_eq!(spec.thetas(), (0.0, 0.0));
        let mut model = spec.family_spec();
        model.theta_plus = Some(0.3);
        model.theta_minus = Some(0.1);
        spec.model = Some(model);
        assert_eq!(spec.thetas(), (0.3, 0.1));
        spec.theta_minus = Some(0.7);
        assert_eq!(spec.thetas(), (0.3, 0.7));
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1.0, 6.0, 8);
        assert_eq!(g.len(), 8);
        assert!((g[0] - 1.0).abs() < 1e-12 && (g[7] - 6.0).abs() < 1e-12);
        assert_eq!(log_grid(2.0, 6.0, 1), vec![2.0]);
    }
}
