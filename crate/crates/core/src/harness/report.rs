//! Statistical reports written by the experiments.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::spec::{ExperimentKind, ExperimentSpec};
use crate::error::Result;

/// One estimated quantity, optionally compared with a reference value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatCell {
    /// What was estimated, e.g. `mean_abs_difference` or `moment_2`.
    pub name: String,
    #[serde(rename = "K")]
    pub k: Option<u64>,
    pub t: Option<f64>,
    pub w0: Option<f64>,
    pub n0: Option<u64>,
    pub mean: f64,
    pub se: f64,
    pub count: u64,
    pub reference: Option<f64>,
    pub reference_se: Option<f64>,
    pub z: Option<f64>,
}

impl StatCell {
    pub fn new(name: impl Into<String>, mean: f64, se: f64, count: u64) -> Self {
        Self {
            name: name.into(),
            k: None,
            t: None,
            w0: None,
            n0: None,
            mean,
            se,
            count,
            reference: None,
            reference_se: None,
            z: None,
        }
    }

    pub fn at_k(mut self, k: u64) -> Self {
        self.k = Some(k);
        self
    }

    pub fn at_t(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }

    pub fn against(mut self, reference: f64, reference_se: f64) -> Self {
        self.reference = Some(reference);
        self.reference_se = Some(reference_se);
        self.z = Some(crate::stats::z_score(self.mean, self.se, reference, reference_se));
        self
    }

    /// `|mean − reference| / |reference|`, if there is a reference.
    pub fn relative_error(&self) -> Option<f64> {
        self.reference.map(|r| if r == 0.0 { self.mean.abs() } else { (self.mean - r).abs() / r.abs() })
    }
}

/// Strict-monotonicity check of one statistic across the K grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendCheck {
    pub statistic: String,
    #[serde(rename = "K")]
    pub ks: Vec<u64>,
    pub values: Vec<f64>,
    pub strictly_decreasing: bool,
}

impl TrendCheck {
    /// `None` for fewer than two grid points.
    pub fn decreasing(statistic: &str, points: &[(u64, f64)]) -> Option<Self> {
        if points.len() < 2 {
            return None;
        }
        let mut sorted = points.to_vec();
        sorted.sort_by_key(|p| p.0);
        Some(Self {
            statistic: statistic.into(),
            ks: sorted.iter().map(|p| p.0).collect(),
            values: sorted.iter().map(|p| p.1).collect(),
            strictly_decreasing: sorted.windows(2).all(|w| w[1].1 < w[0].1),
        })
    }
}

/// A thresholded verdict, with the threshold that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value <= threshold }
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value >= threshold }
    }
}

/// Everything an experiment produced. Reports are a pure function of the
/// spec, so two runs with the same seed serialize identically whatever the
/// worker count; wall-clock time lives in [`Timing`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub kind: ExperimentKind,
    /// Plain-language statement of what the experiment tests.
    pub claim: String,
    pub spec: ExperimentSpec,
    pub cells: Vec<StatCell>,
    pub trends: Vec<TrendCheck>,
    pub checks: Vec<Check>,
    /// Kind-specific extras such as chi-square tables or fitted constants.
    pub details: Value,
}

impl StatReport {
    pub fn new(spec: &ExperimentSpec, claim: &str) -> Self {
        Self {
            kind: spec.kind,
            claim: claim.into(),
            spec: spec.clone(),
            cells: vec![],
            trends: vec![],
            checks: vec![],
            details: Value::Null,
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed) && self.trends.iter().all(|t| t.strictly_decreasing)
    }

    /// The first cell with this name at this `K`.
    pub fn cell(&self, name: &str, k: Option<u64>) -> Option<&StatCell> {
        self.cells.iter().find(|c| c.name == name && (k.is_none() || c.k == k))
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per cell; absent fields are empty.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "experiment,name,K,t,w0,n0,mean,se,count,reference,reference_se,z")?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for c in &self.cells {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                self.kind.name(),
                c.name,
                opt(c.k.map(|v| v.to_string())),
                opt(c.t.map(|v| v.to_string())),
                opt(c.w0.map(|v| v.to_string())),
                opt(c.n0.map(|v| v.to_string())),
                c.mean,
                c.se,
                c.count,
                opt(c.reference.map(|v| v.to_string())),
                opt(c.reference_se.map(|v| v.to_string())),
                opt(c.z.map(|v| v.to_string())),
            )?;
        }
        Ok(())
    }

    /// Write `<kind>_report.json` and `<kind>_cells.csv` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let json = dir.join(format!("{}_report.json", self.kind.name()));
        fs::write(&json, self.to_json()?)?;
        let csv = dir.join(format!("{}_cells.csv", self.kind.name()));
        self.write_csv(fs::File::create(&csv)?)?;
        Ok(vec![json, csv])
    }
}

/// Wall-clock time of a run, kept apart from the deterministic report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub kind: ExperimentKind,
    pub wall_seconds: f64,
    pub jobs: usize,
}

impl Timing {
    pub fn write_to_dir(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}_timing.json", self.kind.name()));
        fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trends() {
        assert!(TrendCheck::decreasing("x", &[(5, 1.0)]).is_none());
        let t = TrendCheck::decreasing("x", &[(500, 0.2), (50, 0.3), (5000, 0.1)]).unwrap();
        assert_eq!(t.ks, vec![50, 500, 5000]);
        assert!(t.strictly_decreasing);
        assert!(!TrendCheck::decreasing("x", &[(50, 0.3), (500, 0.3)]).unwrap().strictly_decreasing);
    }

    #[test]
    fn csv_has_one_row_per_cell() {
        let spec = ExperimentSpec::defaults_for(ExperimentKind::Growth);
        let mut report = StatReport::new(&spec, "claim");
        report.cells.push(StatCell::new("a", 1.0, 0.1, 10).at_k(50));
        report.cells.push(StatCell::new("b", 2.0, 0.1, 10).at_t(0.5).against(2.0, 0.0));
        let mut out = Vec::new();
        report.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "growth,a,50,,,,1,0.1,10,,,");
        assert_eq!(lines[2], "growth,b,,0.5,,,2,0.1,10,2,0,0");
        assert_eq!(report.cell("b", None).unwrap().relative_error(), Some(0.0));
    }
}
