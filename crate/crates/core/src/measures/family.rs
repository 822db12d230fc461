use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::law::ReproductionLaw;
use crate::error::{Error, Result};
use crate::weight::{format_rational, parse_rational, rational_from_f64, rational_to_f64, Rational};

/// Builds the finite-`K` law of one type from its carrying capacity.
pub type LawBuilder = Arc<dyn Fn(u64) -> ReproductionLaw + Send + Sync>;

/// Which built-in construction produced a family.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilyKind {
    Moran,
    Poisson { lambda_plus: f64, lambda_minus: f64, max: u32 },
    Table,
    Custom,
}

/// A sequence of offspring laws `K ↦ (μ_K⁺, μ_K⁻)` together with its limit
/// laws and the limit constants 𝔪, 𝔰⁺, 𝔰⁻, 𝔳⁺, 𝔳⁻.
///
/// Built-in families obtain the finite-`K` laws by perturbing the limit
/// laws: selection `s ≥ 0` adds mass `s/K` at two offspring, `s < 0` adds
/// `|s|/K` at zero offspring. Either way the mean rate is exactly
/// `𝔪 + s/K`, so the `o(1/K)` correction vanishes identically.
#[derive(Clone)]
pub struct LawFamily {
    kind: FamilyKind,
    limit_plus: ReproductionLaw,
    limit_minus: ReproductionLaw,
    m: Rational,
    s_plus: Rational,
    s_minus: Rational,
    v_plus: Rational,
    v_minus: Rational,
    tolerance_c: f64,
    plus_builder: Option<LawBuilder>,
    minus_builder: Option<LawBuilder>,
}

/// The limit constants of a family, as floats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitConstants {
    pub m: f64,
    pub s_plus: f64,
    pub s_minus: f64,
    pub v_plus: f64,
    pub v_minus: f64,
}

impl LimitConstants {
    /// Net selective advantage 𝔰 = 𝔰⁺ − 𝔰⁻.
    pub fn s(&self) -> f64 {
        self.s_plus - self.s_minus
    }
}

/// Add the selection perturbation `s/K` to a limit law.
pub fn perturb(limit: &ReproductionLaw, s: &Rational, k: u64) -> ReproductionLaw {
    let shift = s / Rational::from_integer(k.into());
    if shift.is_zero() {
        return limit.clone();
    }
    let (atom, extra) = if shift.is_positive() { (2, shift) } else { (0, -shift) };
    limit.with_added_mass(atom, &extra).expect("added mass is positive")
}

impl LawFamily {
    /// Moran model with selection `s`: `μ_K⁻ = δ₂`, `μ_K⁺ = (1 + s/K)δ₂`.
    pub fn moran(s: Rational) -> Self {
        let two = ReproductionLaw::new([(2, Rational::one())]).expect("nonzero");
        Self::assemble(FamilyKind::Moran, two.clone(), two, s, Rational::zero()).expect("moran is valid")
    }

    pub fn moran_f64(s: f64) -> Result<Self> {
        let s = rational_from_f64(s).ok_or_else(|| Error::InvalidParams("selection must be finite".into()))?;
        Ok(Self::moran(s))
    }

    /// Limit laws given as tables; both must share the mean rate 𝔪 > 0.
    pub fn table(
        limit_plus: ReproductionLaw,
        limit_minus: ReproductionLaw,
        s_plus: Rational,
        s_minus: Rational,
    ) -> Result<Self> {
        Self::assemble(FamilyKind::Table, limit_plus, limit_minus, s_plus, s_minus)
    }

    /// Truncated Poisson offspring numbers on `{0, …, max}`, scaled so that
    /// each limit law has mean rate exactly `m`. The two intensities may
    /// differ, which gives 𝔳⁺ ≠ 𝔳⁻.
    pub fn poisson(
        m: Rational,
        lambda_plus: f64,
        lambda_minus: f64,
        max: u32,
        s_plus: Rational,
        s_minus: Rational,
    ) -> Result<Self> {
        let limit_plus = scaled_truncated_poisson(&m, lambda_plus, max)?;
        let limit_minus = scaled_truncated_poisson(&m, lambda_minus, max)?;
        Self::assemble(FamilyKind::Poisson { lambda_plus, lambda_minus, max }, limit_plus, limit_minus, s_plus, s_minus)
    }

    /// A family given by arbitrary law builders. The declared limit laws and
    /// selection constants are what [`LawFamily::validate`] checks against.
    pub fn custom(
        limit_plus: ReproductionLaw,
        limit_minus: ReproductionLaw,
        s_plus: Rational,
        s_minus: Rational,
        plus: LawBuilder,
        minus: LawBuilder,
    ) -> Result<Self> {
        let mut family = Self::assemble(FamilyKind::Custom, limit_plus, limit_minus, s_plus, s_minus)?;
        family.plus_builder = Some(plus);
        family.minus_builder = Some(minus);
        Ok(family)
    }

    fn assemble(
        kind: FamilyKind,
        limit_plus: ReproductionLaw,
        limit_minus: ReproductionLaw,
        s_plus: Rational,
        s_minus: Rational,
    ) -> Result<Self> {
        let m = limit_plus.mean_rate();
        if m != limit_minus.mean_rate() {
            return Err(Error::InvalidLaw(format!(
                "limit laws must share the mean rate: {} vs {}",
                format_rational(&m),
                format_rational(&limit_minus.mean_rate())
            )));
        }
        if !m.is_positive() {
            return Err(Error::InvalidLaw(format!("mean rate must be positive, got {}", format_rational(&m))));
        }
        let v_plus = limit_plus.second_moment();
        let v_minus = limit_minus.second_moment();
        if !v_plus.is_positive() || !v_minus.is_positive() {
            return Err(Error::InvalidLaw("second moments about one must be positive".into()));
        }
        Ok(Self {
            kind,
            limit_plus,
            limit_minus,
            m,
            s_plus,
            s_minus,
            v_plus,
            v_minus,
            tolerance_c: 1.0,
            plus_builder: None,
            minus_builder: None,
        })
    }

    pub fn with_tolerance(mut self, c: f64) -> Self {
        self.tolerance_c = c;
        self
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn plus(&self, k: u64) -> ReproductionLaw {
        match &self.plus_builder {
            Some(build) => build(k),
            None => perturb(&self.limit_plus, &self.s_plus, k),
        }
    }

    pub fn minus(&self, k: u64) -> ReproductionLaw {
        match &self.minus_builder {
            Some(build) => build(k),
            None => perturb(&self.limit_minus, &self.s_minus, k),
        }
    }

    pub fn limit_plus(&self) -> &ReproductionLaw {
        &self.limit_plus
    }

    pub fn limit_minus(&self) -> &ReproductionLaw {
        &self.limit_minus
    }

    pub fn m(&self) -> &Rational {
        &self.m
    }

    pub fn s_plus(&self) -> &Rational {
        &self.s_plus
    }

    pub fn s_minus(&self) -> &Rational {
        &self.s_minus
    }

    pub fn v_plus(&self) -> &Rational {
        &self.v_plus
    }

    pub fn v_minus(&self) -> &Rational {
        &self.v_minus
    }

    pub fn tolerance_c(&self) -> f64 {
        self.tolerance_c
    }

    pub fn constants(&self) -> LimitConstants {
        LimitConstants {
            m: rational_to_f64(&self.m),
            s_plus: rational_to_f64(&self.s_plus),
            s_minus: rational_to_f64(&self.s_minus),
            v_plus: rational_to_f64(&self.v_plus),
            v_minus: rational_to_f64(&self.v_minus),
        }
    }

    /// Deviation `|mean(law(K)) − 𝔪 − 𝔰/K|` for both types at one `K`.
    pub fn mean_deviation(&self, k: u64) -> (f64, f64) {
        let kq = Rational::from_integer(k.into());
        let dev = |law: ReproductionLaw, s: &Rational| rational_to_f64(&(law.mean_rate() - &self.m - s / &kq).abs());
        (dev(self.plus(k), &self.s_plus), dev(self.minus(k), &self.s_minus))
    }

    /// Check the mean schedule `|mean − 𝔪 − 𝔰/K| ≤ c / K^{3/2}` on each
    /// listed `K`.
    pub fn validate(&self, ks: &[u64]) -> Result<()> {
        for &k in ks {
            if k == 0 {
                return Err(Error::InvalidParams("carrying capacity must be at least 1".into()));
            }
            let bound = self.tolerance_c / (k as f64).powf(1.5);
            let (dp, dm) = self.mean_deviation(k);
            for (name, dev) in [("plus", dp), ("minus", dm)] {
                if dev > bound {
                    return Err(Error::InvalidLaw(format!(
                        "{name} law at K = {k} deviates from m + s/K by {dev:.3e} > {bound:.3e}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Serializable description of a built-in family.
    pub fn to_spec(&self) -> Result<FamilySpec> {
        let mut spec = FamilySpec::default();
        match &self.kind {
            FamilyKind::Moran => {
                spec.family = "moran".into();
                spec.s = Some(MassValue::Text(format_rational(&self.s_plus)));
            }
            FamilyKind::Poisson { lambda_plus, lambda_minus, max } => {
                spec.family = "poisson".into();
                spec.m = Some(MassValue::Text(format_rational(&self.m)));
                spec.lambda_plus = Some(*lambda_plus);
                spec.lambda_minus = Some(*lambda_minus);
                spec.max = Some(*max);
                spec.s_plus = Some(MassValue::Text(format_rational(&self.s_plus)));
                spec.s_minus = Some(MassValue::Text(format_rational(&self.s_minus)));
            }
            FamilyKind::Table => {
                spec.family = "table".into();
                let atoms = |law: &ReproductionLaw| {
                    law.to_string_atoms().into_iter().map(|(i, m)| (i, MassValue::Text(m))).collect::<Vec<_>>()
                };
                spec.plus_atoms = Some(atoms(&self.limit_plus));
                spec.minus_atoms = Some(atoms(&self.limit_minus));
                spec.s_plus = Some(MassValue::Text(format_rational(&self.s_plus)));
                spec.s_minus = Some(MassValue::Text(format_rational(&self.s_minus)));
            }
            FamilyKind::Custom => {
                return Err(Error::InvalidParams("custom law families cannot be serialized".into()));
            }
        }
        if self.tolerance_c != 1.0 {
            spec.tolerance_c = Some(self.tolerance_c);
        }
        Ok(spec)
    }
}

impl fmt::Debug for LawFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LawFamily")
            .field("kind", &self.kind)
            .field("limit_plus", &self.limit_plus)
            .field("limit_minus", &self.limit_minus)
            .field("m", &format_rational(&self.m))
            .field("s_plus", &format_rational(&self.s_plus))
            .field("s_minus", &format_rational(&self.s_minus))
            .finish()
    }
}

fn scaled_truncated_poisson(m: &Rational, lambda: f64, max: u32) -> Result<ReproductionLaw> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidLaw(format!("Poisson intensity must be positive, got {lambda}")));
    }
    // Unnormalized weights λ^k / k! computed in log space; normalization is
    // done exactly afterwards, so only the shape carries rounding.
    let mut weights = Vec::with_capacity(max as usize + 1);
    let mut log_w = 0.0f64;
    for k in 0..=max {
        if k > 0 {
            log_w += lambda.ln() - (k as f64).ln();
        }
        weights.push(log_w);
    }
    let top = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let shape = ReproductionLaw::from_f64(weights.iter().enumerate().map(|(k, lw)| (k as u32, (lw - top).exp())))?;
    let raw_mean = shape.mean_rate();
    if !raw_mean.is_positive() {
        return Err(Error::InvalidLaw(format!(
            "truncated Poisson({lambda}) on 0..={max} is not supercritical; cannot scale to a positive mean rate"
        )));
    }
    let scale = m / raw_mean;
    ReproductionLaw::new(shape.atoms().map(|(i, w)| (i, w * &scale)))
}

/// A mass given either as a JSON number (converted exactly from its float
/// value) or as a string `"p/q"` / decimal (parsed exactly).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MassValue {
    Number(f64),
    Text(String),
}

impl MassValue {
    pub fn to_rational(&self) -> Result<Rational> {
        match self {
            MassValue::Number(x) => {
                rational_from_f64(*x).ok_or_else(|| Error::InvalidParams(format!("non-finite number {x}")))
            }
            MassValue::Text(t) => parse_rational(t).ok_or_else(|| Error::InvalidParams(format!("cannot parse {t:?}"))),
        }
    }
}

/// JSON document describing a law family, optionally with model defaults
/// (`K`, `theta_plus`, `theta_minus`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<MassValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_plus: Option<MassValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_minus: Option<MassValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<MassValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<(u32, MassValue)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plus_atoms: Option<Vec<(u32, MassValue)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minus_atoms: Option<Vec<(u32, MassValue)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance_c: Option<f64>,
    #[serde(default, rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_minus: Option<f64>,
}

impl FamilySpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn build(&self) -> Result<LawFamily> {
        let rational_or_zero = |v: &Option<MassValue>| v.as_ref().map_or(Ok(Rational::zero()), MassValue::to_rational);
        let family = match self.family.as_str() {
            "moran" => {
                if self.s_minus.is_some() || self.atoms.is_some() || self.plus_atoms.is_some() {
                    return Err(Error::InvalidParams("moran family takes only `s`".into()));
                }
                let s = match (&self.s, &self.s_plus) {
                    (Some(_), Some(_)) => return Err(Error::InvalidParams("give either `s` or `s_plus`".into())),
                    (Some(v), None) | (None, Some(v)) => v.to_rational()?,
                    (None, None) => Rational::zero(),
                };
                LawFamily::moran(s)
            }
            "poisson" => {
                let m = match &self.m {
                    Some(v) => v.to_rational()?,
                    None => Rational::one(),
                };
                let lambda_plus = self.lambda_plus.or(self.lambda);
                let lambda_minus = self.lambda_minus.or(self.lambda);
                let (Some(lp), Some(lm)) = (lambda_plus, lambda_minus) else {
                    return Err(Error::InvalidParams(
                        "poisson family needs `lambda` or both `lambda_plus` and `lambda_minus`".into(),
                    ));
                };
                let (s_plus, s_minus) = self.selection_pair(&rational_or_zero)?;
                LawFamily::poisson(m, lp, lm, self.max.unwrap_or(30), s_plus, s_minus)?
            }
            "table" => {
                let to_law = |atoms: &Vec<(u32, MassValue)>| -> Result<ReproductionLaw> {
                    let exact: Result<Vec<_>> = atoms.iter().map(|(i, v)| Ok((*i, v.to_rational()?))).collect();
                    ReproductionLaw::new(exact?)
                };
                let (plus, minus) = match (&self.atoms, &self.plus_atoms, &self.minus_atoms) {
                    (Some(shared), None, None) => {
                        let law = to_law(shared)?;
                        (law.clone(), law)
                    }
                    (None, Some(p), Some(m)) => (to_law(p)?, to_law(m)?),
                    _ => {
                        return Err(Error::InvalidParams(
                            "table family needs `atoms`, or both `plus_atoms` and `minus_atoms`".into(),
                        ))
                    }
                };
                let (s_plus, s_minus) = self.selection_pair(&rational_or_zero)?;
                LawFamily::table(plus, minus, s_plus, s_minus)?
            }
            other => return Err(Error::InvalidParams(format!("unknown family {other:?}"))),
        };
        Ok(match self.tolerance_c {
            Some(c) => family.with_tolerance(c),
            None => family,
        })
    }

    fn selection_pair(
        &self,
        rational_or_zero: &dyn Fn(&Option<MassValue>) -> Result<Rational>,
    ) -> Result<(Rational, Rational)> {
        if self.s.is_some() && self.s_plus.is_some() {
            return Err(Error::InvalidParams("give either `s` or `s_plus`".into()));
        }
        let s_plus = if self.s.is_some() { rational_or_zero(&self.s)? } else { rational_or_zero(&self.s_plus)? };
        Ok((s_plus, rational_or_zero(&self.s_minus)?))
    }
}
