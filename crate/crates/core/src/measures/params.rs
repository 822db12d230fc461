use std::sync::Arc;

use super::family::LawFamily;
use super::law::ReproductionLaw;
use crate::error::{Error, Result};
use crate::types::Type;
use crate::weight::rational_to_f64;

/// Carrying capacity, mutation intensities and the offspring laws at that
/// capacity.
///
/// The competition coefficient `𝔪` enters the per-pair death rate `𝔪/K`.
/// For families it is the family's 𝔪; [`ModelParams::custom`] allows any
/// nonnegative value, which is how toy laws without competition are set up.
#[derive(Debug, Clone)]
pub struct ModelParams {
    k: u64,
    theta_plus: f64,
    theta_minus: f64,
    competition: f64,
    plus: ReproductionLaw,
    minus: ReproductionLaw,
    family: Option<Arc<LawFamily>>,
}

impl ModelParams {
    pub fn new(family: Arc<LawFamily>, k: u64, theta_plus: f64, theta_minus: f64) -> Result<Self> {
        check_common(k, theta_plus, theta_minus)?;
        Ok(Self {
            k,
            theta_plus,
            theta_minus,
            competition: rational_to_f64(family.m()),
            plus: family.plus(k),
            minus: family.minus(k),
            family: Some(family),
        })
    }

    pub fn from_family(family: &LawFamily, k: u64, theta_plus: f64, theta_minus: f64) -> Result<Self> {
        Self::new(Arc::new(family.clone()), k, theta_plus, theta_minus)
    }

    /// Explicit laws with a free competition coefficient `m ≥ 0`.
    pub fn custom(
        k: u64,
        plus: ReproductionLaw,
        minus: ReproductionLaw,
        competition: f64,
        theta_plus: f64,
        theta_minus: f64,
    ) -> Result<Self> {
        check_common(k, theta_plus, theta_minus)?;
        if !(competition.is_finite() && competition >= 0.0) {
            return Err(Error::InvalidParams(format!("competition coefficient must be >= 0, got {competition}")));
        }
        Ok(Self { k, theta_plus, theta_minus, competition, plus, minus, family: None })
    }

    pub fn with_k(&self, k: u64) -> Result<Self> {
        match &self.family {
            Some(f) => Self::new(f.clone(), k, self.theta_plus, self.theta_minus),
            None => Self::custom(
                k,
                self.plus.clone(),
                self.minus.clone(),
                self.competition,
                self.theta_plus,
                self.theta_minus,
            ),
        }
    }

    pub fn with_theta(&self, theta_plus: f64, theta_minus: f64) -> Result<Self> {
        check_common(self.k, theta_plus, theta_minus)?;
        Ok(Self { theta_plus, theta_minus, ..self.clone() })
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn theta_plus(&self) -> f64 {
        self.theta_plus
    }

    pub fn theta_minus(&self) -> f64 {
        self.theta_minus
    }

    pub fn theta(&self, ty: Type) -> f64 {
        match ty {
            Type::Plus => self.theta_plus,
            Type::Minus => self.theta_minus,
        }
    }

    /// The coefficient 𝔪 of the competition death rate `n·N·𝔪/K`.
    pub fn competition(&self) -> f64 {
        self.competition
    }

    /// Per-pair competition rate `𝔪/K` in natural time.
    pub fn competition_per_pair(&self) -> f64 {
        self.competition / self.k as f64
    }

    pub fn plus_law(&self) -> &ReproductionLaw {
        &self.plus
    }

    pub fn minus_law(&self) -> &ReproductionLaw {
        &self.minus
    }

    pub fn law(&self, ty: Type) -> &ReproductionLaw {
        match ty {
            Type::Plus => &self.plus,
            Type::Minus => &self.minus,
        }
    }

    pub fn family(&self) -> Option<&LawFamily> {
        self.family.as_deref()
    }
}

fn check_common(k: u64, theta_plus: f64, theta_minus: f64) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParams("carrying capacity K must be at least 1".into()));
    }
    for (name, th) in [("theta_plus", theta_plus), ("theta_minus", theta_minus)] {
        if !(th.is_finite() && th >= 0.0) {
            return Err(Error::InvalidParams(format!("{name} must be finite and >= 0, got {th}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let fam = Arc::new(LawFamily::moran_f64(1.0).unwrap());
        assert!(ModelParams::new(fam.clone(), 0, 0.0, 0.0).is_err());
        assert!(ModelParams::new(fam.clone(), 10, -1.0, 0.0).is_err());
        let p = ModelParams::new(fam, 10, 0.5, 0.0).unwrap();
        assert_eq!(p.competition_per_pair(), 0.1);
        assert_eq!(p.with_k(20).unwrap().plus_law().mass_f64(2), 1.05);
        let law = ReproductionLaw::from_f64([(0, 1.0)]).unwrap();
        assert!(ModelParams::custom(1, law.clone(), law, -1.0, 0.0, 0.0).is_err());
    }
}
