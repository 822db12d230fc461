use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::LimitConstants;

/// Tolerance below zero within which the diffusion coefficient is clamped.
pub const VARIANCE_TOLERANCE: f64 = 1e-12;

/// Limit constants of the frequency diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionParams {
    pub m: f64,
    pub s_plus: f64,
    pub s_minus: f64,
    pub v_plus: f64,
    pub v_minus: f64,
    pub theta_plus: f64,
    pub theta_minus: f64,
}

impl DiffusionParams {
    pub fn new(
        m: f64,
        s_plus: f64,
        s_minus: f64,
        v_plus: f64,
        v_minus: f64,
        theta_plus: f64,
        theta_minus: f64,
    ) -> Result<Self> {
        let all = [m, s_plus, s_minus, v_plus, v_minus, theta_plus, theta_minus];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("diffusion constants must be finite".into()));
        }
        if m <= 0.0 || v_plus <= 0.0 || v_minus <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "need m > 0 and v± > 0, got m = {m}, v+ = {v_plus}, v- = {v_minus}"
            )));
        }
        if theta_plus < 0.0 || theta_minus < 0.0 {
            return Err(Error::InvalidParams("mutation intensities must be >= 0".into()));
        }
        // (m + v⁻)w(1−w) − (v⁺ − v⁻)w²(1−w) = w(1−w)[(m + v⁻) − (v⁺ − v⁻)w]
        // is nonnegative on [0, 1] iff it is at w = 1.
        if v_plus - v_minus > m + v_minus {
            return Err(Error::InvalidParams(format!(
                "diffusion coefficient negative near w = 1: v+ - v- = {} > m + v- = {}",
                v_plus - v_minus,
                m + v_minus
            )));
        }
        Ok(Self { m, s_plus, s_minus, v_plus, v_minus, theta_plus, theta_minus })
    }

    pub fn from_constants(c: &LimitConstants, theta_plus: f64, theta_minus: f64) -> Result<Self> {
        Self::new(c.m, c.s_plus, c.s_minus, c.v_plus, c.v_minus, theta_plus, theta_minus)
    }

    /// Moran limit: `𝔪 = 𝔳^± = 1`, `𝔰⁺ = s`, `𝔰⁻ = 0`.
    pub fn moran(s: f64, theta_plus: f64, theta_minus: f64) -> Result<Self> {
        Self::new(1.0, s, 0.0, 1.0, 1.0, theta_plus, theta_minus)
    }

    /// `Δ = (𝔰⁺ − 𝔳⁺) − (𝔰⁻ − 𝔳⁻)`.
    pub fn delta(&self) -> f64 {
        (self.s_plus - self.v_plus) - (self.s_minus - self.v_minus)
    }

    /// Conditions under which the dual chain has nonnegative rates:
    /// `Δ ≥ 0`, `𝔳⁺ ≥ 𝔳⁻` and `θ⁻ = 0`.
    pub fn check_dual(&self) -> Result<()> {
        if self.delta() < 0.0 {
            return Err(Error::InvalidDualParams(format!("need (s+ - v+) >= (s- - v-), got delta = {}", self.delta())));
        }
        if self.v_plus < self.v_minus {
            return Err(Error::InvalidDualParams(format!("need v+ >= v-, got {} < {}", self.v_plus, self.v_minus)));
        }
        if self.theta_minus != 0.0 {
            return Err(Error::InvalidDualParams(format!("need theta- = 0, got {}", self.theta_minus)));
        }
        Ok(())
    }

    /// Dual rates at `n`: `(up, down)` with up `Δn + (𝔳⁺ − 𝔳⁻)C(n,2)` and
    /// down `θ⁺n + (𝔪 + 𝔳⁻)C(n,2)`.
    pub fn dual_rates(&self, n: u64) -> (f64, f64) {
        let nf = n as f64;
        let pairs = nf * (nf - 1.0) / 2.0;
        if n == 0 {
            return (0.0, 0.0);
        }
        (
            self.delta() * nf + (self.v_plus - self.v_minus) * pairs,
            self.theta_plus * nf + (self.m + self.v_minus) * pairs,
        )
    }

    /// Default Euler–Maruyama step `10⁻⁴·min(1, 1/(𝔪 + 𝔳⁺ + 𝔳⁻))`.
    pub fn default_dt(&self) -> f64 {
        1e-4 * (1.0f64).min(1.0 / (self.m + self.v_plus + self.v_minus))
    }
}

fn check_unit(w: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::InvalidParams(format!("frequency must lie in [0, 1], got {w}")));
    }
    Ok(())
}

/// `−Δ·w(1−w) + θ⁺(1−w) − θ⁻w`.
pub fn drift(w: f64, p: &DiffusionParams) -> f64 {
    -p.delta() * w * (1.0 - w) + p.theta_plus * (1.0 - w) - p.theta_minus * w
}

/// `(𝔪 + 𝔳⁻)w(1−w) − (𝔳⁺ − 𝔳⁻)w²(1−w)`, clamped to zero within the
/// rounding tolerance.
pub fn diffusion_coefficient(w: f64, p: &DiffusionParams) -> Result<f64> {
    check_unit(w)?;
    let value = (p.m + p.v_minus) * w * (1.0 - w) - (p.v_plus - p.v_minus) * w * w * (1.0 - w);
    if value >= 0.0 {
        Ok(value)
    } else if value >= -VARIANCE_TOLERANCE {
        Ok(0.0)
    } else {
        Err(Error::NegativeVariance { w, value })
    }
}
