//! The deterministic flow that pulls the rescaled population onto the line
//! `Γ = {x⁺ + x⁻ = 1}`, its vector field and the limiting projection.

use ode_solvers::{Dopri5, OutputType, System, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flow integrator tolerance (relative and absolute).
pub const FLOW_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanePoint {
    pub x_plus: f64,
    pub x_minus: f64,
}

impl PlanePoint {
    pub fn new(x_plus: f64, x_minus: f64) -> Self {
        Self { x_plus, x_minus }
    }

    /// `‖|x|‖ = x⁺ + x⁻`.
    pub fn total(&self) -> f64 {
        self.x_plus + self.x_minus
    }

    pub fn distance(&self, other: &PlanePoint) -> f64 {
        (self.x_plus - other.x_plus).hypot(self.x_minus - other.x_minus)
    }

    fn check_domain(&self) -> Result<()> {
        if !(self.total() > 0.0) || !self.x_plus.is_finite() || !self.x_minus.is_finite() {
            return Err(Error::InvalidParams(format!(
                "point ({}, {}) must have positive finite total mass",
                self.x_plus, self.x_minus
            )));
        }
        Ok(())
    }
}

/// `F(x) = 𝔪(1 − ‖|x|‖)x`.
pub fn vector_field(x: &PlanePoint, m: f64) -> PlanePoint {
    let scale = m * (1.0 - x.total());
    PlanePoint::new(scale * x.x_plus, scale * x.x_minus)
}

/// `Φ(x) = x / ‖|x|‖`.
pub fn gamma_projection(x: &PlanePoint) -> Result<PlanePoint> {
    x.check_domain()?;
    let total = x.total();
    Ok(PlanePoint::new(x.x_plus / total, x.x_minus / total))
}

struct Field {
    m: f64,
}

impl System<f64, Vector2<f64>> for Field {
    fn system(&self, _t: f64, y: &Vector2<f64>, dy: &mut Vector2<f64>) {
        let scale = self.m * (1.0 - (y[0] + y[1]));
        dy[0] = scale * y[0];
        dy[1] = scale * y[1];
    }
}

/// `ψ(x0, t)`, the solution of `ψ̇ = F(ψ)`, by adaptive Dormand–Prince.
pub fn katzenberger_flow(x0: &PlanePoint, t: f64, m: f64) -> Result<PlanePoint> {
    x0.check_domain()?;
    if !(t >= 0.0) || !(m > 0.0) {
        return Err(Error::InvalidParams(format!("need t >= 0 and m > 0, got t = {t}, m = {m}")));
    }
    if t == 0.0 {
        return Ok(*x0);
    }
    let y0 = Vector2::new(x0.x_plus, x0.x_minus);
    // Sparse output: the dense interpolant of ode_solvers 0.6 mis-evaluates
    // the final point, while the last accepted step lands exactly on `t`.
    let mut solver = Dopri5::from_param(
        Field { m },
        0.0,
        t,
        t,
        y0,
        FLOW_TOLERANCE,
        FLOW_TOLERANCE,
        0.9,
        0.04,
        0.2,
        10.0,
        t,
        0.0,
        1_000_000,
        1000,
        OutputType::Sparse,
    );
    solver.integrate().map_err(|e| Error::Integration(format!("{e:?}")))?;
    let y = solver.y_out().last().ok_or_else(|| Error::Integration("integrator produced no output".into()))?;
    Ok(PlanePoint::new(y[0], y[1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_examples() {
        assert_eq!(gamma_projection(&PlanePoint::new(2.0, 2.0)).unwrap(), PlanePoint::new(0.5, 0.5));
        assert_eq!(gamma_projection(&PlanePoint::new(3.0, 1.0)).unwrap(), PlanePoint::new(0.75, 0.25));
        let on = PlanePoint::new(0.3, 0.7);
        assert_eq!(gamma_projection(&on).unwrap(), on);
        assert!(gamma_projection(&PlanePoint::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn points_on_the_line_are_fixed() {
        let x = PlanePoint::new(0.25, 0.75);
        assert_eq!(vector_field(&x, 2.0), PlanePoint::new(0.0, 0.0));
        let y = katzenberger_flow(&x, 3.0, 2.0).unwrap();
        assert!(y.distance(&x) < 1e-12);
    }

    #[test]
    fn total_mass_relaxes_monotonically() {
        let big = PlanePoint::new(2.0, 2.0);
        let small = PlanePoint::new(0.2, 0.2);
        let mut prev = (big.total(), small.total());
        for t in [0.5, 1.0, 2.0, 4.0] {
            let (b, s) = (katzenberger_flow(&big, t, 1.0).unwrap(), katzenberger_flow(&small, t, 1.0).unwrap());
            assert!(b.total() < prev.0 && b.total() > 1.0);
            assert!(s.total() > prev.1 && s.total() < 1.0);
            prev = (b.total(), s.total());
        }
    }
}
