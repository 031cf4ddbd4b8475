//! Three-region plate geometry: nonlinear half-space | vacuum gap | linear half-space.

use crate::constants::{C, HBAR, K_B};
use crate::error::{Error, Result};
use crate::materials::MaterialResponse;
use crate::quadrature::MatsubaraGrid;
use std::f64::consts::PI;

/// Thermal state of the system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature {
    /// T → 0: Matsubara sums become frequency integrals.
    Zero,
    /// Full Matsubara sum at T [K] > 0.
    Finite(f64),
    /// T → ∞ at the given T [K]: only the zeroth Matsubara term survives.
    High(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    ZeroT,
    Finite,
    HighT,
}

impl Temperature {
    pub fn regime(&self) -> Regime {
        match self {
            Temperature::Zero => Regime::ZeroT,
            Temperature::Finite(_) => Regime::Finite,
            Temperature::High(_) => Regime::HighT,
        }
    }

    pub fn kelvin(&self) -> Option<f64> {
        match *self {
            Temperature::Zero => None,
            Temperature::Finite(t) | Temperature::High(t) => Some(t),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Temperature::Zero => Ok(()),
            Temperature::Finite(t) | Temperature::High(t) if t.is_finite() && t > 0.0 => Ok(()),
            other => Err(Error::InvalidInput(format!(
                "temperature must be finite and > 0, got {other:?}"
            ))),
        }
    }

    /// Matsubara grid in the dimensionless frequency x = ξ d / c.
    pub fn grid(&self, gap: f64) -> MatsubaraGrid {
        let spacing = |t: f64| 2.0 * PI * K_B * t * gap / (HBAR * C);
        match *self {
            Temperature::Zero => MatsubaraGrid::Zero,
            Temperature::Finite(t) => MatsubaraGrid::Finite {
                spacing: spacing(t),
            },
            Temperature::High(t) => MatsubaraGrid::High {
                spacing: spacing(t),
            },
        }
    }
}

/// Plate 1 (may carry χ³), a vacuum gap of width `gap`, plate 3 (linear).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    pub nonlinear: MaterialResponse,
    pub linear: MaterialResponse,
    pub gap: f64,
    pub temperature: Temperature,
}

impl LayerStack {
    pub fn new(
        nonlinear: MaterialResponse,
        linear: MaterialResponse,
        gap: f64,
        temperature: Temperature,
    ) -> Result<Self> {
        if !(gap.is_finite() && gap > 0.0) {
            return Err(Error::InvalidInput(format!("gap width must be > 0, got {gap}")));
        }
        temperature.validate()?;
        nonlinear.epsilon.validate()?;
        linear.epsilon.validate()?;
        if nonlinear.is_nonlinear() && linear.is_nonlinear() {
            return Err(Error::InvalidInput(
                "at most one plate may carry chi3 at first order; evaluate each plate separately".into(),
            ));
        }
        Ok(LayerStack {
            nonlinear,
            linear,
            gap,
            temperature,
        })
    }

    /// Same stack with the plates exchanged.
    pub fn swapped(&self) -> Self {
        LayerStack {
            nonlinear: self.linear.clone(),
            linear: self.nonlinear.clone(),
            gap: self.gap,
            temperature: self.temperature,
        }
    }

    pub fn with_gap(&self, gap: f64) -> Result<Self> {
        LayerStack::new(self.nonlinear.clone(), self.linear.clone(), gap, self.temperature)
    }

    /// True when the pressure at every gap follows from the value at one gap
    /// by pure power-law scaling.
    pub fn is_scale_free(&self) -> bool {
        !matches!(self.temperature, Temperature::Finite(_))
            && self.nonlinear.epsilon.is_dispersionless()
            && self.linear.epsilon.is_dispersionless()
    }
}
