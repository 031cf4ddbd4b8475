//! Linear Lifshitz pressure between the two half-spaces.
//!
//! Lengths are scaled by the gap: x = ξd/c, y = qd, κₙ = √(εₙx² + y²). With
//! Δ = 2πk_BTd/(ħc) the pressure is
//!
//! P_lin = ħc/(2π²d⁴) · Δ Σ′ₙ ∫₀^∞ dy y κ₂ Σ_σ r_σ e^{−2κ₂}/(1 − r_σ e^{−2κ₂}),
//!
//! with r_σ = F^σ₂₁F^σ₂₃; positive values attract.

use crate::constants::{C, HBAR_C, K_B};
use crate::error::{Error, Result};
use crate::fresnel::GapReflections;
use crate::materials::MaterialResponse;
use crate::quadrature::{
    integrate_semi_infinite_vec, matsubara_sum_vec, IntegrationResult, MatsubaraGrid, Options,
    SumOptions, Tolerance,
};
use crate::stack::{LayerStack, Temperature};
use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};

/// One contribution to the pressure, in Pa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureTerm {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
    pub evaluations: usize,
}

impl PressureTerm {
    pub fn zero() -> Self {
        PressureTerm {
            value: 0.0,
            error: 0.0,
            converged: true,
            evaluations: 0,
        }
    }

    pub(crate) fn scaled(r: IntegrationResult, factor: f64) -> Self {
        PressureTerm {
            value: factor * r.value,
            error: factor.abs() * r.abs_error,
            converged: r.converged,
            evaluations: r.evaluations,
        }
    }

    /// Error if the underlying quadrature did not converge.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::InvalidInput(format!(
                "quadrature did not reach tolerance (value {:.6e} +- {:.2e})",
                self.value, self.error
            )))
        }
    }
}

/// ε of a plate at the dimensionless frequency x for gap width `gap` [m].
pub(crate) fn eps_scaled(m: &MaterialResponse, x: f64, gap: f64) -> f64 {
    m.epsilon_at(x * C / gap).unwrap_or(f64::NAN)
}

/// y κ₂ Σ_σ r_σ e^{−2κ₂}/(1 − r_σ e^{−2κ₂}) at one point.
pub fn linear_integrand(eps1: f64, eps3: f64, x: f64, y: f64) -> f64 {
    let g = GapReflections::new(eps1, 1.0, eps3, x, y, 1.0);
    let ls = g.s21 * g.s23 * g.round_trip;
    let lp = g.p21 * g.p23 * g.round_trip;
    y * g.kappa[1] * (ls / (1.0 - ls) + lp / (1.0 - lp))
}

/// Δ Σ′ₙ ∫ dy of [`linear_integrand`]; the bracket of P_lin.
pub(crate) fn linear_measure<E1, E3>(eps1: E1, eps3: E3, grid: MatsubaraGrid, tol: Tolerance) -> IntegrationResult
where
    E1: Fn(f64) -> f64 + Sync,
    E3: Fn(f64) -> f64 + Sync,
{
    let inner = Options::new(tol.inner());
    let inner_ok = AtomicBool::new(true);
    let r = matsubara_sum_vec(
        |x| {
            let (e1, e3) = (eps1(x), eps3(x));
            let r = integrate_semi_infinite_vec(|y| [linear_integrand(e1, e3, x, y)], inner, 1);
            if !r.converged {
                inner_ok.store(false, Ordering::Relaxed);
            }
            (r.value, r.abs_error)
        },
        grid,
        SumOptions::new(tol).parallel(true),
        Options::new(tol).parallel(true),
    )
    .component(0);
    IntegrationResult {
        converged: r.converged && inner_ok.into_inner(),
        ..r
    }
}

/// Linear Lifshitz pressure [Pa] of the stack at its temperature.
pub fn pressure_linear(stack: &LayerStack, tol: Tolerance) -> PressureTerm {
    let d = stack.gap;
    let grid = stack.temperature.grid(d);
    let r = linear_measure(
        |x| eps_scaled(&stack.nonlinear, x, d),
        |x| eps_scaled(&stack.linear, x, d),
        grid,
        tol,
    );
    PressureTerm::scaled(r, HBAR_C / (2.0 * PI * PI * d.powi(4)))
}

fn check_eps(name: &str, e: f64) -> Result<()> {
    if e >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be >= 1 or inf, got {e}")))
    }
}

/// I_lin with P_lin = (ħc/d⁴)·I_lin at T → 0. `f64::INFINITY` marks a
/// perfect mirror.
pub fn i_lin_zero_t(eps_nl: f64, eps_lin: f64, tol: Tolerance) -> Result<IntegrationResult> {
    check_eps("eps_nl", eps_nl)?;
    check_eps("eps_lin", eps_lin)?;
    let r = linear_measure(|_| eps_nl, |_| eps_lin, MatsubaraGrid::Zero, tol);
    Ok(scale_result(r, 1.0 / (2.0 * PI * PI)))
}

/// I_lin with P_lin = (k_BT/d³)·I_lin at T → ∞.
pub fn i_lin_high_t(eps_nl: f64, eps_lin: f64, tol: Tolerance) -> Result<IntegrationResult> {
    check_eps("eps_nl", eps_nl)?;
    check_eps("eps_lin", eps_lin)?;
    // Spacing 2 turns Δ·f(0)/2 into f(0).
    let r = linear_measure(|_| eps_nl, |_| eps_lin, MatsubaraGrid::High { spacing: 2.0 }, tol);
    Ok(scale_result(r, 1.0 / (2.0 * PI)))
}

pub(crate) fn scale_result(r: IntegrationResult, f: f64) -> IntegrationResult {
    IntegrationResult {
        value: r.value * f,
        abs_error: r.abs_error * f.abs(),
        ..r
    }
}

/// The dimensional prefactor relating pressure to its dimensionless function
/// for a linear term: ħc/d⁴ at T → 0, k_BT/d³ otherwise.
pub fn linear_prefactor(temperature: Temperature, gap: f64) -> f64 {
    match temperature {
        Temperature::Zero => HBAR_C / gap.powi(4),
        Temperature::Finite(t) | Temperature::High(t) => K_B * t / gap.powi(3),
    }
}
