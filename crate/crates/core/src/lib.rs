//! Equilibrium Casimir pressure between two parallel half-spaces when one of
//! them carries an isotropic third-order (Kerr-type) susceptibility, evaluated
//! to first order in χ³ on the imaginary frequency axis.
//!
//! The crate also contains a small dense-matrix laboratory that checks the
//! operator identities behind the amended response function on a 1-D scalar
//! Helmholtz model.
//!
//! Module map:
//!
//! * [`materials`]: permittivity models and the isotropic χ³ contraction.
//! * [`fresnel`]: axial wavevectors, Fresnel coefficients and cavity factors.
//! * [`quadrature`]: semi-infinite Gauss–Kronrod integration and Matsubara sums.
//! * [`linear`]: the standard Lifshitz pressure.
//! * [`nonlinear`]: the χ³ correction, the transparent-plate formula and the
//!   crossover finder.
//! * [`lab`]: the operator laboratory.

// `!(x > 0.0)` is the NaN-rejecting form throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod error;
pub mod fresnel;
pub mod lab;
pub mod linear;
pub mod materials;
pub mod nonlinear;
pub mod quadrature;
pub mod stack;

pub use error::{Error, Result};
pub use linear::{i_lin_high_t, i_lin_zero_t, pressure_linear, PressureTerm};
pub use materials::{Axis, EpsilonTable, MaterialResponse, Permittivity};
pub use nonlinear::{
    crossover_distance, i_nl_high_t, i_nl_zero_t, pressure, pressure_nonlinear,
    pressure_transparent_mirror, Crossover, PressureResult,
};
pub use quadrature::{IntegrationResult, MatsubaraGrid, Tolerance};
pub use stack::{LayerStack, Regime, Temperature};
