//! First-order χ³ correction to the Casimir pressure.
//!
//! Both frequency integrals are Wick-rotated onto the Matsubara frequencies,
//! where every Fresnel coefficient is real and p = iκ. In gap-scaled
//! variables (x = ξd/c, y = qd, primed for the second frequency) the pressure
//! is
//!
//! P_nl = −(χ³/ε₀)(ħc/d⁴)² · 3/(256π⁶) · Δ²Σ′ₙΣ′ₘ ∫∫ dy dy′ J,
//!
//! J = −2e^{−2(κ₂+κ₂′)}/((κ₁+κ₁′)κ₁′) · yy′(κ₂²/κ₁²)
//!     · {[x²F^s₂₃T_s² − κ₁²F^p₂₃T_p²] M̂_x′ − y²F^p₂₃T_p² M̂_z′},
//!
//! where T_σ = (1 − F^σ₂₁)/(1 − F^σ₂₁F^σ₂₃e^{−2κ₂}) and M̂ = x′²M are the
//! frequency-weighted M functions. Positive values attract.
//!
//! Production evaluation splits 1/(κ₁+κ₁′) = ∫₀^∞ e^{−t(κ₁+κ₁′)} dt, which
//! turns the four-fold integral into a one-dimensional integral over t of
//! products of two-dimensional transforms.

use crate::constants::{C, EPSILON_0, HBAR, HBAR_C, K_B};
use crate::error::{Error, Result};
use crate::fresnel::GapReflections;
use crate::linear::{eps_scaled, pressure_linear, scale_result, PressureTerm};
use crate::materials::Permittivity;
use crate::quadrature::{
    double_matsubara_sum, integrate_2d, integrate_semi_infinite_vec, matsubara_sum_vec,
    IntegrationResult, MatsubaraGrid, Options, SumOptions, Tolerance,
};
use crate::stack::{LayerStack, Regime, Temperature};
use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

/// a(ω) = (ħ/πε₀)(ω²/c²) coth(ħω/2k_BT) on the real axis [SI].
pub fn thermal_weight_a(omega: f64, temperature: Temperature) -> f64 {
    let base = HBAR * omega * omega / (PI * EPSILON_0 * C * C);
    match temperature {
        Temperature::Zero => base,
        Temperature::High(t) => 2.0 * omega * K_B * t / (PI * EPSILON_0 * C * C),
        Temperature::Finite(t) => {
            if omega == 0.0 {
                0.0
            } else {
                base / (HBAR * omega / (2.0 * K_B * t)).tanh()
            }
        }
    }
}

/// Weight wₙ that replaces ∫₀^∞ dω a(ω) Im g(ω) by Σ′ₙ wₙ g(iξₙ):
/// −(2k_BT/ε₀)(ξₙ/c)², halved at n = 0.
pub fn matsubara_weight(n: usize, kelvin: f64) -> f64 {
    let xi = 2.0 * PI * K_B * kelvin * n as f64 / HBAR;
    let w = -2.0 * K_B * kelvin / EPSILON_0 * (xi / C).powi(2);
    if n == 0 {
        0.5 * w
    } else {
        w
    }
}

/// (1 − F^s₂₁)/(1 − F^s₂₁F^s₂₃e^{−2κ₂}).
pub fn transmission_s(g: &GapReflections) -> f64 {
    (1.0 - g.s21) / (1.0 - g.s21 * g.s23 * g.round_trip)
}

pub fn transmission_p(g: &GapReflections) -> f64 {
    (1.0 - g.p21) / (1.0 - g.p21 * g.p23 * g.round_trip)
}

/// (F^s₂₃ − F^s₂₁F^s₂₁F^s₂₃)/(1 − F^s₂₁F^s₂₃e^{−2κ₂}).
pub fn dressed_s(g: &GapReflections) -> f64 {
    (g.s23 - g.s21 * g.s21 * g.s23) / (1.0 - g.s21 * g.s23 * g.round_trip)
}

pub fn dressed_p(g: &GapReflections) -> f64 {
    (g.p23 - g.p21 * g.p21 * g.p23) / (1.0 - g.p21 * g.p23 * g.round_trip)
}

/// M_x = 2R_s + (3q²/k₁² − 2)R_p with k₁² = −ε₁ν² on the imaginary axis.
/// Diverges at ν = 0 unless R_p vanishes; use [`m_x_weighted`] there.
pub fn m_x(g: &GapReflections) -> f64 {
    2.0 * dressed_s(g) + (q_over_k1_sq(g) * 3.0 - 2.0) * dressed_p(g)
}

/// M_z = R_s + (4q²/k₁² − 1)R_p.
pub fn m_z(g: &GapReflections) -> f64 {
    dressed_s(g) + (q_over_k1_sq(g) * 4.0 - 1.0) * dressed_p(g)
}

fn q_over_k1_sq(g: &GapReflections) -> f64 {
    if g.eps[0].is_infinite() {
        0.0
    } else {
        -g.q * g.q / (g.eps[0] * g.nu * g.nu)
    }
}

/// ν²M_x, finite at ν = 0.
pub fn m_x_weighted(g: &GapReflections) -> f64 {
    let (nu2, q2) = (g.nu * g.nu, g.q * g.q);
    2.0 * nu2 * dressed_s(g) - (3.0 * q2 / g.eps[0] + 2.0 * nu2) * dressed_p(g)
}

/// ν²M_z.
pub fn m_z_weighted(g: &GapReflections) -> f64 {
    let (nu2, q2) = (g.nu * g.nu, g.q * g.q);
    nu2 * dressed_s(g) - (4.0 * q2 / g.eps[0] + nu2) * dressed_p(g)
}

/// Unprimed factors (u_x, u_z) of J, including e^{−2κ₂}.
fn u_parts(g: &GapReflections) -> [f64; 2] {
    if g.eps[0].is_infinite() {
        return [0.0; 2];
    }
    let (x, y) = (g.nu, g.q);
    let k1 = g.kappa[0];
    let ts = transmission_s(g);
    let tp = transmission_p(g);
    let pre = y * (g.kappa[1] * g.kappa[1]) / (k1 * k1) * g.round_trip;
    let sp = g.p23 * tp * tp;
    [
        pre * (x * x * g.s23 * ts * ts - k1 * k1 * sp),
        -pre * y * y * sp,
    ]
}

/// Primed factors (v_x, v_z) of J, including e^{−2κ₂′}/κ₁′.
fn v_parts(g: &GapReflections) -> [f64; 2] {
    if g.eps[0].is_infinite() {
        return [0.0; 2];
    }
    let pre = g.q * g.round_trip / g.kappa[0];
    [pre * m_x_weighted(g), pre * m_z_weighted(g)]
}

/// The nonlinear kernel at one pair of spectral points, in gap-scaled units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlKernelPoint {
    pub unprimed: GapReflections,
    pub primed: GapReflections,
}

impl NlKernelPoint {
    /// `eps = [ε_nl, ε_lin]` at x, `eps_primed` at x′; `f64::INFINITY` marks
    /// a perfect mirror.
    pub fn new(eps: [f64; 2], eps_primed: [f64; 2], (x, y): (f64, f64), (xp, yp): (f64, f64)) -> Self {
        NlKernelPoint {
            unprimed: GapReflections::new(eps[0], 1.0, eps[1], x, y, 1.0),
            primed: GapReflections::new(eps_primed[0], 1.0, eps_primed[1], xp, yp, 1.0),
        }
    }

    fn prefactor(&self) -> f64 {
        let (g, h) = (&self.unprimed, &self.primed);
        let (k1, k1p) = (g.kappa[0], h.kappa[0]);
        -2.0 * g.round_trip * h.round_trip / ((k1 + k1p) * k1p) * g.q * h.q * (g.kappa[1] * g.kappa[1])
            / (k1 * k1)
    }

    /// s-polarised contribution to J.
    pub fn s_block(&self) -> f64 {
        let g = &self.unprimed;
        if g.eps[0].is_infinite() {
            return 0.0;
        }
        let ts = transmission_s(g);
        self.prefactor() * g.nu * g.nu * g.s23 * ts * ts * m_x_weighted(&self.primed)
    }

    /// p-polarised contribution to J.
    pub fn p_block(&self) -> f64 {
        let g = &self.unprimed;
        if g.eps[0].is_infinite() {
            return 0.0;
        }
        let tp = transmission_p(g);
        let sp = g.p23 * tp * tp;
        let k1 = g.kappa[0];
        self.prefactor()
            * (-k1 * k1 * sp * m_x_weighted(&self.primed) - g.q * g.q * sp * m_z_weighted(&self.primed))
    }

    pub fn value(&self) -> f64 {
        self.s_block() + self.p_block()
    }
}

/// J at one point; see [`NlKernelPoint`].
pub fn pnl_integrand(point: &NlKernelPoint) -> f64 {
    point.value()
}

/// Kernel for a transparent nonlinear plate facing a perfect mirror:
/// −2e^{−2(κ+κ′)}/((κ+κ′)κ′) · yy′[x²(4x′²+3y′²) + y²(6x′²+7y′²)].
pub fn ct_integrand(x: f64, y: f64, xp: f64, yp: f64) -> f64 {
    let k = x.hypot(y);
    let kp = xp.hypot(yp);
    let n = x * x * (4.0 * xp * xp + 3.0 * yp * yp) + y * y * (6.0 * xp * xp + 7.0 * yp * yp);
    -2.0 * (-2.0 * (k + kp)).exp() / ((k + kp) * kp) * y * yp * n
}

/// A kernel −2/(κ₁+κ₁′)·Σⱼ uⱼ(x, y) vⱼ(x′, y′) whose two halves share the
/// same (x, y) domain.
trait Separable: Sync {
    /// (κ₁, u, v) at (x, y).
    fn parts(&self, x: f64, y: f64) -> (f64, [f64; 2], [f64; 2]);
}

struct Appendix<E1, E3> {
    eps1: E1,
    eps3: E3,
}

impl<E1, E3> Separable for Appendix<E1, E3>
where
    E1: Fn(f64) -> f64 + Sync,
    E3: Fn(f64) -> f64 + Sync,
{
    fn parts(&self, x: f64, y: f64) -> (f64, [f64; 2], [f64; 2]) {
        let g = GapReflections::new((self.eps1)(x), 1.0, (self.eps3)(x), x, y, 1.0);
        (g.kappa[0], u_parts(&g), v_parts(&g))
    }
}

struct TransparentMirror;

impl Separable for TransparentMirror {
    fn parts(&self, x: f64, y: f64) -> (f64, [f64; 2], [f64; 2]) {
        let k = x.hypot(y);
        let e = (-2.0 * k).exp();
        let (x2, y2) = (x * x, y * y);
        let v = y * e / k;
        (
            k,
            [x2 * y * e, y2 * y * e],
            [v * (4.0 * x2 + 3.0 * y2), v * (6.0 * x2 + 7.0 * y2)],
        )
    }
}

/// Δ²Σ′Σ′∫∫ dy dy′ of a separable kernel via the Laplace split.
fn separable_measure<K: Separable>(kernel: &K, grid: MatsubaraGrid, tol: Tolerance) -> IntegrationResult {
    let mid = tol.inner();
    let y_opts = Options::new(mid.inner());
    let x_opts = Options::new(mid).parallel(true);
    let sum_opts = SumOptions::new(mid).parallel(true);
    let inner_ok = AtomicBool::new(true);
    let evaluations = AtomicUsize::new(0);

    let transforms = |t: f64| -> [f64; 4] {
        let r = matsubara_sum_vec::<4, _>(
            |x| {
                let r = integrate_semi_infinite_vec(
                    |y| {
                        let (k1, u, v) = kernel.parts(x, y);
                        let w = (-t * k1).exp();
                        [u[0] * w, u[1] * w, v[0] * w, v[1] * w]
                    },
                    y_opts,
                    4,
                );
                evaluations.fetch_add(r.evaluations, Ordering::Relaxed);
                if !r.converged {
                    inner_ok.store(false, Ordering::Relaxed);
                }
                (r.value, r.abs_error)
            },
            grid,
            sum_opts,
            x_opts,
        );
        if !r.converged {
            inner_ok.store(false, Ordering::Relaxed);
        }
        r.value
    };

    let outer = integrate_semi_infinite_vec::<2, _>(
        |t| {
            let z = transforms(t);
            let (a, b) = (z[0] * z[2], z[1] * z[3]);
            [-2.0 * (a + b), 2.0 * (a.abs() + b.abs())]
        },
        Options::new(tol).parallel(true),
        1,
    );
    IntegrationResult {
        value: outer.value[0],
        // Each transform carries relative error ≤ mid.rel, so a product
        // carries at most twice that.
        abs_error: outer.abs_error[0] + 2.0 * mid.rel * outer.value[1],
        evaluations: evaluations.into_inner(),
        converged: outer.converged && inner_ok.into_inner(),
    }
}

/// −3/(256π⁶): I_nl at T → 0 per unit of the four-fold kernel integral.
const NL_ZERO_T: f64 = -3.0 / (256.0 * PI * PI * PI * PI * PI * PI);
const NL_HIGH_T: f64 = -3.0 / (256.0 * PI * PI * PI * PI);

fn nl_pressure_factor(chi3: f64, gap: f64) -> f64 {
    chi3 / EPSILON_0 * (HBAR_C / gap.powi(4)).powi(2) * NL_ZERO_T
}

/// Stack with χ³ on the first plate, or `None` if neither plate has χ³.
fn oriented(stack: &LayerStack) -> Option<LayerStack> {
    if stack.nonlinear.is_nonlinear() {
        Some(stack.clone())
    } else if stack.linear.is_nonlinear() {
        Some(stack.swapped())
    } else {
        None
    }
}

/// First-order nonlinear pressure [Pa].
pub fn pressure_nonlinear(stack: &LayerStack, tol: Tolerance) -> PressureTerm {
    let Some(s) = oriented(stack) else {
        return PressureTerm::zero();
    };
    if s.nonlinear.epsilon.is_perfect_mirror() {
        return PressureTerm::zero();
    }
    let d = s.gap;
    let kernel = Appendix {
        eps1: |x| eps_scaled(&s.nonlinear, x, d),
        eps3: |x| eps_scaled(&s.linear, x, d),
    };
    let r = separable_measure(&kernel, s.temperature.grid(d), tol);
    PressureTerm::scaled(r, nl_pressure_factor(s.nonlinear.chi3, d))
}

/// Same quantity as [`pressure_nonlinear`] by brute-force nested quadrature
/// of the unsplit kernel. Four nested adaptive levels make this expensive at
/// T → 0; intended for cross-checks.
pub fn pressure_nonlinear_direct(stack: &LayerStack, tol: Tolerance) -> PressureTerm {
    let Some(s) = oriented(stack) else {
        return PressureTerm::zero();
    };
    if s.nonlinear.epsilon.is_perfect_mirror() {
        return PressureTerm::zero();
    }
    let d = s.gap;
    let eps = |x: f64| [eps_scaled(&s.nonlinear, x, d), eps_scaled(&s.linear, x, d)];
    let inner = tol.inner();
    let r = double_matsubara_sum(
        |x, xp| {
            let (e, ep) = (eps(x), eps(xp));
            integrate_2d(|y, yp| NlKernelPoint::new(e, ep, (x, y), (xp, yp)).value(), inner)
        },
        s.temperature.grid(d),
        tol,
    );
    PressureTerm::scaled(r, nl_pressure_factor(s.nonlinear.chi3, d))
}

fn check_nl_eps(eps_nl: f64, eps_lin: f64) -> Result<()> {
    if !(eps_nl.is_finite() && eps_nl >= 1.0) {
        return Err(Error::InvalidInput(format!("eps_nl must be finite and >= 1, got {eps_nl}")));
    }
    if !(eps_lin >= 1.0) {
        return Err(Error::InvalidInput(format!("eps_lin must be >= 1 or inf, got {eps_lin}")));
    }
    Ok(())
}

/// I_nl with P_nl = (χ³/ε₀)(ħc/d⁴)²·I_nl at T → 0.
pub fn i_nl_zero_t(eps_nl: f64, eps_lin: f64, tol: Tolerance) -> Result<IntegrationResult> {
    check_nl_eps(eps_nl, eps_lin)?;
    let kernel = Appendix {
        eps1: |_| eps_nl,
        eps3: |_| eps_lin,
    };
    Ok(scale_result(separable_measure(&kernel, MatsubaraGrid::Zero, tol), NL_ZERO_T))
}

/// I_nl with P_nl = (χ³/ε₀)(k_BT/d³)²·I_nl at T → ∞.
pub fn i_nl_high_t(eps_nl: f64, eps_lin: f64, tol: Tolerance) -> Result<IntegrationResult> {
    check_nl_eps(eps_nl, eps_lin)?;
    let kernel = Appendix {
        eps1: |_| eps_nl,
        eps3: |_| eps_lin,
    };
    // Spacing 2 makes Δ²/4 = 1, leaving the x = x′ = 0 slice.
    let r = separable_measure(&kernel, MatsubaraGrid::High { spacing: 2.0 }, tol);
    Ok(scale_result(r, NL_HIGH_T))
}

/// Dimensionless transparent-plate/mirror coefficient at T → 0.
pub fn i_ct_zero_t(tol: Tolerance) -> IntegrationResult {
    scale_result(separable_measure(&TransparentMirror, MatsubaraGrid::Zero, tol), NL_ZERO_T)
}

/// Dimensionless transparent-plate/mirror coefficient at T → ∞.
pub fn i_ct_high_t(tol: Tolerance) -> IntegrationResult {
    let r = separable_measure(&TransparentMirror, MatsubaraGrid::High { spacing: 2.0 }, tol);
    scale_result(r, NL_HIGH_T)
}

/// Pressure [Pa] on a transparent plate with χ³ facing a perfect mirror,
/// from the closed-form transparent-mirror kernel.
pub fn pressure_transparent_mirror(
    gap: f64,
    temperature: Temperature,
    chi3: f64,
    tol: Tolerance,
) -> Result<PressureTerm> {
    // Validates gap and temperature.
    LayerStack::new(
        crate::MaterialResponse::new(Permittivity::Constant(1.0), chi3)?,
        crate::MaterialResponse::perfect_mirror(),
        gap,
        temperature,
    )?;
    if chi3 == 0.0 {
        return Ok(PressureTerm::zero());
    }
    let r = separable_measure(&TransparentMirror, temperature.grid(gap), tol);
    Ok(PressureTerm::scaled(r, nl_pressure_factor(chi3, gap)))
}

/// Linear and nonlinear pressure with diagnostics; values in Pa, positive
/// attracts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureResult {
    pub p_linear: f64,
    pub p_nonlinear: f64,
    pub p_total: f64,
    pub err_linear: f64,
    pub err_nonlinear: f64,
    pub regime: Regime,
    pub converged: bool,
    pub evaluations: usize,
}

pub fn pressure(stack: &LayerStack, tol: Tolerance) -> PressureResult {
    let lin = pressure_linear(stack, tol);
    let nl = pressure_nonlinear(stack, tol);
    PressureResult {
        p_linear: lin.value,
        p_nonlinear: nl.value,
        p_total: lin.value + nl.value,
        err_linear: lin.error,
        err_nonlinear: nl.error,
        regime: stack.temperature.regime(),
        converged: lin.converged && nl.converged,
        evaluations: lin.evaluations + nl.evaluations,
    }
}

/// Outcome of [`crossover_distance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Crossover {
    /// |P_nl| = |P_lin| at `distance` [m].
    Found { distance: f64, iterations: usize },
    /// The two magnitudes do not cross inside the search window.
    None,
}

pub const CROSSOVER_WINDOW: (f64, f64) = (1e-11, 1e-4);

/// Gap width where the nonlinear and linear pressure magnitudes are equal,
/// by bisection on ln d over [`CROSSOVER_WINDOW`]. The gap of `stack` is
/// ignored.
pub fn crossover_distance(stack: &LayerStack, tol: Tolerance) -> Result<Crossover> {
    if oriented(stack).is_none() {
        return Ok(Crossover::None);
    }
    let (lo, hi) = CROSSOVER_WINDOW;
    let mut evaluate: Box<dyn FnMut(f64) -> Result<f64>> = if stack.is_scale_free() {
        // Both terms are pure power laws; one evaluation fixes them.
        let r = pressure(stack, tol);
        let d0 = stack.gap;
        let a = match stack.temperature {
            Temperature::Zero => 4,
            _ => 3,
        };
        let (pl, pn) = (r.p_linear.abs(), r.p_nonlinear.abs());
        Box::new(move |d: f64| {
            let s = d0 / d;
            Ok((pn * s.powi(2 * a)).ln() - (pl * s.powi(a)).ln())
        })
    } else {
        Box::new(|d: f64| {
            let r = pressure(&stack.with_gap(d)?, tol);
            Ok(r.p_nonlinear.abs().ln() - r.p_linear.abs().ln())
        })
    };
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let (fa, fb) = (evaluate(a.exp())?, evaluate(b.exp())?);
    if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() {
        return Ok(Crossover::None);
    }
    let mut fa = fa;
    let mut iterations = 0;
    while b - a > 1e-12 {
        let m = 0.5 * (a + b);
        let fm = evaluate(m.exp())?;
        iterations += 1;
        if fm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(Crossover::Found {
        distance: (0.5 * (a + b)).exp(),
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::MaterialResponse;
    use proptest::prelude::*;

    fn tol(rel: f64) -> Tolerance {
        Tolerance::new(rel).unwrap()
    }

    fn plate(eps: f64, chi3: f64) -> MaterialResponse {
        if eps.is_infinite() {
            MaterialResponse::perfect_mirror()
        } else {
            MaterialResponse::new(Permittivity::Constant(eps), chi3).unwrap()
        }
    }

    fn refl(s21: f64, s23: f64, p21: f64, p23: f64, nu: f64, q: f64) -> GapReflections {
        let mut g = GapReflections::new(2.0, 1.0, 3.0, nu, q, 1.0);
        g.s21 = s21;
        g.s23 = s23;
        g.p21 = p21;
        g.p23 = p23;
        g
    }

    #[test]
    fn m_functions_read_off() {
        let g = refl(0.0, 0.0, 0.0, 0.0, 0.5, 0.7);
        assert_eq!((m_x(&g), m_z(&g)), (0.0, 0.0));
        let g = refl(0.0, -0.4, 0.0, 0.0, 0.5, 0.7);
        assert_eq!(m_x(&g), -0.8);
        assert_eq!(m_z(&g), -0.4);
        // Far plates: cavity factor → 1.
        let mut g = refl(0.3, -0.4, 0.2, 0.6, 0.5, 0.7);
        g.round_trip = 0.0;
        let rs = -0.4 - 0.09 * -0.4;
        let rp = 0.6 - 0.04 * 0.6;
        let ratio = -0.49 / (2.0 * 0.25);
        assert!((m_x(&g) - (2.0 * rs + (3.0 * ratio - 2.0) * rp)).abs() < 1e-15);
        assert!((m_x_weighted(&g) - 0.25 * m_x(&g)).abs() < 1e-15);
        assert!((m_z_weighted(&g) - 0.25 * m_z(&g)).abs() < 1e-15);
    }

    #[test]
    fn kernel_vanishes_without_reflection() {
        let pt = NlKernelPoint::new([1.0, 1.0], [1.0, 1.0], (0.3, 0.4), (0.2, 0.9));
        assert_eq!(pt.value(), 0.0);
        // Transparent χ plate with a transparent partner: primed reflections zero.
        let pt = NlKernelPoint::new([1.0, 4.0], [1.0, 1.0], (0.3, 0.4), (0.2, 0.9));
        assert_eq!(pnl_integrand(&pt), 0.0);
        let pt = NlKernelPoint::new([3.0, 1.0], [3.0, 1.0], (0.3, 0.4), (0.2, 0.9));
        assert_eq!(pt.value(), 0.0);
    }

    #[test]
    fn factorised_kernel_matches_point_kernel() {
        for (e1, e3) in [(1.0, f64::INFINITY), (2.5, 7.0), (10.0, 1.5)] {
            for &(x, y, xp, yp) in &[(0.3, 0.4, 0.2, 0.9), (0.0, 1.2, 0.7, 0.1), (1.5, 0.05, 0.0, 2.0)] {
                let k = Appendix {
                    eps1: |_| e1,
                    eps3: |_| e3,
                };
                let (k1, u, _) = k.parts(x, y);
                let (k1p, _, v) = k.parts(xp, yp);
                let sep = -2.0 / (k1 + k1p) * (u[0] * v[0] + u[1] * v[1]);
                let direct = NlKernelPoint::new([e1, e3], [e1, e3], (x, y), (xp, yp)).value();
                assert!((sep - direct).abs() <= 1e-13 * direct.abs().max(1e-300), "{sep} {direct}");
            }
        }
    }

    #[test]
    fn mirror_nonlinear_plate_contributes_nothing() {
        let pt = NlKernelPoint::new([f64::INFINITY, 3.0], [f64::INFINITY, 3.0], (0.3, 0.4), (0.2, 0.9));
        assert_eq!(pt.value(), 0.0);
        assert!(i_nl_zero_t(f64::INFINITY, 2.0, tol(1e-6)).is_err());
    }

    #[test]
    fn zero_chi_gives_zero() {
        let s = LayerStack::new(plate(2.0, 0.0), plate(f64::INFINITY, 0.0), 1e-8, Temperature::Zero).unwrap();
        assert_eq!(pressure_nonlinear(&s, tol(1e-6)).value, 0.0);
        assert_eq!(crossover_distance(&s, tol(1e-6)).unwrap(), Crossover::None);
        let p = pressure_transparent_mirror(1e-8, Temperature::Zero, 0.0, tol(1e-6)).unwrap();
        assert_eq!(p.value, 0.0);
    }

    #[test]
    fn factorised_and_direct_paths_agree_at_high_t() {
        let s = LayerStack::new(plate(2.0, 1e-16), plate(6.0, 0.0), 1e-7, Temperature::High(300.0)).unwrap();
        let a = pressure_nonlinear(&s, tol(1e-9));
        let b = pressure_nonlinear_direct(&s, tol(1e-9));
        assert!((a.value / b.value - 1.0).abs() < 1e-7, "{a:?} {b:?}");
    }

    #[test]
    fn factorised_and_direct_paths_agree_at_finite_t() {
        // Hot enough that only a handful of Matsubara terms matter.
        let s = LayerStack::new(plate(3.0, 1e-16), plate(f64::INFINITY, 0.0), 2e-6, Temperature::Finite(600.0))
            .unwrap();
        let a = pressure_nonlinear(&s, tol(1e-7));
        let b = pressure_nonlinear_direct(&s, tol(1e-7));
        assert!((a.value / b.value - 1.0).abs() < 1e-5, "{a:?} {b:?}");
    }

    #[test]
    fn chi_on_either_plate_gives_same_pressure() {
        let a = LayerStack::new(plate(2.0, 1e-16), plate(5.0, 0.0), 1e-8, Temperature::Zero).unwrap();
        let b = a.swapped();
        let pa = pressure_nonlinear(&a, tol(1e-7)).value;
        let pb = pressure_nonlinear(&b, tol(1e-7)).value;
        assert_eq!(pa, pb);
    }

    #[test]
    fn limits_in_temperature() {
        let mk = |t| LayerStack::new(plate(1.5, 1e-16), plate(f64::INFINITY, 0.0), 1e-6, t).unwrap();
        let zero = pressure_nonlinear(&mk(Temperature::Zero), tol(1e-7)).value;
        let cold = pressure_nonlinear(&mk(Temperature::Finite(2.0)), tol(1e-7)).value;
        assert!((cold / zero - 1.0).abs() < 1e-3, "{cold} vs {zero}");
        let high = pressure_nonlinear(&mk(Temperature::High(2e4)), tol(1e-7)).value;
        let hot = pressure_nonlinear(&mk(Temperature::Finite(2e4)), tol(1e-7)).value;
        assert!((hot / high - 1.0).abs() < 1e-3, "{hot} vs {high}");
    }

    #[test]
    fn crossover_scales_with_chi() {
        let mk = |chi| LayerStack::new(plate(1.1, chi), plate(f64::INFINITY, 0.0), 1e-8, Temperature::Zero).unwrap();
        let d1 = match crossover_distance(&mk(2e-16), tol(1e-8)).unwrap() {
            Crossover::Found { distance, .. } => distance,
            Crossover::None => panic!("no crossover"),
        };
        let d2 = match crossover_distance(&mk(4e-16), tol(1e-8)).unwrap() {
            Crossover::Found { distance, .. } => distance,
            Crossover::None => panic!("no crossover"),
        };
        assert!((d2 / d1 / 2f64.powf(0.25) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn transparent_plate_has_no_linear_crossover() {
        let s = LayerStack::new(plate(1.0, 2e-16), plate(f64::INFINITY, 0.0), 1e-8, Temperature::Zero).unwrap();
        assert_eq!(crossover_distance(&s, tol(1e-6)).unwrap(), Crossover::None);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn kernel_is_finite_and_factorises(
            e1 in 1.0f64..50.0, e3 in 1.0f64..50.0,
            x in 0.0f64..4.0, y in 1e-3f64..4.0, xp in 0.0f64..4.0, yp in 1e-3f64..4.0,
        ) {
            let pt = NlKernelPoint::new([e1, e3], [e1, e3], (x, y), (xp, yp));
            prop_assert!(pt.value().is_finite());
            prop_assert_eq!(pt.value(), pt.s_block() + pt.p_block());
        }

        #[test]
        fn linear_in_chi(chi in 1e-20f64..1e-14) {
            let mk = |c| LayerStack::new(plate(2.0, c), plate(4.0, 0.0), 1e-7, Temperature::High(300.0)).unwrap();
            let a = pressure_nonlinear(&mk(chi), tol(1e-7)).value;
            let b = pressure_nonlinear(&mk(2.0 * chi), tol(1e-7)).value;
            prop_assert!((b - 2.0 * a).abs() <= 1e-14 * b.abs());
        }
    }
}
