//! Axial wavevectors, Fresnel coefficients and gap cavity factors for the
//! three-region stack.
//!
//! Layers are labelled 1 (nonlinear half-space), 2 (vacuum gap) and 3 (linear
//! half-space). `F_ln` is the reflection coefficient seen from layer `l` at its
//! interface with layer `n`.
//!
//! Two code paths exist. The complex functions work on either frequency axis
//! and follow the branch rule Im p ≥ 0. The production path works on the
//! imaginary axis only, where p = iκ with κ = √(ε ν² + q²) real and every
//! reflection coefficient is real; it never forms a complex number.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Which frequency axis a wavenumber `k0 = ω/c` or `ν = ξ/c` refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyAxis {
    Real,
    Imaginary,
}

/// Square root with Im ≥ 0; a real result is returned as the non-negative root.
pub fn branch_sqrt(z: Complex64) -> Complex64 {
    let s = z.sqrt();
    if s.im < 0.0 || (s.im == 0.0 && s.re < 0.0) {
        -s
    } else {
        s
    }
}

/// p = √(k² − q²) with Im p ≥ 0, where k² = ε k0² on the real axis and
/// k² = −ε ν² on the imaginary axis.
pub fn axial_wavevector(eps: f64, axis: FrequencyAxis, k0: f64, q: f64) -> Complex64 {
    match axis {
        FrequencyAxis::Real => branch_sqrt(Complex64::new(eps * k0 * k0 - q * q, 0.0)),
        FrequencyAxis::Imaginary => Complex64::new(0.0, (eps * k0 * k0 + q * q).sqrt()),
    }
}

fn checked_ratio(num: Complex64, den: Complex64, what: &str) -> Result<Complex64> {
    if den.norm() == 0.0 || !den.is_finite() {
        return Err(Error::SingularPoint(format!("{what}: vanishing denominator")));
    }
    Ok(num / den)
}

/// F^s_ln = (p_l − p_n)/(p_l + p_n).
pub fn fresnel_s(p_l: Complex64, p_n: Complex64) -> Result<Complex64> {
    checked_ratio(p_l - p_n, p_l + p_n, "fresnel_s")
}

/// F^p_ln = (ε_n p_l − ε_l p_n)/(ε_n p_l + ε_l p_n).
pub fn fresnel_p(eps_l: f64, eps_n: f64, p_l: Complex64, p_n: Complex64) -> Result<Complex64> {
    checked_ratio(
        eps_n * p_l - eps_l * p_n,
        eps_n * p_l + eps_l * p_n,
        "fresnel_p",
    )
}

/// Smallest tolerated modulus of 1 − F_a F_b e^{2ipd}.
pub const CAVITY_SINGULARITY: f64 = 1e-14;

/// 1/(1 − F_a F_b e^{2 i p d}).
pub fn cavity_factor(f_a: Complex64, f_b: Complex64, p_gap: Complex64, d: f64) -> Result<Complex64> {
    if !(d > 0.0) {
        return Err(Error::InvalidInput(format!("gap width must be > 0, got {d}")));
    }
    let den = Complex64::new(1.0, 0.0) - f_a * f_b * (Complex64::i() * 2.0 * p_gap * d).exp();
    if den.norm() < CAVITY_SINGULARITY {
        return Err(Error::SingularPoint(format!(
            "cavity denominator |1 - F F e^(2ipd)| = {:.3e}",
            den.norm()
        )));
    }
    Ok(den.inv())
}

/// Complex spectral point: per-layer k_n and p_n for the three regions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    pub axis: FrequencyAxis,
    /// ω/c or ξ/c.
    pub k0: f64,
    pub q: f64,
    pub eps: [f64; 3],
    pub k: [Complex64; 3],
    pub p: [Complex64; 3],
}

impl SpectralPoint {
    /// `eps` must be finite; the complex path has no symbolic mirror.
    pub fn new(axis: FrequencyAxis, k0: f64, q: f64, eps: [f64; 3]) -> Result<Self> {
        if !(k0 >= 0.0 && q >= 0.0) {
            return Err(Error::InvalidInput("frequency and momentum must be >= 0".into()));
        }
        if eps.iter().any(|e| !(e.is_finite() && *e >= 1.0)) {
            return Err(Error::InvalidInput(format!("permittivities must be finite and >= 1, got {eps:?}")));
        }
        let k = eps.map(|e| match axis {
            FrequencyAxis::Real => Complex64::new(e.sqrt() * k0, 0.0),
            FrequencyAxis::Imaginary => Complex64::new(0.0, e.sqrt() * k0),
        });
        let p = eps.map(|e| axial_wavevector(e, axis, k0, q));
        Ok(SpectralPoint { axis, k0, q, eps, k, p })
    }

    pub fn fresnel_s(&self, l: usize, n: usize) -> Result<Complex64> {
        fresnel_s(self.p[l - 1], self.p[n - 1])
    }

    pub fn fresnel_p(&self, l: usize, n: usize) -> Result<Complex64> {
        fresnel_p(self.eps[l - 1], self.eps[n - 1], self.p[l - 1], self.p[n - 1])
    }
}

/// κ = √(ε ν² + q²), the decay constant of p = iκ on the imaginary axis.
/// Infinite for a perfect mirror.
#[inline]
pub fn kappa(eps: f64, nu: f64, q: f64) -> f64 {
    if eps.is_infinite() {
        f64::INFINITY
    } else {
        (eps * nu * nu + q * q).sqrt()
    }
}

/// Imaginary-axis s reflection (κ_l − κ_n)/(κ_l + κ_n).
///
/// A perfect mirror on either side gives ∓1 for ν > 0. At ν = 0 every finite
/// medium has κ = q and the coefficient vanishes; the mirror is treated as the
/// ε → ∞ limit taken after ν → 0, so it vanishes as well.
#[inline]
pub fn reflection_s(kappa_l: f64, kappa_n: f64, nu: f64) -> f64 {
    match (kappa_l.is_infinite(), kappa_n.is_infinite()) {
        (false, false) => (kappa_l - kappa_n) / (kappa_l + kappa_n),
        _ if nu == 0.0 => 0.0,
        (false, true) => -1.0,
        (true, false) => 1.0,
        (true, true) => 0.0,
    }
}

/// Imaginary-axis p reflection (ε_n κ_l − ε_l κ_n)/(ε_n κ_l + ε_l κ_n).
#[inline]
pub fn reflection_p(eps_l: f64, eps_n: f64, kappa_l: f64, kappa_n: f64) -> f64 {
    match (eps_l.is_infinite(), eps_n.is_infinite()) {
        (false, false) => {
            (eps_n * kappa_l - eps_l * kappa_n) / (eps_n * kappa_l + eps_l * kappa_n)
        }
        (false, true) => 1.0,
        (true, false) => -1.0,
        (true, true) => 0.0,
    }
}

/// Reflection data for the gap at one imaginary-axis point (ν, q), gap width
/// in the same length unit as 1/ν and 1/q.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReflections {
    pub nu: f64,
    pub q: f64,
    pub eps: [f64; 3],
    pub kappa: [f64; 3],
    pub s21: f64,
    pub s23: f64,
    pub p21: f64,
    pub p23: f64,
    /// e^{2 i p₂ d} = e^{−2 κ₂ d}.
    pub round_trip: f64,
}

impl GapReflections {
    /// `eps_gap` is normally 1.
    pub fn new(eps1: f64, eps_gap: f64, eps3: f64, nu: f64, q: f64, d: f64) -> Self {
        let eps = [eps1, eps_gap, eps3];
        let kappa = eps.map(|e| kappa(e, nu, q));
        GapReflections {
            nu,
            q,
            eps,
            kappa,
            s21: reflection_s(kappa[1], kappa[0], nu),
            s23: reflection_s(kappa[1], kappa[2], nu),
            p21: reflection_p(eps[1], eps[0], kappa[1], kappa[0]),
            p23: reflection_p(eps[1], eps[2], kappa[1], kappa[2]),
            round_trip: (-2.0 * kappa[1] * d).exp(),
        }
    }

    /// 1/(1 − F^s₂₁ F^s₂₃ e^{−2κ₂d}).
    pub fn cavity_s(&self) -> Result<f64> {
        real_cavity(self.s21 * self.s23 * self.round_trip)
    }

    pub fn cavity_p(&self) -> Result<f64> {
        real_cavity(self.p21 * self.p23 * self.round_trip)
    }
}

fn real_cavity(loop_gain: f64) -> Result<f64> {
    let den = 1.0 - loop_gain;
    if den.abs() < CAVITY_SINGULARITY {
        return Err(Error::SingularPoint(format!("cavity denominator {den:.3e}")));
    }
    Ok(1.0 / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = 1e-14;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < TOL * (1.0 + b.norm())
    }

    #[test]
    fn wavevector_examples() {
        let p = axial_wavevector(1.0, FrequencyAxis::Real, 5.0, 3.0);
        assert!(close(p, Complex64::new(4.0, 0.0)));
        let p = axial_wavevector(1.0, FrequencyAxis::Real, 3.0, 5.0);
        assert!(close(p, Complex64::new(0.0, 4.0)));
        let p = axial_wavevector(1.0, FrequencyAxis::Imaginary, 3.0, 4.0);
        assert!(close(p, Complex64::new(0.0, 5.0)));
    }

    #[test]
    fn branch_sqrt_picks_upper_half_plane() {
        for z in [
            Complex64::new(-4.0, 0.0),
            Complex64::new(-4.0, -1e-300),
            Complex64::new(3.0, -2.0),
            Complex64::new(-3.0, -2.0),
        ] {
            let s = branch_sqrt(z);
            assert!(s.im >= 0.0, "{z} -> {s}");
            assert!(close(s * s, z));
        }
        assert_eq!(branch_sqrt(Complex64::new(9.0, 0.0)), Complex64::new(3.0, 0.0));
    }

    #[test]
    fn fresnel_examples() {
        let p = Complex64::new(0.0, 2.0);
        assert_eq!(fresnel_s(p, p).unwrap(), Complex64::new(0.0, 0.0));
        let r = fresnel_s(Complex64::new(0.0, 1.0), Complex64::new(0.0, 3.0)).unwrap();
        assert!(close(r, Complex64::new(-0.5, 0.0)));
        let z = Complex64::new(0.0, 0.0);
        assert!(fresnel_s(z, z).is_err());
        assert!(fresnel_p(1.0, 1.0, z, z).is_err());
    }

    #[test]
    fn fresnel_p_approaches_one_for_large_eps() {
        // Monotone approach of F^p_ln → 1 as ε_n → ∞ at fixed ξ, q.
        let (nu, q) = (1.3, 0.7);
        let pl = axial_wavevector(1.0, FrequencyAxis::Imaginary, nu, q);
        let mut last_gap = f64::INFINITY;
        for eps_n in [1e2, 1e4, 1e6] {
            let pn = axial_wavevector(eps_n, FrequencyAxis::Imaginary, nu, q);
            let f = fresnel_p(1.0, eps_n, pl, pn).unwrap();
            assert!(f.im.abs() < 1e-14);
            let gap = 1.0 - f.re;
            assert!(gap > 0.0 && gap < last_gap);
            last_gap = gap;
        }
        assert!(last_gap < 1e-2);
        // Same limit through the real-arithmetic path.
        let r = reflection_p(1.0, 1e6, kappa(1.0, nu, q), kappa(1e6, nu, q));
        assert!((1.0 - r - last_gap).abs() < 1e-12);
    }

    #[test]
    fn cavity_examples() {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let pg = Complex64::new(0.0, 1.0);
        assert!(close(cavity_factor(zero, one, pg, 1.0).unwrap(), one));
        let kappa = 1.0;
        let d = std::f64::consts::LN_2 / 2.0 / kappa;
        let f = cavity_factor(one, one, Complex64::new(0.0, kappa), d).unwrap();
        assert!(close(f, Complex64::new(2.0, 0.0)));
        let far = cavity_factor(one, one, pg, 1e3).unwrap();
        assert!(close(far, one));
        assert!(cavity_factor(one, one, zero, 1.0).is_err());
        assert!(cavity_factor(one, one, pg, 0.0).is_err());
    }

    #[test]
    fn perfect_mirror_limits() {
        let g = GapReflections::new(1.0, 1.0, f64::INFINITY, 0.5, 0.5, 1.0);
        assert_eq!((g.s23, g.p23), (-1.0, 1.0));
        assert_eq!((g.s21, g.p21), (0.0, 0.0));
        let g0 = GapReflections::new(3.0, 1.0, f64::INFINITY, 0.0, 0.5, 1.0);
        assert_eq!((g0.s23, g0.p23), (0.0, 1.0));
        assert_eq!(g0.s21, 0.0);
        assert!((g0.p21 - 0.5).abs() < 1e-15); // (ε−1)/(ε+1)
    }

    #[test]
    fn spectral_point_matches_real_path() {
        let sp = SpectralPoint::new(FrequencyAxis::Imaginary, 0.8, 1.1, [3.0, 1.0, 7.0]).unwrap();
        let g = GapReflections::new(3.0, 1.0, 7.0, 0.8, 1.1, 1.0);
        assert!((sp.fresnel_s(2, 1).unwrap().re - g.s21).abs() < 1e-15);
        assert!((sp.fresnel_s(2, 3).unwrap().re - g.s23).abs() < 1e-15);
        assert!((sp.fresnel_p(2, 1).unwrap().re - g.p21).abs() < 1e-15);
        assert!((sp.fresnel_p(2, 3).unwrap().re - g.p23).abs() < 1e-15);
        for n in 0..3 {
            assert!((sp.p[n].im - g.kappa[n]).abs() < 1e-15 && sp.p[n].re == 0.0);
        }
    }

    proptest! {
        #[test]
        fn imaginary_axis_is_real_and_bounded(
            e1 in 1.0f64..1e4, e3 in 1.0f64..1e4, nu in 0.0f64..50.0, q in 1e-6f64..50.0,
        ) {
            let sp = SpectralPoint::new(FrequencyAxis::Imaginary, nu, q, [e1, 1.0, e3]).unwrap();
            for p in sp.p {
                prop_assert_eq!(p.re, 0.0);
                prop_assert!(p.im > 0.0);
            }
            for (l, n) in [(2, 1), (2, 3), (1, 2), (3, 2)] {
                for f in [sp.fresnel_s(l, n).unwrap(), sp.fresnel_p(l, n).unwrap()] {
                    prop_assert!(f.im.abs() <= 1e-15 * (1.0 + f.re.abs()));
                    prop_assert!(f.re.abs() <= 1.0 + 1e-15);
                }
            }
        }

        #[test]
        fn fresnel_s_is_antisymmetric(a in -5.0f64..5.0, b in 0.1f64..5.0, c in -5.0f64..5.0, e in 0.1f64..5.0) {
            let pl = Complex64::new(a, b);
            let pn = Complex64::new(c, e);
            let f = fresnel_s(pl, pn).unwrap();
            let g = fresnel_s(pn, pl).unwrap();
            prop_assert!((f + g).norm() < 1e-12);
        }

        #[test]
        fn branch_is_continuous_across_light_line(k0 in 0.5f64..10.0, eps in 1.0f64..10.0) {
            let k = eps.sqrt() * k0;
            let h = 1e-9 * k;
            let below = axial_wavevector(eps, FrequencyAxis::Real, k0, k - h);
            let above = axial_wavevector(eps, FrequencyAxis::Real, k0, k + h);
            prop_assert!((below - above).norm() < 1e-3 * k);
            prop_assert!(below.im >= 0.0 && above.im >= 0.0);
        }
    }
}
