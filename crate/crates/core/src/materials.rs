//! Material response models.
//!
//! A plate is described by its imaginary-axis permittivity ε(iξ) and a real,
//! frequency-independent scalar χ³. The full fourth-rank χ³ tensor of an
//! isotropic medium is recovered from the scalar by [`chi3_contract`].

use crate::error::{Error, Result};

/// Imaginary-axis permittivity model.
#[derive(Debug, Clone, PartialEq)]
pub enum Permittivity {
    /// Dispersionless ε ≥ 1.
    Constant(f64),
    /// Tabulated ε(iξ).
    Tabulated(EpsilonTable),
    /// Symbolic perfect mirror (ε → ∞).
    PerfectMirror,
}

/// Monotone table of `(ξ [rad/s], ε(iξ))` pairs.
///
/// Interpolation is linear in ln ξ between nodes (linear in ξ on a segment
/// that starts at ξ = 0) and clamps to the endpoint values outside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonTable {
    xi: Vec<f64>,
    eps: Vec<f64>,
}

impl EpsilonTable {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyTable);
        }
        let (xi, eps): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        for (i, (&x, &e)) in xi.iter().zip(&eps).enumerate() {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "table frequency at index {i} must be finite and >= 0, got {x}"
                )));
            }
            if !e.is_finite() || e < 1.0 {
                return Err(Error::InvalidInput(format!(
                    "table permittivity at index {i} must be finite and >= 1, got {e}"
                )));
            }
        }
        for i in 1..xi.len() {
            if xi[i] <= xi[i - 1] {
                return Err(Error::NonMonotoneGrid(i));
            }
            if eps[i] > eps[i - 1] {
                return Err(Error::InvalidInput(format!(
                    "imaginary-axis permittivity must be non-increasing, but rises at index {i}"
                )));
            }
        }
        Ok(EpsilonTable { xi, eps })
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xi.iter().copied().zip(self.eps.iter().copied())
    }

    pub fn eval(&self, xi: f64) -> f64 {
        let n = self.xi.len();
        if xi <= self.xi[0] {
            return self.eps[0];
        }
        if xi >= self.xi[n - 1] {
            return self.eps[n - 1];
        }
        // First node strictly greater than xi; 1 <= hi <= n-1 here.
        let hi = self.xi.partition_point(|&x| x <= xi);
        let lo = hi - 1;
        let (x0, x1) = (self.xi[lo], self.xi[hi]);
        let (e0, e1) = (self.eps[lo], self.eps[hi]);
        let s = if x0 == 0.0 {
            xi / x1
        } else {
            (xi / x0).ln() / (x1 / x0).ln()
        };
        e0 + s * (e1 - e0)
    }
}

impl Permittivity {
    pub fn validate(&self) -> Result<()> {
        match self {
            Permittivity::Constant(e) if !(e.is_finite() && *e >= 1.0) => Err(Error::InvalidInput(
                format!("constant permittivity must be finite and >= 1, got {e}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn is_perfect_mirror(&self) -> bool {
        matches!(self, Permittivity::PerfectMirror)
    }

    /// True when ε does not depend on frequency.
    pub fn is_dispersionless(&self) -> bool {
        match self {
            Permittivity::Constant(_) | Permittivity::PerfectMirror => true,
            Permittivity::Tabulated(t) => t.eps.windows(2).all(|w| w[0] == w[1]),
        }
    }
}

/// Linear permittivity plus isotropic scalar χ³ [m²/V²].
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialResponse {
    pub epsilon: Permittivity,
    pub chi3: f64,
}

impl MaterialResponse {
    pub fn new(epsilon: Permittivity, chi3: f64) -> Result<Self> {
        epsilon.validate()?;
        if !chi3.is_finite() {
            return Err(Error::InvalidInput(format!("chi3 must be finite, got {chi3}")));
        }
        Ok(MaterialResponse { epsilon, chi3 })
    }

    pub fn linear(epsilon: f64) -> Result<Self> {
        Self::new(Permittivity::Constant(epsilon), 0.0)
    }

    pub fn perfect_mirror() -> Self {
        MaterialResponse {
            epsilon: Permittivity::PerfectMirror,
            chi3: 0.0,
        }
    }

    pub fn vacuum() -> Self {
        MaterialResponse {
            epsilon: Permittivity::Constant(1.0),
            chi3: 0.0,
        }
    }

    pub fn is_nonlinear(&self) -> bool {
        self.chi3 != 0.0
    }

    /// ε(iξ). A perfect mirror returns `f64::INFINITY`.
    pub fn epsilon_at(&self, xi: f64) -> Result<f64> {
        if !(xi >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "imaginary frequency must be >= 0, got {xi}"
            )));
        }
        Ok(match &self.epsilon {
            Permittivity::Constant(e) => *e,
            Permittivity::Tabulated(t) => t.eval(xi),
            Permittivity::PerfectMirror => f64::INFINITY,
        })
    }
}

/// Cartesian index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

/// Component χ_ijkl of an isotropic third-order susceptibility with scalar
/// strength `chi3`: 3χ³ for iiii, χ³ for iikk / ikki / ikik with i ≠ k, 0
/// otherwise.
pub fn chi3_contract(material: &MaterialResponse, i: Axis, j: Axis, k: Axis, l: Axis) -> f64 {
    let chi = material.chi3;
    if i == j && j == k && k == l {
        3.0 * chi
    } else if (i == j && k == l) || (i == l && j == k) || (i == k && j == l) {
        chi
    } else {
        0.0
    }
}
