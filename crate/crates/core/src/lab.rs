//! Dense-matrix bench for the operator identities of nonlinear fluctuational
//! electrodynamics, on a 1-D scalar Helmholtz model.
//!
//! The Helmholtz operator on `n` interior points with Dirichlet ends is
//! H = −D₂ − k₀² diag(ε) − iη, so G₁ = H⁻¹ and the vacuum operator H₀ = G₀⁻¹
//! uses ε ≡ 1. The potential is V = k₀² diag(ε − 1), hence H = H₀ − V.
//!
//! `Im A` means the elementwise imaginary part (A − Ā)/2i throughout; for the
//! symmetric matrices used here it equals the anti-Hermitian part.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::ops::Range;

pub type CMatrix = DMatrix<Complex64>;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Uniform grid of `n` interior points on (0, L).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub n: usize,
    pub spacing: f64,
    /// Uniform absorption added to H; the sign picks the frequency branch.
    pub eta: f64,
}

impl Grid1D {
    pub fn new(n: usize, length: f64, eta: f64) -> Result<Self> {
        if !(8..=256).contains(&n) {
            return Err(Error::InvalidInput(format!("grid needs 8..=256 points, got {n}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidInput(format!("grid length must be > 0, got {length}")));
        }
        if !(eta.is_finite() && eta != 0.0) {
            return Err(Error::InvalidInput(format!("absorber eta must be nonzero, got {eta}")));
        }
        Ok(Grid1D {
            n,
            spacing: length / (n + 1) as f64,
            eta,
        })
    }

    /// Absorber η = 10⁻³ k₀².
    pub fn with_default_eta(n: usize, length: f64, k0: f64) -> Result<Self> {
        Self::new(n, length, 1e-3 * k0 * k0)
    }
}

/// H for the given profile.
pub fn helmholtz(grid: &Grid1D, eps: &[f64], k0: f64) -> Result<CMatrix> {
    let n = grid.n;
    if eps.len() != n {
        return Err(Error::MaskMismatch(format!("profile has {} points, grid {n}", eps.len())));
    }
    let h2 = grid.spacing * grid.spacing;
    let mut h = CMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = re(2.0 / h2 - k0 * k0 * eps[i]) - I * grid.eta;
        if i + 1 < n {
            h[(i, i + 1)] = re(-1.0 / h2);
            h[(i + 1, i)] = re(-1.0 / h2);
        }
    }
    Ok(h)
}

fn inverse(m: &CMatrix, what: &str) -> Result<CMatrix> {
    m.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix(what.to_string()))
}

pub fn im_part(a: &CMatrix) -> CMatrix {
    a.map(|z| re(z.im))
}

pub fn conj(a: &CMatrix) -> CMatrix {
    a.map(|z| z.conj())
}

/// ‖A − Aᵀ‖/‖A‖ (Frobenius).
pub fn asymmetry(a: &CMatrix) -> f64 {
    (a - a.transpose()).norm() / a.norm()
}

/// Linear operators of one profile.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperators {
    pub g0: CMatrix,
    pub g1: CMatrix,
    /// H₀ = G₀⁻¹, assembled directly.
    pub h0: CMatrix,
    pub v: CMatrix,
}

pub fn build_linear(grid: &Grid1D, eps: &[f64], k0: f64) -> Result<LinearOperators> {
    if eps.iter().any(|e| !(e.is_finite() && *e >= 1.0)) {
        return Err(Error::InvalidInput("lab permittivities must be finite and >= 1".into()));
    }
    if !(k0.is_finite() && k0 != 0.0) {
        return Err(Error::InvalidInput(format!("k0 must be nonzero, got {k0}")));
    }
    let vac = vec![1.0; grid.n];
    let h0 = helmholtz(grid, &vac, k0)?;
    let h1 = helmholtz(grid, eps, k0)?;
    let g0 = inverse(&h0, "vacuum Helmholtz operator")?;
    let g1 = inverse(&h1, "Helmholtz operator")?;
    let v = CMatrix::from_diagonal(&DVector::from_iterator(
        grid.n,
        eps.iter().map(|e| re(k0 * k0 * (e - 1.0))),
    ));
    Ok(LinearOperators { g0, g1, h0, v })
}

/// ‖(H₀ − V)G₁ − I‖/√n.
pub fn lippmann_schwinger_residual(ops: &LinearOperators) -> f64 {
    let n = ops.g1.nrows();
    ((&ops.h0 - &ops.v) * &ops.g1 - CMatrix::identity(n, n)).norm() / (n as f64).sqrt()
}

/// Diagonal N with N(z) = 3k₀²χ(z) Σ w Im G₁(z, z; k′) over the weight set
/// of `(k′, w)` pairs.
pub fn build_n_operator(
    grid: &Grid1D,
    eps: &[f64],
    chi: &[f64],
    k0: f64,
    weights: &[(f64, f64)],
) -> Result<CMatrix> {
    if weights.is_empty() {
        return Err(Error::InvalidInput("N operator needs at least one frequency weight".into()));
    }
    if chi.len() != grid.n {
        return Err(Error::MaskMismatch(format!("chi profile has {} points, grid {}", chi.len(), grid.n)));
    }
    if weights.iter().any(|&(_, w)| !(w > 0.0)) {
        return Err(Error::InvalidInput("frequency weights must be > 0".into()));
    }
    let mut diag = vec![0.0; grid.n];
    if chi.iter().all(|&c| c == 0.0) {
        return Ok(CMatrix::zeros(grid.n, grid.n));
    }
    for &(kp, w) in weights {
        let g = build_linear(grid, eps, kp)?.g1;
        for (z, d) in diag.iter_mut().enumerate() {
            *d += w * g[(z, z)].im;
        }
    }
    Ok(CMatrix::from_diagonal(&DVector::from_iterator(
        grid.n,
        diag.iter().zip(chi).map(|(s, c)| re(3.0 * k0 * k0 * c * s)),
    )))
}

/// G̃ = (I + G₁N)G₁.
pub fn gtilde(g1: &CMatrix, n: &CMatrix) -> CMatrix {
    let id = CMatrix::identity(g1.nrows(), g1.ncols());
    (id + g1 * n) * g1
}

/// Condition number above which the combination is treated as resonant.
pub const RESONANCE_CONDITION: f64 = 1e12;

/// G′ = G̃β (G̃α + G̃β − G̃α H₀ G̃β)⁻¹ G̃α.
pub fn naive_combination(gt_alpha: &CMatrix, gt_beta: &CMatrix, h0: &CMatrix) -> Result<CMatrix> {
    let inner = gt_alpha + gt_beta - gt_alpha * h0 * gt_beta;
    let sv = inner.clone().svd(false, false).singular_values;
    let smin = sv.min();
    let condition = if smin > 0.0 { sv.max() / smin } else { f64::INFINITY };
    if !(condition < RESONANCE_CONDITION) {
        return Err(Error::NearResonance { condition });
    }
    let x = inner
        .lu()
        .solve(gt_alpha)
        .ok_or(Error::NearResonance { condition })?;
    Ok(gt_beta * x)
}

fn diagonal_outside(n: &CMatrix, mask: &[Range<usize>]) -> bool {
    (0..n.nrows()).any(|i| n[(i, i)] != re(0.0) && !mask.iter().any(|r| r.contains(&i)))
}

/// G′ + G′ Σᵢ [N|ᵢ − Nᵢ] G′, where N|ᵢ is the union-system N restricted to
/// the mask of object i and Nᵢ the N of object i alone.
pub fn combined_correction(
    g_prime: &CMatrix,
    n_total: &CMatrix,
    objects: &[(&CMatrix, Range<usize>)],
) -> Result<CMatrix> {
    let dim = g_prime.nrows();
    let mut delta = CMatrix::zeros(dim, dim);
    for (a, (_, ra)) in objects.iter().enumerate() {
        for (_, rb) in &objects[a + 1..] {
            if ra.start < rb.end && rb.start < ra.end {
                return Err(Error::MaskMismatch("object masks overlap".into()));
            }
        }
    }
    let masks: Vec<Range<usize>> = objects.iter().map(|(_, r)| r.clone()).collect();
    if diagonal_outside(n_total, &masks) {
        return Err(Error::MaskMismatch("total N is nonzero outside every object".into()));
    }
    for (n_i, mask) in objects {
        if n_i.nrows() != dim || mask.end > dim {
            return Err(Error::MaskMismatch("operator size differs from grid".into()));
        }
        if diagonal_outside(n_i, std::slice::from_ref(mask)) {
            return Err(Error::MaskMismatch(format!("object N is nonzero outside {mask:?}")));
        }
        for z in mask.clone() {
            delta[(z, z)] += n_total[(z, z)] - n_i[(z, z)];
        }
    }
    Ok(g_prime + g_prime * delta * g_prime)
}

/// ‖b Im G̃ − b G̃ Im[V + N − H₀] G̃*‖ / ‖b Im G̃‖.
pub fn rytov_residual(gt: &CMatrix, v: &CMatrix, n: &CMatrix, h0: &CMatrix, b: f64) -> f64 {
    let src = im_part(&(v + n - h0));
    let lhs = im_part(gt) * re(b);
    let rhs = gt * src * conj(gt) * re(b);
    (&lhs - rhs).norm() / lhs.norm()
}

/// Positive-semidefinite covariance for sampling G₁F.
#[derive(Debug, Clone)]
pub struct NoiseCovariance {
    /// Projected covariance.
    pub matrix: CMatrix,
    /// Σ|λ| over clipped negative eigenvalues divided by the trace.
    pub clipped_fraction: f64,
    /// True when more than 1% of the trace had to be clipped.
    pub strained: bool,
    /// U·diag(√λ₊): y = factor·z with z standard complex normal has the
    /// projected covariance.
    pub factor: CMatrix,
}

/// C = b[Im G₁ + G₁(Im N)G₁*], then eigenvalue clipping at 0.
pub fn noise_covariance(g1: &CMatrix, n: &CMatrix, b: f64) -> NoiseCovariance {
    let raw = (im_part(g1) + g1 * im_part(n) * conj(g1)) * re(b);
    // Hermitian part; exact for symmetric G₁ up to rounding.
    let herm = (&raw + raw.adjoint()) * re(0.5);
    let eig = SymmetricEigen::new(herm);
    let trace: f64 = eig.eigenvalues.iter().map(|l| l.abs()).sum();
    let clipped: f64 = eig.eigenvalues.iter().filter(|&&l| l < 0.0).map(|l| -l).sum();
    let sqrt = eig.eigenvalues.map(|l| re(l.max(0.0).sqrt()));
    let factor = &eig.eigenvectors * CMatrix::from_diagonal(&sqrt);
    let matrix = &factor * factor.adjoint();
    let clipped_fraction = if trace > 0.0 { clipped / trace } else { 0.0 };
    NoiseCovariance {
        matrix,
        clipped_fraction,
        strained: clipped_fraction > 0.01,
        factor,
    }
}

/// Result of a Monte-Carlo run of the fluctuation-dissipation relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloReport {
    pub samples: usize,
    /// max |⟨EE*⟩ − b Im G̃| / (b‖Im G̃‖).
    pub max_deviation: f64,
    /// Root-mean-square entry deviation, same normalisation.
    pub rms_deviation: f64,
    /// Central-limit prediction for `rms_deviation`.
    pub clt_rms: f64,
}

pub const MC_CHUNK: usize = 256;

/// Draw G₁F from the projected noise covariance, propagate to first order
/// E = (I + G₁N)G₁F, and compare ⟨E⊗E*⟩ with b Im G̃. Samples are drawn in
/// fixed chunks of [`MC_CHUNK`], chunk k from ChaCha stream k of `seed`, and
/// summed in chunk order.
pub fn monte_carlo_fdt(g1: &CMatrix, n: &CMatrix, b: f64, samples: usize, seed: u64) -> Result<MonteCarloReport> {
    monte_carlo_replica(g1, n, b, samples, seed, 0)
}

/// Replica `r` draws chunk k from ChaCha stream (r << 32) | k, so replicas of
/// one seed are independent.
fn monte_carlo_replica(
    g1: &CMatrix,
    n: &CMatrix,
    b: f64,
    samples: usize,
    seed: u64,
    replica: u32,
) -> Result<MonteCarloReport> {
    if samples == 0 {
        return Err(Error::InvalidInput("Monte-Carlo run needs at least one sample".into()));
    }
    let dim = g1.nrows();
    let cov = noise_covariance(g1, n, b);
    let prop = (CMatrix::identity(dim, dim) + g1 * n) * &cov.factor;
    let chunks = samples.div_ceil(MC_CHUNK);
    let partial: Vec<CMatrix> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let count = MC_CHUNK.min(samples - k * MC_CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((replica as u64) << 32) | k as u64);
            let scale = std::f64::consts::FRAC_1_SQRT_2;
            let z = CMatrix::from_fn(dim, count, |_, _| {
                let a: f64 = StandardNormal.sample(&mut rng);
                let c: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(a * scale, c * scale)
            });
            let e = &prop * z;
            &e * e.adjoint()
        })
        .collect();
    let mut acc = CMatrix::zeros(dim, dim);
    for p in partial {
        acc += p;
    }
    let mean = acc / re(samples as f64);
    let target = im_part(&gtilde(g1, n)) * re(b);
    let scale = target.norm();
    let diff = &mean - &target;
    let max_deviation = diff.iter().map(|z| z.norm()).fold(0.0, f64::max) / scale;
    let entries = (dim * dim) as f64;
    let rms_deviation = (diff.norm_squared() / entries).sqrt() / scale;
    // For circular Gaussian E, Var(E_i Ē_j) = C_ii C_jj, so the expected
    // squared Frobenius deviation is (tr C)²/M.
    let c = &prop * prop.adjoint();
    let trace: f64 = (0..dim).map(|i| c[(i, i)].re).sum();
    let clt_rms = trace / (entries * samples as f64).sqrt() / scale;
    Ok(MonteCarloReport {
        samples,
        max_deviation,
        rms_deviation,
        clt_rms,
    })
}

/// Root-mean-square over replicas of the entry deviation, against the
/// central-limit prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicaReport {
    pub samples: usize,
    pub replicas: u32,
    pub rms_deviation: f64,
    pub clt_rms: f64,
}

impl ReplicaReport {
    pub fn ratio(&self) -> f64 {
        self.rms_deviation / self.clt_rms
    }
}

/// [`monte_carlo_fdt`] repeated over independent replicas. A single run is
/// dominated by the few largest covariance modes and fluctuates by O(1)
/// around the central-limit value; the replica average does not.
pub fn monte_carlo_replicas(
    g1: &CMatrix,
    n: &CMatrix,
    b: f64,
    samples: usize,
    seed: u64,
    replicas: u32,
) -> Result<ReplicaReport> {
    if replicas == 0 {
        return Err(Error::InvalidInput("need at least one replica".into()));
    }
    let mut sq = 0.0;
    let mut clt = 0.0;
    for r in 0..replicas {
        let rep = monte_carlo_replica(g1, n, b, samples, seed, r)?;
        sq += rep.rms_deviation.powi(2);
        clt = rep.clt_rms;
    }
    Ok(ReplicaReport {
        samples,
        replicas,
        rms_deviation: (sq / replicas as f64).sqrt(),
        clt_rms: clt,
    })
}

/// One object of the lab scene.
#[derive(Debug, Clone, PartialEq)]
pub struct LabObject {
    pub cells: Range<usize>,
    pub eps: f64,
    pub chi: f64,
}

/// Scene for the verification suite.
#[derive(Debug, Clone, PartialEq)]
pub struct LabConfig {
    pub n: usize,
    pub length: f64,
    pub k0: f64,
    /// `None` selects 10⁻³ k₀².
    pub eta: Option<f64>,
    pub objects: Vec<LabObject>,
    /// (k′, w) pairs standing in for b(ω′)dω′.
    pub weights: Vec<(f64, f64)>,
    pub b: f64,
}

impl Default for LabConfig {
    fn default() -> Self {
        LabConfig {
            n: 32,
            length: 1.0,
            k0: 10.0,
            eta: None,
            objects: vec![
                LabObject {
                    cells: 6..12,
                    eps: 4.0,
                    chi: 5.0,
                },
                LabObject {
                    cells: 20..26,
                    eps: 2.5,
                    chi: 5.0,
                },
            ],
            weights: vec![(5.0, 1.0), (12.0, 0.5)],
            b: 1.0,
        }
    }
}

/// Operators of a scene with all objects present and with each alone.
#[derive(Debug, Clone)]
pub struct Scene {
    pub grid: Grid1D,
    pub union: LinearOperators,
    pub n_total: CMatrix,
    pub alone: Vec<(LinearOperators, CMatrix)>,
}

impl LabConfig {
    pub fn grid(&self) -> Result<Grid1D> {
        match self.eta {
            Some(eta) => Grid1D::new(self.n, self.length, eta),
            None => Grid1D::with_default_eta(self.n, self.length, self.k0),
        }
    }

    fn profiles<'a>(&self, objects: impl IntoIterator<Item = &'a LabObject>) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut eps = vec![1.0; self.n];
        let mut chi = vec![0.0; self.n];
        for o in objects {
            if o.cells.end > self.n || o.cells.is_empty() {
                return Err(Error::MaskMismatch(format!("object cells {:?} outside grid", o.cells)));
            }
            for z in o.cells.clone() {
                eps[z] = o.eps;
                chi[z] = o.chi;
            }
        }
        Ok((eps, chi))
    }

    /// Same scene with every χ multiplied by `factor`.
    pub fn with_chi_scaled(&self, factor: f64) -> Self {
        let mut c = self.clone();
        for o in &mut c.objects {
            o.chi *= factor;
        }
        c
    }

    pub fn build(&self) -> Result<Scene> {
        let grid = self.grid()?;
        let (eps, chi) = self.profiles(&self.objects)?;
        let union = build_linear(&grid, &eps, self.k0)?;
        let n_total = build_n_operator(&grid, &eps, &chi, self.k0, &self.weights)?;
        let mut alone = Vec::with_capacity(self.objects.len());
        for o in &self.objects {
            let (e, c) = self.profiles(std::iter::once(o))?;
            let ops = build_linear(&grid, &e, self.k0)?;
            let n = build_n_operator(&grid, &e, &c, self.k0, &self.weights)?;
            alone.push((ops, n));
        }
        Ok(Scene {
            grid,
            union,
            n_total,
            alone,
        })
    }
}

impl Scene {
    /// G̃ of the union system.
    pub fn gtilde_union(&self) -> CMatrix {
        gtilde(&self.union.g1, &self.n_total)
    }

    /// Naive combination of the two isolated objects' G̃.
    pub fn naive(&self) -> Result<CMatrix> {
        if self.alone.len() != 2 {
            return Err(Error::InvalidInput("combination needs exactly two objects".into()));
        }
        let ga = gtilde(&self.alone[0].0.g1, &self.alone[0].1);
        let gb = gtilde(&self.alone[1].0.g1, &self.alone[1].1);
        naive_combination(&ga, &gb, &self.union.h0)
    }

    /// Corrected combination, with masks taken from `config`.
    pub fn corrected(&self, config: &LabConfig) -> Result<CMatrix> {
        let g_prime = self.naive()?;
        let objects: Vec<(&CMatrix, Range<usize>)> = self
            .alone
            .iter()
            .zip(&config.objects)
            .map(|((_, n), o)| (n, o.cells.clone()))
            .collect();
        combined_correction(&g_prime, &self.n_total, &objects)
    }
}

fn rel_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm()
}

/// ‖G̃_combined − G̃_union‖/‖G̃_union‖.
pub fn combination_residual(config: &LabConfig) -> Result<f64> {
    let scene = config.build()?;
    Ok(rel_diff(&scene.corrected(config)?, &scene.gtilde_union()))
}

/// Rytov residual of the union system.
pub fn union_rytov_residual(config: &LabConfig) -> Result<f64> {
    let s = config.build()?;
    Ok(rytov_residual(&s.gtilde_union(), &s.union.v, &s.n_total, &s.union.h0, config.b))
}

/// Least-squares slope of ln r against ln χ for χ halved `steps` times.
pub fn chi_scaling_slope(config: &LabConfig, steps: usize, residual: fn(&LabConfig) -> Result<f64>) -> Result<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 0..=steps {
        let f = 0.5f64.powi(k as i32);
        xs.push(f.ln());
        ys.push(residual(&config.with_chi_scaled(f))?.ln());
    }
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// One row of the verification table.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &'static str, value: f64, limit: f64) -> Self {
        Check {
            name,
            value,
            limit,
            pass: value <= limit,
        }
    }

    fn within(name: &'static str, value: f64, target: f64, tol: f64) -> Self {
        Check {
            name,
            value,
            limit: tol,
            pass: (value - target).abs() <= tol,
        }
    }
}

/// Identity checks on the scene described by `config`: exact identities at
/// χ = 0, reciprocity, χ² scaling of the first-order identities and
/// Monte-Carlo sampling of the noise correlator.
pub fn verify_suite(config: &LabConfig, seed: u64) -> Result<Vec<Check>> {
    let linear = config.with_chi_scaled(0.0);
    let s0 = linear.build()?;
    let mut out = vec![
        Check::at_most("lippmann-schwinger", lippmann_schwinger_residual(&s0.union), 1e-10),
        Check::at_most("combination-rule", rel_diff(&s0.naive()?, &s0.union.g1), 1e-10),
        Check::at_most(
            "rytov-linear",
            rytov_residual(&s0.union.g1, &s0.union.v, &s0.n_total, &s0.union.h0, config.b),
            1e-10,
        ),
    ];
    let s = config.build()?;
    let gt = s.gtilde_union();
    let naive = s.naive()?;
    let sym = [&s.union.g0, &s.union.g1, &gt, &naive]
        .iter()
        .map(|m| asymmetry(m))
        .fold(0.0, f64::max);
    out.push(Check::at_most("reciprocity", sym, 1e-12));
    let swapped = {
        let ga = gtilde(&s.alone[0].0.g1, &s.alone[0].1);
        let gb = gtilde(&s.alone[1].0.g1, &s.alone[1].1);
        naive_combination(&gb, &ga, &s.union.h0)?
    };
    out.push(Check::at_most("combination-swap", rel_diff(&swapped, &naive), 1e-10));
    out.push(Check::within(
        "eq11-chi-scaling",
        chi_scaling_slope(config, 4, combination_residual)?,
        2.0,
        0.1,
    ));
    out.push(Check::within(
        "rytov-chi-scaling",
        chi_scaling_slope(config, 4, union_rytov_residual)?,
        2.0,
        0.1,
    ));
    let cov = noise_covariance(&s.union.g1, &s.n_total, config.b);
    out.push(Check::at_most("noise-clipped-fraction", cov.clipped_fraction, 0.01));
    let mc = monte_carlo_replicas(&s.union.g1, &s.n_total, config.b, 4000, seed, 8)?;
    out.push(Check::within("mc-clt-ratio", mc.ratio(), 1.0, 0.5));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scene() -> (LabConfig, Scene) {
        let c = LabConfig::default();
        let s = c.build().unwrap();
        (c, s)
    }

    #[test]
    fn vacuum_profile_gives_vacuum_green_function() {
        let g = Grid1D::with_default_eta(16, 1.0, 10.0).unwrap();
        let ops = build_linear(&g, &[1.0; 16], 10.0).unwrap();
        assert_eq!(ops.g0, ops.g1);
        assert!(ops.v.iter().all(|z| *z == re(0.0)));
    }

    #[test]
    fn potential_support_is_object_mask() {
        let (c, s) = scene();
        for i in 0..c.n {
            let inside = c.objects.iter().any(|o| o.cells.contains(&i));
            assert_eq!(s.union.v[(i, i)] != re(0.0), inside);
            assert_eq!(s.n_total[(i, i)] != re(0.0), inside);
        }
        assert!(lippmann_schwinger_residual(&s.union) < 1e-12);
    }

    #[test]
    fn grid_validation() {
        assert!(Grid1D::new(4, 1.0, 0.1).is_err());
        assert!(Grid1D::new(300, 1.0, 0.1).is_err());
        assert!(Grid1D::new(16, 1.0, 0.0).is_err());
        assert!(Grid1D::new(16, -1.0, 0.1).is_err());
    }

    #[test]
    fn n_operator_examples() {
        let g = Grid1D::with_default_eta(16, 1.0, 10.0).unwrap();
        let mut eps = vec![1.0; 16];
        let mut chi = vec![0.0; 16];
        assert!(build_n_operator(&g, &eps, &chi, 10.0, &[]).is_err());
        let n = build_n_operator(&g, &eps, &chi, 10.0, &[(5.0, 1.0)]).unwrap();
        assert!(n.iter().all(|z| *z == re(0.0)));
        for z in 4..8 {
            eps[z] = 3.0;
            chi[z] = 0.2;
        }
        let n = build_n_operator(&g, &eps, &chi, 10.0, &[(5.0, 0.7)]).unwrap();
        let g1 = build_linear(&g, &eps, 5.0).unwrap().g1;
        for z in 0..16 {
            let expect = 3.0 * 100.0 * chi[z] * 0.7 * g1[(z, z)].im;
            assert!((n[(z, z)].re - expect).abs() <= 1e-14 * expect.abs());
            assert_eq!(n[(z, z)].im, 0.0);
        }
    }

    #[test]
    fn gtilde_algebra() {
        let (_, s) = scene();
        let zero = CMatrix::zeros(32, 32);
        assert_eq!(gtilde(&s.union.g1, &zero), s.union.g1);
        let gt = s.gtilde_union();
        let diff = &gt - &s.union.g1 - &s.union.g1 * &s.n_total * &s.union.g1;
        assert!(diff.norm() < 1e-14 * gt.norm());
        assert!(asymmetry(&gt) < 1e-12);
    }

    #[test]
    fn combination_of_vacua_is_vacuum() {
        let (_, s) = scene();
        let g0 = &s.union.g0;
        let g = naive_combination(g0, g0, &s.union.h0).unwrap();
        assert!(rel_diff(&g, g0) < 1e-12);
    }

    #[test]
    fn exact_identities_without_chi() {
        let c = LabConfig::default().with_chi_scaled(0.0);
        for check in verify_suite(&c, 1).unwrap().iter().take(3) {
            assert!(check.pass, "{check:?}");
        }
    }

    #[test]
    fn single_object_needs_no_correction() {
        let mut c = LabConfig::default();
        c.objects.truncate(1);
        let s = c.build().unwrap();
        let (ops, n) = &s.alone[0];
        let gt = gtilde(&ops.g1, n);
        let out = combined_correction(&gt, &s.n_total, &[(n, c.objects[0].cells.clone())]).unwrap();
        assert!(rel_diff(&out, &gt) < 1e-15);
    }

    #[test]
    fn correction_is_genuinely_nonzero() {
        let (c, s) = scene();
        let naive = s.naive().unwrap();
        let corrected = s.corrected(&c).unwrap();
        assert!(rel_diff(&corrected, &naive) > 10.0 * f64::EPSILON);
        // The correction improves on the naive combination.
        let union = s.gtilde_union();
        assert!(rel_diff(&corrected, &union) < rel_diff(&naive, &union));
    }

    #[test]
    fn mask_mismatch_is_reported() {
        let (c, s) = scene();
        let naive = s.naive().unwrap();
        let objs = [(&s.alone[0].1, c.objects[1].cells.clone()), (&s.alone[1].1, c.objects[0].cells.clone())];
        assert!(matches!(
            combined_correction(&naive, &s.n_total, &objs),
            Err(Error::MaskMismatch(_))
        ));
        let objs = [(&s.alone[0].1, 0..20), (&s.alone[1].1, 10..30)];
        assert!(combined_correction(&naive, &s.n_total, &objs).is_err());
    }

    #[test]
    fn rytov_residual_independent_of_absorber_at_zero_chi() {
        for eta in [0.05, 0.5, 5.0] {
            let c = LabConfig {
                eta: Some(eta),
                ..LabConfig::default()
            }
            .with_chi_scaled(0.0);
            assert!(union_rytov_residual(&c).unwrap() < 1e-10);
        }
    }

    #[test]
    fn first_order_identities_scale_quadratically() {
        let c = LabConfig::default();
        let s1 = chi_scaling_slope(&c, 4, combination_residual).unwrap();
        let s2 = chi_scaling_slope(&c, 4, union_rytov_residual).unwrap();
        assert!((s1 - 2.0).abs() < 0.1, "{s1}");
        assert!((s2 - 2.0).abs() < 0.1, "{s2}");
    }

    #[test]
    fn conjugate_frequency_gives_conjugate_operators() {
        let c = LabConfig::default();
        let g = c.grid().unwrap();
        let gm = Grid1D { eta: -g.eta, ..g };
        let (eps, _) = c.profiles(&c.objects).unwrap();
        let plus = build_linear(&g, &eps, c.k0).unwrap();
        let minus = build_linear(&gm, &eps, -c.k0).unwrap();
        assert!(rel_diff(&minus.g1, &conj(&plus.g1)) < 1e-14);
        assert!(rel_diff(&minus.g0, &conj(&plus.g0)) < 1e-14);
    }

    #[test]
    fn covariance_without_chi_is_psd_and_hermitian() {
        let (_, s) = scene();
        let zero = CMatrix::zeros(32, 32);
        let cov = noise_covariance(&s.union.g1, &zero, 2.0);
        assert!(cov.clipped_fraction < 1e-12);
        assert!(!cov.strained);
        let c = &cov.matrix;
        assert!((c - c.adjoint()).norm() < 1e-14 * c.norm());
        let expect = im_part(&s.union.g1) * re(2.0);
        assert!(rel_diff(c, &expect) < 1e-10);
    }

    #[test]
    fn monte_carlo_is_reproducible_and_decays() {
        let (_, s) = scene();
        let zero = CMatrix::zeros(32, 32);
        let a = monte_carlo_fdt(&s.union.g1, &zero, 1.0, 2000, 9).unwrap();
        let b = monte_carlo_fdt(&s.union.g1, &zero, 1.0, 2000, 9).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo_fdt(&s.union.g1, &zero, 1.0, 2000, 10).unwrap();
        assert_ne!(a.max_deviation, c.max_deviation);
        assert!(a.max_deviation < 5.0 / (2000f64).sqrt());
        let mut last = f64::INFINITY;
        for m in [1000, 4000, 16000] {
            let r = monte_carlo_replicas(&s.union.g1, &zero, 1.0, m, 9, 8).unwrap();
            assert!((0.5..2.0).contains(&r.ratio()), "{r:?}");
            assert!(r.rms_deviation < last);
            last = r.rms_deviation;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn random_dissipative_profiles(
            eps in proptest::collection::vec(1.0f64..6.0, 16),
            k0 in 2.0f64..20.0,
        ) {
            let g = Grid1D::with_default_eta(16, 1.0, k0).unwrap();
            let ops = build_linear(&g, &eps, k0).unwrap();
            prop_assert!(lippmann_schwinger_residual(&ops) < 1e-10);
            prop_assert!(asymmetry(&ops.g1) < 1e-12);
            let cov = noise_covariance(&ops.g1, &CMatrix::zeros(16, 16), 1.0);
            prop_assert!(cov.clipped_fraction < 1e-10);
        }
    }
}
