//! Adaptive Gauss–Kronrod quadrature on [0, ∞), nested 2-D quadrature and
//! (double) Matsubara summation.
//!
//! The half-line is mapped onto [0, 1) by x = u/(1 − u). The 21-point Kronrod
//! rule with its embedded 10-point Gauss rule is applied with global adaptive
//! bisection; the error estimate is the QUADPACK-scaled Gauss/Kronrod
//! difference.
//!
//! All integrators are vector valued internally so that several integrals
//! sharing the same expensive nodes are computed together. Node evaluations
//! may run in parallel, but every reduction is done in a fixed order, so a
//! result depends only on the integrand and the tolerance, never on the
//! thread count.

use crate::error::{Error, Result};
use rayon::prelude::*;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_292_357_532,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Requested accuracy. An estimate is accepted when its error is below
/// `max(rel · |value|, abs)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Tolerance {
    pub const PRODUCTION: Tolerance = Tolerance { rel: 1e-6, abs: 0.0 };
    pub const ACCEPTANCE: Tolerance = Tolerance { rel: 1e-9, abs: 0.0 };

    pub fn new(rel: f64) -> Result<Self> {
        if !(rel > 1e-14 && rel < 1e-2) {
            return Err(Error::InvalidInput(format!(
                "relative tolerance must lie in (1e-14, 1e-2), got {rel}"
            )));
        }
        Ok(Tolerance { rel, abs: 0.0 })
    }

    pub fn with_abs(self, abs: f64) -> Self {
        Tolerance { abs, ..self }
    }

    /// Tighter tolerance for an inner (nested) integration.
    pub fn inner(self) -> Self {
        Tolerance {
            rel: (self.rel * 0.1).max(2e-15),
            abs: self.abs * 0.1,
        }
    }

    fn target(&self, value: f64) -> f64 {
        (self.rel * value.abs()).max(self.abs)
    }
}

/// Outcome of an integration or summation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl IntegrationResult {
    pub fn estimate(&self) -> Estimate {
        Estimate {
            value: self.value,
            error: self.abs_error,
        }
    }
}

/// A value with an absolute error bound.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl From<f64> for Estimate {
    fn from(value: f64) -> Self {
        Estimate { value, error: 0.0 }
    }
}

impl From<IntegrationResult> for Estimate {
    fn from(r: IntegrationResult) -> Self {
        r.estimate()
    }
}

/// Vector-valued result; `converged` refers to every judged component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VecResult<const N: usize> {
    pub value: [f64; N],
    pub abs_error: [f64; N],
    pub evaluations: usize,
    pub converged: bool,
}

impl<const N: usize> VecResult<N> {
    pub fn component(&self, i: usize) -> IntegrationResult {
        IntegrationResult {
            value: self.value[i],
            abs_error: self.abs_error[i],
            evaluations: self.evaluations,
            converged: self.converged,
        }
    }
}

/// Knobs shared by the adaptive routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub tol: Tolerance,
    /// Maximum number of subintervals.
    pub max_intervals: usize,
    /// Evaluate the 21 nodes of a panel concurrently.
    pub parallel: bool,
}

impl Options {
    pub fn new(tol: Tolerance) -> Self {
        Options {
            tol,
            max_intervals: 4000,
            parallel: false,
        }
    }

    pub fn parallel(self, parallel: bool) -> Self {
        Options { parallel, ..self }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
    resabs: [f64; N],
}

fn gk21<const N: usize, F>(f: &F, a: f64, b: f64, parallel: bool) -> Panel<N>
where
    F: Fn(f64) -> [f64; N] + Sync,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    // Nodes ordered: center, then ±XGK[j] pairs.
    let mut xs = [0.0; 21];
    xs[0] = center;
    for j in 0..10 {
        xs[1 + 2 * j] = center - half * XGK[j];
        xs[2 + 2 * j] = center + half * XGK[j];
    }
    let fv: Vec<[f64; N]> = if parallel {
        xs.par_iter().map(|&x| f(x)).collect()
    } else {
        xs.iter().map(|&x| f(x)).collect()
    };

    let mut value = [0.0; N];
    let mut error = [0.0; N];
    let mut resabs = [0.0; N];
    for c in 0..N {
        let fc = fv[0][c];
        let mut kron = fc * WGK[10];
        let mut gauss = 0.0;
        let mut abs = fc.abs() * WGK[10];
        for j in 0..10 {
            let (lo, hi) = (fv[1 + 2 * j][c], fv[2 + 2 * j][c]);
            kron += WGK[j] * (lo + hi);
            abs += WGK[j] * (lo.abs() + hi.abs());
            if j % 2 == 1 {
                gauss += WG[j / 2] * (lo + hi);
            }
        }
        let mean = kron * 0.5;
        let mut asc = WGK[10] * (fc - mean).abs();
        for j in 0..10 {
            asc += WGK[j] * ((fv[1 + 2 * j][c] - mean).abs() + (fv[2 + 2 * j][c] - mean).abs());
        }
        let result = kron * half;
        let resabs_c = abs * half.abs();
        let resasc = asc * half.abs();
        let mut err = ((kron - gauss) * half).abs();
        if resasc != 0.0 && err != 0.0 {
            err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
        }
        if resabs_c > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            err = err.max(50.0 * f64::EPSILON * resabs_c);
        }
        value[c] = result;
        error[c] = err;
        resabs[c] = resabs_c;
    }
    Panel {
        a,
        b,
        value,
        error,
        resabs,
    }
}

/// Global adaptive GK21 on a finite interval; only the first `judged`
/// components decide convergence and refinement.
pub fn integrate_interval_vec<const N: usize, F>(
    f: F,
    a: f64,
    b: f64,
    opts: Options,
    judged: usize,
) -> VecResult<N>
where
    F: Fn(f64) -> [f64; N] + Sync,
{
    let judged = judged.min(N);
    let mut panels = vec![gk21(&f, a, b, opts.parallel)];
    let mut evaluations = 21;
    loop {
        let mut value = [0.0; N];
        let mut error = [0.0; N];
        let mut resabs = [0.0; N];
        for p in &panels {
            for c in 0..N {
                value[c] += p.value[c];
                error[c] += p.error[c];
                resabs[c] += p.resabs[c];
            }
        }
        let targets: Vec<f64> = (0..N)
            .map(|c| {
                opts.tol
                    .target(value[c])
                    .max(100.0 * f64::EPSILON * resabs[c])
                    .max(f64::MIN_POSITIVE)
            })
            .collect();
        let done = (0..judged).all(|c| error[c] <= targets[c]);
        if done || panels.len() >= opts.max_intervals {
            return VecResult {
                value,
                abs_error: error,
                evaluations,
                converged: done,
            };
        }
        // Split the panel carrying the largest share of the normalised error.
        let (worst, _) = panels
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let score: f64 = (0..judged).map(|c| p.error[c] / targets[c]).sum();
                (i, score)
            })
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            // Interval exhausted at machine resolution.
            return VecResult {
                value,
                abs_error: error,
                evaluations,
                converged: false,
            };
        }
        panels.push(gk21(&f, p.a, mid, opts.parallel));
        panels.push(gk21(&f, mid, p.b, opts.parallel));
        evaluations += 42;
    }
}

/// ∫₀^∞ f(x) dx for a vector integrand, via x = u/(1 − u).
pub fn integrate_semi_infinite_vec<const N: usize, F>(f: F, opts: Options, judged: usize) -> VecResult<N>
where
    F: Fn(f64) -> [f64; N] + Sync,
{
    integrate_interval_vec(
        |u: f64| {
            let w = 1.0 - u;
            let x = u / w;
            let jac = 1.0 / (w * w);
            let v = f(x);
            let mut out = [0.0; N];
            for c in 0..N {
                let t = v[c] * jac;
                out[c] = if t.is_finite() { t } else { 0.0 };
            }
            out
        },
        0.0,
        1.0,
        opts,
        judged,
    )
}

/// ∫₀^∞ f(x) dx.
pub fn integrate_semi_infinite<F>(f: F, tol: Tolerance) -> IntegrationResult
where
    F: Fn(f64) -> f64 + Sync,
{
    integrate_semi_infinite_vec(|x| [f(x)], Options::new(tol), 1).component(0)
}

/// ∫₀^∞∫₀^∞ f(x, y) dy dx as nested 1-D integrations; the inner integral runs
/// at a tenfold tighter tolerance and its error is carried through the outer
/// one and added in quadrature.
pub fn integrate_2d_vec<const N: usize, F>(f: F, opts: Options) -> VecResult<N>
where
    F: Fn(f64, f64) -> [f64; N] + Sync,
{
    let inner_opts = Options {
        tol: opts.tol.inner(),
        parallel: false,
        ..opts
    };
    let evaluations = std::sync::atomic::AtomicUsize::new(0);
    let all_inner_converged = std::sync::atomic::AtomicBool::new(true);
    let outer = integrate_semi_infinite_vec::<N, _>(
        |x| {
            let r = integrate_semi_infinite_vec(|y| f(x, y), inner_opts, N);
            evaluations.fetch_add(r.evaluations, std::sync::atomic::Ordering::Relaxed);
            if !r.converged {
                all_inner_converged.store(false, std::sync::atomic::Ordering::Relaxed);
            }
            r.value
        },
        opts,
        N,
    );
    // Inner integrals all met the tighter target, so their accumulated error
    // is bounded by that target applied to the total.
    let mut abs_error = outer.abs_error;
    for (e, v) in abs_error.iter_mut().zip(outer.value) {
        let inner = inner_opts.tol.target(v);
        *e = (e.powi(2) + inner.powi(2)).sqrt();
    }
    VecResult {
        value: outer.value,
        abs_error,
        evaluations: evaluations.into_inner(),
        converged: outer.converged && all_inner_converged.into_inner(),
    }
}

pub fn integrate_2d<F>(f: F, tol: Tolerance) -> IntegrationResult
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    integrate_2d_vec(|x, y| [f(x, y)], Options::new(tol)).component(0)
}

/// How a thermal frequency sum is realised.
///
/// Every variant represents the measure Δ·Σ′ₙ f(nΔ) over Matsubara nodes,
/// where Δ is the node spacing (2πk_BT/ħ in whatever frequency unit the
/// caller uses) and the prime halves the n = 0 term. At T → 0 this measure
/// becomes ∫₀^∞ f(ξ) dξ; at T → ∞ only Δ·f(0)/2 survives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatsubaraGrid {
    Zero,
    Finite { spacing: f64 },
    High { spacing: f64 },
}

impl MatsubaraGrid {
    pub fn node(&self, n: usize) -> f64 {
        match *self {
            MatsubaraGrid::Zero => 0.0,
            MatsubaraGrid::Finite { spacing } | MatsubaraGrid::High { spacing } => n as f64 * spacing,
        }
    }

    pub fn spacing(&self) -> Option<f64> {
        match *self {
            MatsubaraGrid::Zero => None,
            MatsubaraGrid::Finite { spacing } | MatsubaraGrid::High { spacing } => Some(spacing),
        }
    }
}

/// Options for Matsubara sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumOptions {
    pub tol: Tolerance,
    pub max_terms: usize,
    /// Terms evaluated per batch; batches may run concurrently.
    pub batch: usize,
    pub parallel: bool,
}

impl SumOptions {
    pub fn new(tol: Tolerance) -> Self {
        SumOptions {
            tol,
            max_terms: 200_000,
            batch: 16,
            parallel: false,
        }
    }

    pub fn parallel(self, parallel: bool) -> Self {
        SumOptions { parallel, ..self }
    }
}

/// Δ·Σ′ₙ term(nΔ) for a vector-valued term returning `(value, error)` per
/// component. Truncation happens once the geometric extrapolation of the last
/// three terms, with a safety factor 2, is below tolerance for every
/// component.
pub fn matsubara_sum_vec<const N: usize, F>(
    term: F,
    grid: MatsubaraGrid,
    opts: SumOptions,
    inner: Options,
) -> VecResult<N>
where
    F: Fn(f64) -> ([f64; N], [f64; N]) + Sync,
{
    match grid {
        MatsubaraGrid::Zero => {
            // Inner errors of the term are folded into the quadrature noise.
            integrate_semi_infinite_vec(|x| term(x).0, inner, N)
        }
        MatsubaraGrid::High { spacing } => {
            let (v, e) = term(0.0);
            let mut value = [0.0; N];
            let mut abs_error = [0.0; N];
            for c in 0..N {
                value[c] = 0.5 * spacing * v[c];
                abs_error[c] = 0.5 * spacing * e[c];
            }
            VecResult {
                value,
                abs_error,
                evaluations: 1,
                converged: true,
            }
        }
        MatsubaraGrid::Finite { spacing } => finite_sum(term, spacing, opts),
    }
}

fn finite_sum<const N: usize, F>(term: F, spacing: f64, opts: SumOptions) -> VecResult<N>
where
    F: Fn(f64) -> ([f64; N], [f64; N]) + Sync,
{
    let mut sum = [0.0; N];
    let mut err = [0.0; N];
    let mut history: Vec<[f64; N]> = Vec::new();
    let mut n = 0usize;
    loop {
        let start = n;
        let stop = (n + opts.batch).min(opts.max_terms);
        let batch: Vec<([f64; N], [f64; N])> = if opts.parallel {
            (start..stop).into_par_iter().map(|i| term(i as f64 * spacing)).collect()
        } else {
            (start..stop).map(|i| term(i as f64 * spacing)).collect()
        };
        for (i, (v, e)) in (start..stop).zip(batch) {
            let w = if i == 0 { 0.5 } else { 1.0 };
            for c in 0..N {
                sum[c] += w * v[c];
                err[c] += w * e[c];
            }
            history.push(v);
        }
        n = stop;

        let k = history.len();
        let mut tails = [f64::INFINITY; N];
        if k >= 3 {
            for c in 0..N {
                let (t0, t1, t2) = (history[k - 3][c].abs(), history[k - 2][c].abs(), history[k - 1][c].abs());
                tails[c] = if t2 == 0.0 && t1 == 0.0 {
                    0.0
                } else if t0 > 0.0 && t1 > 0.0 {
                    let r = (t1 / t0).max(t2 / t1);
                    if r < 1.0 {
                        2.0 * t2 * r / (1.0 - r)
                    } else {
                        f64::INFINITY
                    }
                } else {
                    f64::INFINITY
                };
            }
        }
        let done = (0..N).all(|c| {
            let target = opts.tol.target(spacing * sum[c]);
            spacing * tails[c] <= target.max(f64::MIN_POSITIVE) || (tails[c] == 0.0)
        });
        if done || n >= opts.max_terms {
            let mut value = [0.0; N];
            let mut abs_error = [0.0; N];
            for c in 0..N {
                value[c] = spacing * sum[c];
                let tail = if tails[c].is_finite() { tails[c] } else { sum[c].abs() };
                abs_error[c] = spacing * (err[c] + tail);
            }
            return VecResult {
                value,
                abs_error,
                evaluations: n,
                converged: done,
            };
        }
    }
}

/// Δ·Σ′ₙ term(ξₙ); at T → 0 the integral ∫₀^∞ term(ξ) dξ.
pub fn matsubara_sum<F, E>(term: F, grid: MatsubaraGrid, tol: Tolerance) -> IntegrationResult
where
    F: Fn(f64) -> E + Sync,
    E: Into<Estimate>,
{
    matsubara_sum_vec(
        |x| {
            let e: Estimate = term(x).into();
            ([e.value], [e.error])
        },
        grid,
        SumOptions::new(tol),
        Options::new(tol),
    )
    .component(0)
}

/// Δ²·Σ′ₙΣ′ₘ term(ξₙ, ξ′ₘ) with independent tail control on both indices;
/// ∫∫ at T → 0 and Δ²·term(0, 0)/4 at T → ∞.
pub fn double_matsubara_sum<F, E>(term: F, grid: MatsubaraGrid, tol: Tolerance) -> IntegrationResult
where
    F: Fn(f64, f64) -> E + Sync,
    E: Into<Estimate>,
{
    match grid {
        MatsubaraGrid::Zero => integrate_2d(|x, y| term(x, y).into().value, tol),
        _ => {
            let inner_tol = tol.inner();
            matsubara_sum(
                |x| matsubara_sum(|y| term(x, y), grid, inner_tol),
                grid,
                tol,
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tol(rel: f64) -> Tolerance {
        Tolerance::new(rel).unwrap()
    }

    #[test]
    fn semi_infinite_examples() {
        let r = integrate_semi_infinite(|x| (-x).exp(), tol(1e-10));
        assert!(r.converged);
        assert!((r.value - 1.0).abs() < 1e-10, "{r:?}");
        assert!(r.abs_error <= 1e-10);

        let r = integrate_semi_infinite(|x| x.powi(3) * (-x).exp(), tol(1e-10));
        assert!((r.value - 6.0).abs() < 6e-10, "{r:?}");

        let r = integrate_semi_infinite(|x| x * (-x * x).exp(), tol(1e-10));
        assert!((r.value - 0.5).abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn converged_implies_error_within_target() {
        for t in [1e-4, 1e-8, 1e-12] {
            let r = integrate_semi_infinite(|x| (1.0 + x).powi(-3), tol(t));
            assert!(r.converged);
            assert!(r.abs_error <= t * r.value.abs().max(1.0));
            assert!((r.value - 0.5).abs() <= 10.0 * t);
        }
    }

    #[test]
    fn unconverged_is_reported() {
        // Not integrable: ∫ 1/x diverges at the origin.
        let r = integrate_semi_infinite_vec(
            |x| [1.0 / (x * (1.0 + x))],
            Options {
                max_intervals: 50,
                ..Options::new(tol(1e-10))
            },
            1,
        );
        assert!(!r.converged);
    }

    #[test]
    fn two_dimensional_examples() {
        let r = integrate_2d(|x, y| (-x - y).exp(), tol(1e-9));
        assert!(r.converged && (r.value - 1.0).abs() < 1e-9, "{r:?}");
        let r = integrate_2d(|x, y| x * y * (-x - y).exp(), tol(1e-9));
        assert!((r.value - 1.0).abs() < 1e-9, "{r:?}");
        let r = integrate_2d(|x, y| (-(x + y)).exp() * 0f64.cos(), tol(1e-9));
        assert!((r.value - 1.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn parallel_nodes_are_bitwise_identical() {
        let f = |x: f64| [x.sin().powi(2) * (-x).exp(), x * (-2.0 * x).exp()];
        let a = integrate_semi_infinite_vec(f, Options::new(tol(1e-11)), 2);
        let b = integrate_semi_infinite_vec(f, Options::new(tol(1e-11)).parallel(true), 2);
        assert_eq!(a, b);
    }

    #[test]
    fn matsubara_geometric_series() {
        // term(ξₙ) = 2⁻ⁿ with unit spacing: 1/2 + Σ_{n≥1} 2⁻ⁿ = 3/2.
        let grid = MatsubaraGrid::Finite { spacing: 1.0 };
        let r = matsubara_sum(|x: f64| 0.5f64.powf(x), grid, tol(1e-12));
        assert!(r.converged);
        assert!((r.value - 1.5).abs() < 1e-11, "{r:?}");
    }

    #[test]
    fn matsubara_high_t_keeps_half_zeroth_term() {
        let grid = MatsubaraGrid::High { spacing: 1.0 };
        let r = matsubara_sum(|x: f64| if x == 0.0 { 7.0 } else { 1e9 }, grid, tol(1e-9));
        assert_eq!(r.value, 3.5);
    }

    #[test]
    fn matsubara_zero_t_becomes_integral() {
        let s = 2.5;
        let r = matsubara_sum(|x: f64| (-x / s).exp(), MatsubaraGrid::Zero, tol(1e-10));
        assert!((r.value - s).abs() < 1e-9);
        // The finite-T measure approaches the integral as the spacing shrinks.
        let fine = matsubara_sum(
            |x: f64| (-x / s).exp(),
            MatsubaraGrid::Finite { spacing: 1e-3 },
            tol(1e-10),
        );
        assert!((fine.value - s).abs() < 1e-6, "{fine:?}");
    }

    #[test]
    fn non_decaying_terms_do_not_converge() {
        let grid = MatsubaraGrid::Finite { spacing: 1.0 };
        let r = matsubara_sum_vec(
            |_x| ([1.0], [0.0]),
            grid,
            SumOptions {
                max_terms: 500,
                ..SumOptions::new(tol(1e-8))
            },
            Options::new(tol(1e-8)),
        );
        assert!(!r.converged);
    }

    #[test]
    fn double_sum_examples() {
        let grid = MatsubaraGrid::Finite { spacing: 1.0 };
        let r = double_matsubara_sum(|x: f64, y: f64| 0.5f64.powf(x) * 0.5f64.powf(y), grid, tol(1e-11));
        assert!((r.value - 2.25).abs() < 1e-10, "{r:?}");

        let high = MatsubaraGrid::High { spacing: 1.0 };
        let r = double_matsubara_sum(|_x: f64, _y: f64| 3.0, high, tol(1e-9));
        assert_eq!(r.value, 0.75);

        let (s1, s2) = (1.5, 0.4);
        let single1 = matsubara_sum(|x: f64| (-x / s1).exp(), MatsubaraGrid::Zero, tol(1e-10));
        let single2 = matsubara_sum(|x: f64| (-x / s2).exp(), MatsubaraGrid::Zero, tol(1e-10));
        let r = double_matsubara_sum(
            |x: f64, y: f64| (-x / s1 - y / s2).exp(),
            MatsubaraGrid::Zero,
            tol(1e-10),
        );
        assert!((r.value - single1.value * single2.value).abs() < 1e-8);
    }

    #[test]
    fn tolerance_range_is_enforced() {
        assert!(Tolerance::new(1e-15).is_err());
        assert!(Tolerance::new(0.1).is_err());
        assert!(Tolerance::new(1e-6).is_ok());
    }

    #[test]
    fn halving_tolerance_does_not_increase_error() {
        let f = |x: f64| (1.0 + x * x).recip() * (-0.1 * x).exp();
        let mut last = f64::INFINITY;
        for k in 0..12 {
            let t = 1e-3 / 2f64.powi(k);
            let r = integrate_semi_infinite(f, tol(t));
            assert!(r.abs_error <= last * (1.0 + 1e-12), "k={k}: {} > {last}", r.abs_error);
            last = r.abs_error;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn integration_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, s in 0.2f64..4.0) {
            let t = tol(1e-10);
            let f = |x: f64| (-x / s).exp();
            let g = |x: f64| x * x * (-x).exp();
            let lhs = integrate_semi_infinite(|x| a * f(x) + b * g(x), t);
            let rf = integrate_semi_infinite(f, t);
            let rg = integrate_semi_infinite(g, t);
            let rhs = a * rf.value + b * rg.value;
            let bound = lhs.abs_error + a.abs() * rf.abs_error + b.abs() * rg.abs_error + 1e-14;
            prop_assert!((lhs.value - rhs).abs() <= 10.0 * bound);
        }

        #[test]
        fn separable_double_sum_factorises(r in 0.05f64..0.8, q in 0.05f64..0.8, dx in 0.3f64..2.0) {
            let grid = MatsubaraGrid::Finite { spacing: dx };
            let t = tol(1e-11);
            let a = matsubara_sum(|x: f64| r.powf(x / dx), grid, t);
            let b = matsubara_sum(|x: f64| q.powf(x / dx), grid, t);
            let ab = double_matsubara_sum(|x: f64, y: f64| r.powf(x / dx) * q.powf(y / dx), grid, t);
            prop_assert!((ab.value - a.value * b.value).abs() <= 1e-9 * ab.value.abs());
        }
    }
}
