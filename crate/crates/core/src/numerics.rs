//! Quadrature, special functions and bracketed root finding.
//!
//! Everything here is a pure function of its inputs. The adaptive rule is a
//! globally adaptive 21-point Gauss–Kronrod scheme in the style of QUADPACK's
//! QAG: the interval with the largest error estimate is bisected until the
//! summed error estimate drops below `max(abs_tol, rel_tol * |I|)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("quadrature did not converge after {subdivisions} subdivisions (estimate {estimate:e}, error bound {error:e})")]
    NoConvergence {
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },
    #[error("integrand does not decay on the semi-infinite tail starting at {start}")]
    Divergent { start: f64 },
    #[error("integrand returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no sign change on [{lo}, {hi}]: g(lo) = {g_lo:e}, g(hi) = {g_hi:e}")]
    InfeasibleBracket {
        lo: f64,
        hi: f64,
        g_lo: f64,
        g_hi: f64,
    },
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Tolerances and work limit for one adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl QuadratureSpec {
    /// Tolerances used for innermost integrals.
    pub const INNER: QuadratureSpec = QuadratureSpec {
        rel_tol: 1e-6,
        abs_tol: 1e-10,
        max_subdivisions: 400,
    };

    /// Tolerances used for the outer serving-distance and threshold integrals.
    pub const OUTER: QuadratureSpec = QuadratureSpec {
        rel_tol: 1e-4,
        abs_tol: 1e-10,
        max_subdivisions: 400,
    };

    pub fn new(rel_tol: f64, abs_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let spec = QuadratureSpec {
            rel_tol,
            abs_tol,
            max_subdivisions,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(NumericsError::Domain(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        if !(self.abs_tol >= 0.0) {
            return Err(NumericsError::Domain(format!(
                "abs_tol must be non-negative, got {}",
                self.abs_tol
            )));
        }
        if self.max_subdivisions < 1 {
            return Err(NumericsError::Domain("max_subdivisions must be at least 1".into()));
        }
        Ok(())
    }

    fn tolerance(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec::INNER
    }
}

/// Integral estimate together with its error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

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
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// One 21-point Gauss–Kronrod panel: (value, error estimate).
fn gauss_kronrod_21<F, E>(f: &mut F, a: f64, b: f64) -> std::result::Result<(f64, f64), E>
where
    F: FnMut(f64) -> std::result::Result<f64, E>,
    E: From<NumericsError>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let eval = |f: &mut F, x: f64| -> std::result::Result<f64, E> {
        let y = f(x)?;
        if y.is_finite() {
            Ok(y)
        } else {
            Err(NumericsError::NonFinite { x }.into())
        }
    };

    let f_center = eval(f, center)?;
    let mut kronrod = WGK[10] * f_center;
    let mut gauss = 0.0;
    let mut abs_sum = kronrod.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];

    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = eval(f, center - dx)?;
        let f2 = eval(f, center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        // Gauss nodes are the odd-indexed Kronrod abscissae.
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let value = kronrod * half;
    let abs_sum = abs_sum * half.abs();
    let asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    if abs_sum > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * abs_sum);
    }
    Ok((value, error))
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        // Largest error first; ties broken by position so the schedule is
        // fully deterministic.
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Adaptive integration of a fallible integrand over a finite interval.
///
/// This is the workhorse behind every nested integral in the crate: the
/// closure may itself run an integration and propagate its failure.
pub fn try_integrate<F, E>(mut f: F, a: f64, b: f64, spec: &QuadratureSpec) -> std::result::Result<Estimate, E>
where
    F: FnMut(f64) -> std::result::Result<f64, E>,
    E: From<NumericsError>,
{
    spec.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(NumericsError::Domain(format!("bounds must be finite, got [{a}, {b}]")).into());
    }
    if a > b {
        return Err(NumericsError::Domain(format!("lower bound {a} exceeds upper bound {b}")).into());
    }
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            subdivisions: 0,
        });
    }

    let (value, error) = gauss_kronrod_21(&mut f, a, b)?;
    let mut heap = BinaryHeap::with_capacity(spec.max_subdivisions + 1);
    heap.push(Panel { a, b, value, error });
    let mut total = value;
    let mut total_error = error;
    let mut subdivisions = 0;

    while total_error > spec.tolerance(total) {
        if subdivisions >= spec.max_subdivisions {
            return Err(NumericsError::NoConvergence {
                estimate: total,
                error: total_error,
                subdivisions,
            }
            .into());
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel at floating-point resolution; nothing more to gain.
            heap.push(worst);
            break;
        }
        let (v1, e1) = gauss_kronrod_21(&mut f, worst.a, mid)?;
        let (v2, e2) = gauss_kronrod_21(&mut f, mid, worst.b)?;
        total += v1 + v2 - worst.value;
        total_error += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        subdivisions += 1;
    }

    // Re-sum in interval order so the result does not carry drift from the
    // running updates.
    let mut panels = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = panels.iter().map(|p| p.value).sum();
    let error = panels.iter().map(|p| p.error).sum();
    Ok(Estimate {
        value,
        error,
        subdivisions,
    })
}

/// ∫ₐᵇ f(x) dx to the tolerance in `spec`.
pub fn integrate_adaptive<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    try_integrate::<_, NumericsError>(|x| Ok(f(x)), a, b, spec).map(|e| e.value)
}

/// Returns true when the mapped integrand grows at least like 1/(1-u) as
/// u → 1, i.e. the original integrand decays no faster than 1/y.
fn tail_diverges<F, E>(g: &mut F) -> std::result::Result<bool, E>
where
    F: FnMut(f64) -> std::result::Result<f64, E>,
{
    let mut previous: Option<f64> = None;
    let mut growing = 0;
    for k in 2..=7 {
        let u = 1.0 - 10f64.powi(-k);
        let value = g(u)?.abs();
        if !value.is_finite() {
            return Ok(true);
        }
        if let Some(p) = previous {
            if p > 0.0 && value >= 9.0 * p {
                growing += 1;
            } else {
                growing = 0;
            }
        }
        previous = Some(value);
    }
    Ok(growing >= 3)
}

/// Fallible variant of [`integrate_semi_infinite_scaled`].
pub fn try_integrate_semi_infinite<F, E>(
    mut f: F,
    a: f64,
    scale: f64,
    spec: &QuadratureSpec,
) -> std::result::Result<Estimate, E>
where
    F: FnMut(f64) -> std::result::Result<f64, E>,
    E: From<NumericsError>,
{
    if !a.is_finite() {
        return Err(NumericsError::Domain(format!("lower bound must be finite, got {a}")).into());
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(NumericsError::Domain(format!("scale must be positive, got {scale}")).into());
    }
    let mut mapped = |u: f64| -> std::result::Result<f64, E> {
        let w = 1.0 - u;
        let y = a + scale * u / w;
        Ok(f(y)? * scale / (w * w))
    };
    if tail_diverges(&mut mapped)? {
        return Err(NumericsError::Divergent { start: a }.into());
    }
    try_integrate(mapped, 0.0, 1.0, spec)
}

/// ∫ₐ^∞ f(y) dy through y = a + u/(1 − u), u ∈ [0, 1).
pub fn integrate_semi_infinite<F>(f: F, a: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate_semi_infinite_scaled(f, a, 1.0, spec)
}

/// ∫ₐ^∞ f(y) dy through y = a + s·u/(1 − u), where `scale` = s is the
/// length over which f varies. Matching s to the integrand keeps the mapped
/// function from piling up against u = 1.
pub fn integrate_semi_infinite_scaled<F>(f: F, a: f64, scale: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    try_integrate_semi_infinite::<_, NumericsError>(|y| Ok(f(y)), a, scale, spec).map(|e| e.value)
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// B(P, Q) = Γ(P)Γ(Q)/Γ(P+Q).
pub fn beta_function(p: f64, q: f64) -> Result<f64> {
    if !(p > 0.0 && q > 0.0) {
        return Err(NumericsError::Domain(format!(
            "beta function needs positive arguments, got ({p}, {q})"
        )));
    }
    Ok((ln_gamma(p) + ln_gamma(q) - ln_gamma(p + q)).exp())
}

/// Final bracket of a bisection: the sign change lies in `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub g_lo: f64,
    pub g_hi: f64,
}

impl Bracket {
    pub fn root(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Bisection on a fallible monotone function.
pub fn try_binary_search_root<G, E>(mut g: G, lo: f64, hi: f64, tol: f64) -> std::result::Result<Bracket, E>
where
    G: FnMut(f64) -> std::result::Result<f64, E>,
    E: From<NumericsError>,
{
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(NumericsError::Domain(format!("invalid bracket [{lo}, {hi}]")).into());
    }
    if !(tol > 0.0) {
        return Err(NumericsError::Domain(format!("tolerance must be positive, got {tol}")).into());
    }
    let mut lo = lo;
    let mut hi = hi;
    let mut g_lo = g(lo)?;
    let mut g_hi = g(hi)?;
    if !(g_lo.is_finite() && g_hi.is_finite()) || g_lo * g_hi > 0.0 {
        return Err(NumericsError::InfeasibleBracket { lo, hi, g_lo, g_hi }.into());
    }
    if g_lo == 0.0 {
        return Ok(Bracket { lo, hi: lo, g_lo, g_hi: g_lo });
    }
    if g_hi == 0.0 {
        return Ok(Bracket { lo: hi, hi, g_lo: g_hi, g_hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = g(mid)?;
        if g_mid == 0.0 {
            return Ok(Bracket {
                lo: mid,
                hi: mid,
                g_lo: 0.0,
                g_hi: 0.0,
            });
        }
        if (g_mid > 0.0) == (g_lo > 0.0) {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
            g_hi = g_mid;
        }
    }
    Ok(Bracket { lo, hi, g_lo, g_hi })
}

/// Root of a monotone function on `[lo, hi]`, returned as the final bracket
/// of width ≤ `tol`.
pub fn binary_search_root<G>(g: G, lo: f64, hi: f64, tol: f64) -> Result<Bracket>
where
    G: Fn(f64) -> f64,
{
    try_binary_search_root::<_, NumericsError>(|x| Ok(g(x)), lo, hi, tol)
}
