//! Adaptive Gauss–Kronrod integration on finite intervals and on `(0, ∞)`.
//!
//! Each panel is integrated with the 7-point Gauss / 15-point Kronrod pair and
//! the panel with the largest error estimate is bisected until the global
//! tolerance is met. Nodes are strictly interior, so integrable endpoint
//! singularities are never evaluated. Endpoint hints pre-split the interval
//! into geometrically shrinking panels toward the singular end.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{check_gt, Error, Result};

/// Which ends of the interval carry an (integrable) singularity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointHints {
    pub left_singular: bool,
    pub right_singular: bool,
}

impl EndpointHints {
    pub const NONE: Self = Self {
        left_singular: false,
        right_singular: false,
    };
    pub const LEFT: Self = Self {
        left_singular: true,
        right_singular: false,
    };
    pub const RIGHT: Self = Self {
        left_singular: false,
        right_singular: true,
    };
    pub const BOTH: Self = Self {
        left_singular: true,
        right_singular: true,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    abs_tol: f64,
    rel_tol: f64,
    max_subdivisions: usize,
    hints: EndpointHints,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_subdivisions: 2000,
            hints: EndpointHints::NONE,
        }
    }
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        check_gt("abs_tol", abs_tol, 0.0, "abs_tol > 0")?;
        check_gt("rel_tol", rel_tol, 0.0, "rel_tol > 0")?;
        if max_subdivisions == 0 {
            return Err(Error::domain("max_subdivisions", 0.0, "max_subdivisions >= 1"));
        }
        Ok(Self {
            abs_tol,
            rel_tol,
            max_subdivisions,
            hints: EndpointHints::NONE,
        })
    }

    pub fn abs_tol(&self) -> f64 {
        self.abs_tol
    }

    pub fn rel_tol(&self) -> f64 {
        self.rel_tol
    }

    pub fn max_subdivisions(&self) -> usize {
        self.max_subdivisions
    }

    pub fn hints(&self) -> EndpointHints {
        self.hints
    }

    pub fn with_hints(mut self, hints: EndpointHints) -> Self {
        self.hints = hints;
        self
    }

    /// Divides both tolerances by `factor`, keeping them above what double
    /// precision can resolve.
    pub fn tightened(mut self, factor: f64) -> Self {
        self.abs_tol = (self.abs_tol / factor).max(1e-300);
        self.rel_tol = (self.rel_tol / factor).max(1e-15);
        self
    }

    pub(crate) fn tolerance_for(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl QuadratureResult {
    /// Converts a non-converged result into an error.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence {
                value: self.value,
                error_estimate: self.error_estimate,
                evaluations: self.evaluations,
                context: String::new(),
            })
        }
    }
}

// Kronrod abscissae; odd indices are the Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Number of pre-split panels per singular endpoint and their shrink ratio.
const HINT_LEVELS: i32 = 4;
const HINT_RATIO: f64 = 0.125;

/// An interior abscissa together with its exact distances to both interval
/// ends. Near an endpoint the distance is resolved far more finely than the
/// abscissa itself, which is what singular integrands need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Abscissa {
    pub x: f64,
    pub from_lo: f64,
    pub from_hi: f64,
}

/// Half of the interval a panel lives in. Each half is parametrized by the
/// distance `t` from its own endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Half {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    half: Half,
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
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
        self.error.total_cmp(&other.error)
    }
}

struct Workspace<F> {
    f: F,
    lo: f64,
    hi: f64,
    width: f64,
    evaluations: usize,
    /// Smallest distance from each end the integrand can tell apart from the
    /// end itself (zero when the integrand reads `from_lo`/`from_hi`).
    resolution: [f64; 2],
}

impl<F> Workspace<F>
where
    F: FnMut(Abscissa) -> Result<f64>,
{
    fn abscissa(&self, half: Half, t: f64) -> Abscissa {
        match half {
            Half::Left => Abscissa {
                x: self.lo + t,
                from_lo: t,
                from_hi: self.width - t,
            },
            Half::Right => Abscissa {
                x: self.hi - t,
                from_lo: self.width - t,
                from_hi: t,
            },
        }
    }

    fn eval(&mut self, half: Half, t: f64) -> Result<f64> {
        self.evaluations += 1;
        let point = self.abscissa(half, t);
        let v = (self.f)(point)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteIntegrand {
                abscissa: point.x,
                value: v,
                context: String::new(),
            })
        }
    }

    /// Whether bisecting `[lo, hi]` keeps every Kronrod node resolvable.
    fn splittable(&self, half: Half, lo: f64, hi: f64) -> bool {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || (hi - lo) <= 64.0 * f64::EPSILON * hi {
            return false;
        }
        let limit = match half {
            Half::Left => self.resolution[0],
            Half::Right => self.resolution[1],
        };
        let innermost = lo + 0.5 * (mid - lo) * (1.0 - XGK[0]);
        innermost >= limit
    }

    /// One 15-point Kronrod panel with the QUADPACK error scaling.
    fn panel(&mut self, half: Half, lo: f64, hi: f64) -> Result<Panel> {
        let center = 0.5 * (lo + hi);
        let half_width = 0.5 * (hi - lo);
        let fc = self.eval(half, center)?;
        let mut res_gauss = fc * WG[3];
        let mut res_kronrod = fc * WGK[7];
        let mut res_abs = res_kronrod.abs();
        let mut fv1 = [0.0; 7];
        let mut fv2 = [0.0; 7];
        for j in 0..7 {
            let dx = half_width * XGK[j];
            let f1 = self.eval(half, center - dx)?;
            let f2 = self.eval(half, center + dx)?;
            fv1[j] = f1;
            fv2[j] = f2;
            res_kronrod += WGK[j] * (f1 + f2);
            res_abs += WGK[j] * (f1.abs() + f2.abs());
            if j % 2 == 1 {
                res_gauss += WG[j / 2] * (f1 + f2);
            }
        }
        let mean = res_kronrod * 0.5;
        let mut res_asc = WGK[7] * (fc - mean).abs();
        for j in 0..7 {
            res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
        }
        let value = res_kronrod * half_width;
        let res_abs = res_abs * half_width;
        let res_asc = res_asc * half_width;
        let mut error = ((res_kronrod - res_gauss) * half_width).abs();
        if res_asc != 0.0 && error != 0.0 {
            error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
        }
        if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            error = error.max(50.0 * f64::EPSILON * res_abs);
        }
        Ok(Panel {
            half,
            lo,
            hi,
            value,
            error,
        })
    }
}

/// Breakpoints in the distance coordinate `t ∈ [0, half_width]` of one half.
fn initial_breakpoints(half_width: f64, singular: bool) -> Vec<f64> {
    let mut points = vec![0.0];
    if singular {
        for k in (1..=HINT_LEVELS).rev() {
            points.push(2.0 * half_width * HINT_RATIO.powi(k));
        }
    }
    points.push(half_width);
    points
}

/// Sums panel values and errors with compensated summation.
fn totals<'a>(panels: impl Iterator<Item = &'a Panel>) -> (f64, f64) {
    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    let mut error = 0.0;
    for p in panels {
        let t = sum + p.value;
        if sum.abs() >= p.value.abs() {
            compensation += (sum - t) + p.value;
        } else {
            compensation += (p.value - t) + sum;
        }
        sum = t;
        error += p.error;
    }
    (sum + compensation, error)
}

/// Integrates over `[lo, hi]` an integrand that receives each abscissa with
/// its exact distances to both ends.
///
/// The interval is split at its midpoint and each half is parametrized by the
/// distance from its own endpoint. Errors returned by the integrand abort the
/// integration unchanged, which is how nested integrals propagate failures.
pub fn try_integrate_abscissa<F>(f: F, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<QuadratureResult>
where
    F: FnMut(Abscissa) -> Result<f64>,
{
    integrate_core(f, lo, hi, spec, [0.0, 0.0])
}

const MAX_GRADING: f64 = 16.0;

/// Like [`try_integrate_abscissa`] for an integrand known to behave like
/// `(x-lo)^a` near `lo` and `(hi-x)^b` near `hi`, with `exponents = [a, b]`
/// and both above -1.
///
/// Each half with a negative exponent `e` is integrated in `v` with
/// `t = h v^{1/(e+1)}`, where `t` is the distance from that end and `h` the
/// half width; the substitution cancels the leading singularity unless the
/// power would exceed 16. Halves
/// with `e ≥ 0` keep `t = h v`, using the spec's hint for that end.
pub fn try_integrate_graded<F>(
    mut f: F,
    lo: f64,
    hi: f64,
    exponents: [f64; 2],
    spec: &QuadratureSpec,
) -> Result<QuadratureResult>
where
    F: FnMut(Abscissa) -> Result<f64>,
{
    for e in exponents {
        if !(e > -1.0 && e.is_finite()) {
            return Err(Error::domain("exponent", e, "endpoint exponent > -1"));
        }
    }
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(Error::domain("lo", lo, "finite lo < hi"));
    }
    let width = hi - lo;
    let h = 0.5 * width;
    let mut half_spec = *spec;
    half_spec.abs_tol *= 0.5;
    let mut total = QuadratureResult {
        value: 0.0,
        error_estimate: 0.0,
        evaluations: 0,
        converged: true,
    };
    for (half, e) in [(Half::Left, exponents[0]), (Half::Right, exponents[1])] {
        // steeper maps would push abscissae into the subnormal range where
        // t^e overflows
        let beta = if e < 0.0 { (1.0 / (e + 1.0)).min(MAX_GRADING) } else { 1.0 };
        let singular = match half {
            Half::Left => spec.hints.left_singular,
            Half::Right => spec.hints.right_singular,
        };
        // a mapped end still has a mild remainder, so keep it graded
        let hints = EndpointHints {
            left_singular: singular || e < 0.0,
            right_singular: false,
        };
        let res = try_integrate_abscissa(
            |a| {
                let v = a.from_lo;
                let (t, jacobian) = if beta == 1.0 {
                    (h * v, h)
                } else {
                    let vb = v.powf(beta);
                    (h * vb, h * beta * vb / v)
                };
                let point = match half {
                    Half::Left => Abscissa {
                        x: lo + t,
                        from_lo: t,
                        from_hi: width - t,
                    },
                    Half::Right => Abscissa {
                        x: hi - t,
                        from_lo: width - t,
                        from_hi: t,
                    },
                };
                if t == 0.0 {
                    // v so small the mapped point underflows; the weight vanishes there
                    return Ok(0.0);
                }
                let fx = f(point)?;
                Ok(if fx == 0.0 { 0.0 } else { fx * jacobian })
            },
            0.0,
            1.0,
            &half_spec.with_hints(hints),
        )?;
        total.value += res.value;
        total.error_estimate += res.error_estimate;
        total.evaluations += res.evaluations;
        total.converged &= res.converged;
    }
    total.converged &= total.error_estimate <= spec.tolerance_for(total.value);
    Ok(total)
}

fn integrate_core<F>(f: F, lo: f64, hi: f64, spec: &QuadratureSpec, resolution: [f64; 2]) -> Result<QuadratureResult>
where
    F: FnMut(Abscissa) -> Result<f64>,
{
    if !(lo.is_finite() && hi.is_finite()) {
        let bad = if lo.is_finite() { hi } else { lo };
        return Err(Error::domain("interval bound", bad, "finite bounds"));
    }
    if lo >= hi {
        return Err(Error::domain("lo", lo, "lo < hi"));
    }
    let width = hi - lo;
    let half_width = 0.5 * width;
    let mut ws = Workspace {
        f,
        lo,
        hi,
        width,
        evaluations: 0,
        resolution,
    };
    let mut heap = BinaryHeap::new();
    for (half, singular) in [(Half::Left, spec.hints.left_singular), (Half::Right, spec.hints.right_singular)] {
        for pair in initial_breakpoints(half_width, singular).windows(2) {
            heap.push(ws.panel(half, pair[0], pair[1])?);
        }
    }
    let mut settled: Vec<Panel> = Vec::new();
    let mut settled_error = 0.0;
    let (mut value, mut error) = totals(heap.iter());
    let mut subdivisions = 0usize;

    while error > spec.tolerance_for(value) && subdivisions < spec.max_subdivisions {
        let Some(worst) = heap.pop() else { break };
        if !ws.splittable(worst.half, worst.lo, worst.hi) {
            // Panel cannot be split further in double precision.
            settled_error += worst.error;
            settled.push(worst);
            if settled_error > spec.tolerance_for(value) {
                break;
            }
            continue;
        }
        let mid = 0.5 * (worst.lo + worst.hi);
        let left = ws.panel(worst.half, worst.lo, mid)?;
        let right = ws.panel(worst.half, mid, worst.hi)?;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        subdivisions += 1;
        if error <= spec.tolerance_for(value) || subdivisions % 64 == 0 {
            (value, error) = totals(heap.iter().chain(settled.iter()));
        }
    }
    let (value, error_estimate) = totals(heap.iter().chain(settled.iter()));
    Ok(QuadratureResult {
        value,
        error_estimate,
        evaluations: ws.evaluations,
        converged: error_estimate <= spec.tolerance_for(value),
    })
}

/// Moves an abscissa that rounded onto an interval end back inside.
fn interior(point: Abscissa, lo: f64, hi: f64) -> f64 {
    if point.x <= lo {
        lo.next_up()
    } else if point.x >= hi {
        hi.next_down()
    } else {
        point.x
    }
}

/// Integrates a fallible integrand over `[lo, hi]`.
///
/// The integrand only sees the abscissa, so panels are not refined below the
/// floating-point spacing at either end; an unresolved endpoint singularity
/// shows up as `converged == false` rather than as a silently wrong value.
pub fn try_integrate_interval<F>(mut f: F, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<QuadratureResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    let spacing = |v: f64| 4.0 * (v.abs().next_up() - v.abs());
    integrate_core(|a| f(interior(a, lo, hi)), lo, hi, spec, [spacing(lo), spacing(hi)])
}

/// Integrates `f` over `[lo, hi]`.
pub fn integrate_interval<F>(mut f: F, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<QuadratureResult>
where
    F: FnMut(f64) -> f64,
{
    try_integrate_interval(|x| Ok(f(x)), lo, hi, spec)
}

/// Integrates `f` over the open unit interval.
pub fn integrate_unit<F>(f: F, spec: &QuadratureSpec) -> Result<QuadratureResult>
where
    F: FnMut(f64) -> f64,
{
    integrate_interval(f, 0.0, 1.0, spec)
}

pub fn try_integrate_unit<F>(f: F, spec: &QuadratureSpec) -> Result<QuadratureResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    try_integrate_interval(f, 0.0, 1.0, spec)
}

/// Integrates a fallible `f` over `(0, ∞)` through `y = u / (1 - u)`.
///
/// The hints refer to the transformed interval: `left_singular` for `y → 0`,
/// `right_singular` for slow decay as `y → ∞`.
pub fn try_integrate_semi_infinite<F>(mut f: F, spec: &QuadratureSpec) -> Result<QuadratureResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    try_integrate_abscissa(
        |a| {
            // a.from_hi is 1 - u, exact even when u rounds to 1
            let complement = a.from_hi;
            let y = a.from_lo / complement;
            let fy = f(y)?;
            if fy == 0.0 {
                Ok(0.0)
            } else {
                Ok(fy / (complement * complement))
            }
        },
        0.0,
        1.0,
        spec,
    )
}

pub fn integrate_semi_infinite<F>(mut f: F, spec: &QuadratureSpec) -> Result<QuadratureResult>
where
    F: FnMut(f64) -> f64,
{
    try_integrate_semi_infinite(|y| Ok(f(y)), spec)
}
