//! Mixing densities over the Negative Binomial success probability `p`, the
//! `γ = 1/p` transform, and the Poisson rate `λ`.
//!
//! The densities over `p` all share the normalizer `ζ(s)Γ(s)`; the `r > 1` and
//! `r < 1` cases need one or two inner integrals
//!
//! ```text
//! I(k, m) = ∫_p^1 (ω-p)^m (-ln ω)^k ω^{-(m+1)} dω
//!         = ∫_0^y (1 - e^{-ξ})^m (y - ξ)^k dξ,      y = -ln p
//! ```
//!
//! evaluated either in the raw `ω` variable or in the logarithmic one.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::error::{check_gt, Error, Result};
use crate::quadrature::{
    try_integrate_graded, try_integrate_semi_infinite, Abscissa, EndpointHints,
    QuadratureResult, QuadratureSpec,
};
use crate::special::{generalized_harmonic, hurwitz_zeta, log_gamma_unchecked, riemann_zeta};

/// Smallest `p` the public density functions accept.
pub const P_MIN: f64 = 1e-12;
/// Largest `p` the public density functions accept.
pub const P_MAX: f64 = 1.0 - 1e-12;

/// Below this `s` the inner integrals use the logarithmic variable.
pub const LOG_FORM_BELOW: f64 = 1.2;

/// Tolerance ratio between an outer integral and the inner integrals it nests.
const INNER_TIGHTENING: f64 = 100.0;

/// Below this the exponential of a log-kernel underflows to zero anyway.
pub(crate) const LN_UNDERFLOW: f64 = -745.0;

/// A point of the unit interval with its complement and `-ln p`, each to full
/// relative precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct UnitPoint {
    pub p: f64,
    pub q: f64,
    pub y: f64,
}

impl UnitPoint {
    pub(crate) fn new(p: f64, q: f64) -> Self {
        let y = if p < 0.5 { -p.ln() } else { -(-q).ln_1p() };
        Self { p, q, y }
    }

    pub(crate) fn from_p(p: f64) -> Self {
        Self::new(p, 1.0 - p)
    }

    /// Point of a sub-interval `[lo, hi]` of `[0, 1]`, reading the exact
    /// distances when the sub-interval touches 0 or 1.
    pub(crate) fn on(a: Abscissa, lo: f64, hi: f64) -> Self {
        let p = if lo == 0.0 { a.from_lo } else { a.x };
        let q = if hi == 1.0 { a.from_hi } else { 1.0 - a.x };
        Self::new(p, q)
    }
}

fn check_p(p: f64) -> Result<UnitPoint> {
    if p > P_MIN && p < P_MAX {
        Ok(UnitPoint::from_p(p))
    } else {
        Err(Error::domain("p", p, "1e-12 < p < 1 - 1e-12"))
    }
}

fn check_s(s: f64) -> Result<f64> {
    check_gt("s", s, 1.0, "s > 1")
}

/// `ln(ζ(s) Γ(s))`, the normalizer shared by every density here.
fn ln_normalizer(s: f64) -> Result<f64> {
    Ok(riemann_zeta(s)?.ln() + log_gamma_unchecked(s))
}

/// Which mixing density to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MixingDensityKind {
    /// Geometric kernel, closed form over `p`.
    R1Closed { s: f64 },
    /// `r = 2`, closed form over `p`.
    R2Closed { s: f64 },
    /// Any `r > 1`, one inner integral.
    RGt1Integral { r: f64, s: f64 },
    /// `0 < r < 1`, signed density with two inner integrals.
    RLt1Quasi { r: f64, s: f64 },
    /// Geometric kernel expressed over `γ = 1/p`.
    GammaTransform { s: f64 },
    /// Poisson rate `λ`.
    LambdaMixing { s: f64 },
}

impl MixingDensityKind {
    /// The density over `p` for a Negative Binomial kernel with shape `r`,
    /// using the closed forms at `r = 1` and `r = 2`.
    pub fn for_shape(r: f64, s: f64) -> Result<Self> {
        check_gt("r", r, 0.0, "r > 0")?;
        check_s(s)?;
        Ok(if r == 1.0 {
            Self::R1Closed { s }
        } else if r == 2.0 {
            Self::R2Closed { s }
        } else if r > 1.0 {
            Self::RGt1Integral { r, s }
        } else {
            Self::RLt1Quasi { r, s }
        })
    }

    pub fn s(&self) -> f64 {
        match *self {
            Self::R1Closed { s }
            | Self::R2Closed { s }
            | Self::RGt1Integral { s, .. }
            | Self::RLt1Quasi { s, .. }
            | Self::GammaTransform { s }
            | Self::LambdaMixing { s } => s,
        }
    }

    /// Negative Binomial shape, absent for the `γ` and `λ` densities.
    pub fn r(&self) -> Option<f64> {
        match *self {
            Self::R1Closed { .. } => Some(1.0),
            Self::R2Closed { .. } => Some(2.0),
            Self::RGt1Integral { r, .. } | Self::RLt1Quasi { r, .. } => Some(r),
            Self::GammaTransform { .. } | Self::LambdaMixing { .. } => None,
        }
    }

    /// Whether the density is over `p ∈ (0, 1)`.
    pub fn is_over_p(&self) -> bool {
        self.r().is_some()
    }

    /// Whether the density takes negative values.
    pub fn is_signed(&self) -> bool {
        matches!(self, Self::RLt1Quasi { .. })
    }

    /// Checks the tag/shape consistency the variants promise.
    pub fn validate(&self) -> Result<()> {
        check_s(self.s())?;
        match *self {
            Self::RGt1Integral { r, .. } => {
                check_gt("r", r, 1.0, "r > 1")?;
            }
            Self::RLt1Quasi { r, .. } => {
                check_gt("r", r, 0.0, "0 < r < 1")?;
                if r >= 1.0 {
                    return Err(Error::domain("r", r, "0 < r < 1"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Evaluates the density at `point` (`p`, `γ` or `λ` depending on the kind).
    pub fn evaluate(&self, point: f64, spec: &QuadratureSpec) -> Result<f64> {
        self.validate()?;
        match *self {
            Self::GammaTransform { s } => gamma_transform_pdf(point, s),
            Self::LambdaMixing { s } => lambda_mixing_pdf(point, s, spec),
            _ => {
                let pt = check_p(point)?;
                PMixing::new(self, spec)?.eval(pt)
            }
        }
    }
}

/// Variable used for the inner integrals of the `r ≠ 1, 2` densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerForm {
    /// `ω ∈ (p, 1)`.
    Raw,
    /// `ξ = y - (-ln ω) ∈ (0, y)`, rescaled to the unit interval.
    Log,
}

impl InnerForm {
    pub fn for_s(s: f64) -> Self {
        if s < LOG_FORM_BELOW {
            Self::Log
        } else {
            Self::Raw
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Family {
    R1,
    R2,
    Gt1,
    Lt1,
}

/// Evaluator for the densities over `p`, with the normalizer precomputed and
/// a running count of inner-integral evaluations.
pub(crate) struct PMixing {
    family: Family,
    r: f64,
    s: f64,
    ln_norm: f64,
    inner_spec: QuadratureSpec,
    form: InnerForm,
    inner_evaluations: Cell<usize>,
}

/// Inner tolerance: relative only, so tiny inner integrals near `p = 1` keep
/// their significant digits once multiplied by `(1-p)^{-r}`.
fn inner_spec(outer: &QuadratureSpec) -> QuadratureSpec {
    let rel = (outer.abs_tol().min(outer.rel_tol()) / INNER_TIGHTENING).clamp(1e-13, 1e-6);
    QuadratureSpec::new(f64::MIN_POSITIVE, rel, outer.max_subdivisions()).expect("positive tolerances")
}

impl PMixing {
    pub(crate) fn new(kind: &MixingDensityKind, spec: &QuadratureSpec) -> Result<Self> {
        Self::with_form(kind, spec, InnerForm::for_s(kind.s()))
    }

    pub(crate) fn with_form(kind: &MixingDensityKind, spec: &QuadratureSpec, form: InnerForm) -> Result<Self> {
        kind.validate()?;
        let family = match kind {
            MixingDensityKind::R1Closed { .. } => Family::R1,
            MixingDensityKind::R2Closed { .. } => Family::R2,
            MixingDensityKind::RGt1Integral { .. } => Family::Gt1,
            MixingDensityKind::RLt1Quasi { .. } => Family::Lt1,
            other => {
                return Err(Error::Config(format!("{other:?} is not a density over p")));
            }
        };
        let s = kind.s();
        Ok(Self {
            family,
            r: kind.r().unwrap_or(1.0),
            s,
            ln_norm: ln_normalizer(s)?,
            inner_spec: inner_spec(spec),
            form,
            inner_evaluations: Cell::new(0),
        })
    }

    pub(crate) fn inner_evaluations(&self) -> usize {
        self.inner_evaluations.get()
    }

    pub(crate) fn eval(&self, pt: UnitPoint) -> Result<f64> {
        let (s, r) = (self.s, self.r);
        let ln_y = pt.y.ln();
        let ln_q = pt.q.ln();
        match self.family {
            Family::R1 => Ok(((s - 1.0) * ln_y - ln_q - self.ln_norm).exp()),
            Family::R2 => Ok((s * ln_y - 2.0 * ln_q - self.ln_norm - s.ln()).exp()),
            Family::Gt1 => {
                let j = self.inner(s - 1.0, r - 2.0, pt)?;
                Ok((r - 1.0) * j * (-r * ln_q - self.ln_norm).exp())
            }
            Family::Lt1 => {
                let a = self.inner(s - 2.0, r - 1.0, pt)?;
                let b = self.inner(s - 1.0, r - 1.0, pt)?;
                let combined = (s - 1.0).mul_add(a, (r - 1.0) * b);
                Ok(combined * (-r * ln_q - self.ln_norm).exp())
            }
        }
    }

    /// `I(k, m)` at `pt`; requires `k > -1`, `m > -1`.
    fn inner(&self, k: f64, m: f64, pt: UnitPoint) -> Result<f64> {
        let hints = EndpointHints {
            left_singular: m < 1.0,
            right_singular: k < 1.0,
        };
        let spec = self.inner_spec.with_hints(hints);
        let (result, scale) = match self.form {
            InnerForm::Log => {
                let y = pt.y;
                // ξ = y·u, y - ξ = y·(1-u)
                let res = try_integrate_graded(
                    |a| Ok((-(-y * a.from_lo).exp_m1()).powf(m) * a.from_hi.powf(k)),
                    0.0,
                    1.0,
                    [m, k],
                    &spec,
                )?;
                (res, y.powf(k + 1.0))
            }
            InnerForm::Raw => {
                let res = try_integrate_graded(
                    |a| {
                        let w = a.x;
                        let neg_ln_w = if w < 0.5 { -w.ln() } else { -(-a.from_hi).ln_1p() };
                        Ok(a.from_lo.powf(m) * neg_ln_w.powf(k) * w.powf(-(m + 1.0)))
                    },
                    pt.p,
                    1.0,
                    [m, k],
                    &spec,
                )?;
                (res, 1.0)
            }
        };
        self.inner_evaluations
            .set(self.inner_evaluations.get() + result.evaluations);
        let result = result
            .require_converged()
            .map_err(|e| e.with_context(format!("inner integral at p = {:e}", pt.p)))?;
        Ok(result.value * scale)
    }
}

/// Integrates `f` over `[lo, hi] ⊆ [0, 1]` in the `p` variable. When `hi = 1`,
/// `right_exponent` is the power of `1-p` the integrand behaves like there
/// (the mixing densities go like `(1-p)^{s-2}`).
pub(crate) fn integrate_p<F>(
    mut f: F,
    lo: f64,
    hi: f64,
    right_exponent: f64,
    spec: &QuadratureSpec,
) -> Result<QuadratureResult>
where
    F: FnMut(UnitPoint) -> Result<f64>,
{
    let right = if hi == 1.0 { right_exponent.min(0.0) } else { 0.0 };
    try_integrate_graded(|a| f(UnitPoint::on(a, lo, hi)), lo, hi, [0.0, right], spec)
}

/// Mixing density for the geometric kernel:
/// `(-ln p)^{s-1} / (ζ(s) Γ(s) (1-p))`.
pub fn mixing_pdf_r1(p: f64, s: f64) -> Result<f64> {
    let pt = check_p(p)?;
    PMixing::new(&MixingDensityKind::R1Closed { s: check_s(s)? }, &QuadratureSpec::default())?.eval(pt)
}

/// Closed form for `r = 2`: `(-ln p)^s / (ζ(s) Γ(s+1) (1-p)^2)`.
pub fn mixing_pdf_r2_closed(p: f64, s: f64) -> Result<f64> {
    let pt = check_p(p)?;
    PMixing::new(&MixingDensityKind::R2Closed { s: check_s(s)? }, &QuadratureSpec::default())?.eval(pt)
}

/// Mixing density for `r > 1` through its inner integral, for any `r > 1`
/// including 2.
pub fn mixing_pdf_r_gt1(p: f64, r: f64, s: f64, spec: &QuadratureSpec) -> Result<f64> {
    let pt = check_p(p)?;
    PMixing::new(&MixingDensityKind::RGt1Integral { r, s }, spec)?.eval(pt)
}

/// Signed mixing density for `0 < r < 1`. Negative near `p = 0`.
pub fn mixing_quasi_pdf_r_lt1(p: f64, r: f64, s: f64, spec: &QuadratureSpec) -> Result<f64> {
    let pt = check_p(p)?;
    PMixing::new(&MixingDensityKind::RLt1Quasi { r, s }, spec)?.eval(pt)
}

/// [`mixing_pdf_r_gt1`] or [`mixing_quasi_pdf_r_lt1`] with the inner variable
/// forced, for comparing the two forms.
pub fn mixing_pdf_with_form(p: f64, kind: &MixingDensityKind, spec: &QuadratureSpec, form: InnerForm) -> Result<f64> {
    let pt = check_p(p)?;
    PMixing::with_form(kind, spec, form)?.eval(pt)
}

fn gamma_transform_ln(ln_g: f64, ln_gm1: f64, s: f64, ln_norm: f64) -> f64 {
    (s - 1.0) * ln_g.ln() - ln_gm1 - ln_g - ln_norm
}

/// Geometric-kernel mixing density over `γ = 1/p`:
/// `(ln γ)^{s-1} / (ζ(s) Γ(s) γ (γ-1))`.
pub fn gamma_transform_pdf(gamma: f64, s: f64) -> Result<f64> {
    check_gt("gamma", gamma, 1.0, "gamma > 1")?;
    let ln_norm = ln_normalizer(check_s(s)?)?;
    let gm1 = gamma - 1.0;
    Ok(gamma_transform_ln(gm1.ln_1p(), gm1.ln(), s, ln_norm).exp())
}

/// Mixing density of the Poisson rate:
/// `(1/(ζ(s)Γ(s))) ∫_0^∞ (ln(y+1))^{s-1} e^{-λy} / (y+1) dy`.
pub fn lambda_mixing_pdf(lambda: f64, s: f64, spec: &QuadratureSpec) -> Result<f64> {
    Ok(LambdaMixing::new(s, spec)?.eval(lambda)?.value)
}

/// Evaluator for the `λ` density, integrating in `z = λy`.
pub(crate) struct LambdaMixing {
    s: f64,
    ln_norm: f64,
    spec: QuadratureSpec,
}

impl LambdaMixing {
    pub(crate) fn new(s: f64, spec: &QuadratureSpec) -> Result<Self> {
        let s = check_s(s)?;
        let hints = EndpointHints {
            left_singular: s < 2.0,
            right_singular: false,
        };
        Ok(Self {
            s,
            ln_norm: ln_normalizer(s)?,
            spec: spec.with_hints(hints),
        })
    }

    /// Same evaluator with an inner tolerance suited to nesting under `outer`.
    pub(crate) fn nested(s: f64, outer: &QuadratureSpec) -> Result<Self> {
        Self::new(s, &inner_spec(outer))
    }

    pub(crate) fn eval(&self, lambda: f64) -> Result<QuadratureResult> {
        check_gt("lambda", lambda, 0.0, "lambda > 0")?;
        let s = self.s;
        let res = try_integrate_semi_infinite(
            |z| {
                let ln_term = (s - 1.0) * (z / lambda).ln_1p().ln() - (lambda + z).ln() - z;
                Ok(if ln_term < LN_UNDERFLOW { 0.0 } else { ln_term.exp() })
            },
            &self.spec,
        )?
        .require_converged()
        .map_err(|e| e.with_context(format!("lambda mixing density at lambda = {lambda:e}, s = {s}")))?;
        let norm = (-self.ln_norm).exp();
        Ok(QuadratureResult {
            value: res.value * norm,
            error_estimate: res.error_estimate * norm,
            ..res
        })
    }
}

/// The `λ` density obtained by mixing the `Gamma(r, (1-p)/p)` kernel over the
/// `p` density for shape `r ≥ 1`; the result does not depend on `r`.
pub fn lambda_mixing_pdf_via_r(lambda: f64, r: f64, s: f64, spec: &QuadratureSpec) -> Result<f64> {
    Ok(lambda_mixing_via_r_result(lambda, r, s, spec)?.value)
}

pub(crate) fn lambda_mixing_via_r_result(
    lambda: f64,
    r: f64,
    s: f64,
    spec: &QuadratureSpec,
) -> Result<QuadratureResult> {
    check_gt("lambda", lambda, 0.0, "lambda > 0")?;
    if !(r >= 1.0 && r.is_finite()) {
        return Err(Error::domain("r", r, "r >= 1"));
    }
    let kind = MixingDensityKind::for_shape(r, s)?;
    let mix = PMixing::new(&kind, spec)?;
    let ln_lambda = lambda.ln();
    let ln_gamma_r = log_gamma_unchecked(r);
    let res = integrate_p(
        |pt| {
            // rate β = q/p, ln β = ln q + y
            let beta = pt.q / pt.p;
            let ln_kernel = r * (pt.q.ln() + pt.y) + (r - 1.0) * ln_lambda - ln_gamma_r - beta * lambda;
            if ln_kernel < LN_UNDERFLOW {
                return Ok(0.0);
            }
            Ok(ln_kernel.exp() * mix.eval(pt)?)
        },
        0.0,
        1.0,
        r + s - 2.0,
        &spec.with_hints(EndpointHints::BOTH),
    )?;
    let res = QuadratureResult {
        evaluations: res.evaluations + mix.inner_evaluations(),
        ..res
    };
    res.require_converged()
        .map_err(|e| e.with_context(format!("lambda = {lambda}, r = {r}, s = {s}")))
}

/// Where the signed `r < 1` density crosses zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignChange {
    /// Root of the first (lowest-`p`) negative-to-positive crossing.
    pub root: f64,
    /// Every probe interval on which the sign flips, in increasing `p`.
    /// More than one entry means the crossing is not unique on the probe grid.
    pub brackets: Vec<(f64, f64)>,
}

impl SignChange {
    pub fn is_unique(&self) -> bool {
        self.brackets.len() == 1
    }
}

/// Probe points per decade on each side of `p = 1/2`.
const PROBES_PER_DECADE: usize = 8;

fn sign_probe_grid() -> Vec<f64> {
    let decades = (-P_MIN.log10()).round() as usize;
    let steps = decades * PROBES_PER_DECADE;
    let mut grid = Vec::with_capacity(2 * steps + 1);
    // log-spaced from 1e-12 toward 1/2, then mirrored toward 1
    let span = (0.5f64).ln() - P_MIN.ln();
    let lower: Vec<f64> = (0..steps)
        .map(|i| (P_MIN.ln() + span * i as f64 / steps as f64).exp() * (1.0 + 1e-9))
        .collect();
    grid.extend(lower.iter().copied());
    grid.push(0.5);
    grid.extend(lower.iter().rev().map(|q| 1.0 - q));
    grid
}

/// Locates the sign change of the `r < 1` density by scanning a log-spaced
/// probe grid on `(1e-12, 1 - 1e-12)` and bisecting the first bracket.
pub fn find_sign_change(r: f64, s: f64, spec: &QuadratureSpec) -> Result<SignChange> {
    let kind = MixingDensityKind::RLt1Quasi { r, s };
    let mix = PMixing::new(&kind, spec)?;
    let f = |p: f64| mix.eval(UnitPoint::from_p(p));
    let grid = sign_probe_grid();
    let mut values = Vec::with_capacity(grid.len());
    for &p in &grid {
        values.push(f(p)?);
    }
    let mut brackets = Vec::new();
    for i in 1..grid.len() {
        let (a, b) = (values[i - 1], values[i]);
        if a == 0.0 || (a < 0.0) != (b < 0.0) {
            brackets.push((grid[i - 1], grid[i]));
        }
    }
    let Some(&(mut lo, mut hi)) = brackets.first() else {
        return Err(Error::NoSignChange(format!(
            "r = {r}, s = {s}: no sign flip on {} probes",
            grid.len()
        )));
    };
    let mut f_lo = f(lo)?;
    if f_lo == 0.0 {
        return Ok(SignChange { root: lo, brackets });
    }
    for _ in 0..200 {
        // bisect geometrically while the bracket spans orders of magnitude
        let mid = if hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(SignChange {
        root: 0.5 * (lo + hi),
        brackets,
    })
}

/// Signed mass decomposition of the `r < 1` density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedMass {
    /// `∫ f`, which is 1 for a valid mixing density.
    pub integral: f64,
    /// `∫ max(-f, 0)`.
    pub negative_mass: f64,
    /// `∫ |f|`.
    pub total_variation: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// Integrates the `r < 1` density over `(0, 1)`, split at its sign changes so
/// each piece is single-signed.
pub fn quasi_signed_mass(r: f64, s: f64, spec: &QuadratureSpec) -> Result<SignedMass> {
    let sign = find_sign_change(r, s, spec)?;
    let mut cuts = vec![0.0];
    if sign.is_unique() {
        cuts.push(sign.root);
    } else {
        // pieces between bracket midpoints stay within one sign only roughly;
        // the total variation is then an estimate
        cuts.extend(sign.brackets.iter().map(|&(a, b)| 0.5 * (a + b)));
    }
    cuts.push(1.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let kind = MixingDensityKind::RLt1Quasi { r, s };
    let mix = PMixing::new(&kind, spec)?;
    let mut out = SignedMass {
        integral: 0.0,
        negative_mass: 0.0,
        total_variation: 0.0,
        error_estimate: 0.0,
        evaluations: 0,
    };
    for w in cuts.windows(2) {
        let res = integrate_p(|pt| mix.eval(pt), w[0], w[1], s - 2.0, &spec.with_hints(EndpointHints::BOTH))?
            .require_converged()
            .map_err(|e| e.with_context(format!("signed mass r = {r}, s = {s}")))?;
        out.integral += res.value;
        out.total_variation += res.value.abs();
        if res.value < 0.0 {
            out.negative_mass -= res.value;
        }
        out.error_estimate += res.error_estimate;
        out.evaluations += res.evaluations;
    }
    out.evaluations += mix.inner_evaluations();
    Ok(out)
}

/// `∫_0^1 g(p) f(p) dp` for the geometric-kernel density `f`.
pub(crate) fn r1_expectation<G>(mut g: G, s: f64, spec: &QuadratureSpec) -> Result<QuadratureResult>
where
    G: FnMut(UnitPoint) -> f64,
{
    let mix = PMixing::new(&MixingDensityKind::R1Closed { s: check_s(s)? }, spec)?;
    integrate_p(|pt| Ok(g(pt) * mix.eval(pt)?), 0.0, 1.0, s - 2.0, &spec.with_hints(EndpointHints::BOTH))?
        .require_converged()
}

/// `E[p^x]` under the geometric-kernel density, by quadrature.
pub fn moment_r1(x: u64, s: f64, spec: &QuadratureSpec) -> Result<QuadratureResult> {
    let xf = x as f64;
    r1_expectation(|pt| if x == 0 { 1.0 } else { (-xf * pt.y).exp() }, s, spec)
}

/// `1 - H_{x,s}/ζ(s)`, the closed form of `E[p^x]`.
pub fn moment_r1_closed(x: u64, s: f64) -> Result<f64> {
    Ok(hurwitz_zeta(s, x)? / riemann_zeta(s)?)
}

/// `E[e^{tp}]` under the geometric-kernel density, by quadrature.
pub fn mgf_r1_quadrature(t: f64, s: f64, spec: &QuadratureSpec) -> Result<QuadratureResult> {
    r1_expectation(|pt| (t * pt.p).exp(), s, spec)
}

/// Partial sum `e^t - Σ_{n<N} t^n/n! · H_{n,s}/ζ(s)`.
pub fn mgf_series_harmonic(t: f64, s: f64, terms: u64) -> Result<f64> {
    let zeta = riemann_zeta(check_s(s)?)?;
    let mut sum = 0.0;
    let mut coeff = 1.0;
    for n in 0..terms {
        sum += coeff * generalized_harmonic(n, s)? / zeta;
        coeff *= t / (n + 1) as f64;
    }
    Ok(t.exp() - sum)
}

/// Partial sum `Σ_{n<N} t^n/n! · ζ(s, n+1)/ζ(s)`.
pub fn mgf_series_hurwitz(t: f64, s: f64, terms: u64) -> Result<f64> {
    let zeta = riemann_zeta(check_s(s)?)?;
    let mut sum = 0.0;
    let mut coeff = 1.0;
    for n in 0..terms {
        sum += coeff * hurwitz_zeta(s, n)? / zeta;
        coeff *= t / (n + 1) as f64;
    }
    Ok(sum)
}

/// Series value of `E[e^{tp}]` truncated once the remaining terms, bounded by
/// the exponential-series tail, fall below `tol`. Returns the value and the
/// number of terms used.
pub fn mgf_series(t: f64, s: f64, tol: f64) -> Result<(f64, u64)> {
    check_gt("tol", tol, 0.0, "tol > 0")?;
    if !t.is_finite() {
        return Err(Error::domain("t", t, "finite t"));
    }
    // Each remaining term is at most |t|^n/n!; once n+1 > 2|t| the tail is
    // bounded by twice the next term.
    let mut n = 0u64;
    let mut coeff = 1.0f64;
    loop {
        if (n as f64 + 1.0) > 2.0 * t.abs() && 2.0 * coeff.abs() < tol {
            break;
        }
        coeff *= t / (n + 1) as f64;
        n += 1;
    }
    Ok((mgf_series_hurwitz(t, s, n)?, n))
}

/// `∫_1^∞ γ^{-(n-1)} (γ-1)/γ · f_γ(γ) dγ`, which equals `n^{-s}/ζ(s)` for
/// `n ≥ 1`.
pub fn geometric_bridge(n: u64, s: f64, spec: &QuadratureSpec) -> Result<QuadratureResult> {
    if n == 0 {
        return Err(Error::domain("n", 0.0, "n >= 1"));
    }
    let ln_norm = ln_normalizer(check_s(s)?)?;
    let power = n as f64 - 1.0;
    let hints = EndpointHints {
        left_singular: s < 2.0,
        right_singular: n == 1,
    };
    // γ = 1 + y
    try_integrate_semi_infinite(
        |y| {
            let ln_g = y.ln_1p();
            let ln_y = y.ln();
            let ln_weight = -power * ln_g + ln_y - ln_g;
            Ok((ln_weight + gamma_transform_ln(ln_g, ln_y, s, ln_norm)).exp())
        },
        &spec.with_hints(hints),
    )?
    .require_converged()
}

/// Integral of a density over its whole domain; 1 for every kind.
pub fn normalization(kind: &MixingDensityKind, spec: &QuadratureSpec) -> Result<QuadratureResult> {
    kind.validate()?;
    let s = kind.s();
    match *kind {
        MixingDensityKind::GammaTransform { .. } => {
            let ln_norm = ln_normalizer(s)?;
            try_integrate_semi_infinite(
                |y| Ok(gamma_transform_ln(y.ln_1p(), y.ln(), s, ln_norm).exp()),
                &spec.with_hints(EndpointHints::BOTH),
            )?
            .require_converged()
        }
        MixingDensityKind::LambdaMixing { .. } => {
            let inner = LambdaMixing::nested(s, spec)?;
            let mut inner_evals = 0;
            let res = try_integrate_semi_infinite(
                |lambda| {
                    let v = inner.eval(lambda)?;
                    inner_evals += v.evaluations;
                    Ok(v.value)
                },
                &spec.with_hints(EndpointHints::BOTH),
            )?;
            QuadratureResult {
                evaluations: res.evaluations + inner_evals,
                ..res
            }
            .require_converged()
        }
        _ => {
            let mix = PMixing::new(kind, spec)?;
            let res = integrate_p(|pt| mix.eval(pt), 0.0, 1.0, s - 2.0, &spec.with_hints(EndpointHints::BOTH))?;
            QuadratureResult {
                evaluations: res.evaluations + mix.inner_evaluations(),
                ..res
            }
            .require_converged()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    fn assert_rel(actual: f64, expected: f64, tol: f64) {
        let rel = ((actual - expected) / expected).abs();
        assert!(rel <= tol, "{actual} vs {expected}: rel {rel:e} > {tol:e}");
    }

    // Reference values below are from mpmath at 30 digits.

    #[test]
    fn r1_values() {
        assert_rel(mixing_pdf_r1((-1.0f64).exp(), 2.0).unwrap(), 0.961_726_514_607_646, 1e-13);
        assert_rel(mixing_pdf_r1(0.5, 3.0).unwrap(), 0.399_692_404_457_173, 1e-13);
    }

    #[test]
    fn r2_closed_values() {
        assert_rel(mixing_pdf_r2_closed(0.5, 2.0).unwrap(), 0.584_160_816_656_649, 1e-13);
        assert_rel(
            mixing_pdf_r2_closed((-1.0f64).exp(), 2.0).unwrap(),
            0.760_714_472_243_960,
            1e-13,
        );
    }

    #[test]
    fn gamma_transform_values() {
        assert_rel(
            gamma_transform_pdf(std::f64::consts::E, 2.0).unwrap(),
            0.130_155_530_250_586,
            1e-13,
        );
        assert_rel(gamma_transform_pdf(2.0, 3.0).unwrap(), 0.099_923_101_114_293_3, 1e-13);
    }

    #[test]
    fn gamma_transform_change_of_variables() {
        for s in [1.5, 2.0, 3.0] {
            for g in [1.01, 1.5, 3.0, 40.0] {
                let lhs = gamma_transform_pdf(g, s).unwrap() * g * g;
                assert_rel(lhs, mixing_pdf_r1(1.0 / g, s).unwrap(), 1e-10);
            }
        }
    }

    #[test]
    fn r_gt1_matches_r2_closed_form() {
        for s in [1.5, 2.0, 3.0] {
            for i in 1..=9 {
                let p = i as f64 / 10.0;
                let a = mixing_pdf_r_gt1(p, 2.0, s, &spec()).unwrap();
                let b = mixing_pdf_r2_closed(p, s).unwrap();
                assert!((a - b).abs() < 1e-9, "p={p} s={s}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn inner_forms_agree() {
        for (r, s) in [(1.5, 1.1), (3.7, 2.0), (2.5, 1.5)] {
            let kind = MixingDensityKind::RGt1Integral { r, s };
            for p in [1e-9, 0.01, 0.5, 0.999, 1.0 - 1e-9] {
                let raw = mixing_pdf_with_form(p, &kind, &spec(), InnerForm::Raw).unwrap();
                let log = mixing_pdf_with_form(p, &kind, &spec(), InnerForm::Log).unwrap();
                assert_rel(raw, log, 1e-9);
            }
        }
        for (r, s) in [(0.25, 1.5), (0.75, 3.0)] {
            let kind = MixingDensityKind::RLt1Quasi { r, s };
            for p in [1e-6, 0.3, 0.9] {
                let raw = mixing_pdf_with_form(p, &kind, &spec(), InnerForm::Raw).unwrap();
                let log = mixing_pdf_with_form(p, &kind, &spec(), InnerForm::Log).unwrap();
                assert!((raw - log).abs() <= 1e-9 * (1.0 + raw.abs()), "{raw} vs {log}");
            }
        }
    }

    #[test]
    fn quasi_values() {
        let v = mixing_quasi_pdf_r_lt1(1e-3, 0.5, 2.0, &spec()).unwrap();
        assert_rel(v, -4.915_754_764_620_13, 1e-9);
        let v = mixing_quasi_pdf_r_lt1(0.5, 0.5, 2.0, &spec()).unwrap();
        assert_rel(v, 1.173_150_371_607_89, 1e-9);
    }

    #[test]
    fn lambda_values() {
        let cases = [
            (2.0, 0.1, 1.486_261_578_850_486),
            (2.0, 1.0, 0.161_687_565_716_243),
            (2.0, 5.0, 0.015_574_657_866_152_5),
            (1.5, 0.5, 0.292_896_799_890_152),
        ];
        for (s, lambda, expected) in cases {
            assert_rel(lambda_mixing_pdf(lambda, s, &spec()).unwrap(), expected, 1e-8);
        }
    }

    #[test]
    fn domain_errors() {
        assert!(mixing_pdf_r1(0.0, 2.0).is_err());
        assert!(mixing_pdf_r1(1.0, 2.0).is_err());
        assert!(mixing_pdf_r1(1e-13, 2.0).is_err());
        assert!(mixing_pdf_r1(0.5, 1.0).is_err());
        assert!(mixing_pdf_r_gt1(0.5, 1.0, 2.0, &spec()).is_err());
        assert!(mixing_quasi_pdf_r_lt1(0.5, 1.0, 2.0, &spec()).is_err());
        assert!(gamma_transform_pdf(1.0, 2.0).is_err());
        assert!(lambda_mixing_pdf(0.0, 2.0, &spec()).is_err());
        assert!(lambda_mixing_pdf_via_r(1.0, 0.5, 2.0, &spec()).is_err());
    }

    #[test]
    fn for_shape_dispatch() {
        use MixingDensityKind::*;
        assert_eq!(MixingDensityKind::for_shape(1.0, 2.0).unwrap(), R1Closed { s: 2.0 });
        assert_eq!(MixingDensityKind::for_shape(2.0, 2.0).unwrap(), R2Closed { s: 2.0 });
        assert_eq!(
            MixingDensityKind::for_shape(2.5, 2.0).unwrap(),
            RGt1Integral { r: 2.5, s: 2.0 }
        );
        assert_eq!(
            MixingDensityKind::for_shape(0.5, 2.0).unwrap(),
            RLt1Quasi { r: 0.5, s: 2.0 }
        );
        assert!(MixingDensityKind::for_shape(0.0, 2.0).is_err());
        assert!(RLt1Quasi { r: 1.5, s: 2.0 }.validate().is_err());
    }

    #[test]
    fn mgf_forms_agree() {
        let a = mgf_series_harmonic(1.0, 2.0, 60).unwrap();
        let b = mgf_series_hurwitz(1.0, 2.0, 60).unwrap();
        assert!((a - b).abs() < 1e-10);
    }
}
