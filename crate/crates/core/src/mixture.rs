//! The mixture operator evaluated by quadrature: a count kernel integrated
//! against a mixing density over its parameter.
//!
//! Every function returns the full [`QuadratureResult`] so callers can report
//! error estimates and evaluation counts; evaluation counts include the inner
//! integrals of nested densities.

use crate::distributions::{nb_ln_coefficient, poisson_ln_pmf};
use crate::error::{check_gt, check_open_unit, Error, Result};
use crate::mixing::{integrate_p, LambdaMixing, MixingDensityKind, PMixing, LN_UNDERFLOW};
use crate::quadrature::{try_integrate_semi_infinite, EndpointHints, QuadratureResult, QuadratureSpec};
use crate::special::log_gamma_unchecked;

/// `∫_0^1 NB(x; r, p) f(p) dp` with the density chosen by [`MixingDensityKind::for_shape`].
/// Equals the Zeta mass at `x` for every `r > 0`.
pub fn nb_mixture_pmf(x: u64, r: f64, s: f64, spec: &QuadratureSpec) -> Result<QuadratureResult> {
    nb_mixture_pmf_with(x, &MixingDensityKind::for_shape(r, s)?, spec)
}

/// [`nb_mixture_pmf`] with an explicit density, e.g. the integral form at `r = 2`.
pub fn nb_mixture_pmf_with(x: u64, kind: &MixingDensityKind, spec: &QuadratureSpec) -> Result<QuadratureResult> {
    let r = kind
        .r()
        .ok_or_else(|| Error::Config(format!("{kind:?} is not a density over p")))?;
    let mix = PMixing::new(kind, spec)?;
    let ln_coef = nb_ln_coefficient(x, r);
    let xf = x as f64;
    let res = integrate_p(
        |pt| {
            let ln_kernel = ln_coef - xf * pt.y + r * pt.q.ln();
            if ln_kernel < LN_UNDERFLOW {
                return Ok(0.0);
            }
            Ok(ln_kernel.exp() * mix.eval(pt)?)
        },
        0.0,
        1.0,
        r + kind.s() - 2.0,
        &spec.with_hints(EndpointHints::BOTH),
    );
    finish(res, mix.inner_evaluations(), || format!("nb mixture x = {x}, r = {r}, s = {}", kind.s()))
}

/// `∫_0^∞ Poisson(x; λ) f_λ(λ) dλ` with the `λ` density itself an integral.
pub fn poisson_mixture_pmf(x: u64, s: f64, spec: &QuadratureSpec) -> Result<QuadratureResult> {
    let inner = LambdaMixing::nested(s, spec)?;
    let mut inner_evals = 0;
    let res = try_integrate_semi_infinite(
        |lambda| {
            let ln_kernel = poisson_ln_pmf(x, lambda);
            if ln_kernel < LN_UNDERFLOW {
                return Ok(0.0);
            }
            let density = inner.eval(lambda)?;
            inner_evals += density.evaluations;
            Ok(ln_kernel.exp() * density.value)
        },
        &spec.with_hints(EndpointHints::LEFT),
    );
    finish(res, inner_evals, || format!("poisson mixture x = {x}, s = {s}"))
}

/// `∫_0^∞ Poisson(x; λ) Gamma(λ; r, (1-p)/p) dλ`, which is `NB(x; r, p)`.
pub fn gamma_poisson_pmf(x: u64, r: f64, p: f64, spec: &QuadratureSpec) -> Result<QuadratureResult> {
    check_gt("r", r, 0.0, "r > 0")?;
    check_open_unit("p", p)?;
    let beta = (1.0 - p) / p;
    let xf = x as f64;
    let ln_const = -log_gamma_unchecked(xf + 1.0) - log_gamma_unchecked(r) - xf * beta.ln();
    // z = βλ makes the Gamma factor rate-free
    let res = try_integrate_semi_infinite(
        |z| {
            let ln_f = ln_const + (xf + r - 1.0) * z.ln() - z / beta - z;
            Ok(if ln_f < LN_UNDERFLOW { 0.0 } else { ln_f.exp() })
        },
        &spec.with_hints(EndpointHints::BOTH),
    );
    finish(res, 0, || format!("gamma-poisson x = {x}, r = {r}, p = {p}"))
}

/// `∫_0^1 p^x (1-p) · Beta(p; 1, b) dp`, which is `Yule(x; b)`.
pub fn yule_mixture_pmf(x: u64, b: f64, spec: &QuadratureSpec) -> Result<QuadratureResult> {
    check_gt("b", b, 0.0, "b > 0")?;
    let xf = x as f64;
    let ln_b = b.ln();
    let res = integrate_p(
        |pt| Ok((ln_b - xf * pt.y + b * pt.q.ln()).exp()),
        0.0,
        1.0,
        b,
        &spec.with_hints(EndpointHints::BOTH),
    );
    finish(res, 0, || format!("yule mixture x = {x}, b = {b}"))
}

/// Discrete prior over Negative Binomial shapes `r ≥ 1`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RPrior {
    atoms: Vec<(f64, f64)>,
}

impl RPrior {
    /// `atoms` are `(r, weight)` pairs; weights must be nonnegative and sum
    /// to 1 within 1e-12.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Empty("r prior"));
        }
        let mut total = 0.0;
        for &(r, w) in &atoms {
            if !(r >= 1.0 && r.is_finite()) {
                return Err(Error::domain("r", r, "prior support within [1, inf)"));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::domain("weight", w, "weight >= 0"));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain("weights", total, "weights sum to 1"));
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }
}

/// `Σ_i w_i · nb_mixture_pmf(x, r_i, s)`; the Zeta mass whatever the prior.
pub fn random_r_mixture_pmf(x: u64, s: f64, prior: &RPrior, spec: &QuadratureSpec) -> Result<QuadratureResult> {
    let mut out = QuadratureResult {
        value: 0.0,
        error_estimate: 0.0,
        evaluations: 0,
        converged: true,
    };
    for &(r, w) in prior.atoms() {
        if w == 0.0 {
            continue;
        }
        let part = nb_mixture_pmf(x, r, s, spec)?;
        out.value += w * part.value;
        out.error_estimate += w * part.error_estimate;
        out.evaluations += part.evaluations;
    }
    Ok(out)
}

/// Adds nested evaluation counts and turns non-convergence into an error
/// with context.
fn finish(
    res: Result<QuadratureResult>,
    inner_evaluations: usize,
    context: impl FnOnce() -> String,
) -> Result<QuadratureResult> {
    match res {
        Ok(r) => QuadratureResult {
            evaluations: r.evaluations + inner_evaluations,
            ..r
        }
        .require_converged()
        .map_err(|e| add_evaluations(e, inner_evaluations + r.evaluations).with_context(context())),
        Err(e) => Err(e.with_context(context())),
    }
}

fn add_evaluations(e: Error, total: usize) -> Error {
    match e {
        Error::NonConvergence {
            value,
            error_estimate,
            context,
            ..
        } => Error::NonConvergence {
            value,
            error_estimate,
            evaluations: total,
            context,
        },
        other => other,
    }
}
