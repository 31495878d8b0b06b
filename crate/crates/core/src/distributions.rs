//! Parameter carriers and mass/density functions for the distributions the
//! mixtures are built from: Zeta, Negative Binomial, Poisson, Gamma, Beta and
//! Yule.
//!
//! Every discrete distribution lives on the 0-based support `{0, 1, 2, …}`.
//! Parameters are validated once at construction; evaluation after that cannot
//! fail on parameter grounds. Mass functions are assembled in log-space and
//! exponentiated once.

use serde::{Deserialize, Serialize};

use crate::error::{check_gt, check_open_unit, Error, Result};
use crate::special::{hurwitz_zeta, log_gamma_unchecked, riemann_zeta};

/// Zeta distribution, `f(x) = (x+1)^{-s} / ζ(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaParams {
    s: f64,
    zeta_s: f64,
}

impl ZetaParams {
    pub fn new(s: f64) -> Result<Self> {
        check_gt("s", s, 1.0, "s > 1")?;
        let zeta_s = riemann_zeta(s)?;
        Ok(Self { s, zeta_s })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// The normalizing constant ζ(s).
    pub fn normalizer(&self) -> f64 {
        self.zeta_s
    }

    pub fn pmf(&self, x: u64) -> f64 {
        (-self.s * (x as f64 + 1.0).ln()).exp() / self.zeta_s
    }

    pub fn ln_pmf(&self, x: u64) -> f64 {
        -self.s * (x as f64 + 1.0).ln() - self.zeta_s.ln()
    }

    /// `P(X > x) = ζ(s, x+2) / ζ(s)`.
    pub fn tail_mass(&self, x: u64) -> f64 {
        // hurwitz_zeta(s, n) sums (i+1)^{-s} over i ≥ n
        hurwitz_zeta(self.s, x.saturating_add(1)).unwrap_or(0.0) / self.zeta_s
    }

    /// Smallest `X` with `P(X' > X) < eps`.
    pub fn truncation_point(&self, eps: f64) -> Result<u64> {
        check_eps(eps)?;
        if self.tail_mass(0) < eps {
            return Ok(0);
        }
        // tail_mass(lo) >= eps > tail_mass(hi)
        let mut lo = 0u64;
        let mut hi = 1u64;
        while self.tail_mass(hi) >= eps {
            lo = hi;
            hi = hi.checked_mul(2).ok_or(Error::domain(
                "eps",
                eps,
                "tail mass reachable within u64 support",
            ))?;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.tail_mass(mid) < eps {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

/// Zeta mass at `x` for shape `s`.
pub fn zeta_pmf(x: u64, params: &ZetaParams) -> f64 {
    params.pmf(x)
}

/// Negative Binomial with shape `r` and success probability `p`:
/// `Γ(r+x) / (Γ(r) Γ(x+1)) · p^x (1-p)^r`. `r = 1` is the Geometric law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NbParams {
    r: f64,
    p: f64,
}

impl NbParams {
    pub fn new(r: f64, p: f64) -> Result<Self> {
        check_gt("r", r, 0.0, "r > 0")?;
        check_open_unit("p", p)?;
        Ok(Self { r, p })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn ln_pmf(&self, x: u64) -> f64 {
        nb_ln_coefficient(x, self.r) + nb_ln_kernel(x, self.r, self.p)
    }

    pub fn pmf(&self, x: u64) -> f64 {
        self.ln_pmf(x).exp()
    }

    /// Smallest `X` with `P(X' > X) < eps`, by forward summation of the mass.
    pub fn truncation_point(&self, eps: f64) -> Result<u64> {
        check_eps(eps)?;
        let ratio = |x: u64| (self.r + x as f64) * self.p / (x as f64 + 1.0);
        Ok(forward_truncation(self.pmf(0), ratio, eps))
    }
}

/// `ln Γ(r+x) - ln Γ(r) - ln Γ(x+1)`.
pub(crate) fn nb_ln_coefficient(x: u64, r: f64) -> f64 {
    let xf = x as f64;
    log_gamma_unchecked(r + xf) - log_gamma_unchecked(r) - log_gamma_unchecked(xf + 1.0)
}

/// `x ln p + r ln(1-p)`; valid for any `p` in (0,1) including values that
/// would fail `NbParams` validation only by rounding.
pub(crate) fn nb_ln_kernel(x: u64, r: f64, p: f64) -> f64 {
    let lead = if x == 0 { 0.0 } else { x as f64 * p.ln() };
    lead + r * (-p).ln_1p()
}

pub fn nb_pmf(x: u64, params: &NbParams) -> f64 {
    params.pmf(x)
}

/// Poisson mass `λ^x e^{-λ} / x!`.
pub fn poisson_pmf(x: u64, lambda: f64) -> Result<f64> {
    check_gt("lambda", lambda, 0.0, "lambda > 0")?;
    Ok(poisson_ln_pmf(x, lambda).exp())
}

pub(crate) fn poisson_ln_pmf(x: u64, lambda: f64) -> f64 {
    let xf = x as f64;
    let lead = if x == 0 { 0.0 } else { xf * lambda.ln() };
    lead - lambda - log_gamma_unchecked(xf + 1.0)
}

/// Smallest `X` with Poisson tail mass below `eps`.
pub fn poisson_truncation_point(lambda: f64, eps: f64) -> Result<u64> {
    check_gt("lambda", lambda, 0.0, "lambda > 0")?;
    check_eps(eps)?;
    let ratio = |x: u64| lambda / (x as f64 + 1.0);
    Ok(forward_truncation((-lambda).exp(), ratio, eps))
}

/// Gamma distribution in shape/rate form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    shape: f64,
    rate: f64,
}

impl GammaParams {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        check_gt("shape", shape, 0.0, "shape > 0")?;
        check_gt("rate", rate, 0.0, "rate > 0")?;
        Ok(Self { shape, rate })
    }

    /// The Gamma law whose Poisson mixture is `NB(r, p)`: shape `r`, rate `(1-p)/p`.
    pub fn from_nb(nb: &NbParams) -> Self {
        Self {
            shape: nb.r,
            rate: (1.0 - nb.p) / nb.p,
        }
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn pdf(&self, lambda: f64) -> Result<f64> {
        check_gt("lambda", lambda, 0.0, "lambda > 0")?;
        Ok(gamma_ln_pdf(lambda, self.shape, self.rate).exp())
    }
}

pub(crate) fn gamma_ln_pdf(lambda: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() + (shape - 1.0) * lambda.ln() - rate * lambda - log_gamma_unchecked(shape)
}

pub fn gamma_pdf(lambda: f64, params: &GammaParams) -> Result<f64> {
    params.pdf(lambda)
}

/// Beta density `p^{a-1} (1-p)^{b-1} / B(a, b)` on the open unit interval.
pub fn beta_pdf(p: f64, a: f64, b: f64) -> Result<f64> {
    check_gt("a", a, 0.0, "a > 0")?;
    check_gt("b", b, 0.0, "b > 0")?;
    check_open_unit("p", p)?;
    let ln_beta = log_gamma_unchecked(a) + log_gamma_unchecked(b) - log_gamma_unchecked(a + b);
    Ok(((a - 1.0) * p.ln() + (b - 1.0) * (-p).ln_1p() - ln_beta).exp())
}

/// Yule distribution, `f(x) = b Γ(b+1) Γ(x+1) / Γ(x+b+2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YuleParams {
    b: f64,
}

impl YuleParams {
    pub fn new(b: f64) -> Result<Self> {
        check_gt("b", b, 0.0, "b > 0")?;
        Ok(Self { b })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn pmf(&self, x: u64) -> f64 {
        let b = self.b;
        let xf = x as f64;
        (b.ln() + log_gamma_unchecked(b + 1.0) + log_gamma_unchecked(xf + 1.0)
            - log_gamma_unchecked(xf + b + 2.0))
        .exp()
    }

    /// `P(X > x) = Γ(b+1) Γ(x+2) / Γ(x+b+2)`.
    pub fn tail_mass(&self, x: u64) -> f64 {
        let b = self.b;
        let k = x as f64 + 1.0;
        (log_gamma_unchecked(b + 1.0) + log_gamma_unchecked(k + 1.0) - log_gamma_unchecked(k + b + 1.0))
            .exp()
    }

    pub fn truncation_point(&self, eps: f64) -> Result<u64> {
        check_eps(eps)?;
        let mut lo = 0u64;
        if self.tail_mass(lo) < eps {
            return Ok(0);
        }
        let mut hi = 1u64;
        while self.tail_mass(hi) >= eps {
            lo = hi;
            hi = hi
                .checked_mul(2)
                .ok_or(Error::domain("eps", eps, "tail mass reachable within u64 support"))?;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.tail_mass(mid) < eps {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

pub fn yule_pmf(x: u64, params: &YuleParams) -> f64 {
    params.pmf(x)
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::domain("eps", eps, "0 < eps < 1"))
    }
}

/// Accumulates a mass function from `x = 0` using the ratio `f(x+1)/f(x)`
/// until the remaining mass falls below `eps`.
fn forward_truncation(first: f64, ratio: impl Fn(u64) -> f64, eps: f64) -> u64 {
    let mut mass = first;
    let mut cumulative = first;
    let mut x = 0u64;
    // 1 - cumulative loses precision near 1e-16; the floor keeps the loop finite.
    let target = eps.max(4.0 * f64::EPSILON);
    while 1.0 - cumulative >= target {
        mass *= ratio(x);
        x += 1;
        cumulative += mass;
        if mass == 0.0 && x > 1 {
            break;
        }
    }
    x
}
