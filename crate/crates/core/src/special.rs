//! Log-gamma, Riemann and Hurwitz zeta, and generalized harmonic numbers.
//!
//! Only the real domain the mixture formulas need is covered: `z > 0` for
//! log-gamma and `s > 1` for the zeta family.

use crate::error::{check_gt, Error, Result};

/// Accuracy controls shared by the series-based functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecialFnAccuracy {
    /// Bound on the last Euler–Maclaurin correction, relative to the tail it corrects.
    pub abs_tol: f64,
    /// Cap on directly summed terms.
    pub max_terms: u64,
}

impl Default for SpecialFnAccuracy {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            max_terms: 1_000_000,
        }
    }
}

impl SpecialFnAccuracy {
    pub fn new(abs_tol: f64, max_terms: u64) -> Result<Self> {
        check_gt("abs_tol", abs_tol, 0.0, "abs_tol > 0")?;
        if max_terms == 0 {
            return Err(Error::domain("max_terms", 0.0, "max_terms >= 1"));
        }
        Ok(Self { abs_tol, max_terms })
    }
}

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `B_{2k} / (2k (2k-1))` for k = 1..=8.
const STIRLING_COEFFS: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

/// Shift point above which the Stirling series alone is used.
const STIRLING_MIN: f64 = 15.0;

/// Natural logarithm of the gamma function for `z > 0`.
///
/// Arguments below 15 are shifted upward with the recurrence
/// `Γ(z+1) = zΓ(z)` and the Stirling series is evaluated at the shifted point.
pub fn log_gamma(z: f64) -> Result<f64> {
    check_gt("z", z, 0.0, "z > 0")?;
    Ok(log_gamma_unchecked(z))
}

pub(crate) fn log_gamma_unchecked(z: f64) -> f64 {
    let mut shifted = z;
    let mut product = 1.0;
    while shifted < STIRLING_MIN {
        product *= shifted;
        shifted += 1.0;
    }
    let inv = 1.0 / shifted;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut power = inv;
    for c in STIRLING_COEFFS {
        series += c * power;
        power *= inv2;
    }
    let stirling = (shifted - 0.5) * shifted.ln() - shifted + HALF_LN_2PI + series;
    if product == 1.0 {
        stirling
    } else {
        stirling - product.ln()
    }
}

/// Bernoulli numbers `B_2, B_4, …, B_24`.
const BERNOULLI_EVEN: [f64; 12] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174_611.0 / 330.0,
    854_513.0 / 138.0,
    -236_364_091.0 / 2730.0,
];

/// Riemann zeta function `ζ(s) = Σ_{x≥0} (x+1)^{-s}` for `s > 1`.
pub fn riemann_zeta(s: f64) -> Result<f64> {
    hurwitz_zeta(s, 0)
}

/// Hurwitz zeta `ζ(s, n+1) = Σ_{i≥n} (i+1)^{-s}`, the tail of the zeta series
/// after its first `n` terms.
pub fn hurwitz_zeta(s: f64, n: u64) -> Result<f64> {
    hurwitz_zeta_with(s, n, &SpecialFnAccuracy::default())
}

pub fn hurwitz_zeta_with(s: f64, n: u64, accuracy: &SpecialFnAccuracy) -> Result<f64> {
    check_gt("s", s, 1.0, "s > 1")?;
    Ok(hurwitz_unchecked(s, n, accuracy))
}

fn hurwitz_unchecked(s: f64, n: u64, accuracy: &SpecialFnAccuracy) -> f64 {
    let first = n.saturating_add(1);
    // Euler–Maclaurin needs N large relative to s for the corrections to shrink.
    let min_cutoff = (s.ceil() + 2.0).max(12.0) as u64;
    let mut cutoff = first.max(min_cutoff);
    loop {
        let (tail, last_term) = euler_maclaurin_tail(s, cutoff as f64);
        let converged = last_term.abs() <= accuracy.abs_tol * tail.abs();
        let direct_terms = cutoff - first;
        if converged || direct_terms.saturating_mul(2) + 12 > accuracy.max_terms {
            return direct_sum(s, first, cutoff) + tail;
        }
        cutoff = cutoff.saturating_mul(2);
    }
}

/// `Σ_{k=from}^{to-1} k^{-s}`, accumulated from the smallest term upward.
fn direct_sum(s: f64, from: u64, to: u64) -> f64 {
    (from..to).rev().map(|k| (k as f64).powf(-s)).sum()
}

/// Euler–Maclaurin estimate of `Σ_{k≥N} k^{-s}`. Returns the estimate and the
/// last correction term added.
fn euler_maclaurin_tail(s: f64, cutoff: f64) -> (f64, f64) {
    let n_pow = cutoff.powf(-s);
    let mut tail = cutoff * n_pow / (s - 1.0) + 0.5 * n_pow;
    // factor_j = (s)_{2j-1} / (2j)! * N^{-(2j-1)}
    let mut factor = s / (2.0 * cutoff);
    let inv_n2 = 1.0 / (cutoff * cutoff);
    let mut last = f64::INFINITY;
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let term = b * factor * n_pow;
        tail += term;
        last = term;
        if term.abs() <= 0.5 * f64::EPSILON * tail.abs() {
            break;
        }
        let k = 2.0 * (j as f64 + 1.0);
        factor *= (s + k - 1.0) * (s + k) / ((k + 1.0) * (k + 2.0)) * inv_n2;
    }
    (tail, last)
}

/// Generalized harmonic number `H_{n,s} = Σ_{i=0}^{n-1} (i+1)^{-s}`.
pub fn generalized_harmonic(n: u64, s: f64) -> Result<f64> {
    check_gt("s", s, 1.0, "s > 1")?;
    let accuracy = SpecialFnAccuracy::default();
    if n <= accuracy.max_terms {
        Ok(direct_sum(s, 1, n + 1))
    } else {
        Ok(hurwitz_unchecked(s, 0, &accuracy) - hurwitz_unchecked(s, n, &accuracy))
    }
}
