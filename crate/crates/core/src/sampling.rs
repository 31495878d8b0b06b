//! Exact samplers for the Zeta distribution, directly and through the
//! geometric and Poisson mixture chains, plus goodness-of-fit summaries.
//!
//! Every sampler is a pure function of its parameters and a [`SeededStream`].
//! Counts that would exceed `u64::MAX` saturate there; at `s = 1.5` that
//! happens with probability below 1e-9.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1, Gamma, Open01, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::distributions::ZetaParams;
use crate::error::{Error, Result};

/// Largest cumulative table the direct sampler builds.
const MAX_TABLE: u64 = 1 << 16;
/// Tail mass at which the cumulative table may stop early.
const TABLE_EPS: f64 = 1e-9;
/// Smallest expected count of a chi-square bin.
const MIN_EXPECTED: f64 = 5.0;
const U64_LIMIT: f64 = 18_446_744_073_709_551_615.0;

/// Identifies an independent random stream: ChaCha20 keyed by `seed`, with
/// `stream_id` selecting the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeededStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl SeededStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chain {
    Direct,
    Geometric,
    Poisson,
}

impl Chain {
    pub const ALL: [Chain; 3] = [Chain::Direct, Chain::Geometric, Chain::Poisson];

    pub fn name(self) -> &'static str {
        match self {
            Chain::Direct => "direct",
            Chain::Geometric => "geometric",
            Chain::Poisson => "poisson",
        }
    }
}

impl std::fmt::Display for Chain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Chain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Chain::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown chain '{s}' (expected direct, geometric or poisson)")))
    }
}

/// Counts drawn by one chain from one stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub chain: Chain,
    pub s: f64,
    pub stream: SeededStream,
    pub counts: Vec<u64>,
}

impl SampleBatch {
    pub fn draw(chain: Chain, s: f64, n: usize, stream: SeededStream) -> Result<Self> {
        let counts = match chain {
            Chain::Direct => sample_zeta_direct(s, n, stream)?,
            Chain::Geometric => sample_zeta_via_geometric_chain(s, n, stream)?,
            Chain::Poisson => sample_zeta_via_poisson_chain(s, n, stream)?,
        };
        Ok(Self {
            chain,
            s,
            stream,
            counts,
        })
    }
}

/// Zeta sampler on `{0, 1, 2, ...}`.
///
/// Values up to a table point are found by binary search of the cumulative
/// masses. Beyond it, `m = x + 1` is drawn from a Pareto proposal `T V^{-1/(s-1)}`
/// floored and accepted with probability `m^{-s} / ((1 + 1/T)^s P(floor = m))`,
/// which makes the tail exact.
#[derive(Debug, Clone)]
pub struct ZetaSampler {
    s: f64,
    cdf: Vec<f64>,
    /// 1-based start of the tail, `T`.
    tail_start: f64,
    tail_bound: f64,
}

impl ZetaSampler {
    pub fn new(s: f64) -> Result<Self> {
        let zeta = ZetaParams::new(s)?;
        let len = if zeta.tail_mass(MAX_TABLE - 1) >= TABLE_EPS {
            MAX_TABLE
        } else {
            zeta.truncation_point(TABLE_EPS)? + 1
        };
        let mut cdf = Vec::with_capacity(len as usize);
        let mut acc = 0.0;
        for x in 0..len {
            acc += zeta.pmf(x);
            cdf.push(acc);
        }
        // the summed head and the Hurwitz tail agree to rounding; trust the tail
        let head = 1.0 - zeta.tail_mass(len - 1);
        for c in &mut cdf {
            *c = (*c).min(head);
        }
        let tail_start = len as f64 + 1.0;
        Ok(Self {
            s,
            cdf,
            tail_start,
            tail_bound: (1.0 + 1.0 / tail_start).powf(s),
        })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        let k = self.cdf.partition_point(|&c| c <= u);
        if k < self.cdf.len() {
            return k as u64;
        }
        self.sample_tail(rng)
    }

    fn sample_tail<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let s = self.s;
        loop {
            let v: f64 = rng.sample(Open01);
            let m = (self.tail_start * (-v.ln() / (s - 1.0)).exp()).floor();
            if m >= U64_LIMIT {
                return u64::MAX;
            }
            // m^{-s} over (s-1)^{-1}(m^{1-s} - (m+1)^{1-s}), computed without cancellation
            let ratio = (s - 1.0) / (m * -((1.0 - s) * (1.0 / m).ln_1p()).exp_m1());
            let w: f64 = rng.random();
            if w * self.tail_bound <= ratio {
                return m as u64 - 1;
            }
        }
    }
}

impl Distribution<u64> for ZetaSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        ZetaSampler::sample(self, rng)
    }
}

/// Draws `Y = -ln p` for the geometric-kernel mixing density: `K ~ Zeta(s)`,
/// then `Y ~ Gamma(s, rate K+1)`. Expanding `1/(1-e^{-y})` in the `y`-density
/// as a geometric series gives exactly this two-stage mixture.
struct MixingDraw {
    zeta: ZetaSampler,
    gamma: Gamma<f64>,
}

impl MixingDraw {
    fn new(s: f64) -> Result<Self> {
        let zeta = ZetaSampler::new(s)?;
        // Marsaglia-Tsang squeeze, valid since the shape s exceeds 1
        let gamma = Gamma::new(s, 1.0).map_err(|_| Error::domain("s", s, "s > 1"))?;
        Ok(Self { zeta, gamma })
    }

    fn neg_ln_p<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let k = self.zeta.sample(rng);
        self.gamma.sample(rng) / (k as f64 + 1.0)
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("n", 0.0, "n >= 1"));
    }
    Ok(())
}

pub fn sample_zeta_direct(s: f64, n: usize, stream: SeededStream) -> Result<Vec<u64>> {
    check_n(n)?;
    let sampler = ZetaSampler::new(s)?;
    let mut rng = stream.rng();
    Ok((0..n).map(|_| sampler.sample(&mut rng)).collect())
}

/// Draws from the geometric-kernel mixing density over `p`. Values are
/// clamped into the open unit interval when `e^{-Y}` rounds to 0 or 1.
pub fn sample_mixing_p_r1(s: f64, n: usize, stream: SeededStream) -> Result<Vec<f64>> {
    check_n(n)?;
    let draw = MixingDraw::new(s)?;
    let mut rng = stream.rng();
    let below_one = 1.0 - f64::EPSILON / 2.0;
    Ok((0..n)
        .map(|_| (-draw.neg_ln_p(&mut rng)).exp().clamp(f64::MIN_POSITIVE, below_one))
        .collect())
}

/// `p` from the mixing density, then a geometric count with success
/// probability `1-p`: `floor(E / Y)` with `E ~ Exp(1)` and `Y = -ln p`.
pub fn sample_zeta_via_geometric_chain(s: f64, n: usize, stream: SeededStream) -> Result<Vec<u64>> {
    check_n(n)?;
    let draw = MixingDraw::new(s)?;
    let mut rng = stream.rng();
    Ok((0..n)
        .map(|_| {
            let y = draw.neg_ln_p(&mut rng);
            let e: f64 = rng.sample(Exp1);
            saturate(e / y)
        })
        .collect())
}

/// `p` from the mixing density, `λ ~ Exp(rate (1-p)/p)`, then `Poisson(λ)`.
/// `p/(1-p) = 1/expm1(Y)` keeps `λ` accurate when `p` is near 1.
pub fn sample_zeta_via_poisson_chain(s: f64, n: usize, stream: SeededStream) -> Result<Vec<u64>> {
    check_n(n)?;
    let draw = MixingDraw::new(s)?;
    let mut rng = stream.rng();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let y = draw.neg_ln_p(&mut rng);
        let e: f64 = rng.sample(Exp1);
        let lambda = e / y.exp_m1();
        let x = if lambda <= 0.0 {
            0
        } else if lambda >= Poisson::<f64>::MAX_LAMBDA {
            u64::MAX
        } else {
            let poisson = Poisson::new(lambda).map_err(|_| Error::domain("lambda", lambda, "poisson rate in range"))?;
            saturate(poisson.sample(&mut rng))
        };
        out.push(x);
    }
    Ok(out)
}

fn saturate(v: f64) -> u64 {
    if v >= U64_LIMIT {
        u64::MAX
    } else {
        v.floor() as u64
    }
}

/// Goodness of fit of a sample to the Zeta PMF over `{0, ..., X}` with
/// `X` the tail point for `eps` and larger values pooled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub n: u64,
    pub s: f64,
    pub tv_distance: f64,
    /// Pearson statistic over bins merged until each expects at least 5 draws.
    pub chi_square: f64,
    pub dof: u64,
    pub p_value: f64,
    pub truncation_point: u64,
}

fn check_fit_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 0.01) {
        return Err(Error::domain("eps", eps, "0 < eps < 0.01"));
    }
    Ok(())
}

fn tally(samples: &[u64]) -> BTreeMap<u64, u64> {
    let mut counts = BTreeMap::new();
    for &x in samples {
        *counts.entry(x).or_insert(0) += 1;
    }
    counts
}

pub fn fit_against_zeta(samples: &[u64], s: f64, eps: f64) -> Result<FitSummary> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    check_fit_eps(eps)?;
    let zeta = ZetaParams::new(s)?;
    let cut = zeta.truncation_point(eps)?;
    let counts = tally(samples);
    let n = samples.len() as f64;

    // Σ_{x ≤ X} |e_x - f_x| needs only the observed x: unobserved ones add f_x
    let mut l1 = 1.0 - zeta.tail_mass(cut);
    let mut beyond = 0u64;
    for (&x, &c) in &counts {
        if x > cut {
            beyond += c;
            continue;
        }
        let f = zeta.pmf(x);
        l1 += (c as f64 / n - f).abs() - f;
    }
    l1 += (beyond as f64 / n - zeta.tail_mass(cut)).abs();
    let tv_distance = (0.5 * l1).clamp(0.0, 1.0);

    // bins of consecutive values, each expecting at least MIN_EXPECTED draws;
    // once single values expect fewer, ranges [x, 2x) keep the bin count
    // logarithmic in X. Everything past the last bin, including x > X, is
    // pooled into a tail bin.
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut observed = 0.0;
    let mut expected = 0.0;
    let at_least = |x: u64| if x == 0 { 1.0 } else { zeta.tail_mass(x - 1) };
    let mut x = 0u64;
    while x <= cut && n * at_least(x) >= 2.0 * MIN_EXPECTED {
        let end = if n * zeta.pmf(x) >= MIN_EXPECTED {
            x + 1
        } else {
            x.saturating_mul(2).min(cut.saturating_add(1)).max(x + 1)
        };
        observed += counts.range(x..end).map(|(_, &c)| c).sum::<u64>() as f64;
        expected += n * (at_least(x) - at_least(end));
        if expected >= MIN_EXPECTED {
            bins.push((observed, expected));
            observed = 0.0;
            expected = 0.0;
        }
        x = end;
    }
    let rest_observed = counts.range(x..).map(|(_, &c)| c).sum::<u64>() as f64;
    let rest_expected = n * at_least(x);
    observed += rest_observed;
    expected += rest_expected;
    match bins.last_mut() {
        Some(last) if expected < MIN_EXPECTED => {
            last.0 += observed;
            last.1 += expected;
        }
        _ => bins.push((observed, expected)),
    }
    let chi_square: f64 = bins.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let (dof, p_value) = chi_square_tail(chi_square, bins.len());
    Ok(FitSummary {
        n: samples.len() as u64,
        s,
        tv_distance,
        chi_square,
        dof,
        p_value,
        truncation_point: cut,
    })
}

/// With a single bin there is nothing to test; report one degree of freedom
/// and p = 1.
fn chi_square_tail(stat: f64, bins: usize) -> (u64, f64) {
    if bins < 2 {
        return (1, 1.0);
    }
    let dof = bins as u64 - 1;
    let p = ChiSquared::new(dof as f64).map(|d| d.sf(stat)).unwrap_or(f64::NAN);
    (dof, p)
}

/// One row of a fit table: observed and expected counts at `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub x: u64,
    pub count: u64,
    pub expected: f64,
    pub abs_err: f64,
}

/// Rows for every `x ≤ X` that was observed or expects at least one draw.
pub fn fit_table(samples: &[u64], s: f64, eps: f64) -> Result<Vec<FitRow>> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    check_fit_eps(eps)?;
    let zeta = ZetaParams::new(s)?;
    let cut = zeta.truncation_point(eps)?;
    let counts = tally(samples);
    let n = samples.len() as f64;
    let mut xs: Vec<u64> = counts.keys().copied().filter(|&x| x <= cut).collect();
    let mut x = 0;
    while x <= cut && n * zeta.pmf(x) >= 1.0 {
        xs.push(x);
        x += 1;
    }
    xs.sort_unstable();
    xs.dedup();
    Ok(xs
        .into_iter()
        .map(|x| {
            let count = counts.get(&x).copied().unwrap_or(0);
            let expected = n * zeta.pmf(x);
            FitRow {
                x,
                count,
                expected,
                abs_err: (count as f64 - expected).abs(),
            }
        })
        .collect())
}

/// Two-sample chi-square homogeneity test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleTest {
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
}

/// Values are binned consecutively until both samples together hold at least
/// `2 · 5` draws in every bin; the last partial bin joins its neighbour.
pub fn two_sample_chi_square(a: &[u64], b: &[u64]) -> Result<TwoSampleTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("samples"));
    }
    let ca = tally(a);
    let cb = tally(b);
    let mut keys: Vec<u64> = ca.keys().chain(cb.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut oa, mut ob) = (0.0, 0.0);
    for k in keys {
        oa += ca.get(&k).copied().unwrap_or(0) as f64;
        ob += cb.get(&k).copied().unwrap_or(0) as f64;
        if oa + ob >= 2.0 * MIN_EXPECTED {
            bins.push((oa, ob));
            oa = 0.0;
            ob = 0.0;
        }
    }
    if oa + ob > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += oa;
                last.1 += ob;
            }
            None => bins.push((oa, ob)),
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let statistic: f64 = bins
        .iter()
        .map(|&(x, y)| {
            let d = ka * x - kb * y;
            d * d / (x + y)
        })
        .sum();
    let (dof, p_value) = chi_square_tail(statistic, bins.len());
    Ok(TwoSampleTest {
        statistic,
        dof,
        p_value,
    })
}

/// Pooled two-proportion z statistic for the frequency of `value`.
pub fn two_proportion_z(a: &[u64], b: &[u64], value: u64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("samples"));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let xa = a.iter().filter(|&&x| x == value).count() as f64;
    let xb = b.iter().filter(|&&x| x == value).count() as f64;
    let pooled = (xa + xb) / (na + nb);
    let se = (pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb)).sqrt();
    if se == 0.0 {
        return Ok(0.0);
    }
    Ok((xa / na - xb / nb) / se)
}

/// Empirical total variation distance between two samples.
pub fn empirical_tv(a: &[u64], b: &[u64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("samples"));
    }
    let (ca, cb) = (tally(a), tally(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut l1 = 0.0;
    for (k, &x) in &ca {
        let y = cb.get(k).copied().unwrap_or(0) as f64;
        l1 += (x as f64 / na - y / nb).abs();
    }
    for (k, &y) in &cb {
        if !ca.contains_key(k) {
            l1 += y as f64 / nb;
        }
    }
    Ok(0.5 * l1)
}
