//! Grid verification of the mixture identities.
//!
//! A [`GridConfig`] lists parameter values per identity; [`run_verification_grid`]
//! expands it into independent cells, evaluates them in parallel, and assembles
//! a [`VerificationReport`] in a fixed cell order.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{NbParams, YuleParams, ZetaParams};
use crate::error::{Error, Result};
use crate::mixing::{
    geometric_bridge, lambda_mixing_pdf, lambda_mixing_via_r_result, mgf_r1_quadrature, mgf_series,
    mgf_series_harmonic, mgf_series_hurwitz, mixing_pdf_r2_closed, mixing_pdf_r_gt1, moment_r1, moment_r1_closed,
    quasi_signed_mass, MixingDensityKind,
};
use crate::mixture::{
    gamma_poisson_pmf, nb_mixture_pmf, nb_mixture_pmf_with, poisson_mixture_pmf, random_r_mixture_pmf,
    yule_mixture_pmf, RPrior,
};
use crate::quadrature::{QuadratureResult, QuadratureSpec};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Counts above this get a relative threshold next to the absolute one.
pub const LARGE_X: u64 = 20;
/// Relative threshold applied to cells with `x > LARGE_X`.
pub const LARGE_X_REL_THRESHOLD: f64 = 1e-4;

/// Number of terms in the truncated series compared against each other.
const SERIES_FORMS_TERMS: u64 = 60;

/// Every identity the engine can check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Identity {
    /// Geometric kernel mixed over the closed-form density gives Zeta.
    NbMixtureR1,
    /// NB kernel with `r > 1` mixed over its integral density gives Zeta.
    NbMixtureRGt1,
    /// NB kernel with `r < 1` mixed over the signed density gives Zeta.
    NbMixtureRLt1,
    /// The signed `r < 1` density integrates to 1.
    QuasiNormalization,
    /// Integral and closed forms of the `r = 2` density agree.
    R2ClosedForm,
    /// `E[p^x] = 1 - H_{x,s}/ζ(s)`.
    Moment,
    /// Quadrature MGF of the `r = 1` density against its series.
    MgfSeries,
    /// Harmonic-number and Hurwitz forms of the MGF series agree.
    MgfSeriesForms,
    /// Geometric-series terms of the `γ` density reproduce `n^{-s}/ζ(s)`.
    GeometricBridge,
    /// Poisson mixed over Gamma is Negative Binomial.
    GammaPoisson,
    /// The `λ` density obtained through any `r ≥ 1` is the same.
    LambdaRInvariance,
    /// Poisson mixed over the `λ` density gives Zeta.
    PoissonMixture,
    /// Different priors over `r` give the same mixture.
    PriorInvariance,
    /// Geometric mixed over `Beta(1, b)` gives Yule.
    YuleMixture,
    /// `f(0)/f(1)` equals `2^s`, `1/(rp)` and `b+2` for Zeta, NB and Yule.
    PmfRatio,
}

impl Identity {
    pub const ALL: [Identity; 15] = [
        Identity::NbMixtureR1,
        Identity::NbMixtureRGt1,
        Identity::NbMixtureRLt1,
        Identity::QuasiNormalization,
        Identity::R2ClosedForm,
        Identity::Moment,
        Identity::MgfSeries,
        Identity::MgfSeriesForms,
        Identity::GeometricBridge,
        Identity::GammaPoisson,
        Identity::LambdaRInvariance,
        Identity::PoissonMixture,
        Identity::PriorInvariance,
        Identity::YuleMixture,
        Identity::PmfRatio,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Identity::NbMixtureR1 => "nb_mixture_r1",
            Identity::NbMixtureRGt1 => "nb_mixture_r_gt1",
            Identity::NbMixtureRLt1 => "nb_mixture_r_lt1",
            Identity::QuasiNormalization => "quasi_normalization",
            Identity::R2ClosedForm => "r2_closed_form",
            Identity::Moment => "moment",
            Identity::MgfSeries => "mgf_series",
            Identity::MgfSeriesForms => "mgf_series_forms",
            Identity::GeometricBridge => "geometric_bridge",
            Identity::GammaPoisson => "gamma_poisson",
            Identity::LambdaRInvariance => "lambda_r_invariance",
            Identity::PoissonMixture => "poisson_mixture",
            Identity::PriorInvariance => "prior_invariance",
            Identity::YuleMixture => "yule_mixture",
            Identity::PmfRatio => "pmf_ratio",
        }
    }

    /// Absolute error threshold; error compounds with quadrature depth, so
    /// closed-form kernels get the tightest and nested integrals the loosest.
    pub fn default_threshold(&self) -> f64 {
        match self {
            Identity::NbMixtureR1 => 1e-8,
            Identity::NbMixtureRGt1 => 1e-6,
            Identity::NbMixtureRLt1 => 1e-5,
            Identity::QuasiNormalization => 1e-6,
            Identity::R2ClosedForm => 1e-9,
            Identity::Moment => 1e-8,
            Identity::MgfSeries => 1e-8,
            Identity::MgfSeriesForms => 1e-10,
            Identity::GeometricBridge => 1e-8,
            Identity::GammaPoisson => 1e-9,
            Identity::LambdaRInvariance => 1e-5,
            Identity::PoissonMixture => 1e-5,
            Identity::PriorInvariance => 2e-7,
            Identity::YuleMixture => 1e-9,
            Identity::PmfRatio => 1e-12,
        }
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Identity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Identity::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown identity '{s}'")))
    }
}

/// One checked cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub identity: Identity,
    pub params: BTreeMap<String, f64>,
    /// The count the cell is indexed by, if any.
    pub x: Option<u64>,
    pub value: f64,
    pub expected: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub abs_threshold: f64,
    pub rel_threshold: f64,
    pub passed: bool,
    /// False when a quadrature ran out of subdivisions or met an overflowing
    /// integrand; `value` is then the best estimate (NaN after an overflow)
    /// and the cell fails.
    pub converged: bool,
    pub evals: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl IdentityCheck {
    /// Builds a check from a computed value. `passed` holds iff the absolute
    /// error is within `abs_threshold` or the relative error within
    /// `rel_threshold`, and the computation converged.
    pub fn new(
        identity: Identity,
        params: BTreeMap<String, f64>,
        x: Option<u64>,
        value: f64,
        expected: f64,
        (abs_threshold, rel_threshold): (f64, f64),
        evals: usize,
    ) -> Self {
        let abs_err = (value - expected).abs();
        let rel_err = if expected != 0.0 { abs_err / expected.abs() } else { abs_err };
        let passed = abs_err <= abs_threshold || rel_err <= rel_threshold;
        Self {
            identity,
            params,
            x,
            value,
            expected,
            abs_err,
            rel_err,
            abs_threshold,
            rel_threshold,
            passed,
            converged: true,
            evals,
            note: None,
        }
    }

    /// Records a failed or overflowing quadrature as a failing cell; any other
    /// error aborts.
    fn from_outcome(
        identity: Identity,
        params: BTreeMap<String, f64>,
        x: Option<u64>,
        outcome: Result<QuadratureResult>,
        expected: f64,
        thresholds: (f64, f64),
    ) -> Result<Self> {
        match outcome {
            Ok(res) => Ok(Self::new(identity, params, x, res.value, expected, thresholds, res.evaluations)),
            Err(e) => Self::non_converged(identity, params, x, e, expected, thresholds),
        }
    }

    fn non_converged(
        identity: Identity,
        params: BTreeMap<String, f64>,
        x: Option<u64>,
        e: Error,
        expected: f64,
        thresholds: (f64, f64),
    ) -> Result<Self> {
        let (value, evaluations) = match e {
            Error::NonConvergence { value, evaluations, .. } => (value, evaluations),
            // no usable estimate once the integrand overflows
            Error::NonFiniteIntegrand { .. } => (f64::NAN, 0),
            _ => return Err(e),
        };
        let mut check = Self::new(identity, params, x, value, expected, thresholds, evaluations);
        check.passed = false;
        check.converged = false;
        check.note = Some(e.to_string());
        Ok(check)
    }
}

/// Parameter lists per identity plus quadrature settings and threshold
/// overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// NB shapes for the mixture identities; values below 1 also feed the
    /// signed-density normalization.
    pub r: Vec<f64>,
    /// Zeta exponents for the NB mixtures, moments and the `r = 2` comparison.
    pub s: Vec<f64>,
    pub x: Vec<u64>,
    pub moment_x: Vec<u64>,
    pub mgf_t: Vec<f64>,
    pub mgf_s: Vec<f64>,
    pub bridge_n: Vec<u64>,
    pub bridge_s: Vec<f64>,
    pub gp_x: Vec<u64>,
    pub gp_r: Vec<f64>,
    pub gp_p: Vec<f64>,
    pub lambda: Vec<f64>,
    pub lambda_r: Vec<f64>,
    pub lambda_s: Vec<f64>,
    pub poisson_x: Vec<u64>,
    pub poisson_s: Vec<f64>,
    pub prior_x: Vec<u64>,
    pub prior_s: Vec<f64>,
    pub yule_x: Vec<u64>,
    pub yule_b: Vec<f64>,
    pub identities: Vec<Identity>,
    pub quadrature: QuadratureSpec,
    pub thresholds: BTreeMap<Identity, f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            r: vec![0.25, 0.5, 0.75, 1.0, 2.0, 2.5, 3.7],
            s: vec![1.5, 2.0, 3.0],
            x: (0..=20).collect(),
            moment_x: (0..=10).collect(),
            mgf_t: vec![0.5, 1.0, 2.0],
            mgf_s: vec![2.0],
            bridge_n: (1..=8).collect(),
            bridge_s: vec![2.0],
            gp_x: (0..=15).collect(),
            gp_r: vec![0.5, 1.0, 2.0],
            gp_p: vec![0.3, 0.5, 0.7],
            lambda: vec![0.1, 0.5, 1.0, 5.0],
            lambda_r: vec![1.0, 2.0, 3.0],
            lambda_s: vec![1.5, 2.0],
            poisson_x: (0..=10).collect(),
            poisson_s: vec![1.5, 2.0],
            prior_x: (0..=10).collect(),
            prior_s: vec![2.0],
            yule_x: (0..=15).collect(),
            yule_b: vec![0.5, 1.0, 2.5],
            identities: Identity::ALL.to_vec(),
            quadrature: QuadratureSpec::default(),
            thresholds: BTreeMap::new(),
        }
    }
}

/// The three priors over `{1, 2, 3.5}` compared by the prior-invariance check.
pub fn default_priors() -> [RPrior; 3] {
    let atoms = |w: [f64; 3]| RPrior::new(vec![(1.0, w[0]), (2.0, w[1]), (3.5, w[2])]).expect("valid prior");
    [atoms([1.0, 0.0, 0.0]), atoms([0.5, 0.5, 0.0]), atoms([0.2, 0.3, 0.5])]
}

/// Grid points in `(0, 1)` for the `r = 2` closed-form comparison.
const R2_P_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

fn parse_f64_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Config(format!("{key}: '{t}' is not a finite number")))
        })
        .collect()
}

/// Comma-separated counts; `a..b` and `a..=b` are both inclusive ranges.
fn parse_u64_list(key: &str, value: &str) -> Result<Vec<u64>> {
    let bad = |t: &str| Error::Config(format!("{key}: '{t}' is not a count or a range a..b"));
    let mut out = Vec::new();
    for t in value.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((a, b)) = t.split_once("..") {
            let b = b.strip_prefix('=').unwrap_or(b);
            let a: u64 = a.trim().parse().map_err(|_| bad(t))?;
            let b: u64 = b.trim().parse().map_err(|_| bad(t))?;
            if a > b {
                return Err(bad(t));
            }
            out.extend(a..=b);
        } else {
            out.push(t.parse().map_err(|_| bad(t))?);
        }
    }
    Ok(out)
}

impl GridConfig {
    /// Parses the flat `key = value` format. Lines starting with `#` are
    /// comments. `grid.<list>` keys replace the default list on first use and
    /// append on repetition; values are comma-separated, counts accept
    /// inclusive ranges `a..b`.
    ///
    /// ```text
    /// grid.r = 1, 2.5
    /// grid.s = 2
    /// grid.x = 0..10
    /// identities = nb_mixture_r1, nb_mixture_r_gt1
    /// quadrature.abs_tol = 1e-11
    /// threshold.nb_mixture_r_gt1 = 1e-7
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen: Vec<String> = Vec::new();
        let (mut abs_tol, mut rel_tol, mut max_sub) = (
            cfg.quadrature.abs_tol(),
            cfg.quadrature.rel_tol(),
            cfg.quadrature.max_subdivisions(),
        );
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let fresh = !seen.iter().any(|k| k == key);
            if fresh {
                seen.push(key.to_string());
            }
            let err_line = |e: Error| Error::Config(format!("line {}: {}", lineno + 1, strip_prefix(&e)));
            macro_rules! list {
                ($field:ident, $parser:ident) => {{
                    let parsed = $parser(key, value).map_err(err_line)?;
                    if fresh {
                        cfg.$field.clear();
                    }
                    cfg.$field.extend(parsed);
                }};
            }
            match key {
                "grid.r" => list!(r, parse_f64_list),
                "grid.s" => list!(s, parse_f64_list),
                "grid.x" => list!(x, parse_u64_list),
                "grid.moment_x" => list!(moment_x, parse_u64_list),
                "grid.mgf_t" => list!(mgf_t, parse_f64_list),
                "grid.mgf_s" => list!(mgf_s, parse_f64_list),
                "grid.bridge_n" => list!(bridge_n, parse_u64_list),
                "grid.bridge_s" => list!(bridge_s, parse_f64_list),
                "grid.gp_x" => list!(gp_x, parse_u64_list),
                "grid.gp_r" => list!(gp_r, parse_f64_list),
                "grid.gp_p" => list!(gp_p, parse_f64_list),
                "grid.lambda" => list!(lambda, parse_f64_list),
                "grid.lambda_r" => list!(lambda_r, parse_f64_list),
                "grid.lambda_s" => list!(lambda_s, parse_f64_list),
                "grid.poisson_x" => list!(poisson_x, parse_u64_list),
                "grid.poisson_s" => list!(poisson_s, parse_f64_list),
                "grid.prior_x" => list!(prior_x, parse_u64_list),
                "grid.prior_s" => list!(prior_s, parse_f64_list),
                "grid.yule_x" => list!(yule_x, parse_u64_list),
                "grid.yule_b" => list!(yule_b, parse_f64_list),
                "identities" => {
                    let parsed = value
                        .split(',')
                        .map(str::trim)
                        .filter(|t| !t.is_empty())
                        .map(Identity::from_str)
                        .collect::<Result<Vec<_>>>()
                        .map_err(err_line)?;
                    if fresh {
                        cfg.identities.clear();
                    }
                    cfg.identities.extend(parsed);
                }
                "quadrature.abs_tol" => abs_tol = single_f64(key, value).map_err(err_line)?,
                "quadrature.rel_tol" => rel_tol = single_f64(key, value).map_err(err_line)?,
                "quadrature.max_subdivisions" => {
                    max_sub = value
                        .parse()
                        .map_err(|_| Error::Config(format!("line {}: {key} must be a count", lineno + 1)))?
                }
                _ => {
                    if let Some(name) = key.strip_prefix("threshold.") {
                        let id = Identity::from_str(name).map_err(err_line)?;
                        cfg.thresholds.insert(id, single_f64(key, value).map_err(err_line)?);
                    } else {
                        return Err(Error::Config(format!("line {}: unknown key '{key}'", lineno + 1)));
                    }
                }
            }
        }
        cfg.quadrature =
            QuadratureSpec::new(abs_tol, rel_tol, max_sub).map_err(|e| Error::Config(format!("quadrature: {e}")))?;
        cfg.identities.sort();
        cfg.identities.dedup();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn threshold(&self, id: Identity) -> f64 {
        self.thresholds.get(&id).copied().unwrap_or_else(|| id.default_threshold())
    }

    fn thresholds_for(&self, id: Identity, x: Option<u64>) -> (f64, f64) {
        let rel = match x {
            Some(x) if x > LARGE_X => LARGE_X_REL_THRESHOLD,
            _ => 0.0,
        };
        (self.threshold(id), rel)
    }

    fn enabled(&self, id: Identity) -> bool {
        self.identities.contains(&id)
    }

    /// Domain checks on every list, so no cell can fail on parameters.
    pub fn validate(&self) -> Result<()> {
        let all_gt = |name: &str, v: &[f64], bound: f64| -> Result<()> {
            match v.iter().find(|&&x| !(x > bound && x.is_finite())) {
                Some(bad) => Err(Error::Config(format!("{name} = {bad} must exceed {bound}"))),
                None => Ok(()),
            }
        };
        all_gt("grid.r", &self.r, 0.0)?;
        for (name, v) in [
            ("grid.s", &self.s),
            ("grid.mgf_s", &self.mgf_s),
            ("grid.bridge_s", &self.bridge_s),
            ("grid.lambda_s", &self.lambda_s),
            ("grid.poisson_s", &self.poisson_s),
            ("grid.prior_s", &self.prior_s),
        ] {
            all_gt(name, v, 1.0)?;
        }
        all_gt("grid.gp_r", &self.gp_r, 0.0)?;
        all_gt("grid.lambda", &self.lambda, 0.0)?;
        all_gt("grid.yule_b", &self.yule_b, 0.0)?;
        if let Some(bad) = self.lambda_r.iter().find(|&&r| !(r >= 1.0 && r.is_finite())) {
            return Err(Error::Config(format!("grid.lambda_r = {bad} must be >= 1")));
        }
        if let Some(bad) = self.gp_p.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::Config(format!("grid.gp_p = {bad} must lie in (0, 1)")));
        }
        if self.bridge_n.contains(&0) {
            return Err(Error::Config("grid.bridge_n must be >= 1".into()));
        }
        if let Some(bad) = self.mgf_t.iter().find(|t| !t.is_finite()) {
            return Err(Error::Config(format!("grid.mgf_t = {bad} must be finite")));
        }
        if let Some((id, v)) = self.thresholds.iter().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::Config(format!("threshold.{id} = {v} must be >= 0")));
        }
        Ok(())
    }

    /// Expands the configuration into cells, in report order.
    fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &s in &self.s {
            for &r in &self.r {
                let id = if r == 1.0 {
                    Identity::NbMixtureR1
                } else if r > 1.0 {
                    Identity::NbMixtureRGt1
                } else {
                    Identity::NbMixtureRLt1
                };
                if self.enabled(id) {
                    cells.extend(self.x.iter().map(|&x| Cell::NbMixture { x, r, s }));
                }
                if r < 1.0 && self.enabled(Identity::QuasiNormalization) {
                    cells.push(Cell::QuasiNormalization { r, s });
                }
            }
            if self.enabled(Identity::R2ClosedForm) {
                cells.extend(R2_P_GRID.iter().map(|&p| Cell::R2ClosedForm { p, s }));
            }
            if self.enabled(Identity::Moment) {
                cells.extend(self.moment_x.iter().map(|&x| Cell::Moment { x, s }));
            }
        }
        for &s in &self.mgf_s {
            for &t in &self.mgf_t {
                if self.enabled(Identity::MgfSeries) {
                    cells.push(Cell::MgfSeries { t, s });
                }
                if self.enabled(Identity::MgfSeriesForms) {
                    cells.push(Cell::MgfSeriesForms { t, s });
                }
            }
        }
        if self.enabled(Identity::GeometricBridge) {
            for &s in &self.bridge_s {
                cells.extend(self.bridge_n.iter().map(|&n| Cell::GeometricBridge { n, s }));
            }
        }
        if self.enabled(Identity::GammaPoisson) {
            for &r in &self.gp_r {
                for &p in &self.gp_p {
                    cells.extend(self.gp_x.iter().map(|&x| Cell::GammaPoisson { x, r, p }));
                }
            }
        }
        if self.enabled(Identity::LambdaRInvariance) {
            for &s in &self.lambda_s {
                for &lambda in &self.lambda {
                    cells.extend(self.lambda_r.iter().map(|&r| Cell::LambdaRInvariance { lambda, r, s }));
                }
            }
        }
        if self.enabled(Identity::PoissonMixture) {
            for &s in &self.poisson_s {
                cells.extend(self.poisson_x.iter().map(|&x| Cell::PoissonMixture { x, s }));
            }
        }
        if self.enabled(Identity::PriorInvariance) {
            for &s in &self.prior_s {
                cells.extend(self.prior_x.iter().map(|&x| Cell::PriorInvariance { x, s }));
            }
        }
        if self.enabled(Identity::YuleMixture) {
            for &b in &self.yule_b {
                cells.extend(self.yule_x.iter().map(|&x| Cell::YuleMixture { x, b }));
            }
        }
        if self.enabled(Identity::PmfRatio) {
            cells.extend(self.s.iter().map(|&s| Cell::ZetaRatio { s }));
            for &r in &self.gp_r {
                cells.extend(self.gp_p.iter().map(|&p| Cell::NbRatio { r, p }));
            }
            cells.extend(self.yule_b.iter().map(|&b| Cell::YuleRatio { b }));
        }
        cells
    }
}

fn single_f64(key: &str, value: &str) -> Result<f64> {
    let v = parse_f64_list(key, value)?;
    match v.as_slice() {
        [one] => Ok(*one),
        _ => Err(Error::Config(format!("{key} takes a single number"))),
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(msg) => msg.clone(),
        other => other.to_string(),
    }
}

fn params<const N: usize>(pairs: [(&str, f64); N]) -> BTreeMap<String, f64> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// One unit of work in the verification grid.
#[derive(Debug, Clone, Copy)]
enum Cell {
    NbMixture { x: u64, r: f64, s: f64 },
    QuasiNormalization { r: f64, s: f64 },
    R2ClosedForm { p: f64, s: f64 },
    Moment { x: u64, s: f64 },
    MgfSeries { t: f64, s: f64 },
    MgfSeriesForms { t: f64, s: f64 },
    GeometricBridge { n: u64, s: f64 },
    GammaPoisson { x: u64, r: f64, p: f64 },
    LambdaRInvariance { lambda: f64, r: f64, s: f64 },
    PoissonMixture { x: u64, s: f64 },
    PriorInvariance { x: u64, s: f64 },
    YuleMixture { x: u64, b: f64 },
    ZetaRatio { s: f64 },
    NbRatio { r: f64, p: f64 },
    YuleRatio { b: f64 },
}

/// Relative series truncation tolerance for the MGF comparison.
const MGF_SERIES_TOL: f64 = 1e-14;

impl Cell {
    fn run(&self, cfg: &GridConfig) -> Result<IdentityCheck> {
        let spec = &cfg.quadrature;
        match *self {
            Cell::NbMixture { x, r, s } => {
                let kind = if r > 1.0 {
                    // exercise the integral form even where a closed form exists
                    MixingDensityKind::RGt1Integral { r, s }
                } else {
                    MixingDensityKind::for_shape(r, s)?
                };
                let id = if r == 1.0 {
                    Identity::NbMixtureR1
                } else if r > 1.0 {
                    Identity::NbMixtureRGt1
                } else {
                    Identity::NbMixtureRLt1
                };
                let expected = ZetaParams::new(s)?.pmf(x);
                IdentityCheck::from_outcome(
                    id,
                    params([("r", r), ("s", s)]),
                    Some(x),
                    nb_mixture_pmf_with(x, &kind, spec),
                    expected,
                    cfg.thresholds_for(id, Some(x)),
                )
            }
            Cell::QuasiNormalization { r, s } => {
                let id = Identity::QuasiNormalization;
                let thresholds = cfg.thresholds_for(id, None);
                let p = params([("r", r), ("s", s)]);
                match quasi_signed_mass(r, s, spec) {
                    Ok(m) => {
                        let mut check = IdentityCheck::new(id, p, None, m.integral, 1.0, thresholds, m.evaluations);
                        check.note = Some(format!(
                            "total variation {:.17e}, negative mass {:.17e}",
                            m.total_variation, m.negative_mass
                        ));
                        Ok(check)
                    }
                    Err(e) => IdentityCheck::non_converged(id, p, None, e, 1.0, thresholds),
                }
            }
            Cell::R2ClosedForm { p, s } => {
                let id = Identity::R2ClosedForm;
                let thresholds = cfg.thresholds_for(id, None);
                let expected = mixing_pdf_r2_closed(p, s)?;
                let pr = params([("p", p), ("s", s)]);
                match mixing_pdf_r_gt1(p, 2.0, s, spec) {
                    Ok(v) => Ok(IdentityCheck::new(id, pr, None, v, expected, thresholds, 0)),
                    Err(e) => IdentityCheck::non_converged(id, pr, None, e, expected, thresholds),
                }
            }
            Cell::Moment { x, s } => {
                let id = Identity::Moment;
                IdentityCheck::from_outcome(
                    id,
                    params([("s", s)]),
                    Some(x),
                    moment_r1(x, s, spec),
                    moment_r1_closed(x, s)?,
                    cfg.thresholds_for(id, Some(x)),
                )
            }
            Cell::MgfSeries { t, s } => {
                let id = Identity::MgfSeries;
                let (series, _) = mgf_series(t, s, MGF_SERIES_TOL)?;
                IdentityCheck::from_outcome(
                    id,
                    params([("t", t), ("s", s)]),
                    None,
                    mgf_r1_quadrature(t, s, spec),
                    series,
                    cfg.thresholds_for(id, None),
                )
            }
            Cell::MgfSeriesForms { t, s } => {
                let id = Identity::MgfSeriesForms;
                let harmonic = mgf_series_harmonic(t, s, SERIES_FORMS_TERMS)?;
                let hurwitz = mgf_series_hurwitz(t, s, SERIES_FORMS_TERMS)?;
                Ok(IdentityCheck::new(
                    id,
                    params([("t", t), ("s", s), ("terms", SERIES_FORMS_TERMS as f64)]),
                    None,
                    harmonic,
                    hurwitz,
                    cfg.thresholds_for(id, None),
                    0,
                ))
            }
            Cell::GeometricBridge { n, s } => {
                let id = Identity::GeometricBridge;
                let expected = ZetaParams::new(s)?.pmf(n - 1);
                IdentityCheck::from_outcome(
                    id,
                    params([("n", n as f64), ("s", s)]),
                    None,
                    geometric_bridge(n, s, spec),
                    expected,
                    cfg.thresholds_for(id, None),
                )
            }
            Cell::GammaPoisson { x, r, p } => {
                let id = Identity::GammaPoisson;
                let expected = NbParams::new(r, p)?.pmf(x);
                IdentityCheck::from_outcome(
                    id,
                    params([("r", r), ("p", p)]),
                    Some(x),
                    gamma_poisson_pmf(x, r, p, spec),
                    expected,
                    cfg.thresholds_for(id, Some(x)),
                )
            }
            Cell::LambdaRInvariance { lambda, r, s } => {
                let id = Identity::LambdaRInvariance;
                let thresholds = cfg.thresholds_for(id, None);
                let pr = params([("lambda", lambda), ("r", r), ("s", s)]);
                let expected = match lambda_mixing_pdf(lambda, s, spec) {
                    Ok(v) => v,
                    Err(e) => return IdentityCheck::non_converged(id, pr, None, e, f64::NAN, thresholds),
                };
                IdentityCheck::from_outcome(
                    id,
                    pr,
                    None,
                    lambda_mixing_via_r_result(lambda, r, s, spec),
                    expected,
                    thresholds,
                )
            }
            Cell::PoissonMixture { x, s } => {
                let id = Identity::PoissonMixture;
                IdentityCheck::from_outcome(
                    id,
                    params([("s", s)]),
                    Some(x),
                    poisson_mixture_pmf(x, s, spec),
                    ZetaParams::new(s)?.pmf(x),
                    cfg.thresholds_for(id, Some(x)),
                )
            }
            Cell::PriorInvariance { x, s } => {
                let id = Identity::PriorInvariance;
                let thresholds = cfg.thresholds_for(id, Some(x));
                let pr = params([("s", s)]);
                let mut values = Vec::new();
                let mut evals = 0;
                for prior in default_priors() {
                    match random_r_mixture_pmf(x, s, &prior, spec) {
                        Ok(v) => {
                            values.push(v.value);
                            evals += v.evaluations;
                        }
                        Err(e) => return IdentityCheck::non_converged(id, pr, Some(x), e, f64::NAN, thresholds),
                    }
                }
                // value/expected hold the pair with the largest disagreement
                let mut worst = (values[0], values[0]);
                for i in 0..values.len() {
                    for j in i + 1..values.len() {
                        if (values[i] - values[j]).abs() > (worst.0 - worst.1).abs() {
                            worst = (values[i], values[j]);
                        }
                    }
                }
                let mut check = IdentityCheck::new(id, pr, Some(x), worst.0, worst.1, thresholds, evals);
                let target = ZetaParams::new(s)?.pmf(x);
                let off = values.iter().map(|v| (v - target).abs()).fold(0.0, f64::max);
                check.note = Some(format!("max deviation from zeta mass {off:.3e}"));
                Ok(check)
            }
            Cell::YuleMixture { x, b } => {
                let id = Identity::YuleMixture;
                IdentityCheck::from_outcome(
                    id,
                    params([("b", b)]),
                    Some(x),
                    yule_mixture_pmf(x, b, spec),
                    YuleParams::new(b)?.pmf(x),
                    cfg.thresholds_for(id, Some(x)),
                )
            }
            Cell::ZetaRatio { s } => {
                let z = ZetaParams::new(s)?;
                Ok(ratio_check(cfg, params([("s", s)]), z.pmf(0) / z.pmf(1), 2f64.powf(s)))
            }
            Cell::NbRatio { r, p } => {
                let nb = NbParams::new(r, p)?;
                Ok(ratio_check(cfg, params([("r", r), ("p", p)]), nb.pmf(0) / nb.pmf(1), 1.0 / (r * p)))
            }
            Cell::YuleRatio { b } => {
                let y = YuleParams::new(b)?;
                Ok(ratio_check(cfg, params([("b", b)]), y.pmf(0) / y.pmf(1), b + 2.0))
            }
        }
    }
}

fn ratio_check(cfg: &GridConfig, p: BTreeMap<String, f64>, value: f64, expected: f64) -> IdentityCheck {
    let id = Identity::PmfRatio;
    IdentityCheck::new(id, p, None, value, expected, cfg.thresholds_for(id, None), 0)
}

/// Outcome of a grid run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub grid: GridConfig,
    pub checks: Vec<IdentityCheck>,
    pub version: String,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` overrides the clock.
    pub timestamp: u64,
}

impl VerificationReport {
    /// Conjunction of every cell.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &IdentityCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn report_timestamp() -> u64 {
    if let Some(epoch) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok()) {
        return epoch;
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Runs every enabled identity over its parameter lists.
///
/// Cells run in parallel and the report keeps the configuration order.
/// Quadrature non-convergence fails its cell; other numerical errors (a
/// non-finite integrand) abort the run.
pub fn run_verification_grid(grid: &GridConfig) -> Result<VerificationReport> {
    grid.validate()?;
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(Error::Empty("verification grid"));
    }
    let checks = cells
        .par_iter()
        .map(|c| c.run(grid))
        .collect::<Result<Vec<_>>>()?;
    Ok(VerificationReport {
        grid: grid.clone(),
        checks,
        version: TOOL_VERSION.to_string(),
        timestamp: report_timestamp(),
    })
}

/// Compares quadrature moments `E[p^x]` of the `r = 1` density with
/// `1 - H_{x,s}/ζ(s)` for `x = 0..=x_max`.
pub fn moment_identity_check(x_max: u64, s: f64, spec: &QuadratureSpec) -> Result<Vec<IdentityCheck>> {
    if x_max < 1 {
        return Err(Error::domain("x_max", 0.0, "x_max >= 1"));
    }
    let cfg = GridConfig {
        quadrature: *spec,
        ..GridConfig::default()
    };
    (0..=x_max).map(|x| Cell::Moment { x, s }.run(&cfg)).collect()
}

/// [`nb_mixture_pmf`] checked against the Zeta mass, as a single report cell.
pub fn nb_mixture_check(x: u64, r: f64, s: f64, spec: &QuadratureSpec) -> Result<IdentityCheck> {
    MixingDensityKind::for_shape(r, s)?;
    let cfg = GridConfig {
        quadrature: *spec,
        ..GridConfig::default()
    };
    let _ = nb_mixture_pmf;
    Cell::NbMixture { x, r, s }.run(&cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(identity: &str, extra: &str) -> GridConfig {
        GridConfig::parse(&format!("identities = {identity}\n{extra}")).unwrap()
    }

    #[test]
    fn parse_lists_and_ranges() {
        let cfg = GridConfig::parse("# comment\ngrid.r = 1, 2.5\ngrid.r = 3\ngrid.x = 0..3, 7\n").unwrap();
        assert_eq!(cfg.r, vec![1.0, 2.5, 3.0]);
        assert_eq!(cfg.x, vec![0, 1, 2, 3, 7]);
        assert_eq!(cfg.s, vec![1.5, 2.0, 3.0]);
        let cfg = GridConfig::parse("grid.x = 2..=4\nquadrature.abs_tol = 1e-9\nthreshold.moment = 1e-7").unwrap();
        assert_eq!(cfg.x, vec![2, 3, 4]);
        assert_eq!(cfg.quadrature.abs_tol(), 1e-9);
        assert_eq!(cfg.threshold(Identity::Moment), 1e-7);
    }

    #[test]
    fn parse_errors() {
        for bad in [
            "grid.r = abc",
            "grid.x = 3..1",
            "no equals sign",
            "grid.unknown = 1",
            "identities = bogus",
            "grid.s = 1.0",
            "grid.r = 0",
            "quadrature.abs_tol = -1",
            "quadrature.abs_tol = 1, 2",
            "grid.gp_p = 1.5",
        ] {
            assert!(matches!(GridConfig::parse(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn single_cell_grid() {
        let cfg = single("nb_mixture_r1", "grid.r = 1\ngrid.s = 2\ngrid.x = 0");
        let report = run_verification_grid(&cfg).unwrap();
        assert_eq!(report.checks.len(), 1);
        let c = &report.checks[0];
        assert!(c.passed && c.converged);
        assert!(c.abs_err < 1e-8);
        assert!(c.evals > 0);
        assert!(report.passed());
    }

    #[test]
    fn empty_grid_is_an_error() {
        let mut cfg = single("nb_mixture_r1", "grid.r = 1\ngrid.s = 2\ngrid.x = 0");
        cfg.x.clear();
        assert!(matches!(run_verification_grid(&cfg), Err(Error::Empty(_))));
    }

    #[test]
    fn ordering_is_deterministic() {
        let cfg = single("pmf_ratio, yule_mixture", "grid.yule_x = 0..3");
        let a = run_verification_grid(&cfg).unwrap();
        let b = run_verification_grid(&cfg).unwrap();
        assert_eq!(a.checks, b.checks);
        assert!(a.passed());
        let ids: Vec<_> = a.checks.iter().map(|c| c.identity).collect();
        let first_ratio = ids.iter().position(|&i| i == Identity::PmfRatio).unwrap();
        assert!(ids[..first_ratio].iter().all(|&i| i == Identity::YuleMixture));
    }

    #[test]
    fn tight_threshold_fails_cell() {
        let cfg = single("yule_mixture", "grid.yule_x = 2\ngrid.yule_b = 1\nthreshold.yule_mixture = 0");
        let report = run_verification_grid(&cfg).unwrap();
        // exact agreement is possible but not expected at 0 tolerance
        let c = &report.checks[0];
        assert_eq!(c.passed, c.abs_err == 0.0);
    }

    #[test]
    fn non_convergence_marks_cell_failed() {
        let cfg = single(
            "nb_mixture_r_lt1",
            "grid.r = 0.25\ngrid.s = 1.01\ngrid.x = 0\nquadrature.abs_tol = 1e-15\nquadrature.rel_tol = 1e-15\nquadrature.max_subdivisions = 3",
        );
        let report = run_verification_grid(&cfg).unwrap();
        assert!(!report.passed());
        assert!(report.checks.iter().any(|c| !c.converged && c.note.is_some()));
    }

    #[test]
    fn moment_checks() {
        let checks = moment_identity_check(3, 2.0, &QuadratureSpec::default()).unwrap();
        assert_eq!(checks.len(), 4);
        assert!(checks.iter().all(|c| c.passed));
        assert_eq!(checks[0].expected, 1.0);
        assert!((checks[1].expected - 0.392_072_898_145_973).abs() < 1e-14);
        assert!((checks[3].expected - 0.172_543_666_920_908).abs() < 1e-14);
        assert!(moment_identity_check(0, 2.0, &QuadratureSpec::default()).is_err());
    }

    #[test]
    fn report_json_shape() {
        let cfg = single("pmf_ratio", "grid.s = 2\ngrid.gp_r = 1\ngrid.gp_p = 0.5\ngrid.yule_b = 1");
        let report = run_verification_grid(&cfg).unwrap();
        let v: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert!(v["grid"].is_object());
        assert!(v["version"].is_string());
        let c = &v["checks"][0];
        for key in ["identity", "params", "x", "abs_err", "rel_err", "passed", "evals"] {
            assert!(c.get(key).is_some(), "missing {key}");
        }
        assert_eq!(c["identity"], "pmf_ratio");
    }

    #[test]
    fn large_x_gets_relative_threshold() {
        let cfg = GridConfig::default();
        assert_eq!(cfg.thresholds_for(Identity::NbMixtureR1, Some(20)).1, 0.0);
        assert_eq!(cfg.thresholds_for(Identity::NbMixtureR1, Some(21)).1, LARGE_X_REL_THRESHOLD);
    }
}
