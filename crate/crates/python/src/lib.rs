//! Python bindings for `zetamix`.
//!
//! Parameter errors raise `ValueError`; quadrature that fails to converge or
//! meets a non-finite integrand raises `QuadratureError`.

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use zetamix::distributions::{NbParams, YuleParams, ZetaParams};
use zetamix::mixing::{self, MixingDensityKind};
use zetamix::quadrature::QuadratureSpec;
use zetamix::sampling::{self, Chain, SampleBatch, SeededStream};
use zetamix::{mixture, special, verification, Error};

create_exception!(zetamix_py, QuadratureError, PyRuntimeError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NonConvergence { .. } | Error::NonFiniteIntegrand { .. } => QuadratureError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn spec_or_default(spec: Option<&Spec>) -> QuadratureSpec {
    spec.map_or_else(QuadratureSpec::default, |s| s.0)
}

/// Tolerances and subdivision budget for adaptive quadrature.
#[pyclass(name = "QuadratureSpec", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Spec(QuadratureSpec);

#[pymethods]
impl Spec {
    #[new]
    #[pyo3(signature = (abs_tol=None, rel_tol=None, max_subdivisions=None))]
    fn new(abs_tol: Option<f64>, rel_tol: Option<f64>, max_subdivisions: Option<usize>) -> PyResult<Self> {
        let d = QuadratureSpec::default();
        QuadratureSpec::new(
            abs_tol.unwrap_or(d.abs_tol()),
            rel_tol.unwrap_or(d.rel_tol()),
            max_subdivisions.unwrap_or(d.max_subdivisions()),
        )
        .map(Spec)
        .map_err(to_py)
    }

    #[getter]
    fn abs_tol(&self) -> f64 {
        self.0.abs_tol()
    }

    #[getter]
    fn rel_tol(&self) -> f64 {
        self.0.rel_tol()
    }

    #[getter]
    fn max_subdivisions(&self) -> usize {
        self.0.max_subdivisions()
    }

    fn __repr__(&self) -> String {
        format!(
            "QuadratureSpec(abs_tol={:e}, rel_tol={:e}, max_subdivisions={})",
            self.0.abs_tol(),
            self.0.rel_tol(),
            self.0.max_subdivisions()
        )
    }
}

#[pyclass(name = "QuadratureResult", frozen, get_all)]
struct PyQuadratureResult {
    value: f64,
    error_estimate: f64,
    evaluations: usize,
    converged: bool,
}

impl From<zetamix::quadrature::QuadratureResult> for PyQuadratureResult {
    fn from(r: zetamix::quadrature::QuadratureResult) -> Self {
        Self {
            value: r.value,
            error_estimate: r.error_estimate,
            evaluations: r.evaluations,
            converged: r.converged,
        }
    }
}

#[pymethods]
impl PyQuadratureResult {
    fn __repr__(&self) -> String {
        format!(
            "QuadratureResult(value={}, error_estimate={:e}, evaluations={}, converged={})",
            self.value, self.error_estimate, self.evaluations, self.converged
        )
    }

    fn __float__(&self) -> f64 {
        self.value
    }
}

/// Zeta law on `{0, 1, ...}` with mass proportional to `(x+1)^-s`.
#[pyclass(name = "Zeta", frozen)]
struct Zeta(ZetaParams);

#[pymethods]
impl Zeta {
    #[new]
    fn new(s: f64) -> PyResult<Self> {
        ZetaParams::new(s).map(Zeta).map_err(to_py)
    }

    #[getter]
    fn s(&self) -> f64 {
        self.0.s()
    }

    fn normalizer(&self) -> f64 {
        self.0.normalizer()
    }

    fn pmf(&self, x: u64) -> f64 {
        self.0.pmf(x)
    }

    fn ln_pmf(&self, x: u64) -> f64 {
        self.0.ln_pmf(x)
    }

    /// `P(X >= x)`.
    fn tail_mass(&self, x: u64) -> f64 {
        self.0.tail_mass(x)
    }

    fn truncation_point(&self, eps: f64) -> PyResult<u64> {
        self.0.truncation_point(eps).map_err(to_py)
    }

    /// Draws `n` values through `chain` ("direct", "geometric" or "poisson").
    #[pyo3(signature = (n, seed, chain="direct", stream=0))]
    fn sample(&self, n: usize, seed: u64, chain: &str, stream: u64) -> PyResult<Vec<u64>> {
        sample(chain, self.0.s(), n, seed, stream)
    }

    fn __repr__(&self) -> String {
        format!("Zeta(s={})", self.0.s())
    }
}

/// Mixing density of a Negative Binomial or Poisson kernel that yields the
/// Zeta law.
#[pyclass(name = "MixingDensity", frozen)]
struct MixingDensity(MixingDensityKind);

#[pymethods]
impl MixingDensity {
    /// Density over `p` for Negative Binomial shape `r`.
    #[staticmethod]
    fn for_shape(r: f64, s: f64) -> PyResult<Self> {
        MixingDensityKind::for_shape(r, s).map(MixingDensity).map_err(to_py)
    }

    /// Density over `gamma = 1/p` for the geometric kernel.
    #[staticmethod]
    fn gamma_transform(s: f64) -> PyResult<Self> {
        let kind = MixingDensityKind::GammaTransform { s };
        kind.validate().map_err(to_py)?;
        Ok(MixingDensity(kind))
    }

    /// Density over the Poisson rate `lambda`.
    #[staticmethod]
    fn lambda_mixing(s: f64) -> PyResult<Self> {
        let kind = MixingDensityKind::LambdaMixing { s };
        kind.validate().map_err(to_py)?;
        Ok(MixingDensity(kind))
    }

    #[getter]
    fn s(&self) -> f64 {
        self.0.s()
    }

    #[getter]
    fn r(&self) -> Option<f64> {
        self.0.r()
    }

    /// True for the `r < 1` form, which takes negative values.
    #[getter]
    fn signed(&self) -> bool {
        self.0.is_signed()
    }

    #[pyo3(signature = (point, spec=None))]
    fn __call__(&self, point: f64, spec: Option<&Spec>) -> PyResult<f64> {
        self.0.evaluate(point, &spec_or_default(spec)).map_err(to_py)
    }

    /// Integral over the whole support.
    #[pyo3(signature = (spec=None))]
    fn normalization(&self, spec: Option<&Spec>) -> PyResult<PyQuadratureResult> {
        mixing::normalization(&self.0, &spec_or_default(spec)).map(Into::into).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("MixingDensity({:?})", self.0)
    }
}

#[pyclass(name = "SignChange", frozen, get_all)]
struct PySignChange {
    root: f64,
    brackets: Vec<(f64, f64)>,
}

#[pyclass(name = "FitSummary", frozen, get_all)]
struct PyFitSummary {
    n: u64,
    s: f64,
    tv_distance: f64,
    chi_square: f64,
    dof: u64,
    p_value: f64,
    truncation_point: u64,
}

#[pymethods]
impl PyFitSummary {
    fn __repr__(&self) -> String {
        format!(
            "FitSummary(n={}, tv_distance={:.3e}, chi_square={:.3}, dof={}, p_value={:.3})",
            self.n, self.tv_distance, self.chi_square, self.dof, self.p_value
        )
    }
}

#[pyfunction]
fn riemann_zeta(s: f64) -> PyResult<f64> {
    special::riemann_zeta(s).map_err(to_py)
}

/// `sum_{k >= n+1} k^-s`, the tail of the Riemann series past `n`.
#[pyfunction]
fn hurwitz_zeta(s: f64, n: u64) -> PyResult<f64> {
    special::hurwitz_zeta(s, n).map_err(to_py)
}

#[pyfunction]
fn log_gamma(z: f64) -> PyResult<f64> {
    special::log_gamma(z).map_err(to_py)
}

#[pyfunction]
fn nb_pmf(x: u64, r: f64, p: f64) -> PyResult<f64> {
    NbParams::new(r, p).map(|nb| nb.pmf(x)).map_err(to_py)
}

#[pyfunction]
fn poisson_pmf(x: u64, lam: f64) -> PyResult<f64> {
    zetamix::distributions::poisson_pmf(x, lam).map_err(to_py)
}

#[pyfunction]
fn yule_pmf(x: u64, b: f64) -> PyResult<f64> {
    YuleParams::new(b).map(|y| y.pmf(x)).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (x, r, s, spec=None))]
fn nb_mixture_pmf(x: u64, r: f64, s: f64, spec: Option<&Spec>) -> PyResult<PyQuadratureResult> {
    mixture::nb_mixture_pmf(x, r, s, &spec_or_default(spec)).map(Into::into).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (x, s, spec=None))]
fn poisson_mixture_pmf(x: u64, s: f64, spec: Option<&Spec>) -> PyResult<PyQuadratureResult> {
    mixture::poisson_mixture_pmf(x, s, &spec_or_default(spec)).map(Into::into).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (x, r, p, spec=None))]
fn gamma_poisson_pmf(x: u64, r: f64, p: f64, spec: Option<&Spec>) -> PyResult<PyQuadratureResult> {
    mixture::gamma_poisson_pmf(x, r, p, &spec_or_default(spec)).map(Into::into).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (x, b, spec=None))]
fn yule_mixture_pmf(x: u64, b: f64, spec: Option<&Spec>) -> PyResult<PyQuadratureResult> {
    mixture::yule_mixture_pmf(x, b, &spec_or_default(spec)).map(Into::into).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (lam, r, s, spec=None))]
fn lambda_mixing_pdf_via_r(lam: f64, r: f64, s: f64, spec: Option<&Spec>) -> PyResult<f64> {
    mixing::lambda_mixing_pdf_via_r(lam, r, s, &spec_or_default(spec)).map_err(to_py)
}

/// Locates where the `r < 1` density turns from negative to positive.
#[pyfunction]
#[pyo3(signature = (r, s, spec=None))]
fn find_sign_change(r: f64, s: f64, spec: Option<&Spec>) -> PyResult<PySignChange> {
    let sc = mixing::find_sign_change(r, s, &spec_or_default(spec)).map_err(to_py)?;
    Ok(PySignChange {
        root: sc.root,
        brackets: sc.brackets,
    })
}

#[pyfunction]
#[pyo3(signature = (chain, s, n, seed, stream=0))]
fn sample(chain: &str, s: f64, n: usize, seed: u64, stream: u64) -> PyResult<Vec<u64>> {
    let chain: Chain = chain.parse().map_err(|e: Error| PyValueError::new_err(e.to_string()))?;
    SampleBatch::draw(chain, s, n, SeededStream::new(seed, stream))
        .map(|b| b.counts)
        .map_err(to_py)
}

/// Draws `p` from the geometric-kernel mixing density.
#[pyfunction]
#[pyo3(signature = (s, n, seed, stream=0))]
fn sample_mixing_p(s: f64, n: usize, seed: u64, stream: u64) -> PyResult<Vec<f64>> {
    sampling::sample_mixing_p_r1(s, n, SeededStream::new(seed, stream)).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (samples, s, eps=1e-6))]
fn fit_against_zeta(samples: Vec<u64>, s: f64, eps: f64) -> PyResult<PyFitSummary> {
    let f = sampling::fit_against_zeta(&samples, s, eps).map_err(to_py)?;
    Ok(PyFitSummary {
        n: f.n,
        s: f.s,
        tv_distance: f.tv_distance,
        chi_square: f.chi_square,
        dof: f.dof,
        p_value: f.p_value,
        truncation_point: f.truncation_point,
    })
}

/// Runs the identity grid and returns the JSON report. `config` is the text
/// of a grid file; the default grid is used when it is omitted.
#[pyfunction]
#[pyo3(signature = (config=None))]
fn verify(py: Python<'_>, config: Option<&str>) -> PyResult<String> {
    let grid = match config {
        Some(text) => verification::GridConfig::parse(text).map_err(to_py)?,
        None => verification::GridConfig::default(),
    };
    let report = py.detach(|| verification::run_verification_grid(&grid)).map_err(to_py)?;
    Ok(report.to_json())
}

#[pymodule]
fn zetamix_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("QuadratureError", m.py().get_type::<QuadratureError>())?;
    m.add_class::<Spec>()?;
    m.add_class::<PyQuadratureResult>()?;
    m.add_class::<Zeta>()?;
    m.add_class::<MixingDensity>()?;
    m.add_class::<PySignChange>()?;
    m.add_class::<PyFitSummary>()?;
    m.add_function(wrap_pyfunction!(riemann_zeta, m)?)?;
    m.add_function(wrap_pyfunction!(hurwitz_zeta, m)?)?;
    m.add_function(wrap_pyfunction!(log_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(nb_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(yule_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(nb_mixture_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_mixture_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_poisson_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(yule_mixture_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_mixing_pdf_via_r, m)?)?;
    m.add_function(wrap_pyfunction!(find_sign_change, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(sample_mixing_p, m)?)?;
    m.add_function(wrap_pyfunction!(fit_against_zeta, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
