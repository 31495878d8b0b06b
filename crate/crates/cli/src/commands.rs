use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use zetamix::distributions::{nb_pmf, poisson_pmf, yule_pmf, zeta_pmf, NbParams, YuleParams, ZetaParams};
use zetamix::mixing::{gamma_transform_pdf, lambda_mixing_pdf, lambda_mixing_pdf_via_r, MixingDensityKind};
use zetamix::mixture::{gamma_poisson_pmf, nb_mixture_pmf, poisson_mixture_pmf, yule_mixture_pmf};
use zetamix::quadrature::QuadratureSpec;
use zetamix::sampling::{fit_against_zeta, fit_table, SampleBatch, SeededStream};
use zetamix::verification::{run_verification_grid, GridConfig, VerificationReport};

use crate::format::{g17, sink};
use crate::{EvalArgs, Format, Kind, OutputArgs, Params, QuadratureArgs, SampleArgs, TabulateArgs, VerifyArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Library(#[from] zetamix::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Library(zetamix::Error::NonConvergence { .. } | zetamix::Error::NonFiniteIntegrand { .. }) => 3,
            _ => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: Option<&Path>) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.map_or("stdout".into(), |p| p.display().to_string()),
        source,
    }
}

/// Where a kind is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    Count,
    P,
    Lambda,
    Gamma,
}

#[derive(Debug, Clone, Copy)]
enum Point {
    Count(u64),
    Real(f64),
}

impl Point {
    fn render(self) -> String {
        match self {
            Point::Count(x) => x.to_string(),
            Point::Real(v) => g17(v),
        }
    }
}

impl Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Point::Count(x) => s.serialize_u64(x),
            Point::Real(v) => s.serialize_f64(v),
        }
    }
}

fn axis(kind: Kind) -> Axis {
    match kind {
        Kind::ZetaPmf
        | Kind::NbPmf
        | Kind::PoissonPmf
        | Kind::YulePmf
        | Kind::NbMixture
        | Kind::PoissonMixture
        | Kind::GammaPoisson
        | Kind::YuleMixture => Axis::Count,
        Kind::MixingR1 | Kind::MixingR2 | Kind::MixingRGt1 | Kind::MixingQuasi => Axis::P,
        Kind::LambdaMixing | Kind::LambdaMixingViaR => Axis::Lambda,
        Kind::GammaTransform => Axis::Gamma,
    }
}

/// Parameters that stay fixed across the points of one call.
#[derive(Debug, Clone, Copy, Default)]
struct Fixed {
    s: Option<f64>,
    r: Option<f64>,
    b: Option<f64>,
    p: Option<f64>,
    lambda: Option<f64>,
}

fn need(value: Option<f64>, flag: &str, kind: Kind) -> Result<f64> {
    value.ok_or_else(|| CliError::Usage(format!("--{flag} is required for {}", kind_name(kind))))
}

fn kind_name(kind: Kind) -> String {
    use clap::ValueEnum;
    kind.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
}

/// Validates the parameters a kind needs before any point is evaluated.
fn check_params(kind: Kind, f: &Fixed) -> Result<()> {
    let s = || need(f.s, "s", kind);
    let r = || need(f.r, "r", kind);
    match kind {
        Kind::ZetaPmf | Kind::PoissonMixture | Kind::LambdaMixing | Kind::GammaTransform => {
            ZetaParams::new(s()?)?;
        }
        Kind::MixingR1 | Kind::MixingR2 => {
            MixingDensityKind::R1Closed { s: s()? }.validate()?;
        }
        Kind::MixingRGt1 => MixingDensityKind::RGt1Integral { r: r()?, s: s()? }.validate()?,
        Kind::MixingQuasi => MixingDensityKind::RLt1Quasi { r: r()?, s: s()? }.validate()?,
        Kind::NbMixture => {
            MixingDensityKind::for_shape(r()?, s()?)?;
        }
        Kind::LambdaMixingViaR => {
            MixingDensityKind::for_shape(r()?, s()?)?;
            if r()? < 1.0 {
                return Err(zetamix::Error::Domain {
                    name: "r",
                    value: r()?,
                    constraint: "r >= 1",
                }
                .into());
            }
        }
        Kind::NbPmf | Kind::GammaPoisson => {
            NbParams::new(r()?, need(f.p, "p", kind)?)?;
        }
        Kind::PoissonPmf => {
            poisson_pmf(0, need(f.lambda, "lambda", kind)?)?;
        }
        Kind::YulePmf | Kind::YuleMixture => {
            YuleParams::new(need(f.b, "b", kind)?)?;
        }
    }
    Ok(())
}

fn evaluate(kind: Kind, point: Point, f: &Fixed, spec: &QuadratureSpec) -> Result<f64> {
    let s = || need(f.s, "s", kind);
    let r = || need(f.r, "r", kind);
    let v = match (kind, point) {
        (Kind::ZetaPmf, Point::Count(x)) => zeta_pmf(x, &ZetaParams::new(s()?)?),
        (Kind::NbPmf, Point::Count(x)) => nb_pmf(x, &NbParams::new(r()?, need(f.p, "p", kind)?)?),
        (Kind::PoissonPmf, Point::Count(x)) => poisson_pmf(x, need(f.lambda, "lambda", kind)?)?,
        (Kind::YulePmf, Point::Count(x)) => yule_pmf(x, &YuleParams::new(need(f.b, "b", kind)?)?),
        (Kind::NbMixture, Point::Count(x)) => nb_mixture_pmf(x, r()?, s()?, spec)?.value,
        (Kind::PoissonMixture, Point::Count(x)) => poisson_mixture_pmf(x, s()?, spec)?.value,
        (Kind::GammaPoisson, Point::Count(x)) => gamma_poisson_pmf(x, r()?, need(f.p, "p", kind)?, spec)?.value,
        (Kind::YuleMixture, Point::Count(x)) => yule_mixture_pmf(x, need(f.b, "b", kind)?, spec)?.value,
        (Kind::MixingR1, Point::Real(p)) => MixingDensityKind::R1Closed { s: s()? }.evaluate(p, spec)?,
        (Kind::MixingR2, Point::Real(p)) => MixingDensityKind::R2Closed { s: s()? }.evaluate(p, spec)?,
        (Kind::MixingRGt1, Point::Real(p)) => MixingDensityKind::RGt1Integral { r: r()?, s: s()? }.evaluate(p, spec)?,
        (Kind::MixingQuasi, Point::Real(p)) => MixingDensityKind::RLt1Quasi { r: r()?, s: s()? }.evaluate(p, spec)?,
        (Kind::GammaTransform, Point::Real(g)) => gamma_transform_pdf(g, s()?)?,
        (Kind::LambdaMixing, Point::Real(l)) => lambda_mixing_pdf(l, s()?, spec)?,
        (Kind::LambdaMixingViaR, Point::Real(l)) => lambda_mixing_pdf_via_r(l, r()?, s()?, spec)?,
        _ => unreachable!("points follow the kind's axis"),
    };
    Ok(v)
}

fn quadrature_spec(q: &QuadratureArgs) -> Result<QuadratureSpec> {
    let d = QuadratureSpec::default();
    Ok(QuadratureSpec::new(
        q.abs_tol.unwrap_or(d.abs_tol()),
        q.rel_tol.unwrap_or(d.rel_tol()),
        q.max_subdivisions.unwrap_or(d.max_subdivisions()),
    )?)
}

fn base_fixed(params: &Params) -> Fixed {
    Fixed {
        s: params.s,
        r: params.r,
        b: params.b,
        ..Fixed::default()
    }
}

#[derive(Serialize)]
struct Row {
    point: Point,
    value: f64,
}

#[derive(Serialize)]
struct Table<'a> {
    kind: String,
    params: serde_json::Map<String, serde_json::Value>,
    rows: &'a [Row],
}

fn params_json(f: &Fixed) -> serde_json::Map<String, serde_json::Value> {
    let mut m = serde_json::Map::new();
    for (name, v) in [("s", f.s), ("r", f.r), ("b", f.b), ("p", f.p), ("lambda", f.lambda)] {
        if let Some(v) = v {
            m.insert(name.into(), serde_json::json!(v));
        }
    }
    m
}

fn write_rows(kind: Kind, fixed: &Fixed, rows: &[Row], out: &OutputArgs) -> Result<()> {
    let path = out.output.as_deref();
    let mut w = sink(path).map_err(io_err(path))?;
    match out.format {
        Format::Csv => {
            let mut csv = csv::Writer::from_writer(&mut w);
            let werr = |e: csv::Error| CliError::Io {
                path: path.map_or("stdout".into(), |p| p.display().to_string()),
                source: e.into(),
            };
            csv.write_record(["point", "value"]).map_err(werr)?;
            for row in rows {
                csv.write_record([row.point.render(), g17(row.value)]).map_err(werr)?;
            }
            csv.flush().map_err(io_err(path))?;
        }
        Format::Json => {
            let table = Table {
                kind: kind_name(kind),
                params: params_json(fixed),
                rows,
            };
            let text = serde_json::to_string_pretty(&table).expect("table serializes");
            writeln!(w, "{text}").map_err(io_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

fn run_points(kind: Kind, fixed: &Fixed, points: Vec<Point>, spec: &QuadratureSpec) -> Result<Vec<Row>> {
    check_params(kind, fixed)?;
    points
        .into_iter()
        .map(|point| {
            Ok(Row {
                point,
                value: evaluate(kind, point, fixed, spec)?,
            })
        })
        .collect()
}

fn single(values: &[f64], flag: &str, kind: Kind) -> Result<Option<f64>> {
    match values {
        [] => Ok(None),
        [v] => Ok(Some(*v)),
        _ => Err(CliError::Usage(format!("{} takes a single --{flag}", kind_name(kind)))),
    }
}

pub fn eval(args: &EvalArgs) -> Result<u8> {
    let kind = args.kind;
    let spec = quadrature_spec(&args.quadrature)?;
    let mut fixed = base_fixed(&args.params);
    let points: Vec<Point> = match axis(kind) {
        Axis::Count => {
            fixed.p = single(&args.p, "p", kind)?;
            fixed.lambda = single(&args.lambda, "lambda", kind)?;
            args.x.iter().map(|&x| Point::Count(x)).collect()
        }
        Axis::P => args.p.iter().map(|&v| Point::Real(v)).collect(),
        Axis::Lambda => args.lambda.iter().map(|&v| Point::Real(v)).collect(),
        Axis::Gamma => args.gamma.iter().map(|&v| Point::Real(v)).collect(),
    };
    if points.is_empty() {
        let flag = match axis(kind) {
            Axis::Count => "x",
            Axis::P => "p",
            Axis::Lambda => "lambda",
            Axis::Gamma => "gamma",
        };
        return Err(CliError::Usage(format!("{} needs at least one --{flag}", kind_name(kind))));
    }
    let rows = run_points(kind, &fixed, points, &spec)?;
    write_rows(kind, &fixed, &rows, &args.output)?;
    Ok(0)
}

pub fn tabulate(args: &TabulateArgs) -> Result<u8> {
    let kind = args.kind;
    let spec = quadrature_spec(&args.quadrature)?;
    let mut fixed = base_fixed(&args.params);
    fixed.p = args.p;
    fixed.lambda = args.lambda;
    let (from, to) = (args.from, args.to);
    if !(from.is_finite() && to.is_finite() && from <= to) {
        return Err(CliError::Usage(format!("grid needs finite --from <= --to, got {from} and {to}")));
    }
    let points: Vec<Point> = if axis(kind) == Axis::Count {
        if from < 0.0 || from.fract() != 0.0 || to.fract() != 0.0 {
            return Err(CliError::Usage("count grids need nonnegative integer bounds".into()));
        }
        (from as u64..=to as u64).map(Point::Count).collect()
    } else {
        if args.points == 0 {
            return Err(CliError::Usage("grid needs at least one point".into()));
        }
        if args.log && from <= 0.0 {
            return Err(CliError::Usage("a log grid needs --from > 0".into()));
        }
        let n = args.points;
        let at = |i: usize| {
            let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
            if args.log {
                10f64.powf(from.log10() + t * (to.log10() - from.log10()))
            } else {
                from + t * (to - from)
            }
        };
        (0..n).map(|i| Point::Real(at(i))).collect()
    };
    let rows = run_points(kind, &fixed, points, &spec)?;
    write_rows(kind, &fixed, &rows, &args.output)?;
    Ok(0)
}

pub fn verify(args: &VerifyArgs) -> Result<u8> {
    let grid = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io_err(Some(path)))?;
            GridConfig::parse(&text)?
        }
        None => GridConfig::default(),
    };
    let report = run_verification_grid(&grid)?;
    let path = args.output.as_deref();
    let mut w = sink(path).map_err(io_err(path))?;
    match args.format {
        Format::Json => writeln!(w, "{}", report.to_json()).map_err(io_err(path))?,
        Format::Csv => write_checks_csv(&mut w, &report).map_err(|e| CliError::Io {
            path: path.map_or("stdout".into(), |p| p.display().to_string()),
            source: e.into(),
        })?,
    }
    w.flush().map_err(io_err(path))?;
    let failed = report.failures().count();
    eprintln!("{} checks, {} failed", report.checks.len(), failed);
    for c in report.failures().take(20) {
        eprintln!(
            "  {} {:?} x={:?}: abs_err {:e}{}",
            c.identity,
            c.params,
            c.x,
            c.abs_err,
            if c.converged { "" } else { " (not converged)" }
        );
    }
    Ok(if failed == 0 { 0 } else { 1 })
}

fn write_checks_csv(w: &mut dyn Write, report: &VerificationReport) -> csv::Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record([
        "identity", "params", "x", "value", "expected", "abs_err", "rel_err",
        "abs_threshold", "rel_threshold", "passed", "converged", "evals",
    ])?;
    for c in &report.checks {
        let params: Vec<String> = c.params.iter().map(|(k, v)| format!("{k}={}", g17(*v))).collect();
        csv.write_record([
            c.identity.to_string(),
            params.join(";"),
            c.x.map(|x| x.to_string()).unwrap_or_default(),
            g17(c.value),
            g17(c.expected),
            g17(c.abs_err),
            g17(c.rel_err),
            g17(c.abs_threshold),
            g17(c.rel_threshold),
            c.passed.to_string(),
            c.converged.to_string(),
            c.evals.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

fn fit_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".fit.json");
    PathBuf::from(name)
}

pub fn sample(args: &SampleArgs) -> Result<u8> {
    let stream = SeededStream::new(args.seed, args.stream);
    let batch = SampleBatch::draw(args.chain.into(), args.s, args.n, stream)?;
    if !(args.eps > 0.0 && args.eps < 0.01) {
        return Err(zetamix::Error::Domain {
            name: "eps",
            value: args.eps,
            constraint: "0 < eps < 0.01",
        }
        .into());
    }
    let path = args.output.output.as_deref();
    let mut w = sink(path).map_err(io_err(path))?;
    match args.output.format {
        Format::Csv => {
            for x in &batch.counts {
                writeln!(w, "{x}").map_err(io_err(path))?;
            }
        }
        Format::Json => {
            let text = serde_json::to_string(&batch).expect("batch serializes");
            writeln!(w, "{text}").map_err(io_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))?;

    // the fit needs a reachable truncation point; very heavy tails (s near 1)
    // still sample but skip it
    let fit = match fit_against_zeta(&batch.counts, args.s, args.eps) {
        Ok(fit) => fit,
        Err(e) => {
            eprintln!("fit skipped: {e}");
            return Ok(0);
        }
    };
    let fit_json = serde_json::to_string_pretty(&fit).expect("fit serializes");
    match path {
        Some(p) => {
            let fp = fit_path(p);
            fs::write(&fp, format!("{fit_json}\n")).map_err(io_err(Some(&fp)))?;
        }
        None => eprintln!("{fit_json}"),
    }
    if let Some(table_path) = &args.fit_table {
        let rows = fit_table(&batch.counts, args.s, args.eps)?;
        let file = fs::File::create(table_path).map_err(io_err(Some(table_path)))?;
        let mut csv = csv::Writer::from_writer(file);
        let werr = |e: csv::Error| CliError::Io {
            path: table_path.display().to_string(),
            source: e.into(),
        };
        csv.write_record(["x", "count", "expected", "abs_err"]).map_err(werr)?;
        for r in rows {
            csv.write_record([r.x.to_string(), r.count.to_string(), g17(r.expected), g17(r.abs_err)])
                .map_err(werr)?;
        }
        csv.flush().map_err(io_err(Some(table_path)))?;
    }
    Ok(0)
}
