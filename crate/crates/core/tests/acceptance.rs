//! Acceptance suite: every criterion at its stated tolerance, one PASS/FAIL
//! line each. Exits nonzero when any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use zetamix::distributions::{NbParams, YuleParams, ZetaParams};
use zetamix::mixing::{
    lambda_mixing_pdf, lambda_mixing_pdf_via_r, mgf_r1_quadrature, mgf_series, mgf_series_harmonic,
    mgf_series_hurwitz, mixing_pdf_r2_closed, mixing_pdf_r_gt1, mixing_quasi_pdf_r_lt1, moment_r1,
    moment_r1_closed, normalization, MixingDensityKind,
};
use zetamix::mixture::{gamma_poisson_pmf, nb_mixture_pmf, poisson_mixture_pmf, random_r_mixture_pmf, yule_mixture_pmf};
use zetamix::quadrature::QuadratureSpec;
use zetamix::sampling::{fit_against_zeta, Chain, SampleBatch, SeededStream};
use zetamix::special::{generalized_harmonic, hurwitz_zeta, riemann_zeta};
use zetamix::verification::default_priors;
use zetamix::Result;

const S3: [f64; 3] = [1.5, 2.0, 3.0];

/// Running maximum of an error with the worst location.
#[derive(Default)]
struct Worst {
    err: f64,
    at: String,
    fails: Vec<String>,
}

impl Worst {
    fn see(&mut self, err: f64, tol: f64, at: impl FnOnce() -> String) {
        let at = at();
        if !(err <= tol) {
            self.fails.push(format!("{at}: {err:.3e}"));
        }
        if err > self.err || err.is_nan() {
            self.err = err;
            self.at = at;
        }
    }

    fn ok(&self) -> bool {
        self.fails.is_empty()
    }

    fn summary(&self) -> String {
        let mut out = format!("max err {:.3e} at {}", self.err, self.at);
        if !self.fails.is_empty() {
            let shown: Vec<_> = self.fails.iter().take(6).cloned().collect();
            out += &format!("; {} over tolerance: {}", self.fails.len(), shown.join(", "));
        }
        out
    }
}

fn zeta_pmf(x: u64, s: f64) -> f64 {
    ZetaParams::new(s).unwrap().pmf(x)
}

fn c1(spec: &QuadratureSpec) -> Result<(bool, String)> {
    let mut w = Worst::default();
    for s in S3 {
        for x in 0..=20 {
            let v = nb_mixture_pmf(x, 1.0, s, spec)?.value;
            w.see((v - zeta_pmf(x, s)).abs(), 1e-8, || format!("x={x} s={s}"));
        }
    }
    Ok((w.ok(), w.summary()))
}

fn c2(spec: &QuadratureSpec) -> Result<(bool, String)> {
    let mut w = Worst::default();
    for r in [1.5, 2.0, 2.5, 3.7] {
        for s in S3 {
            for x in 0..=20 {
                let v = nb_mixture_pmf(x, r, s, spec)?.value;
                w.see((v - zeta_pmf(x, s)).abs(), 1e-6, || format!("x={x} r={r} s={s}"));
            }
        }
    }
    Ok((w.ok(), w.summary()))
}

fn c3(spec: &QuadratureSpec) -> Result<(bool, String)> {
    let mut w = Worst::default();
    let mut positive = Vec::new();
    let mut norm = Worst::default();
    for r in [0.25, 0.5, 0.75] {
        for s in S3 {
            for x in 0..=10 {
                let v = nb_mixture_pmf(x, r, s, spec)?.value;
                w.see((v - zeta_pmf(x, s)).abs(), 1e-5, || format!("x={x} r={r} s={s}"));
            }
            let at = mixing_quasi_pdf_r_lt1(1e-3, r, s, spec)?;
            if !(at < 0.0) {
                positive.push(format!("(r={r}, s={s}) -> {at:.4}"));
            }
            let total = normalization(&MixingDensityKind::RLt1Quasi { r, s }, spec)?.value;
            norm.see((total - 1.0).abs(), 1e-6, || format!("r={r} s={s}"));
        }
    }
    let mut msg = format!("pmf {}; normalization {}", w.summary(), norm.summary());
    if positive.is_empty() {
        msg += "; negative at p=1e-3 for all nine pairs";
    } else {
        msg += &format!("; not negative at p=1e-3: {}", positive.join(", "));
    }
    Ok((w.ok() && norm.ok() && positive.is_empty(), msg))
}

fn c4(spec: &QuadratureSpec) -> Result<(bool, String)> {
    let mut w = Worst::default();
    for s in S3 {
        for p in [0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99] {
            let a = mixing_pdf_r_gt1(p, 2.0, s, spec)?;
            let b = mixing_pdf_r2_closed(p, s)?;
            w.see((a - b).abs(), 1e-9, || format!("p={p} s={s}"));
        }
    }
    Ok((w.ok(), w.summary()))
}

fn c5(spec: &QuadratureSpec) -> Result<(bool, String)> {
    let mut w = Worst::default();
    for s in S3 {
        for x in 0..=10 {
            let q = moment_r1(x, s, spec)?.value;
            w.see((q - moment_r1_closed(x, s)?).abs(), 1e-8, || format!("x={x} s={s}"));
        }
    }
    Ok((w.ok(), w.summary()))
}

fn c6(spec: &QuadratureSpec) -> Result<(bool, String)> {
    let mut w = Worst::default();
    for t in [0.5, 1.0, 2.0] {
        let (series, terms) = mgf_series(t, 2.0, 1e-14)?;
        let quad = mgf_r1_quadrature(t, 2.0, spec)?.value;
        w.see((series - quad).abs(), 1e-8, || format!("t={t} ({terms} terms)"));
    }
    let mut forms = Worst::default();
    for t in [0.5, 1.0, 2.0] {
        let a = mgf_series_harmonic(t, 2.0, 60)?;
        let b = mgf_series_hurwitz(t, 2.0, 60)?;
        forms.see((a - b).abs(), 1e-10, || format!("t={t}"));
    }
    Ok((w.ok() && forms.ok(), format!("quadrature {}; series forms {}", w.summary(), forms.summary())))
}

fn c7(spec: &QuadratureSpec) -> Result<(bool, String)> {
    let mut w = Worst::default();
    for r in [0.5, 1.0, 2.0] {
        for p in [0.3, 0.5, 0.7] {
            let nb = NbParams::new(r, p)?;
            for x in 0..=15 {
                let v = gamma_poisson_pmf(x, r, p, spec)?.value;
                w.see((v - nb.pmf(x)).abs(), 1e-9, || format!("x={x} r={r} p={p}"));
            }
        }
    }
    Ok((w.ok(), w.summary()))
}

fn c8(spec: &QuadratureSpec) -> Result<(bool, String)> {
    let mut w = Worst::default();
    for s in [1.5, 2.0] {
        for lambda in [0.1, 0.5, 1.0, 5.0] {
            let direct = lambda_mixing_pdf(lambda, s, spec)?;
            for r in [1.0, 2.0, 3.0] {
                let via = lambda_mixing_pdf_via_r(lambda, r, s, spec)?;
                w.see((via - direct).abs(), 1e-5, || format!("lambda={lambda} r={r} s={s}"));
            }
        }
    }
    Ok((w.ok(), w.summary()))
}

fn c9(spec: &QuadratureSpec) -> Result<(bool, String)> {
    let mut w = Worst::default();
    for s in [1.5, 2.0] {
        for x in 0..=10 {
            let v = poisson_mixture_pmf(x, s, spec)?.value;
            w.see((v - zeta_pmf(x, s)).abs(), 1e-5, || format!("x={x} s={s}"));
        }
    }
    Ok((w.ok(), w.summary()))
}

fn c10(spec: &QuadratureSpec) -> Result<(bool, String)> {
    let priors = default_priors();
    let mut w = Worst::default();
    for x in 0..=10 {
        let vals = priors
            .iter()
            .map(|p| random_r_mixture_pmf(x, 2.0, p, spec).map(|r| r.value))
            .collect::<Result<Vec<_>>>()?;
        for i in 0..vals.len() {
            for j in i + 1..vals.len() {
                w.see((vals[i] - vals[j]).abs(), 2e-7, || format!("x={x} priors {i},{j}"));
            }
        }
    }
    Ok((w.ok(), w.summary()))
}

fn c11(spec: &QuadratureSpec) -> Result<(bool, String)> {
    let mut w = Worst::default();
    let mut ratios = Worst::default();
    for b in [0.5, 1.0, 2.5] {
        let yule = YuleParams::new(b)?;
        for x in 0..=15 {
            let v = yule_mixture_pmf(x, b, spec)?.value;
            w.see((v - yule.pmf(x)).abs(), 1e-9, || format!("x={x} b={b}"));
        }
        let ratio = yule.pmf(0) / yule.pmf(1);
        ratios.see((ratio - (b + 2.0)).abs(), 1e-12, || format!("yule b={b}"));
    }
    for s in S3 {
        let z = ZetaParams::new(s)?;
        ratios.see((z.pmf(0) / z.pmf(1) - 2f64.powf(s)).abs(), 1e-12, || format!("zeta s={s}"));
    }
    for (r, p) in [(0.5, 0.3), (1.0, 0.5), (2.5, 0.4), (3.7, 0.7)] {
        let nb = NbParams::new(r, p)?;
        ratios.see((nb.pmf(0) / nb.pmf(1) - 1.0 / (r * p)).abs(), 1e-12, || format!("nb r={r} p={p}"));
    }
    Ok((w.ok() && ratios.ok(), format!("mixture {}; ratios {}", w.summary(), ratios.summary())))
}

fn c12() -> Result<(bool, String)> {
    let mut ci = Worst::default();
    let mut scheduled = Worst::default();
    for (k, s) in S3.into_iter().enumerate() {
        for chain in Chain::ALL {
            for (n, tol, w) in [(100_000, 0.015, &mut ci), (1_000_000, 0.005, &mut scheduled)] {
                let stream = SeededStream::new(20_240 + k as u64, chain as u64);
                let batch = SampleBatch::draw(chain, s, n, stream)?;
                let fit = fit_against_zeta(&batch.counts, s, 1e-6)?;
                w.see(fit.tv_distance, tol, || format!("{chain} s={s} n={n}"));
            }
        }
    }
    Ok((
        ci.ok() && scheduled.ok(),
        format!("n=1e5 tv {}; n=1e6 tv {}", ci.summary(), scheduled.summary()),
    ))
}

fn c13() -> Result<(bool, String)> {
    let pi = std::f64::consts::PI;
    let mut w = Worst::default();
    w.see((riemann_zeta(2.0)? - pi * pi / 6.0).abs(), 1e-12, || "zeta(2)".into());
    w.see((riemann_zeta(4.0)? - pi.powi(4) / 90.0).abs(), 1e-12, || "zeta(4)".into());
    for s in S3 {
        let zeta = riemann_zeta(s)?;
        for n in 0..=100 {
            let split = generalized_harmonic(n, s)? + hurwitz_zeta(s, n)?;
            w.see((split - zeta).abs(), 1e-11, || format!("n={n} s={s}"));
        }
    }
    Ok((w.ok(), w.summary()))
}

fn main() -> ExitCode {
    let spec = QuadratureSpec::default();
    type Check<'a> = Box<dyn Fn() -> Result<(bool, String)> + 'a>;
    let criteria: Vec<(&str, Check)> = vec![
        ("1 geometric kernel mixture", Box::new(|| c1(&spec))),
        ("2 r > 1 mixture", Box::new(|| c2(&spec))),
        ("3 signed r < 1 mixture", Box::new(|| c3(&spec))),
        ("4 r = 2 closed form", Box::new(|| c4(&spec))),
        ("5 moment system", Box::new(|| c5(&spec))),
        ("6 mgf series", Box::new(|| c6(&spec))),
        ("7 gamma-poisson", Box::new(|| c7(&spec))),
        ("8 lambda density r-invariance", Box::new(|| c8(&spec))),
        ("9 poisson mixture", Box::new(|| c9(&spec))),
        ("10 r-prior invariance", Box::new(|| c10(&spec))),
        ("11 yule mixture and pmf ratios", Box::new(|| c11(&spec))),
        ("12 sampling chains", Box::new(c12)),
        ("13 special functions", Box::new(c13)),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let start = Instant::now();
        let (ok, msg) = match check() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        let secs = start.elapsed().as_secs_f64();
        if !ok {
            failed += 1;
        }
        println!("{} criterion {name}: {msg} ({secs:.2} s)", if ok { "PASS" } else { "FAIL" });
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
