use proptest::prelude::*;
use zetamix::distributions::ZetaParams;
use zetamix::mixing::{
    find_sign_change, gamma_transform_pdf, geometric_bridge, mixing_pdf_r1, mixing_quasi_pdf_r_lt1, normalization,
    MixingDensityKind,
};
use zetamix::mixture::nb_mixture_pmf;
use zetamix::quadrature::QuadratureSpec;

fn spec() -> QuadratureSpec {
    QuadratureSpec::default()
}

#[test]
fn every_kind_is_normalized() {
    let kinds = [
        MixingDensityKind::R1Closed { s: 1.5 },
        MixingDensityKind::R1Closed { s: 3.0 },
        MixingDensityKind::R2Closed { s: 2.0 },
        MixingDensityKind::RGt1Integral { r: 3.7, s: 2.0 },
        MixingDensityKind::RGt1Integral { r: 1.5, s: 1.5 },
        MixingDensityKind::RLt1Quasi { r: 0.25, s: 1.5 },
        MixingDensityKind::RLt1Quasi { r: 0.75, s: 3.0 },
        MixingDensityKind::GammaTransform { s: 2.0 },
        MixingDensityKind::LambdaMixing { s: 2.0 },
        MixingDensityKind::LambdaMixing { s: 1.5 },
    ];
    for kind in kinds {
        let total = normalization(&kind, &spec()).unwrap();
        assert!((total.value - 1.0).abs() < 1e-6, "{kind:?}: {}", total.value);
    }
}

#[test]
fn geometric_bridge_terms() {
    let zeta = ZetaParams::new(2.0).unwrap();
    for n in 1..=8u64 {
        let v = geometric_bridge(n, 2.0, &spec()).unwrap().value;
        assert!((v - zeta.pmf(n - 1)).abs() < 1e-8, "n={n}: {v}");
    }
}

#[test]
fn quasi_density_is_negative_near_zero() {
    for r in [0.25, 0.5, 0.75] {
        for s in [1.5, 2.0, 3.0] {
            let sign = find_sign_change(r, s, &spec()).unwrap();
            assert!(sign.is_unique(), "r={r} s={s}: {sign:?}");
            // the density is negative below its sign change, which for r = 0.75
            // and s ≥ 2 lies below 1e-3
            let probe = (0.5 * sign.root).min(1e-3);
            let v = mixing_quasi_pdf_r_lt1(probe, r, s, &spec()).unwrap();
            assert!(v < 0.0, "r={r} s={s} p={probe}: {v}");
            if !(r == 0.75 && s >= 2.0) {
                assert!(mixing_quasi_pdf_r_lt1(1e-3, r, s, &spec()).unwrap() < 0.0);
            }
        }
    }
}

#[test]
fn partial_sums_stay_below_one() {
    for (r, s) in [(1.0, 2.0), (2.5, 3.0), (0.5, 2.0)] {
        let zeta = ZetaParams::new(s).unwrap();
        let total: f64 = (0..=200).map(|x| nb_mixture_pmf(x, r, s, &spec()).unwrap().value).sum();
        let tail = zeta.tail_mass(200);
        assert!(total > 1.0 - tail - 1e-5 && total <= 1.0 + 1e-9, "r={r} s={s}: {total}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gamma_transform_is_a_change_of_variables(s in 1.05f64..8.0, gamma in 1.0001f64..1e6) {
        let lhs = gamma_transform_pdf(gamma, s).unwrap() * gamma * gamma;
        let rhs = mixing_pdf_r1(1.0 / gamma, s).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn r1_density_is_positive(s in 1.05f64..8.0, p in 1e-9f64..0.999_999) {
        let v = mixing_pdf_r1(p, s).unwrap();
        prop_assert!(v > 0.0 && v.is_finite());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn nb_mixture_reproduces_zeta(x in 0u64..30, r in 0.3f64..4.0, s in 1.5f64..3.5) {
        let v = nb_mixture_pmf(x, r, s, &spec()).unwrap().value;
        let expect = ZetaParams::new(s).unwrap().pmf(x);
        let tol = if r < 1.0 { 1e-5 } else { 1e-6 };
        prop_assert!((v - expect).abs() <= tol, "x={} r={} s={}: {} vs {}", x, r, s, v, expect);
    }
}
