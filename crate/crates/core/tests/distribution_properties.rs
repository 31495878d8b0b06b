use proptest::prelude::*;
use zetamix::distributions::{poisson_pmf, poisson_truncation_point, NbParams, YuleParams, ZetaParams};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zeta_mass_plus_tail_bound_is_one(s in 1.5f64..6.0, eps in 1e-8f64..1e-3) {
        let z = ZetaParams::new(s).unwrap();
        let cut = z.truncation_point(eps).unwrap().min(200_000);
        let head: f64 = (0..=cut).map(|x| z.pmf(x)).sum();
        // ∫_{X+1}^∞ u^{-s} du / ζ(s) bounds the tail beyond X
        let bound = (cut as f64 + 1.0).powf(1.0 - s) / ((s - 1.0) * z.normalizer());
        prop_assert!(head + bound >= 1.0 - 1e-6);
        prop_assert!(head <= 1.0 + 1e-12);
    }

    #[test]
    fn zeta_origin_ratio(s in 1.01f64..20.0) {
        let z = ZetaParams::new(s).unwrap();
        let ratio = z.pmf(0) / z.pmf(1);
        prop_assert!((ratio - 2f64.powf(s)).abs() <= 1e-12 * 2f64.powf(s).max(1.0));
    }

    #[test]
    fn nb_origin_ratio_and_geometric_case(r in 0.05f64..20.0, p in 0.01f64..0.99, x in 0u64..200) {
        let nb = NbParams::new(r, p).unwrap();
        let ratio = nb.pmf(0) / nb.pmf(1);
        prop_assert!((ratio - 1.0 / (r * p)).abs() <= 1e-12 * (1.0 / (r * p)).max(1.0));
        let geo = NbParams::new(1.0, p).unwrap();
        let expect = p.powi(x as i32) * (1.0 - p);
        prop_assert!((geo.pmf(x) - expect).abs() <= 1e-13 * expect.max(1e-300) + 1e-300);
    }

    #[test]
    fn nb_mass_sums_to_one(r in 0.2f64..10.0, p in 0.05f64..0.9) {
        let nb = NbParams::new(r, p).unwrap();
        let cut = nb.truncation_point(1e-10).unwrap();
        let total: f64 = (0..=cut).map(|x| nb.pmf(x)).sum();
        prop_assert!((total - 1.0).abs() < 1e-8, "{}", total);
    }

    #[test]
    fn poisson_mass_sums_to_one(lambda in 0.01f64..200.0) {
        let cut = poisson_truncation_point(lambda, 1e-12).unwrap();
        let total: f64 = (0..=cut).map(|x| poisson_pmf(x, lambda).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-10, "{}", total);
    }

    #[test]
    fn yule_ratio_and_tail(b in 0.1f64..10.0, x in 0u64..1000) {
        let y = YuleParams::new(b).unwrap();
        prop_assert!((y.pmf(0) / y.pmf(1) - (b + 2.0)).abs() <= 1e-12 * (b + 2.0));
        let split = y.tail_mass(x) + (0..=x).map(|k| y.pmf(k)).sum::<f64>();
        prop_assert!((split - 1.0).abs() < 1e-10);
    }

    #[test]
    fn masses_are_positive(s in 1.01f64..10.0, r in 0.01f64..50.0, p in 0.001f64..0.999, x in 0u64..1_000_000) {
        prop_assert!(ZetaParams::new(s).unwrap().pmf(x) > 0.0);
        let nb = NbParams::new(r, p).unwrap().pmf(x.min(5000));
        prop_assert!(nb >= 0.0 && nb.is_finite());
        prop_assert!(YuleParams::new(r).unwrap().pmf(x) > 0.0);
    }
}
