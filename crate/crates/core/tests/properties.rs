use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;
use worm_szego::config::RunConfig;
use worm_szego::geometry::{SheetId, WormParams};
use worm_szego::strip::{log_nu, KernelEvaluator, StripPoint};

fn beta() -> impl Strategy<Value = f64> {
    (0.55 * PI)..(2.0 * PI)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn log_nu_is_finite(b in beta(), xi in -30.0f64..30.0, j in -40i64..40) {
        let p = WormParams::new(b).unwrap();
        prop_assert!(log_nu(xi, j, &p).is_finite());
    }

    #[test]
    fn kj_is_hermitian(b in beta(), a in -3.0f64..3.0, c in -3.0f64..3.0, s in -0.9f64..0.9, t in -0.9f64..0.9, j in -6i64..6) {
        let p = WormParams::new(b).unwrap();
        let h = p.half_width();
        let z = StripPoint::new(Complex64::new(a, s * h), &p).unwrap();
        let w = StripPoint::new(Complex64::new(c, t * h), &p).unwrap();
        let ev = KernelEvaluator::new(p);
        let kzw = ev.k_j(z, w, j).value();
        let kwz = ev.k_j(w, z, j).value();
        prop_assert!((kzw - kwz.conj()).norm() <= 1e-9 * kzw.norm().max(1e-300));
    }

    #[test]
    fn kj_diagonal_is_positive(b in beta(), a in -3.0f64..3.0, s in -0.9f64..0.9, j in -6i64..6) {
        let p = WormParams::new(b).unwrap();
        let z = StripPoint::new(Complex64::new(a, s * p.half_width()), &p).unwrap();
        let v = KernelEvaluator::new(p).k_j(z, z, j).value();
        prop_assert!(v.re > 0.0);
        prop_assert!(v.im.abs() <= 1e-10 * v.re);
    }

    #[test]
    fn sheet_labels_and_intervals_are_consistent(b in beta(), label in 1usize..=4) {
        let p = WormParams::new(b).unwrap();
        let s = SheetId::from_label(label).unwrap();
        prop_assert_eq!(s.label(), label);
        let (lo, hi) = p.interval(s);
        prop_assert!(hi > lo);
        prop_assert!(p.contains(s, 0.5 * (lo + hi)));
        prop_assert!(!p.contains(s, hi));
    }

    #[test]
    fn config_round_trips_through_toml(b in beta(), seed in any::<u64>(), n_x in 1usize..2048, l in 0.5f64..100.0) {
        let cfg = RunConfig { beta: b, seed, n_x, l, ..RunConfig::default() };
        let text = toml::to_string(&cfg).unwrap();
        prop_assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }
}
