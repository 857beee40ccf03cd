use hevi::numkit::CompensatedSum;
use hevi::stability::{amplification_factors, BoussinesqParams, Scheme};
use hevi::thermo::PhysConstants;
use proptest::prelude::*;

proptest! {
    #[test]
    fn exner_derivative_matches_difference(theta_d in 50.0f64..500.0) {
        let c = PhysConstants::default();
        let h = 1e-4 * theta_d;
        let fd = (c.exner_point(theta_d + h) - c.exner_point(theta_d - h)) / (2.0 * h);
        prop_assert!((fd - c.exner_derivative(theta_d)).abs() < 1e-7 * fd.abs());
    }

    #[test]
    fn internal_energy_derivative_is_exner(theta_d in 50.0f64..500.0) {
        let c = PhysConstants::default();
        let h = 1e-4 * theta_d;
        let fd = (c.internal_energy_density(theta_d + h) - c.internal_energy_density(theta_d - h)) / (2.0 * h);
        prop_assert!((fd - c.exner_point(theta_d)).abs() < 1e-7 * fd.abs());
    }

    #[test]
    fn exner_forms_agree(theta_d in 50.0f64..500.0) {
        let c = PhysConstants::default();
        let p = c.p0 * (c.r * theta_d / c.p0).powf(c.cp / c.cv);
        prop_assert!((c.exner_of_pressure(p) - c.exner_point(theta_d)).abs() < 1e-12 * c.cp);
    }

    #[test]
    fn compensated_sum_is_order_independent(xs in prop::collection::vec(-1e12f64..1e12, 1..200)) {
        let a: CompensatedSum = xs.iter().copied().collect();
        let b: CompensatedSum = xs.iter().rev().copied().collect();
        let scale = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!((a.value() - b.value()).abs() <= 4.0 * f64::EPSILON * scale);
    }

    #[test]
    fn crank_nicolson_is_neutral(k in -0.5f64..0.5, l in -0.5f64..0.5, dt in 0.01f64..5.0, n in 0.0f64..0.05) {
        let p = BoussinesqParams { c: 340.0, n, dt, k, l };
        let r = amplification_factors(Scheme::CrankNicolson, &p).unwrap();
        for m in &r.moduli {
            prop_assert!((m - 1.0).abs() < 1e-11, "{m}");
        }
    }

    #[test]
    fn new_scheme_gravity_modes_are_neutral(k in -0.5f64..0.5, l in 0.001f64..0.5, dt in 0.01f64..1.0) {
        let p = BoussinesqParams { c: 340.0, n: 0.01, dt, k, l };
        let r = amplification_factors(Scheme::HeviNew, &p).unwrap();
        prop_assert!((r.gravity_modulus() - 1.0).abs() < 1e-11, "{}", r.gravity_modulus());
    }
}
