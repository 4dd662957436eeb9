use nalgebra::{Matrix3, Rotation3, Vector2, Vector3};
use proptest::prelude::*;
use spinrecon::experiment::fixtures::{constant_motion, dt_config, pb_config, unit_motion};
use spinrecon::experiment::verify::reference_phantom;
use spinrecon::forward::measure_grid;
use spinrecon::forward::{measure, AnalyticJets, Backend, JetOrder, JetProvider, KGrid, MeasurementSet};
use spinrecon::numerics::fornberg_weights;
use spinrecon::phantom::{balance_weights, generate_asymmetric_pointset, moment_residual, Placement, Spectral};
use spinrecon::recovery::{dt_equation_residual, pb_equation_residual, rho_sign_continuation, SolverConfig};
use spinrecon::so3::{
    angular_velocity, from_cylindrical, hat, is_rotation, project_to_rotation, sigma_conjugate, to_cylindrical, vee,
};

fn vec3(r: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-r..r).prop_map(Vector3::from)
}

fn rotation() -> impl Strategy<Value = Matrix3<f64>> {
    vec3(3.0).prop_map(|v| Rotation3::from_scaled_axis(v).into_inner())
}

proptest! {
    #[test]
    fn vee_inverts_hat(w in vec3(10.0)) {
        prop_assert_eq!(vee(&hat(&w)), w);
    }

    #[test]
    fn angular_velocity_round_trip(r in rotation(), w in vec3(5.0)) {
        let back = angular_velocity(&r, &(r * hat(&w))).unwrap();
        prop_assert!((back - w).norm() <= 1e-12 * w.norm().max(1.0));
    }

    #[test]
    fn cylindrical_round_trip(x in vec3(100.0)) {
        let c = to_cylindrical(&x);
        prop_assert!((0.0..std::f64::consts::PI).contains(&c.phi));
        let back = from_cylindrical(&c).unwrap();
        prop_assert!((back - x).norm() <= 1e-12 * x.norm().max(1.0));
    }

    #[test]
    fn sigma_conjugation_is_an_involution(r in rotation()) {
        let s = sigma_conjugate(&r);
        prop_assert!(is_rotation(&s, 1e-12));
        prop_assert_eq!(sigma_conjugate(&s), r);
    }

    #[test]
    fn projection_returns_the_nearest_rotation(r in rotation(), e in prop::array::uniform9(-1e-3..1e-3f64)) {
        let m = r + Matrix3::from_row_slice(&e);
        let p = project_to_rotation(&m);
        prop_assert!(is_rotation(&p, 1e-12));
        prop_assert!((p - r).norm() <= 1e-2);
        prop_assert!((project_to_rotation(&r) - r).norm() <= 1e-12);
    }

    #[test]
    fn fornberg_weights_are_exact_on_polynomials(x0 in -1.0..1.0f64, c in prop::array::uniform5(-2.0..2.0f64)) {
        let nodes = [-1.0, -0.4, 0.1, 0.7, 1.2];
        let w = fornberg_weights(x0, &nodes, 2);
        let p = |x: f64| c[0] + c[1] * x + c[2] * x * x + c[3] * x.powi(3) + c[4] * x.powi(4);
        let dp = c[1] + 2.0 * c[2] * x0 + 3.0 * c[3] * x0 * x0 + 4.0 * c[4] * x0.powi(3);
        let approx: f64 = w[1].iter().zip(nodes).map(|(w, x)| w * p(x)).sum();
        prop_assert!((approx - dp).abs() <= 1e-10);
    }

    #[test]
    fn continuation_recovers_signed_radius(a in 0.3..2.0f64, b in -0.25..0.25f64, f in 0.5..3.0f64) {
        let t: Vec<f64> = (0..101).map(|i| i as f64 * 0.01).collect();
        let rho: Vec<f64> = t.iter().map(|t| a + b * a * (f * t).sin()).collect();
        let drho: Vec<f64> = t.iter().map(|t| b * a * f * (f * t).cos()).collect();
        let x1: Vec<f64> = rho.iter().map(|r| r * r).collect();
        let x2: Vec<f64> = rho.iter().zip(&drho).map(|(r, d)| d / r).collect();
        let out = rho_sign_continuation(&t, &x1, &x2).unwrap();
        for (o, r) in out.iter().zip(&rho) {
            prop_assert!((o - r).abs() <= 1e-12 * r.abs());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_sets_balance(seed in 0u64..10_000) {
        let p = generate_asymmetric_pointset(8, seed, Placement::Ball { radius: 0.5 }).unwrap();
        let w = balance_weights(&p).unwrap();
        prop_assert!(w.iter().all(|&x| x != 0.0));
        prop_assert!(moment_residual(&p, &w) <= 1e-12);
    }

    #[test]
    fn transform_is_hermitian(seed in 0u64..200, k in vec3(12.0)) {
        let ph = reference_phantom(seed).unwrap();
        let a = ph.spectral(&k, 0).value;
        let b = ph.spectral(&-k, 0).value;
        prop_assert!((a - b.conj()).norm() <= 1e-12 * ph.weights.iter().map(|w| w.abs()).sum::<f64>());
    }

    #[test]
    fn pb_data_are_hermitian(seed in 0u64..200, r in rotation(), k in prop::array::uniform2(-8.0..8.0f64)) {
        let ph = reference_phantom(seed).unwrap();
        let cfg = pb_config(Backend::Analytic);
        let k = Vector2::from(k);
        let a = measure(&ph, &r, &cfg, &k).unwrap();
        let b = measure(&ph, &r, &cfg, &-k).unwrap();
        prop_assert!((a - b.conj()).norm() <= 1e-12 * ph.weights.iter().map(|w| w.abs()).sum::<f64>());
    }

    #[test]
    fn dt_origin_is_stationary(seed in 0u64..200, w in vec3(2.0)) {
        let ph = reference_phantom(seed).unwrap();
        let m = unit_motion(constant_motion(w), 40).unwrap();
        let jets = AnalyticJets::new(&ph, &m, dt_config(Backend::Analytic)).unwrap();
        let f0 = ph.spectral(&Vector3::zeros(), 0).value;
        for i in (0..41).step_by(10) {
            let j = jets.jet(i, &Vector2::zeros(), JetOrder::First).unwrap();
            prop_assert!((j.value - f0).norm() <= 1e-12);
            prop_assert!(j.dt.norm() <= 1e-12);
        }
    }

    #[test]
    fn true_velocity_solves_both_line_equations(seed in 0u64..200, w in vec3(2.0)) {
        let ph = reference_phantom(seed).unwrap();
        let m = unit_motion(constant_motion(w), 40).unwrap();
        let cfg = SolverConfig::analytic();
        let dt = AnalyticJets::new(&ph, &m, dt_config(Backend::Analytic)).unwrap();
        let pb = AnalyticJets::new(&ph, &m, pb_config(Backend::Analytic)).unwrap();
        for i in (0..41).step_by(10) {
            prop_assert!(dt_equation_residual(&dt, i, &w, &cfg).unwrap() <= 1e-10);
            prop_assert!(pb_equation_residual(&pb, i, &w, &cfg).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn measurement_files_detect_payload_corruption(seed in 0u64..50, pos in 0usize..1000, bit in 0u8..8) {
        let ph = reference_phantom(seed).unwrap();
        let m = unit_motion(constant_motion(Vector3::new(0.3, 0.1, 1.0)), 12).unwrap();
        let ms = measure_grid(&ph, &m, &pb_config(Backend::Analytic), KGrid { n: 8, extent: 4.0 }).unwrap();
        let mut bytes = ms.to_bytes();
        prop_assert_eq!(MeasurementSet::from_bytes(&bytes).unwrap(), ms.clone());
        let payload = ms.values.len() * 16;
        let at = bytes.len() - payload + pos % payload;
        bytes[at] ^= 1 << bit;
        prop_assert!(MeasurementSet::from_bytes(&bytes).is_err());
    }
}
