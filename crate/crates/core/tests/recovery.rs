use nalgebra::Vector3;
use spinrecon::experiment::fixtures::{constant_motion, dt_config, pb_config, smooth_motion, unit_motion};
use spinrecon::experiment::verify::reference_phantom;
use spinrecon::forward::{add_noise, measure_grid, AnalyticJets, Backend, KGrid, SampledJets};
use spinrecon::recovery::{
    first_order_state, pb_first_order_step, recover_trajectory, truth_cylindrical, Ambiguity, Branch, SolverConfig,
};
use spinrecon::so3::sigma_velocity;

#[test]
fn dt_recovers_smooth_motion_on_short_grid() {
    let ph = reference_phantom(3).unwrap();
    let m = unit_motion(smooth_motion(), 30).unwrap();
    let jets = AnalyticJets::new(&ph, &m, dt_config(Backend::Analytic)).unwrap();
    let res = recover_trajectory(&jets, &SolverConfig::analytic(), Some(&m.trajectory)).unwrap();
    assert!(res.is_unique());
    assert!(res.max_omega_error(&m.trajectory) <= 1e-9);
    assert_eq!(res.branch, Some(Branch::Direct));
    assert!(res.equivalence_distance.unwrap() <= 1e-9);
}

#[test]
fn pb_recovers_a_member_of_the_sigma_class() {
    let ph = reference_phantom(4).unwrap();
    let m = unit_motion(smooth_motion(), 60).unwrap();
    let jets = AnalyticJets::new(&ph, &m, pb_config(Backend::Analytic)).unwrap();
    let res = recover_trajectory(&jets, &SolverConfig::analytic(), Some(&m.trajectory)).unwrap();
    assert!(res.is_unique(), "{:?}", res.flagged);
    // ρ' enters through five-point differences of φ on a 1/60 grid.
    assert!(res.max_branch_omega_error(&m.trajectory) <= 1e-4);
    assert!(res.equivalence_distance.unwrap() <= 1e-6);
}

#[test]
fn pb_first_order_matches_truth_azimuth_and_spin() {
    let ph = reference_phantom(7).unwrap();
    let m = unit_motion(smooth_motion(), 40).unwrap();
    let jets = AnalyticJets::new(&ph, &m, pb_config(Backend::Analytic)).unwrap();
    let cfg = SolverConfig::analytic();
    let first: Vec<_> = (0..=40).map(|i| pb_first_order_step(&jets, i, &cfg).unwrap()).collect();
    let tr = &m.trajectory;
    for i in [0, 1, 20, 39, 40] {
        let (c, [_, phi_dot, zeta_dot]) = truth_cylindrical(&tr.omega[i], &tr.omega_dot[i]);
        let st = first_order_state(m.times(), &first, i, &cfg).unwrap();
        let dphi = (st.phi - c.phi).rem_euclid(std::f64::consts::PI);
        assert!(dphi.min(std::f64::consts::PI - dphi) <= 1e-10, "step {i}");
        assert!((st.zeta - c.zeta).abs() <= 1e-10);
        // Five-point derivatives on a 0.025 grid.
        assert!((st.phi_dot - phi_dot).abs() <= 1e-4, "step {i}");
        assert!((st.zeta_dot - zeta_dot).abs() <= 1e-6, "step {i}");
    }
}

#[test]
fn sigma_branch_is_reported_for_conjugated_truth() {
    let ph = reference_phantom(7).unwrap();
    let m = unit_motion(smooth_motion(), 40).unwrap();
    let jets = AnalyticJets::new(&ph, &m, pb_config(Backend::Analytic)).unwrap();
    let conj = m.trajectory.sigma_conjugate();
    let res = recover_trajectory(&jets, &SolverConfig::analytic(), Some(&conj)).unwrap();
    // Whichever member was recovered, the matched branch flips with the reference.
    let direct = recover_trajectory(&jets, &SolverConfig::analytic(), Some(&m.trajectory)).unwrap();
    assert_ne!(res.branch, direct.branch);
    assert!((res.equivalence_distance.unwrap() - direct.equivalence_distance.unwrap()).abs() < 1e-12);
    let w = sigma_velocity(&Vector3::new(1.0, 2.0, 3.0));
    assert_eq!(w, Vector3::new(-1.0, -2.0, 3.0));
}

#[test]
fn spin_about_the_beam_axis_is_a_rho_zero_family() {
    let ph = reference_phantom(7).unwrap();
    let m = unit_motion(constant_motion(Vector3::new(0.0, 0.0, -0.7)), 12).unwrap();
    let jets = AnalyticJets::new(&ph, &m, pb_config(Backend::Analytic)).unwrap();
    let res = recover_trajectory(&jets, &SolverConfig::analytic(), None).unwrap();
    assert_eq!(res.flagged.len(), 13);
    assert!(res.trajectory.is_none());
    for e in &res.estimates {
        assert_eq!(e.ambiguity, Ambiguity::RhoZeroFamily);
        assert!((e.omega_hat.z + 0.7).abs() < 1e-12);
    }
}

#[test]
fn sampled_dt_jets_recover_motion() {
    let ph = reference_phantom(7).unwrap();
    let m = unit_motion(smooth_motion(), 100).unwrap();
    let cfg = dt_config(Backend::Analytic);
    let ms = measure_grid(&ph, &m, &cfg, KGrid { n: 96, extent: 9.9 }).unwrap();
    let res = recover_trajectory(
        &SampledJets::new(&ms, cfg).unwrap(),
        &SolverConfig::finite_difference(),
        None,
    )
    .unwrap();
    let clean = res.max_omega_error(&m.trajectory);
    assert!(clean <= 1e-3, "{clean}");
    let noisy = add_noise(&ms, 1e-5, 1).unwrap();
    let res = recover_trajectory(
        &SampledJets::new(&noisy, cfg).unwrap(),
        &SolverConfig::finite_difference(),
        None,
    )
    .unwrap();
    assert!(res.max_omega_error(&m.trajectory) >= clean);
}
