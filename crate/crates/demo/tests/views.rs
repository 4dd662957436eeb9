use spinrecon_demo::{measurement_image, profile_view, recovery_view};

#[test]
fn dt_recovery_matches_truth() {
    let v = recovery_view("dt", 8, 1, 40).unwrap();
    assert_eq!(v.times.len(), 41);
    assert!(v.ambiguity.iter().all(|a| *a == "unique"));
    assert!(v.max_error < 1e-6, "{}", v.max_error);
}

#[test]
fn pb_recovery_lands_on_a_branch() {
    let v = recovery_view("pb", 8, 2, 60).unwrap();
    assert!(v.branch.is_some());
    assert!(v.equivalence_distance.unwrap() < 1e-3);
}

#[test]
fn profile_minimum_sits_at_true_azimuth() {
    let v = profile_view("dt", 8, 1, 40, 20).unwrap();
    assert_eq!(v.phi.len(), v.residual.len());
    let (i, _) = v.residual.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let step = std::f64::consts::PI / v.phi.len() as f64;
    let d = (v.phi[i] - v.phi_true).rem_euclid(std::f64::consts::PI);
    assert!(
        d.min(std::f64::consts::PI - d) <= step,
        "{} vs {}",
        v.phi[i],
        v.phi_true
    );
}

#[test]
fn pb_image_is_point_symmetric() {
    let n = 21;
    let img = measurement_image("pb", 8, 3, 20, 5, n).unwrap();
    assert_eq!(img.len(), n * n);
    assert!(img.iter().any(|&v| v > 0.0));
    for i in 0..n * n {
        assert!((img[i] - img[n * n - 1 - i]).abs() <= 1e-12);
    }
}

#[test]
fn rejects_bad_inputs() {
    assert!(recovery_view("xray", 8, 1, 40).is_err());
    assert!(recovery_view("dt", 7, 1, 40).is_err());
    assert!(profile_view("dt", 8, 1, 40, 41).is_err());
    assert!(measurement_image("dt", 8, 1, 40, 0, 1).is_err());
}
