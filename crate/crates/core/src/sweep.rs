//! Direction and frame sweeps over the sphere.

use nalgebra::Vector3;

/// `n` nearly uniform unit vectors on a Fibonacci lattice.
pub fn fibonacci_sphere(n: usize) -> Vec<Vector3<f64>> {
    let golden = std::f64::consts::PI * (1.0 + 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let th = golden * (i as f64 + 0.5);
            Vector3::new(r * th.cos(), r * th.sin(), z)
        })
        .collect()
}

/// Unit vector orthogonal to `xi`, rotated by `angle` within `xi^⊥`.
pub fn orthogonal_unit(xi: &Vector3<f64>, angle: f64) -> Vector3<f64> {
    let helper = if xi.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let a = xi.cross(&helper).normalize();
    let b = xi.cross(&a);
    a * angle.cos() + b * angle.sin()
}

/// Orthonormal frames `(ξ, η)` from a Fibonacci sweep of `ξ` with `n_rot`
/// in-plane rotations of `η`.
pub fn frame_sweep(n_dirs: usize, n_rot: usize) -> Vec<(Vector3<f64>, Vector3<f64>)> {
    let mut out = Vec::with_capacity(n_dirs * n_rot);
    for xi in fibonacci_sphere(n_dirs) {
        for k in 0..n_rot {
            let a = std::f64::consts::PI * k as f64 / n_rot as f64;
            out.push((xi, orthogonal_unit(&xi, a)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_is_unit_and_balanced() {
        let pts = fibonacci_sphere(1000);
        assert!(pts.iter().all(|p| (p.norm() - 1.0).abs() < 1e-12));
        let c: Vector3<f64> = pts.iter().sum::<Vector3<f64>>() / 1000.0;
        assert!(c.norm() < 1e-2);
    }

    #[test]
    fn frames_are_orthonormal() {
        for (xi, eta) in frame_sweep(20, 3) {
            assert!(xi.dot(&eta).abs() < 1e-12 && (eta.norm() - 1.0).abs() < 1e-12);
        }
    }
}
