//! Finite point sets whose blob superpositions are asymmetric under both
//! measurement models, together with certificates and a brute-force oracle.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Admissibility, Error, Result};
use crate::sweep::fibonacci_sphere;

/// Relative threshold for "nonzero" determinants, scaled by `diameter^degree`.
pub const DET_TOL: f64 = 1e-10;
/// Threshold on `|sin|` of the angle between projections.
pub const PARALLEL_TOL: f64 = 1e-10;
/// Margin over [`DET_TOL`] required by the generator.
const GENERATION_MARGIN: f64 = 1e3;
/// Maximum number of random draws in [`generate_asymmetric_pointset`].
pub const DRAW_BUDGET: usize = 1_000_000;
/// Directions on which shell cap coverage is checked.
pub const COVERAGE_GRID: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointSet {
    pub points: Vec<Vector3<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Dt,
    Pb,
}

/// Outcome of a determinant certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub passed: bool,
    /// First violating index tuple, if any.
    pub violation: Option<Vec<usize>>,
    /// Smallest `|det| / tolerance` seen across both conditions.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Placement {
    /// Uniform in the ball of the given radius.
    Ball { radius: f64 },
    /// On the sphere of radius `radius`, covering every cap of height `cap`.
    Shell { radius: f64, cap: f64 },
}

impl PointSet {
    pub fn new(points: Vec<Vector3<f64>>) -> Self {
        PointSet { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, p) in self.points.iter().enumerate() {
            for q in &self.points[i + 1..] {
                d = d.max((p - q).norm());
            }
        }
        d
    }

    /// True if some point lies in every cap `{x : ⟨x,u⟩ > r − ε}` for `u` on
    /// the check grid.
    pub fn covers_caps(&self, radius: f64, cap: f64, grid: &[Vector3<f64>]) -> bool {
        grid.iter().all(|u| self.points.iter().any(|p| p.dot(u) > radius - cap))
    }
}

fn det3(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> f64 {
    Matrix3::from_columns(&[*a, *b, *c]).determinant()
}

/// Scans all determinant conditions; `only` restricts to tuples containing
/// that index; `tol3` and `tol6` are the degree-3 and degree-6 thresholds.
/// Returns `(min |det|/tol, first violation)`.
fn scan_dt(points: &[Vector3<f64>], only: Option<usize>, tol3: f64, tol6: f64) -> (f64, Option<Vec<usize>>) {
    let n = points.len();
    let mut margin = f64::INFINITY;
    let keep = |idx: &[usize]| only.is_none_or(|m| idx.contains(&m));
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if !keep(&[i, j, k]) {
                    continue;
                }
                let d = det3(&points[i], &points[j], &points[k]).abs() / tol3;
                margin = margin.min(d);
                if d <= 1.0 {
                    return (margin, Some(vec![i, j, k]));
                }
            }
        }
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let cross: Vec<Vector3<f64>> = pairs.iter().map(|&(i, j)| points[i].cross(&points[j])).collect();
    let disjoint = |a: (usize, usize), b: (usize, usize)| a.0 != b.0 && a.0 != b.1 && a.1 != b.0 && a.1 != b.1;
    for a in 0..pairs.len() {
        for b in a + 1..pairs.len() {
            if !disjoint(pairs[a], pairs[b]) {
                continue;
            }
            for c in b + 1..pairs.len() {
                if !disjoint(pairs[a], pairs[c]) || !disjoint(pairs[b], pairs[c]) {
                    continue;
                }
                let idx = [pairs[a].0, pairs[a].1, pairs[b].0, pairs[b].1, pairs[c].0, pairs[c].1];
                if !keep(&idx) {
                    continue;
                }
                let d = det3(&cross[a], &cross[b], &cross[c]).abs() / tol6;
                margin = margin.min(d);
                if d <= 1.0 {
                    return (margin, Some(idx.to_vec()));
                }
            }
        }
    }
    (margin, None)
}

fn scan_pb(points: &[Vector3<f64>], only: Option<usize>, tol3: f64) -> (f64, Option<Vec<usize>>) {
    let n = points.len();
    let mut margin = f64::INFINITY;
    let keep = |idx: &[usize]| only.is_none_or(|m| idx.contains(&m));
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if !keep(&[i, j, k]) {
                    continue;
                }
                let d = det3(&points[i], &points[j], &points[k]).abs() / tol3;
                margin = margin.min(d);
                if d <= 1.0 {
                    return (margin, Some(vec![i, j, k]));
                }
            }
        }
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let diff: Vec<Vector3<f64>> = pairs.iter().map(|&(i, j)| points[i] - points[j]).collect();
    for a in 0..pairs.len() {
        for b in a + 1..pairs.len() {
            for c in b + 1..pairs.len() {
                let mut idx = vec![pairs[a].0, pairs[a].1, pairs[b].0, pairs[b].1, pairs[c].0, pairs[c].1];
                if !keep(&idx) {
                    continue;
                }
                let mut distinct = idx.clone();
                distinct.sort_unstable();
                distinct.dedup();
                if distinct.len() < 4 {
                    continue;
                }
                let d = det3(&diff[a], &diff[b], &diff[c]).abs() / tol3;
                margin = margin.min(d);
                if d <= 1.0 {
                    idx.truncate(6);
                    return (margin, Some(idx));
                }
            }
        }
    }
    (margin, None)
}

fn certificate(margin: f64, violation: Option<Vec<usize>>) -> Certificate {
    Certificate {
        passed: violation.is_none(),
        violation,
        margin,
    }
}

/// Determinant certificate for DT asymmetry (needs at least 8 points).
pub fn dt_pointset_certificate(p: &PointSet) -> Result<Certificate> {
    if p.len() < 8 {
        return Err(Error::not_admissible(
            Admissibility::TooFewPoints,
            format!("DT needs 8 points, got {}", p.len()),
        ));
    }
    let d = p.diameter();
    let (m, v) = scan_dt(&p.points, None, DET_TOL * d.powi(3), DET_TOL * d.powi(6));
    Ok(certificate(m, v))
}

/// Determinant certificate for PB asymmetry (needs at least 7 points).
pub fn pb_pointset_certificate(p: &PointSet) -> Result<Certificate> {
    if p.len() < 7 {
        return Err(Error::not_admissible(
            Admissibility::TooFewPoints,
            format!("PB needs 7 points, got {}", p.len()),
        ));
    }
    let d = p.diameter();
    let (m, v) = scan_pb(&p.points, None, DET_TOL * d.powi(3));
    Ok(certificate(m, v))
}

/// Brute-force search for two points satisfying the asymmetry definition
/// in direction `xi`.
pub fn pointset_direction_witness(p: &PointSet, xi: &Vector3<f64>, model: ModelKind) -> Result<Option<(usize, usize)>> {
    if (xi.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("witness direction must be a unit vector"));
    }
    let pts = &p.points;
    let scale = p.diameter().max(f64::MIN_POSITIVE);
    let good: Vec<usize> = match model {
        ModelKind::Dt => {
            let proj: Vec<Vector3<f64>> = pts.iter().map(|q| q - xi * q.dot(xi)).collect();
            (0..pts.len())
                .filter(|&j| {
                    let pj = proj[j];
                    let nj = pj.norm();
                    if nj <= DET_TOL * scale || pts[j].dot(xi).abs() <= DET_TOL * scale {
                        return false;
                    }
                    (0..pts.len()).filter(|&l| l != j).all(|l| {
                        let nl = proj[l].norm();
                        nl <= DET_TOL * scale || pj.cross(&proj[l]).norm() / (nj * nl) >= PARALLEL_TOL
                    })
                })
                .collect()
        }
        ModelKind::Pb => (0..pts.len())
            .filter(|&j| {
                (0..pts.len())
                    .filter(|&l| l != j)
                    .all(|l| (pts[j] - pts[l]).dot(xi).abs() > DET_TOL * scale)
            })
            .collect(),
    };
    for (a, &i) in good.iter().enumerate() {
        for &j in &good[a + 1..] {
            match model {
                ModelKind::Dt => return Ok(Some((i, j))),
                ModelKind::Pb => {
                    let d = det3(xi, &pts[i], &pts[j]).abs();
                    if d > DET_TOL * pts[i].norm() * pts[j].norm() {
                        return Ok(Some((i, j)));
                    }
                }
            }
        }
    }
    Ok(None)
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n: f64 = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Seeded construction of a point set passing both certificates. Shell
/// placement keeps adding points past `n` until every cap is covered.
pub fn generate_asymmetric_pointset(n: usize, seed: u64, placement: Placement) -> Result<PointSet> {
    if n < 8 {
        return Err(Error::invalid(format!("need at least 8 points, got {n}")));
    }
    let (radius, cap) = match placement {
        Placement::Ball { radius } => (radius, None),
        Placement::Shell { radius, cap } => {
            if !(cap > 0.0 && cap < radius) {
                return Err(Error::invalid("cap height must lie in (0, radius)"));
            }
            (radius, Some(cap))
        }
    };
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid("placement radius must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 2.0 * radius;
    let tol3 = GENERATION_MARGIN * DET_TOL * scale.powi(3);
    let tol6 = GENERATION_MARGIN * DET_TOL * scale.powi(6);
    let grid = fibonacci_sphere(COVERAGE_GRID);
    // Spacing of the check grid, used to shrink caps so grid coverage is robust.
    let jitter = 0.5 * (4.0 / COVERAGE_GRID as f64).sqrt();
    let mut pts: Vec<Vector3<f64>> = Vec::new();
    let mut draws = 0usize;
    loop {
        let covered = match cap {
            None => true,
            Some(c) => PointSet::new(pts.clone()).covers_caps(radius, 0.9 * c, &grid),
        };
        if pts.len() >= n && covered {
            break;
        }
        let candidate = loop {
            draws += 1;
            if draws > DRAW_BUDGET {
                return Err(Error::BudgetExhausted(DRAW_BUDGET));
            }
            let c = match cap {
                None => {
                    let u: f64 = rng.random();
                    random_unit(&mut rng) * radius * u.cbrt()
                }
                Some(_) if pts.is_empty() => random_unit(&mut rng) * radius,
                Some(_) => {
                    let far = grid
                        .iter()
                        .max_by(|a, b| {
                            let fa = pts.iter().map(|p| p.dot(a)).fold(f64::MIN, f64::max);
                            let fb = pts.iter().map(|p| p.dot(b)).fold(f64::MIN, f64::max);
                            fb.total_cmp(&fa)
                        })
                        .expect("grid");
                    (far + random_unit(&mut rng) * jitter).normalize() * radius
                }
            };
            if c.norm() < 1e-3 * radius {
                continue;
            }
            let mut trial = pts.clone();
            trial.push(c);
            let last = trial.len() - 1;
            if scan_dt(&trial, Some(last), tol3, tol6).1.is_none() && scan_pb(&trial, Some(last), tol3).1.is_none() {
                break c;
            }
        };
        pts.push(candidate);
    }
    Ok(PointSet::new(pts))
}

/// Nonzero weights with `Σ w_j p_j = 0` and `max |w_j| = 1`, built by the
/// inductive construction over consecutive point quadruples.
pub fn balance_weights(p: &PointSet) -> Result<Vec<f64>> {
    let pts = &p.points;
    if pts.len() < 4 {
        return Err(Error::InsufficientData("balancing needs at least 4 points".into()));
    }
    let solve = |a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>, rhs: &Vector3<f64>| -> Result<Vector3<f64>> {
        let m = Matrix3::from_columns(&[*a, *b, *c]);
        let scale = a.norm() * b.norm() * c.norm();
        if m.determinant().abs() <= DET_TOL * scale {
            return Err(Error::not_admissible(
                Admissibility::DtCertificate,
                "three consecutive points are linearly dependent",
            ));
        }
        m.lu().solve(rhs).ok_or_else(|| Error::invalid("singular point triple"))
    };
    let a = solve(&pts[0], &pts[1], &pts[2], &pts[3])?;
    let mut w = vec![a.x, a.y, a.z, -1.0];
    for n in 4..pts.len() {
        let c = solve(&pts[n - 3], &pts[n - 2], &pts[n - 1], &pts[n])?;
        let wmax = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut best = (f64::NEG_INFINITY, 0.0);
        for k in -6..=6 {
            for sign in [-1.0, 1.0] {
                let lambda = sign * wmax * 2f64.powi(k);
                let coeffs = [
                    w[n - 3] - lambda * c.x,
                    w[n - 2] - lambda * c.y,
                    w[n - 1] - lambda * c.z,
                    lambda,
                ];
                let lo = coeffs.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
                let hi = coeffs.iter().fold(wmax, |m, x| m.max(x.abs()));
                let score = lo / hi;
                if score > best.0 {
                    best = (score, lambda);
                }
            }
        }
        let lambda = best.1;
        w[n - 3] -= lambda * c.x;
        w[n - 2] -= lambda * c.y;
        w[n - 1] -= lambda * c.z;
        w.push(lambda);
    }
    let wmax = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(w.into_iter().map(|x| x / wmax).collect())
}

/// `‖Σ w_j p_j‖`.
pub fn moment_residual(p: &PointSet, w: &[f64]) -> f64 {
    p.points
        .iter()
        .zip(w)
        .fold(Vector3::zeros(), |acc, (q, wi)| acc + q * *wi)
        .norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_basis_plus_diagonal() -> PointSet {
        PointSet::new(vec![
            Vector3::x(),
            Vector3::y(),
            Vector3::z(),
            Vector3::new(1.0, 1.0, 1.0),
        ])
    }

    #[test]
    fn balance_base_case() {
        let w = balance_weights(&unit_basis_plus_diagonal()).unwrap();
        for (a, b) in w.iter().zip([1.0, 1.0, 1.0, -1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn balance_recursive_case_keeps_weights_nonzero() {
        let mut p = unit_basis_plus_diagonal();
        p.points.push(Vector3::new(0.3, -0.7, 0.2));
        let w = balance_weights(&p).unwrap();
        assert!(moment_residual(&p, &w) < 1e-14);
        let max = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!((max - 1.0).abs() < 1e-15);
        assert!(w.iter().all(|x| x.abs() >= 1e-6));
    }

    #[test]
    fn coplanar_triple_fails_dt_certificate() {
        let mut pts = generate_asymmetric_pointset(8, 3, Placement::Ball { radius: 0.7 })
            .unwrap()
            .points;
        pts[2] = 0.4 * pts[0] - 0.9 * pts[1];
        let c = dt_pointset_certificate(&PointSet::new(pts)).unwrap();
        assert!(!c.passed);
        let v = c.violation.unwrap();
        assert_eq!(&v[..3], &[0, 1, 2]);
    }

    #[test]
    fn too_few_points() {
        let p = PointSet::new(vec![Vector3::x(); 6]);
        assert!(matches!(
            dt_pointset_certificate(&p),
            Err(Error::NotAdmissible {
                kind: Admissibility::TooFewPoints,
                ..
            })
        ));
        assert!(matches!(
            generate_asymmetric_pointset(7, 1, Placement::Ball { radius: 1.0 }),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn symmetric_set_has_no_pb_witness_along_axis() {
        let p = PointSet::new(vec![
            Vector3::x(),
            -Vector3::x(),
            Vector3::y(),
            -Vector3::y(),
            Vector3::z(),
            -Vector3::z(),
            Vector3::new(0.5, 0.5, 0.0),
            Vector3::new(-0.5, 0.2, 0.0),
        ]);
        assert_eq!(
            pointset_direction_witness(&p, &Vector3::z(), ModelKind::Pb).unwrap(),
            None
        );
    }

    #[test]
    fn witness_excludes_point_parallel_to_direction() {
        let p = generate_asymmetric_pointset(8, 5, Placement::Ball { radius: 0.7 }).unwrap();
        let xi = p.points[3].normalize();
        let (i, j) = pointset_direction_witness(&p, &xi, ModelKind::Dt).unwrap().unwrap();
        assert!(i != 3 && j != 3);
    }
}
