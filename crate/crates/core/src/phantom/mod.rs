//! Blob phantoms `Ψ(x) = Σ w_j ψ(x − p_j)` with closed-form spectral jets.

mod pointset;
mod profile;
mod voxel;

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Admissibility, Error, Result};
use crate::forward::dt_height;

pub use pointset::{
    balance_weights, dt_pointset_certificate, generate_asymmetric_pointset, moment_residual, pb_pointset_certificate,
    pointset_direction_witness, Certificate, ModelKind, Placement, PointSet, COVERAGE_GRID, DET_TOL, DRAW_BUDGET,
};
pub use profile::{reduced_bessel, BlobProfile, GAUSSIAN_CUTOFF};
pub use voxel::{moment_project, rasterize, VoxelGrid, VoxelHeader, BUMP_FRACTION};

pub const PHANTOM_FORMAT_VERSION: u32 = 1;

type C = Complex64;

/// `f̂` and its derivatives at one frequency. Entries above the requested
/// order are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralDerivatives {
    pub value: C,
    pub grad: Vector3<C>,
    pub hess: Matrix3<C>,
    /// `third[i][(j, k)] = ∂_i ∂_j ∂_k f̂`.
    pub third: [Matrix3<C>; 3],
}

impl Default for SpectralDerivatives {
    fn default() -> Self {
        SpectralDerivatives {
            value: C::new(0.0, 0.0),
            grad: Vector3::zeros(),
            hess: Matrix3::zeros(),
            third: [Matrix3::zeros(); 3],
        }
    }
}

impl SpectralDerivatives {
    pub fn d1(&self, u: &Vector3<f64>) -> C {
        (0..3).map(|i| self.grad[i] * u[i]).sum()
    }

    pub fn d2(&self, u: &Vector3<f64>, v: &Vector3<f64>) -> C {
        let mut s = C::new(0.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                s += self.hess[(i, j)] * (u[i] * v[j]);
            }
        }
        s
    }

    pub fn d3(&self, u: &Vector3<f64>, v: &Vector3<f64>, w: &Vector3<f64>) -> C {
        let mut s = C::new(0.0, 0.0);
        for i in 0..3 {
            if u[i] == 0.0 {
                continue;
            }
            for j in 0..3 {
                for k in 0..3 {
                    s += self.third[i][(j, k)] * (u[i] * v[j] * w[k]);
                }
            }
        }
        s
    }

    fn add_assign(&mut self, o: &SpectralDerivatives) {
        self.value += o.value;
        self.grad += o.grad;
        self.hess += o.hess;
        for i in 0..3 {
            self.third[i] += o.third[i];
        }
    }
}

/// Anything whose Fourier transform can be differentiated at arbitrary `κ`.
pub trait Spectral: Sync {
    /// `f̂` and derivatives up to `order` (at most 3).
    fn spectral(&self, kappa: &Vector3<f64>, order: usize) -> SpectralDerivatives;

    fn support_radius(&self) -> f64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phantom {
    pub points: PointSet,
    pub weights: Vec<f64>,
    pub profile: BlobProfile,
    pub support_radius: f64,
}

impl Phantom {
    /// Validates weights, first moments and support.
    pub fn new(points: PointSet, weights: Vec<f64>, profile: BlobProfile, support_radius: f64) -> Result<Self> {
        let ph = Phantom {
            points,
            weights,
            profile,
            support_radius,
        };
        ph.validate()?;
        Ok(ph)
    }

    /// Balances weights for `points` and builds the phantom.
    pub fn balanced(points: PointSet, profile: BlobProfile, support_radius: f64) -> Result<Self> {
        let w = balance_weights(&points)?;
        Phantom::new(points, w, profile, support_radius)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() || self.points.len() != self.weights.len() {
            return Err(Error::invalid("phantom needs matching, nonempty points and weights"));
        }
        if !self.profile.is_valid() || !(self.support_radius > 0.0) {
            return Err(Error::invalid("profile size and support radius must be positive"));
        }
        if let Some(j) = self.weights.iter().position(|w| *w == 0.0 || !w.is_finite()) {
            return Err(Error::not_admissible(
                Admissibility::ZeroWeight,
                format!("weight {j} is zero"),
            ));
        }
        let pmax = self.points.points.iter().map(|p| p.norm()).fold(0.0, f64::max);
        let wmax = self.weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        let moment = moment_residual(&self.points, &self.weights);
        if moment > 1e-10 * pmax.max(1e-300) * wmax {
            return Err(Error::not_admissible(
                Admissibility::NonzeroMoment,
                format!("first moment has norm {moment:.3e}"),
            ));
        }
        let reach = pmax + self.profile.extent();
        if reach >= self.support_radius {
            return Err(Error::SupportViolation(format!(
                "blobs reach radius {reach:.4} beyond support {}",
                self.support_radius
            )));
        }
        Ok(())
    }

    /// Spatial value `Ψ(x)`.
    pub fn eval(&self, x: &Vector3<f64>) -> f64 {
        self.points
            .points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * self.profile.spatial((x - p).norm()))
            .sum()
    }

    /// The phantom `x ↦ Ψ(Q x)` for a rotation `Q`.
    pub fn rotated(&self, q: &Matrix3<f64>) -> Phantom {
        let pts = self.points.points.iter().map(|p| q.transpose() * p).collect();
        Phantom {
            points: PointSet::new(pts),
            ..self.clone()
        }
    }

    /// The phantom `Ψ ∘ Σ`.
    pub fn sigma_reflected(&self) -> Phantom {
        let pts = self
            .points
            .points
            .iter()
            .map(|p| Vector3::new(p.x, p.y, -p.z))
            .collect();
        Phantom {
            points: PointSet::new(pts),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        let doc = PhantomDocument {
            format_version: PHANTOM_FORMAT_VERSION,
            phantom: self.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("phantom serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PhantomDocument = serde_json::from_str(text)
            .map_err(|e| Error::Schema(format!("phantom document line {} column {}: {e}", e.line(), e.column())))?;
        if doc.format_version != PHANTOM_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "phantom format version {} (expected {PHANTOM_FORMAT_VERSION})",
                doc.format_version
            )));
        }
        doc.phantom.validate()?;
        Ok(doc.phantom)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Phantom::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct PhantomDocument {
    format_version: u32,
    #[serde(flatten)]
    phantom: Phantom,
}

/// Closed-form spectral jet of a phantom.
pub fn spectral_eval(ph: &Phantom, kappa: &Vector3<f64>, order: usize) -> SpectralDerivatives {
    let order = order.min(3);
    let q = 0.5 * kappa.norm_squared();
    let g = ph.profile.radial_derivatives(q, order);
    let k = kappa;
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };

    // Radial factor ψ̂ and its derivatives (real).
    let psi = g[0];
    let psi1 = Vector3::from_fn(|i, _| g[1] * k[i]);
    let psi2 = Matrix3::from_fn(|i, j| g[2] * k[i] * k[j] + g[1] * delta(i, j));
    let psi3 = |i: usize, j: usize, l: usize| {
        g[3] * k[i] * k[j] * k[l] + g[2] * (delta(i, j) * k[l] + delta(i, l) * k[j] + delta(j, l) * k[i])
    };

    // Phase sum S(κ) = Σ w e^{-i⟨p,κ⟩} and its derivatives.
    let mut s0 = C::new(0.0, 0.0);
    let mut s1 = Vector3::<C>::zeros();
    let mut s2 = Matrix3::<C>::zeros();
    let mut s3 = [Matrix3::<C>::zeros(); 3];
    let mi = C::new(0.0, -1.0);
    for (p, w) in ph.points.points.iter().zip(&ph.weights) {
        let e = C::from_polar(*w, -p.dot(k));
        s0 += e;
        if order >= 1 {
            let e1 = e * mi;
            for i in 0..3 {
                s1[i] += e1 * p[i];
            }
        }
        if order >= 2 {
            for i in 0..3 {
                for j in 0..3 {
                    s2[(i, j)] -= e * (p[i] * p[j]);
                }
            }
        }
        if order >= 3 {
            let e3 = e * C::new(0.0, 1.0);
            for i in 0..3 {
                for j in 0..3 {
                    for l in 0..3 {
                        s3[i][(j, l)] += e3 * (p[i] * p[j] * p[l]);
                    }
                }
            }
        }
    }

    let mut out = SpectralDerivatives {
        value: s0 * psi,
        ..Default::default()
    };
    if order >= 1 {
        out.grad = Vector3::from_fn(|i, _| s0 * psi1[i] + s1[i] * psi);
    }
    if order >= 2 {
        out.hess = Matrix3::from_fn(|i, j| s0 * psi2[(i, j)] + s1[j] * psi1[i] + s1[i] * psi1[j] + s2[(i, j)] * psi);
    }
    if order >= 3 {
        for i in 0..3 {
            out.third[i] = Matrix3::from_fn(|j, l| {
                s0 * psi3(i, j, l)
                    + s1[l] * psi2[(i, j)]
                    + s1[j] * psi2[(i, l)]
                    + s1[i] * psi2[(j, l)]
                    + s2[(j, l)] * psi1[i]
                    + s2[(i, l)] * psi1[j]
                    + s2[(i, j)] * psi1[l]
                    + s3[i][(j, l)] * psi
            });
        }
    }
    out
}

impl Spectral for Phantom {
    fn spectral(&self, kappa: &Vector3<f64>, order: usize) -> SpectralDerivatives {
        spectral_eval(self, kappa, order)
    }

    fn support_radius(&self) -> f64 {
        self.support_radius
    }
}

/// Sum of several phantoms sharing one support ball.
#[derive(Debug, Clone)]
pub struct PhantomSum {
    pub parts: Vec<Phantom>,
}

impl Spectral for PhantomSum {
    fn spectral(&self, kappa: &Vector3<f64>, order: usize) -> SpectralDerivatives {
        let mut acc = SpectralDerivatives::default();
        for p in &self.parts {
            acc.add_assign(&spectral_eval(p, kappa, order));
        }
        acc
    }

    fn support_radius(&self) -> f64 {
        self.parts.iter().map(|p| p.support_radius).fold(0.0, f64::max)
    }
}

/// Orthonormal pair `(ξ, η)` plus a unit `ν` for the symmetry conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub xi: Vector3<f64>,
    pub eta: Vector3<f64>,
    pub nu: Vector3<f64>,
}

impl Frame {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: &Vector3<f64>| (v.norm() - 1.0).abs() <= 1e-9;
        if !unit(&self.xi) || !unit(&self.eta) || !unit(&self.nu) || self.xi.dot(&self.eta).abs() > 1e-9 {
            return Err(Error::invalid("frame needs unit ξ, η, ν with ⟨ξ,η⟩ = 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SymmetryModel {
    Dt { k0: f64 },
    Pb { lambda_max: f64 },
}

/// Largest violation of the DT- or PB-symmetry condition along the sampled
/// curve: `|⟨∇f̂(μξ + h(μ)η), (μξ + h(μ)η) × ν⟩|` or `|⟨∇f̂(λξ), η⟩|`.
pub fn symmetry_residual(obj: &dyn Spectral, frame: &Frame, model: SymmetryModel, samples: usize) -> Result<f64> {
    frame.validate()?;
    if samples < 2 {
        return Err(Error::invalid("symmetry residual needs at least two samples"));
    }
    let mut worst: f64 = 0.0;
    match model {
        SymmetryModel::Dt { k0 } => {
            if !(k0 > 0.0) {
                return Err(Error::invalid("k0 must be positive"));
            }
            let span = 1.8 * k0;
            for j in 0..samples {
                let mu = -0.9 * k0 + span * (j as f64 + 0.5) / samples as f64;
                let kappa = frame.xi * mu + frame.eta * dt_height(k0, mu);
                let d = obj.spectral(&kappa, 1);
                worst = worst.max(d.d1(&kappa.cross(&frame.nu)).norm());
            }
        }
        SymmetryModel::Pb { lambda_max } => {
            if !(lambda_max > 0.0) {
                return Err(Error::invalid("lambda_max must be positive"));
            }
            for j in 0..samples {
                let lambda = -lambda_max + 2.0 * lambda_max * j as f64 / (samples - 1) as f64;
                let d = obj.spectral(&(frame.xi * lambda), 1);
                worst = worst.max(d.d1(&frame.eta).norm());
            }
        }
    }
    Ok(worst)
}

/// Union of the phantom with its mirror image across the plane `n^⊥`.
/// Points on the plane are kept once.
pub fn mirror_symmetrize(ph: &Phantom, normal: &Vector3<f64>) -> Result<Phantom> {
    if (normal.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("mirror normal must be a unit vector"));
    }
    let mut pts = Vec::new();
    let mut w = Vec::new();
    let tol = 1e-12 * ph.support_radius;
    for (p, wi) in ph.points.points.iter().zip(&ph.weights) {
        let m = p - normal * (2.0 * p.dot(normal));
        pts.push(*p);
        w.push(*wi);
        if (m - p).norm() > tol {
            pts.push(m);
            w.push(*wi);
        }
    }
    Phantom::new(PointSet::new(pts), w, ph.profile, ph.support_radius)
}

/// `∫_{E_w} x Ψ(x) dS` over the plane `{x : ⟨x, ŵ⟩ = ‖w‖}` by an `n × n`
/// trapezoidal rule on the disk chord.
pub fn slice_center(ph: &Phantom, w: &Vector3<f64>, n: usize) -> Result<Vector3<f64>> {
    let d = w.norm();
    if d == 0.0 || !d.is_finite() {
        return Err(Error::invalid("slice offset must be nonzero"));
    }
    if n < 3 {
        return Err(Error::invalid("quadrature needs at least 3 nodes per axis"));
    }
    let nrm = w / d;
    let rs = ph.support_radius;
    if d >= rs {
        return Ok(Vector3::zeros());
    }
    let half = (rs * rs - d * d).sqrt();
    let e1 = crate::sweep::orthogonal_unit(&nrm, 0.0);
    let e2 = nrm.cross(&e1);
    let h = 2.0 * half / (n - 1) as f64;
    let mut acc = Vector3::zeros();
    for i in 0..n {
        let a = -half + i as f64 * h;
        let wa = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        for j in 0..n {
            let b = -half + j as f64 * h;
            let wb = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            let x = nrm * d + e1 * a + e2 * b;
            acc += x * (wa * wb * ph.eval(&x));
        }
    }
    Ok(acc * (h * h))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phantom() -> Phantom {
        let p = generate_asymmetric_pointset(8, 11, Placement::Ball { radius: 0.6 }).unwrap();
        Phantom::balanced(p, BlobProfile::Gaussian { sigma: 0.05 }, 1.0).unwrap()
    }

    #[test]
    fn value_at_origin_is_weight_sum() {
        let ph = phantom();
        let v = spectral_eval(&ph, &Vector3::zeros(), 0).value;
        let s: f64 = ph.weights.iter().sum();
        assert!((v.re - s).abs() < 1e-14 && v.im.abs() < 1e-14);
    }

    #[test]
    fn gradient_at_origin_vanishes() {
        let ph = phantom();
        let g = spectral_eval(&ph, &Vector3::zeros(), 1).grad;
        assert!(g.norm() < 1e-12);
    }

    #[test]
    fn rejects_unbalanced_weights() {
        let ph = phantom();
        let mut w = ph.weights.clone();
        w[0] *= 1.5;
        assert!(matches!(
            Phantom::new(ph.points.clone(), w, ph.profile, 1.0),
            Err(Error::NotAdmissible {
                kind: Admissibility::NonzeroMoment,
                ..
            })
        ));
    }

    #[test]
    fn rejects_support_violation() {
        let ph = phantom();
        assert!(matches!(
            Phantom::new(ph.points.clone(), ph.weights.clone(), ph.profile, 0.5),
            Err(Error::SupportViolation(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let ph = phantom();
        let back = Phantom::from_json(&ph.to_json()).unwrap();
        assert_eq!(ph, back);
        let bad = ph.to_json().replace("\"format_version\": 1", "\"format_version\": 9");
        assert!(matches!(Phantom::from_json(&bad), Err(Error::Schema(_))));
    }

    #[test]
    fn mirror_symmetric_phantom_has_zero_dt_residual() {
        let ph = phantom();
        let n = Vector3::new(0.2, -0.5, 0.8).normalize();
        let m = mirror_symmetrize(&ph, &n).unwrap();
        let xi = crate::sweep::orthogonal_unit(&n, 0.4);
        let eta = n.cross(&xi);
        let frame = Frame { xi, eta, nu: xi };
        let r = symmetry_residual(&m, &frame, SymmetryModel::Dt { k0: 12.0 }, 64).unwrap();
        assert!(r <= 1e-12, "{r}");
    }

    #[test]
    fn centred_blob_slice_center_is_parallel_to_offset() {
        let pts = PointSet::new(vec![Vector3::zeros()]);
        let ph = Phantom::new(pts, vec![1.0], BlobProfile::Gaussian { sigma: 0.1 }, 1.0).unwrap();
        let w = Vector3::new(0.03, -0.02, 0.05);
        let f = slice_center(&ph, &w, 201).unwrap();
        assert!(f.cross(&w).norm() <= 1e-10 * f.norm() * w.norm());
    }
}
