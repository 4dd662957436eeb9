//! Rigid-body motions on a time grid: specifications, RK4 integration with
//! re-projection, and dense evaluation between grid nodes.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{fornberg_weights, stencil_window};
use crate::so3::{self, hat, orthogonality_defect, project_to_rotation};

/// Drift of `RᵀR` from the identity tolerated in a single RK4 step.
pub const MAX_STEP_DRIFT: f64 = 1e-6;
/// Nodes used when interpolating sampled angular velocities.
const SAMPLED_WIDTH: usize = 6;

/// Scalar time profile: a polynomial plus a sum of sinusoids
/// `amp · sin(freq · t + phase)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    #[serde(default)]
    pub poly: Vec<f64>,
    #[serde(default)]
    pub sines: Vec<[f64; 3]>,
}

impl Profile {
    pub fn constant(c: f64) -> Self {
        Profile {
            poly: vec![c],
            sines: vec![],
        }
    }

    pub fn with_sine(mut self, amp: f64, freq: f64, phase: f64) -> Self {
        self.sines.push([amp, freq, phase]);
        self
    }

    /// Derivative of order `n` at `t`.
    pub fn eval(&self, t: f64, n: usize) -> f64 {
        let mut v = 0.0;
        for (i, c) in self.poly.iter().enumerate().skip(n) {
            let fall: f64 = (i - n + 1..=i).map(|j| j as f64).product();
            v += c * fall * t.powi((i - n) as i32);
        }
        for &[a, f, p] in &self.sines {
            let arg = f * t + p + n as f64 * std::f64::consts::FRAC_PI_2;
            v += a * f.powi(n as i32) * arg.sin();
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MotionSpec {
    /// `ω(t)` given componentwise; `R(t₀) = I`.
    AnalyticOmega { omega: [Profile; 3] },
    /// `R(t) = R_v(ρ(t)) R_{e₃}(ζ(t))` with `v ⊥ e₃`.
    Composite {
        axis: [f64; 3],
        rho: Profile,
        zeta: Profile,
    },
    /// Angular velocity samples, interpolated by local polynomials; `R(t₀) = I`.
    Sampled { times: Vec<f64>, omega: Vec<[f64; 3]> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        let g = TimeGrid {
            t_start,
            t_end,
            n_steps,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 || !(self.t_end > self.t_start) || !self.t_start.is_finite() || !self.t_end.is_finite() {
            return Err(Error::invalid("time grid needs t_end > t_start and at least one step"));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps)
            .map(|i| self.t_start + i as f64 * self.step())
            .collect()
    }
}

/// Rotations and their first two derivatives on the grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub rotation: Vec<Matrix3<f64>>,
    pub rotation_dot: Vec<Matrix3<f64>>,
    pub rotation_ddot: Vec<Matrix3<f64>>,
    pub omega: Vec<Vector3<f64>>,
    pub omega_dot: Vec<Vector3<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// The trajectory of `Σ R Σ`.
    pub fn sigma_conjugate(&self) -> Trajectory {
        Trajectory {
            times: self.times.clone(),
            rotation: self.rotation.iter().map(so3::sigma_conjugate).collect(),
            rotation_dot: self.rotation_dot.iter().map(so3::sigma_conjugate).collect(),
            rotation_ddot: self.rotation_ddot.iter().map(so3::sigma_conjugate).collect(),
            omega: self.omega.iter().map(so3::sigma_velocity).collect(),
            omega_dot: self.omega_dot.iter().map(so3::sigma_velocity).collect(),
        }
    }

    /// `max_t ‖R̂(t) − R(t)‖_F`.
    pub fn max_distance(&self, other: &Trajectory) -> f64 {
        self.rotation
            .iter()
            .zip(&other.rotation)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl MotionSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            MotionSpec::AnalyticOmega { .. } => Ok(()),
            MotionSpec::Composite { axis, .. } => {
                let v = Vector3::from(*axis);
                if (v.norm() - 1.0).abs() > 1e-9 || v.z.abs() > 1e-9 {
                    return Err(Error::invalid(
                        "composite motion axis must be a unit vector orthogonal to e3",
                    ));
                }
                Ok(())
            }
            MotionSpec::Sampled { times, omega } => {
                if times.len() != omega.len() || times.len() < 2 {
                    return Err(Error::InsufficientData(
                        "sampled motion needs at least two matched samples".into(),
                    ));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::invalid("sampled motion times must increase"));
                }
                Ok(())
            }
        }
    }

    /// `(ω(t), ω'(t))`.
    pub fn omega_at(&self, t: f64) -> (Vector3<f64>, Vector3<f64>) {
        match self {
            MotionSpec::AnalyticOmega { omega } => (
                Vector3::new(omega[0].eval(t, 0), omega[1].eval(t, 0), omega[2].eval(t, 0)),
                Vector3::new(omega[0].eval(t, 1), omega[1].eval(t, 1), omega[2].eval(t, 1)),
            ),
            MotionSpec::Composite { axis, rho, zeta } => {
                let v = Vector3::from(*axis);
                let (z, z1, z2) = (zeta.eval(t, 0), zeta.eval(t, 1), zeta.eval(t, 2));
                let (r1, r2) = (rho.eval(t, 1), rho.eval(t, 2));
                let b = so3::rodrigues(&Vector3::z(), z).expect("unit axis");
                let bv = b.transpose() * v;
                let e3 = Vector3::z();
                let w = r1 * bv + z1 * e3;
                let wd = r2 * bv - r1 * z1 * e3.cross(&bv) + z2 * e3;
                (w, wd)
            }
            MotionSpec::Sampled { times, omega } => {
                let n = times.len();
                let i = nearest_index(times, t);
                let win = stencil_window(i, n, SAMPLED_WIDTH.min(n)).expect("validated");
                let w = fornberg_weights(t, &times[win.clone()], 1);
                let mut v = Vector3::zeros();
                let mut d = Vector3::zeros();
                for (j, k) in win.enumerate() {
                    let s = Vector3::from(omega[k]);
                    v += w[0][j] * s;
                    d += w[1][j] * s;
                }
                (v, d)
            }
        }
    }

    fn closed_form(&self, t: f64) -> Option<Matrix3<f64>> {
        match self {
            MotionSpec::Composite { axis, rho, zeta } => {
                let a = so3::rodrigues(&Vector3::from(*axis), rho.eval(t, 0)).ok()?;
                let b = so3::rodrigues(&Vector3::z(), zeta.eval(t, 0)).ok()?;
                Some(a * b)
            }
            _ => None,
        }
    }
}

fn nearest_index(times: &[f64], t: f64) -> usize {
    match times.binary_search_by(|x| x.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less)) {
        Ok(i) => i,
        Err(0) => 0,
        Err(i) if i >= times.len() => times.len() - 1,
        Err(i) => {
            if t - times[i - 1] <= times[i] - t {
                i - 1
            } else {
                i
            }
        }
    }
}

/// One classical RK4 step of `R' = R [ω(t)]ₓ` without re-projection.
fn rk4_step(spec: &MotionSpec, r: &Matrix3<f64>, t: f64, h: f64) -> Matrix3<f64> {
    let w = |s: f64| hat(&spec.omega_at(s).0);
    let k1 = r * w(t);
    let k2 = (r + 0.5 * h * k1) * w(t + 0.5 * h);
    let k3 = (r + 0.5 * h * k2) * w(t + 0.5 * h);
    let k4 = (r + h * k3) * w(t + h);
    r + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

fn derivatives(r: Matrix3<f64>, w: Vector3<f64>, wd: Vector3<f64>) -> (Matrix3<f64>, Matrix3<f64>) {
    let k = hat(&w);
    (r * k, r * (k * k + hat(&wd)))
}

/// Integrate a motion over `grid`.
pub fn motion_kinematics(spec: &MotionSpec, grid: &TimeGrid) -> Result<Trajectory> {
    spec.validate()?;
    grid.validate()?;
    if let MotionSpec::Sampled { times, .. } = spec {
        let tol = 1e-12 * (1.0 + grid.t_end.abs());
        if grid.t_start < times[0] - tol || grid.t_end > times[times.len() - 1] + tol {
            return Err(Error::InsufficientData("time grid exceeds the sampled motion".into()));
        }
    }
    let times = grid.times();
    let h = grid.step();
    let mut out = Trajectory {
        times: times.clone(),
        rotation: Vec::with_capacity(times.len()),
        rotation_dot: Vec::with_capacity(times.len()),
        rotation_ddot: Vec::with_capacity(times.len()),
        omega: Vec::with_capacity(times.len()),
        omega_dot: Vec::with_capacity(times.len()),
    };
    let mut r = spec.closed_form(times[0]).unwrap_or_else(Matrix3::identity);
    for (i, &t) in times.iter().enumerate() {
        if i > 0 {
            r = match spec.closed_form(t) {
                Some(rc) => rc,
                None => {
                    let next = rk4_step(spec, &r, times[i - 1], h);
                    let drift = orthogonality_defect(&next);
                    if drift > MAX_STEP_DRIFT {
                        return Err(Error::StepTooLarge { step: i, drift });
                    }
                    project_to_rotation(&next)
                }
            };
        }
        let (w, wd) = spec.omega_at(t);
        let (rd, rdd) = derivatives(r, w, wd);
        out.rotation.push(r);
        out.rotation_dot.push(rd);
        out.rotation_ddot.push(rdd);
        out.omega.push(w);
        out.omega_dot.push(wd);
    }
    Ok(out)
}

/// A motion together with its sampled trajectory, evaluable between nodes.
#[derive(Debug, Clone)]
pub struct Motion {
    pub spec: MotionSpec,
    pub grid: TimeGrid,
    pub trajectory: Trajectory,
}

/// Rotation state `(R, R', R'')` at one instant.
#[derive(Debug, Clone, Copy)]
pub struct RotationState {
    pub r: Matrix3<f64>,
    pub r_dot: Matrix3<f64>,
    pub r_ddot: Matrix3<f64>,
}

impl Motion {
    pub fn new(spec: MotionSpec, grid: TimeGrid) -> Result<Self> {
        let trajectory = motion_kinematics(&spec, &grid)?;
        Ok(Motion { spec, grid, trajectory })
    }

    pub fn times(&self) -> &[f64] {
        &self.trajectory.times
    }

    pub fn state(&self, index: usize) -> RotationState {
        RotationState {
            r: self.trajectory.rotation[index],
            r_dot: self.trajectory.rotation_dot[index],
            r_ddot: self.trajectory.rotation_ddot[index],
        }
    }

    /// State at an arbitrary time inside the grid, by one RK4 step from the
    /// nearest node (or in closed form when available).
    pub fn state_at(&self, t: f64) -> Result<RotationState> {
        let times = self.times();
        let span = self.grid.t_end - self.grid.t_start;
        if t < times[0] - 1e-12 * span || t > times[times.len() - 1] + 1e-12 * span {
            return Err(Error::OutOfGrid(format!(
                "time {t} outside [{}, {}]",
                times[0],
                times[times.len() - 1]
            )));
        }
        let i = nearest_index(times, t);
        let r = match self.spec.closed_form(t) {
            Some(r) => r,
            None if t == times[i] => self.trajectory.rotation[i],
            None => project_to_rotation(&rk4_step(
                &self.spec,
                &self.trajectory.rotation[i],
                times[i],
                t - times[i],
            )),
        };
        let (w, wd) = self.spec.omega_at(t);
        let (r_dot, r_ddot) = derivatives(r, w, wd);
        Ok(RotationState { r, r_dot, r_ddot })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_derivatives() {
        let p = Profile {
            poly: vec![1.0, 2.0, 3.0],
            sines: vec![[2.0, 3.0, 0.5]],
        };
        let t: f64 = 0.7;
        let v0 = 1.0 + 2.0 * t + 3.0 * t * t + 2.0 * (3.0 * t + 0.5).sin();
        let v1 = 2.0 + 6.0 * t + 6.0 * (3.0 * t + 0.5).cos();
        let v2 = 6.0 - 18.0 * (3.0 * t + 0.5).sin();
        assert!((p.eval(t, 0) - v0).abs() < 1e-13);
        assert!((p.eval(t, 1) - v1).abs() < 1e-13);
        assert!((p.eval(t, 2) - v2).abs() < 1e-12);
    }

    #[test]
    fn constant_velocity_matches_rodrigues() {
        let w = Vector3::new(0.3, -0.4, 1.2);
        let spec = MotionSpec::AnalyticOmega {
            omega: [Profile::constant(w.x), Profile::constant(w.y), Profile::constant(w.z)],
        };
        let exact = so3::rodrigues(&w.normalize(), w.norm()).unwrap();
        let err = |n: usize| {
            let traj = motion_kinematics(&spec, &TimeGrid::new(0.0, 1.0, n).unwrap()).unwrap();
            (traj.rotation[n] - exact).norm()
        };
        let (e1, e2) = (err(50), err(100));
        assert!(e2 < 1e-9, "{e2}");
        // fourth-order convergence
        assert!(e1 / e2 > 12.0, "{}", e1 / e2);
    }

    #[test]
    fn step_too_large_is_reported() {
        let spec = MotionSpec::AnalyticOmega {
            omega: [Profile::constant(0.0), Profile::constant(0.0), Profile::constant(50.0)],
        };
        let err = motion_kinematics(&spec, &TimeGrid::new(0.0, 1.0, 4).unwrap()).unwrap_err();
        assert!(matches!(err, Error::StepTooLarge { step: 1, .. }));
    }

    #[test]
    fn composite_velocity_matches_finite_difference() {
        let spec = MotionSpec::Composite {
            axis: [1.0, 0.0, 0.0],
            rho: Profile {
                poly: vec![0.1, 0.8],
                sines: vec![],
            },
            zeta: Profile {
                poly: vec![0.0, 1.3],
                sines: vec![[0.2, 2.0, 0.0]],
            },
        };
        let t = 0.4;
        let h = 1e-6;
        let r = spec.closed_form(t).unwrap();
        let rd = (spec.closed_form(t + h).unwrap() - spec.closed_form(t - h).unwrap()) / (2.0 * h);
        let w = so3::vee(&(r.transpose() * rd));
        assert!((w - spec.omega_at(t).0).norm() < 1e-8);
        let wd_fd = (spec.omega_at(t + h).0 - spec.omega_at(t - h).0) / (2.0 * h);
        assert!((wd_fd - spec.omega_at(t).1).norm() < 1e-7);
    }

    #[test]
    fn dense_state_matches_grid() {
        let spec = MotionSpec::AnalyticOmega {
            omega: [
                Profile::constant(0.5).with_sine(0.2, 2.0, 0.0),
                Profile::constant(0.2),
                Profile::constant(1.0),
            ],
        };
        let m = Motion::new(spec, TimeGrid::new(0.0, 1.0, 50).unwrap()).unwrap();
        let s = m.state_at(m.times()[10] + 0.02).unwrap();
        assert!((s.r - m.trajectory.rotation[11]).norm() < 1e-11);
        assert!(matches!(m.state_at(1.5), Err(Error::OutOfGrid(_))));
    }
}
