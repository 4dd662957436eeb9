use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pb::{true_phi_rate, unwrap_azimuth};
use super::{
    dt_recover_step, first_order_state, omega_from, pb_coefficients, pb_first_order_step, pb_third_order_step,
    Ambiguity, SolverConfig, StepEstimate,
};
use crate::error::{Error, Result};
use crate::forward::{JetProvider, Model};
use crate::motion::{motion_kinematics, MotionSpec, TimeGrid, Trajectory};
use crate::so3::{radius_rate, to_cylindrical, Cylindrical};

/// Which member of `{R, ΣRΣ}` the recovered trajectory matches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Direct,
    Sigma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub model: String,
    pub times: Vec<f64>,
    pub estimates: Vec<StepEstimate>,
    /// Integrated from `ω̂` with `R̂(0) = I`; absent when a step is flagged.
    pub trajectory: Option<Trajectory>,
    /// Steps whose ambiguity is not `unique`.
    pub flagged: Vec<usize>,
    /// `min` over both branches of `max_t ‖R̂(t) − branch(R(t))‖_F`.
    pub equivalence_distance: Option<f64>,
    pub branch: Option<Branch>,
}

impl RecoveryResult {
    pub fn is_unique(&self) -> bool {
        self.flagged.is_empty()
    }

    /// `max_t ‖ω̂(t) − ω(t)‖` against a reference trajectory.
    pub fn max_omega_error(&self, truth: &Trajectory) -> f64 {
        self.estimates
            .iter()
            .zip(&truth.omega)
            .map(|(e, w)| (e.omega_hat - w).norm())
            .fold(0.0, f64::max)
    }

    /// Like [`max_omega_error`](Self::max_omega_error), against the branch
    /// the trajectory was matched to.
    pub fn max_branch_omega_error(&self, truth: &Trajectory) -> f64 {
        match self.branch {
            Some(Branch::Sigma) => self.max_omega_error(&truth.sigma_conjugate()),
            _ => self.max_omega_error(truth),
        }
    }
}

/// Cylindrical coordinates of a true `ω` with `ρ'`, `φ'` and `ζ'`.
pub fn truth_cylindrical(omega: &Vector3<f64>, omega_dot: &Vector3<f64>) -> (Cylindrical, [f64; 3]) {
    (
        to_cylindrical(omega),
        [
            radius_rate(omega, omega_dot),
            true_phi_rate(omega, omega_dot),
            omega_dot.z,
        ],
    )
}

/// Signed `ρ` from `X₁ = ρ²` and `X₂ = ρ'/ρ`, with `ρ(t₀) > 0`.
///
/// Each step predicts `ρ` by integrating `X₂` (trapezoid rule) and takes the
/// root of `X₁` with the predicted sign. A magnitude that disagrees with the
/// prediction by more than half means `ρ` passed through zero.
pub fn rho_sign_continuation(times: &[f64], x1: &[f64], x2: &[f64]) -> Result<Vec<f64>> {
    if times.len() != x1.len() || times.len() != x2.len() || times.is_empty() {
        return Err(Error::invalid("series lengths differ"));
    }
    if let Some(i) = x1.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::DegenerateData(format!("ρ² = {:.3e} at step {i}", x1[i])));
    }
    let mut rho = Vec::with_capacity(times.len());
    rho.push(x1[0].sqrt());
    for i in 1..times.len() {
        let h = times[i] - times[i - 1];
        let pred = rho[i - 1] * (0.5 * (x2[i - 1] + x2[i]) * h).exp();
        let mag = x1[i].sqrt();
        if (mag - pred.abs()).abs() > 0.5 * pred.abs() {
            return Err(Error::SignFlip(i));
        }
        rho.push(mag.copysign(pred));
    }
    Ok(rho)
}

fn integrate(times: &[f64], omega: &[Vector3<f64>]) -> Result<Trajectory> {
    let n = times.len();
    let grid = TimeGrid::new(times[0], times[n - 1], n - 1)?;
    let h = grid.step();
    if times
        .iter()
        .enumerate()
        .any(|(i, t)| (t - (times[0] + i as f64 * h)).abs() > 1e-9 * h)
    {
        return Err(Error::invalid("recovery needs a uniform time grid"));
    }
    let spec = MotionSpec::Sampled {
        times: times.to_vec(),
        omega: omega.iter().map(|w| [w.x, w.y, w.z]).collect(),
    };
    motion_kinematics(&spec, &grid)
}

fn pb_steps(jets: &dyn JetProvider, cfg: &SolverConfig) -> Result<Vec<StepEstimate>> {
    let times = jets.times();
    let n = times.len();
    let first = (0..n)
        .into_par_iter()
        .map(|i| pb_first_order_step(jets, i, cfg))
        .collect::<Result<Vec<_>>>()?;
    let third = (0..n)
        .into_par_iter()
        .map(|i| -> Result<_> {
            if !first[i].ambiguity.is_unique() {
                return Ok(None);
            }
            let state = first_order_state(times, &first, i, cfg)?;
            let rows = pb_coefficients(jets, i, &state)?;
            Ok(Some(pb_third_order_step(&rows, cfg)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut est: Vec<StepEstimate> = first
        .iter()
        .zip(&third)
        .map(|(f, t)| {
            let mut ambiguity = f.ambiguity;
            let mut condition = f.condition;
            if let Some(t) = t {
                condition = t.condition;
                if t.degenerate || !(t.x1 > 0.0) {
                    ambiguity = Ambiguity::Degenerate;
                }
            }
            StepEstimate {
                omega_hat: omega_from(f.phi, 0.0, f.zeta),
                residual: f.residual,
                ambiguity,
                condition,
                ratio: f.ratio,
                phi: f.phi,
                x1: t.map(|t| t.x1),
                x2: t.map(|t| t.x2),
            }
        })
        .collect();
    if est.iter().any(|e| !e.ambiguity.is_unique()) {
        return Ok(est);
    }

    let x1: Vec<f64> = third.iter().map(|t| t.expect("unique step").x1).collect();
    let x2: Vec<f64> = third.iter().map(|t| t.expect("unique step").x2).collect();
    let phis = unwrap_azimuth(&first.iter().map(|f| f.phi).collect::<Vec<_>>());
    let rho = rho_sign_continuation(times, &x1, &x2)?;
    for (i, e) in est.iter_mut().enumerate() {
        e.omega_hat = omega_from(phis[i], rho[i], first[i].zeta);
    }
    Ok(est)
}

/// Per-step recovery on the full grid, integration of `ω̂`, and comparison
/// with a reference trajectory when one is given.
pub fn recover_trajectory(
    jets: &dyn JetProvider,
    cfg: &SolverConfig,
    truth: Option<&Trajectory>,
) -> Result<RecoveryResult> {
    cfg.validate()?;
    let times = jets.times().to_vec();
    if times.len() < cfg.derivative_width {
        return Err(Error::InsufficientData(format!("{} time steps", times.len())));
    }
    let model = jets.config().model;
    let estimates = match model {
        Model::Dt { .. } => (0..times.len())
            .into_par_iter()
            .map(|i| dt_recover_step(jets, i, cfg))
            .collect::<Result<Vec<_>>>()?,
        Model::Pb => pb_steps(jets, cfg)?,
    };
    let flagged: Vec<usize> = (0..estimates.len())
        .filter(|&i| !estimates[i].ambiguity.is_unique())
        .collect();
    let trajectory = if flagged.is_empty() {
        let omega: Vec<Vector3<f64>> = estimates.iter().map(|e| e.omega_hat).collect();
        Some(integrate(&times, &omega)?)
    } else {
        None
    };
    let (mut equivalence_distance, mut branch) = (None, None);
    if let (Some(rec), Some(truth)) = (&trajectory, truth) {
        if truth.len() != rec.len() {
            return Err(Error::Mismatch("reference trajectory has a different grid".into()));
        }
        let direct = rec.max_distance(truth);
        let sigma = rec.max_distance(&truth.sigma_conjugate());
        let (d, b) = if direct <= sigma {
            (direct, Branch::Direct)
        } else {
            (sigma, Branch::Sigma)
        };
        equivalence_distance = Some(d);
        branch = Some(b);
    }
    Ok(RecoveryResult {
        model: model.name().to_string(),
        times,
        estimates,
        trajectory,
        flagged,
        equivalence_distance,
        branch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn continuation_keeps_positive_root() {
        let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.05).collect();
        let rho: Vec<f64> = t.iter().map(|t| 0.5 + 0.3 * t.sin()).collect();
        let x1: Vec<f64> = rho.iter().map(|r| r * r).collect();
        let x2: Vec<f64> = t.iter().zip(&rho).map(|(t, r)| 0.3 * t.cos() / r).collect();
        let out = rho_sign_continuation(&t, &x1, &x2).unwrap();
        for (a, b) in out.iter().zip(&rho) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn continuation_rejects_vanishing_radius() {
        let t = [0.0, 0.1, 0.2];
        assert!(matches!(
            rho_sign_continuation(&t, &[0.1, 0.0, 0.1], &[0.0; 3]),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn continuation_detects_a_jump_through_zero() {
        let t = [0.0, 0.1, 0.2];
        // X₂ predicts a fast decay that the magnitudes do not follow.
        assert!(matches!(
            rho_sign_continuation(&t, &[1.0, 1.0, 1.0], &[-20.0, -20.0, -20.0]),
            Err(Error::SignFlip(1))
        ));
    }
}
