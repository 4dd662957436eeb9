//! WebAssembly front end for the browser demo in `www/`.
//!
//! The plain functions do the work and are tested natively; the
//! `#[wasm_bindgen]` wrappers hand JSON or `Float64Array`s to the page.

use nalgebra::Vector2;
use serde::Serialize;
use spinrecon::error::{Error, Result};
use spinrecon::experiment::fixtures::{dt_config, gaussian_phantom, pb_config, smooth_motion, unit_motion};
use spinrecon::forward::{measure, AnalyticJets, Backend, Model, ModelConfig};
use spinrecon::motion::Motion;
use spinrecon::phantom::Phantom;
use spinrecon::recovery::{dt_phi_profile, pb_phi_profile, recover_trajectory, SolverConfig};
use wasm_bindgen::prelude::*;

pub const MAX_STEPS: usize = 400;
pub const MAX_POINTS: usize = 32;
pub const MAX_IMAGE: usize = 256;

fn model_config(model: &str) -> Result<ModelConfig> {
    match model {
        "dt" => Ok(dt_config(Backend::Analytic)),
        "pb" => Ok(pb_config(Backend::Analytic)),
        _ => Err(Error::invalid(format!("unknown model {model:?}"))),
    }
}

fn setup(points: usize, seed: u64, n_steps: usize) -> Result<(Phantom, Motion)> {
    if !(8..=MAX_POINTS).contains(&points) {
        return Err(Error::invalid(format!("points must be in 8..={MAX_POINTS}")));
    }
    if !(10..=MAX_STEPS).contains(&n_steps) {
        return Err(Error::invalid(format!("steps must be in 10..={MAX_STEPS}")));
    }
    Ok((gaussian_phantom(points, seed)?, unit_motion(smooth_motion(), n_steps)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoveryView {
    pub times: Vec<f64>,
    pub omega_true: Vec<[f64; 3]>,
    pub omega_hat: Vec<[f64; 3]>,
    pub ambiguity: Vec<&'static str>,
    pub max_error: f64,
    pub equivalence_distance: Option<f64>,
    pub branch: Option<String>,
}

/// Recovers `ω` for the smooth reference motion and pairs it with the truth
/// (conjugated when the recovery lands on the `Σ` branch).
pub fn recovery_view(model: &str, points: usize, seed: u64, n_steps: usize) -> Result<RecoveryView> {
    let cfg = model_config(model)?;
    let (phantom, motion) = setup(points, seed, n_steps)?;
    let jets = AnalyticJets::new(&phantom, &motion, cfg)?;
    let res = recover_trajectory(&jets, &SolverConfig::analytic(), Some(&motion.trajectory))?;
    let truth = match res.branch {
        Some(spinrecon::recovery::Branch::Sigma) => motion.trajectory.sigma_conjugate(),
        _ => motion.trajectory.clone(),
    };
    Ok(RecoveryView {
        times: res.times.clone(),
        omega_true: truth.omega.iter().map(|w| [w.x, w.y, w.z]).collect(),
        omega_hat: res
            .estimates
            .iter()
            .map(|e| [e.omega_hat.x, e.omega_hat.y, e.omega_hat.z])
            .collect(),
        ambiguity: res.estimates.iter().map(|e| e.ambiguity.name()).collect(),
        max_error: res.max_omega_error(&truth),
        equivalence_distance: res.equivalence_distance,
        branch: res.branch.map(|b| format!("{b:?}").to_lowercase()),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileView {
    pub phi: Vec<f64>,
    pub residual: Vec<f64>,
    /// Azimuth of the true `ω` in `[0, π)`.
    pub phi_true: f64,
}

/// Normalized residual of the per-step line system over the azimuth grid.
pub fn profile_view(model: &str, points: usize, seed: u64, n_steps: usize, step: usize) -> Result<ProfileView> {
    let cfg = model_config(model)?;
    let (phantom, motion) = setup(points, seed, n_steps)?;
    if step > n_steps {
        return Err(Error::invalid(format!("step {step} is past the last step {n_steps}")));
    }
    let jets = AnalyticJets::new(&phantom, &motion, cfg)?;
    let solver = SolverConfig::analytic();
    let profile = match cfg.model {
        Model::Dt { .. } => dt_phi_profile(&jets, step, &solver)?,
        Model::Pb => pb_phi_profile(&jets, step, &solver)?,
    };
    let w = motion.trajectory.omega[step];
    Ok(ProfileView {
        phi: profile.iter().map(|p| p.0).collect(),
        residual: profile.iter().map(|p| p.1).collect(),
        phi_true: w.y.atan2(w.x).rem_euclid(std::f64::consts::PI),
    })
}

/// `|m(t, k)|` on an `n × n` detector grid covering the model band,
/// row-major with `k₂` along rows. Samples outside the band are zero.
pub fn measurement_image(
    model: &str,
    points: usize,
    seed: u64,
    n_steps: usize,
    step: usize,
    n: usize,
) -> Result<Vec<f64>> {
    let cfg = model_config(model)?;
    let (phantom, motion) = setup(points, seed, n_steps)?;
    if step > n_steps {
        return Err(Error::invalid(format!("step {step} is past the last step {n_steps}")));
    }
    if !(2..=MAX_IMAGE).contains(&n) {
        return Err(Error::invalid(format!("image size must be in 2..={MAX_IMAGE}")));
    }
    let reach = match cfg.model {
        Model::Dt { k0 } => k0,
        Model::Pb => cfg.lambda_max,
    };
    let r = motion.trajectory.rotation[step];
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let k = Vector2::new(
                reach * (2.0 * j as f64 / (n - 1) as f64 - 1.0),
                reach * (2.0 * i as f64 / (n - 1) as f64 - 1.0),
            );
            if let Ok(v) = measure(&phantom, &r, &cfg, &k) {
                out[i * n + j] = v.norm();
            }
        }
    }
    Ok(out)
}

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[wasm_bindgen]
pub fn recover(model: &str, points: usize, seed: u32, n_steps: usize) -> std::result::Result<String, JsValue> {
    let v = recovery_view(model, points, seed.into(), n_steps).map_err(js_err)?;
    serde_json::to_string(&v).map_err(js_err)
}

#[wasm_bindgen]
pub fn phi_profile(
    model: &str,
    points: usize,
    seed: u32,
    n_steps: usize,
    step: usize,
) -> std::result::Result<String, JsValue> {
    let v = profile_view(model, points, seed.into(), n_steps, step).map_err(js_err)?;
    serde_json::to_string(&v).map_err(js_err)
}

#[wasm_bindgen]
pub fn measurement_magnitude(
    model: &str,
    points: usize,
    seed: u32,
    n_steps: usize,
    step: usize,
    n: usize,
) -> std::result::Result<Vec<f64>, JsValue> {
    measurement_image(model, points, seed.into(), n_steps, step, n).map_err(js_err)
}
