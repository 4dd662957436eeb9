//! Common-circle solver for diffraction tomography.
//!
//! Along `k = μφ` the data satisfy
//! `∂_t m̂ = (μζ − h(μ)ρ) ⟨∇_k m̂, φ^⊥⟩` exactly when `φ` is the azimuth of
//! `ω = (ρφ, ζ)`.

use nalgebra::{DMatrix, DVector, Vector3};

use super::{azimuth_search, data_scale, omega_from, stack, unit, Ambiguity, SolverConfig, StepEstimate};
use crate::error::{Error, Result};
use crate::forward::{dt_height, JetOrder, JetProvider, Model};
use crate::so3::to_cylindrical;

fn k0_of(jets: &dyn JetProvider) -> Result<f64> {
    match jets.config().model {
        Model::Dt { k0 } => Ok(k0),
        Model::Pb => Err(Error::Mismatch("common-circle solver needs DT data".into())),
    }
}

/// Stacked system in `(ζ, ρ)` for one azimuth.
fn line_system(jets: &dyn JetProvider, t_index: usize, phi: f64, k0: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let (u, up) = unit(phi);
    let nodes = jets.config().radial_nodes();
    let (mut c_zeta, mut c_rho, mut rhs) = (Vec::new(), Vec::new(), Vec::new());
    for &mu in &nodes {
        let j = jets.jet(t_index, &(u * mu), JetOrder::First)?;
        let g = j.d1(&up);
        c_zeta.push(g * mu);
        c_rho.push(g * -dt_height(k0, mu));
        rhs.push(j.dt);
    }
    Ok(stack(&[c_zeta, c_rho], &rhs))
}

/// Recover `ω(t)` at one step from DT jets.
pub fn dt_recover_step(jets: &dyn JetProvider, t_index: usize, cfg: &SolverConfig) -> Result<StepEstimate> {
    cfg.validate()?;
    let k0 = k0_of(jets)?;
    let s = azimuth_search(|phi| line_system(jets, t_index, phi, k0), &[1], cfg)?;
    if s.residual > cfg.sanity_bound {
        return Err(Error::NoSolution(format!(
            "step {t_index}: best normalized residual {:.3e} exceeds {}",
            s.residual, cfg.sanity_bound
        )));
    }
    let (zeta, rho) = (s.x[0], s.x[1]);
    let sv = &s.solution.singular_values;
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let flat = s.profile.iter().all(|p| p.1 <= cfg.residual_tol);
    let ambiguity = if s.sigma_scale == 0.0 || smin <= cfg.residual_tol * s.sigma_scale {
        Ambiguity::PlanarFamily
    } else if flat {
        // Every azimuth fits: only ρ = 0 is consistent with that.
        if rho.abs() <= cfg.residual_tol.sqrt() * zeta.abs().max(1.0) {
            Ambiguity::Unique
        } else {
            Ambiguity::Degenerate
        }
    } else if s.ratio >= cfg.ambiguity_ratio {
        Ambiguity::Unique
    } else {
        Ambiguity::Degenerate
    };
    Ok(StepEstimate {
        omega_hat: omega_from(s.phi, rho, zeta),
        phi: s.phi,
        residual: s.residual,
        ambiguity,
        condition: s.solution.condition(),
        ratio: s.ratio,
        x1: None,
        x2: None,
    })
}

/// Residual of the common-circle equation at a given `ω`, normalized like
/// the solver's residuals by the largest `‖∂_t m̂‖` over the azimuth grid.
pub fn dt_equation_residual(
    jets: &dyn JetProvider,
    t_index: usize,
    omega: &Vector3<f64>,
    cfg: &SolverConfig,
) -> Result<f64> {
    let k0 = k0_of(jets)?;
    let c = to_cylindrical(omega);
    let (a, b) = line_system(jets, t_index, c.phi, k0)?;
    let r = (&a * DVector::from_row_slice(&[c.zeta, c.rho]) - &b).norm();
    let scale = data_scale(|phi| line_system(jets, t_index, phi, k0), cfg)?;
    Ok(r / scale)
}

/// Residual of the best `(ζ, ρ)` for each grid azimuth.
pub fn dt_phi_profile(jets: &dyn JetProvider, t_index: usize, cfg: &SolverConfig) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    let k0 = k0_of(jets)?;
    Ok(azimuth_search(|phi| line_system(jets, t_index, phi, k0), &[1], cfg)?.profile)
}
