//! Per-step recovery of the angular velocity from measurement jets, and the
//! assembly of whole trajectories.
//!
//! Every solver works on lines `k = λφ` through the origin of the detector
//! plane. For a candidate azimuth `φ` it solves a small real least-squares
//! problem (complex rows stacked as real and imaginary parts) and scores `φ`
//! by the normalized residual. The azimuth is found by a grid search on
//! `[0, π)` followed by golden-section refinement.

mod dt;
mod pb;
mod trajectory;

use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{golden_section, lstsq, LstsqSolution};

pub use dt::{dt_equation_residual, dt_phi_profile, dt_recover_step};
pub use pb::{
    first_order_state, object_space_coefficients, pb_coefficients, pb_coefficients_at, pb_equation_residual,
    pb_first_order_step, pb_phi_profile, pb_third_order_step, CoefficientRows, Coefficients, FirstOrderState,
    PbFirstOrder, ThirdOrder,
};
pub use trajectory::{recover_trajectory, rho_sign_continuation, truth_cylindrical, Branch, RecoveryResult};

type C = Complex64;

/// Lowest grid minima refined by golden section.
const REFINED_BASINS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Number of azimuth candidates on `[0, π)`.
    pub phi_grid: usize,
    /// Golden-section iterations after the grid search.
    pub refine_iters: usize,
    pub residual_tol: f64,
    /// Minimum ratio of the second-best to the best local residual minimum
    /// for a step to count as unique.
    pub ambiguity_ratio: f64,
    pub condition_max: f64,
    /// Best normalized residual above which the data are declared
    /// inconsistent with the model.
    pub sanity_bound: f64,
    /// Allow one-sided differences of the first-order series at the ends of
    /// the time grid.
    pub one_sided_boundary: bool,
    /// Nodes in the differentiation stencil for `φ'` and `ζ'`.
    pub derivative_width: usize,
}

impl SolverConfig {
    /// Defaults for exact (analytic) jets.
    pub fn analytic() -> Self {
        SolverConfig {
            phi_grid: 64,
            refine_iters: 80,
            residual_tol: 1e-8,
            ambiguity_ratio: 10.0,
            condition_max: 1e6,
            sanity_bound: 0.5,
            one_sided_boundary: true,
            derivative_width: 5,
        }
    }

    /// Defaults for finite-difference or sampled jets.
    pub fn finite_difference() -> Self {
        SolverConfig {
            residual_tol: 1e-4,
            ..SolverConfig::analytic()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.phi_grid < 8 {
            return Err(Error::invalid("phi_grid must be at least 8"));
        }
        if !(self.residual_tol > 0.0 && self.condition_max > 0.0 && self.sanity_bound > 0.0) {
            return Err(Error::invalid("solver tolerances must be positive"));
        }
        if !(self.ambiguity_ratio > 1.0) {
            return Err(Error::invalid("ambiguity_ratio must exceed 1"));
        }
        if self.derivative_width < 3 {
            return Err(Error::invalid("derivative_width must be at least 3"));
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::analytic()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ambiguity {
    Unique,
    /// Every `(ρφ, ζ)` with the reported `φ` fits the data.
    PlanarFamily,
    /// Every `φ` fits with `ρ = 0`; only `ζ` is determined.
    RhoZeroFamily,
    Degenerate,
}

impl Ambiguity {
    pub fn is_unique(self) -> bool {
        self == Ambiguity::Unique
    }

    pub fn name(self) -> &'static str {
        match self {
            Ambiguity::Unique => "unique",
            Ambiguity::PlanarFamily => "planar-family",
            Ambiguity::RhoZeroFamily => "rho-zero-family",
            Ambiguity::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepEstimate {
    pub omega_hat: Vector3<f64>,
    /// Normalized residual at the selected azimuth.
    pub residual: f64,
    pub ambiguity: Ambiguity,
    pub condition: f64,
    /// Second-best local residual minimum over the best one.
    pub ratio: f64,
    /// Selected azimuth in `[0, π)`; for a planar family, its azimuth.
    pub phi: f64,
    /// Third-order unknowns `ρ²` and `ρ'/ρ` (parallel beam only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x2: Option<f64>,
}

/// Outcome of the azimuth search on one step.
#[derive(Debug, Clone)]
pub(crate) struct AzimuthSearch {
    /// Azimuth in `[0, π)`.
    pub phi: f64,
    /// Unknowns at `phi`, already adjusted for wrapping.
    pub x: DVector<f64>,
    pub residual: f64,
    pub ratio: f64,
    /// Grid residuals.
    pub profile: Vec<(f64, f64)>,
    pub solution: LstsqSolution,
    /// Largest singular value of any grid system.
    pub sigma_scale: f64,
}

/// Real-stacked least-squares rows `Σ_c A[j][c] x_c ≈ b[j]` for complex data.
pub(crate) fn stack(cols: &[Vec<C>], rhs: &[C]) -> (DMatrix<f64>, DVector<f64>) {
    let n = rhs.len();
    let mut a = DMatrix::zeros(2 * n, cols.len());
    let mut b = DVector::zeros(2 * n);
    for j in 0..n {
        for (c, col) in cols.iter().enumerate() {
            a[(2 * j, c)] = col[j].re;
            a[(2 * j + 1, c)] = col[j].im;
        }
        b[2 * j] = rhs[j].re;
        b[2 * j + 1] = rhs[j].im;
    }
    (a, b)
}

pub(crate) fn unit(phi: f64) -> (Vector2<f64>, Vector2<f64>) {
    let (s, c) = phi.sin_cos();
    (Vector2::new(c, s), Vector2::new(-s, c))
}

/// Grid search plus golden-section refinement of the lowest grid minima.
///
/// `system(φ)` returns the stacked system for one candidate. `flip` lists the
/// unknowns that change sign when `φ` moves by `π`.
pub(crate) fn azimuth_search<F>(system: F, flip: &[usize], cfg: &SolverConfig) -> Result<AzimuthSearch>
where
    F: Fn(f64) -> Result<(DMatrix<f64>, DVector<f64>)>,
{
    let n = cfg.phi_grid;
    let step = std::f64::consts::PI / n as f64;
    let mut grid = Vec::with_capacity(n);
    for j in 0..n {
        let phi = j as f64 * step;
        let (a, b) = system(phi)?;
        let bn = b.norm();
        let sol = lstsq(&a, &b, 1e-13);
        grid.push((phi, sol, bn));
    }
    let scale = grid.iter().map(|g| g.2).fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let sigma_scale = grid
        .iter()
        .map(|g| g.1.singular_values.iter().cloned().fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let profile: Vec<(f64, f64)> = grid.iter().map(|g| (g.0, g.1.residual / scale)).collect();

    // Local minima of the circular grid profile, lowest first.
    let r = |i: usize| profile[i % n].1;
    let mut basins: Vec<usize> = (0..n).filter(|&i| r(i) <= r(i + n - 1) && r(i) <= r(i + 1)).collect();
    basins.sort_by(|&i, &j| r(i).total_cmp(&r(j)));
    basins.truncate(REFINED_BASINS);

    let mut refined = Vec::with_capacity(basins.len());
    for &b in &basins {
        let mut failure = None;
        let (phi_r, _) = golden_section(
            |phi| match system(phi) {
                Ok((a, b)) => lstsq(&a, &b, 1e-13).residual / scale,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::INFINITY
                }
            },
            profile[b].0 - step,
            profile[b].0 + step,
            cfg.refine_iters,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let (a, rhs) = system(phi_r)?;
        let sol = lstsq(&a, &rhs, 1e-13);
        if grid[b].1.residual <= sol.residual {
            refined.push((grid[b].0, grid[b].1.clone()));
        } else {
            refined.push((phi_r, sol));
        }
    }
    refined.sort_by(|x, y| x.1.residual.total_cmp(&y.1.residual));
    let (mut phi, sol) = refined[0].clone();
    let residual = sol.residual / scale;
    let pi = std::f64::consts::PI;
    let same_basin = |p: f64| {
        let d = (p - phi).rem_euclid(pi);
        d.min(pi - d) <= 1.5 * step
    };
    let second = refined[1..]
        .iter()
        .filter(|(p, _)| !same_basin(*p))
        .map(|(_, s)| s.residual / scale)
        .fold(f64::INFINITY, f64::min);

    let mut x = sol.x.clone();
    if phi < 0.0 || phi >= pi {
        phi = phi.rem_euclid(pi);
        for &i in flip {
            x[i] = -x[i];
        }
    }
    let ratio = if residual > 0.0 {
        second / residual
    } else {
        f64::INFINITY
    };
    Ok(AzimuthSearch {
        phi,
        x,
        residual,
        ratio,
        profile,
        solution: sol,
        sigma_scale,
    })
}

/// Largest `‖b‖` over the azimuth grid, the normalization of all residuals.
pub(crate) fn data_scale<F>(system: F, cfg: &SolverConfig) -> Result<f64>
where
    F: Fn(f64) -> Result<(DMatrix<f64>, DVector<f64>)>,
{
    let step = std::f64::consts::PI / cfg.phi_grid as f64;
    let mut scale: f64 = 0.0;
    for j in 0..cfg.phi_grid {
        scale = scale.max(system(j as f64 * step)?.1.norm());
    }
    Ok(if scale > 0.0 { scale } else { 1.0 })
}

/// `ω = (ρφ, ζ)` from cylindrical components.
pub(crate) fn omega_from(phi: f64, rho: f64, zeta: f64) -> Vector3<f64> {
    Vector3::new(rho * phi.cos(), rho * phi.sin(), zeta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stacking_splits_real_and_imaginary_parts() {
        let (a, b) = stack(&[vec![C::new(1.0, 2.0)], vec![C::new(3.0, 4.0)]], &[C::new(5.0, 6.0)]);
        assert_eq!(a.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(b.as_slice(), &[5.0, 6.0]);
    }

    #[test]
    fn search_finds_wrapped_azimuth() {
        // Residual zero exactly at φ = 0.3 + π·k with x = (ρ) flipping sign.
        let target: f64 = 0.3;
        let sys = |phi: f64| {
            let (u, _) = unit(phi);
            let (t, _) = unit(target);
            let a = DMatrix::from_row_slice(2, 1, &[u.x, u.y]);
            let b = DVector::from_row_slice(&[2.0 * t.x, 2.0 * t.y]);
            Ok((a, b))
        };
        let s = azimuth_search(sys, &[0], &SolverConfig::analytic()).unwrap();
        assert!((s.phi - target).abs() < 1e-10, "{}", s.phi);
        assert!((s.x[0] - 2.0).abs() < 1e-10);
        assert!(s.residual < 1e-10);
    }

    #[test]
    fn rejects_small_grid() {
        let cfg = SolverConfig {
            phi_grid: 4,
            ..SolverConfig::analytic()
        };
        assert!(cfg.validate().is_err());
    }
}
