//! Common-line solvers for parallel-beam data.
//!
//! First order: along `k = λφ_ω`, `∂_t m̂ = ζ ⟨∇_k m̂, λφ_ω^⊥⟩`, which fixes
//! `φ_ω` and `ζ_ω` unless `ρ_ω = 0`. Third order: with `φ_ω, ζ_ω` and their
//! time derivatives known, `a₀₂ X₁ + a₁ X₂ = −a₀` for `X₁ = ρ²`,
//! `X₂ = ρ'/ρ`.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{azimuth_search, data_scale, stack, unit, Ambiguity, SolverConfig, C};
use crate::error::{Error, Result};
use crate::forward::{JetOrder, JetProvider, Model};
use crate::numerics::{fornberg_weights, lstsq, nearest_branch, stencil_window};
use crate::phantom::Spectral;
use crate::so3::{azimuth_rate, radius_rate, to_cylindrical};

fn require_pb(jets: &dyn JetProvider) -> Result<()> {
    match jets.config().model {
        Model::Pb => Ok(()),
        Model::Dt { .. } => Err(Error::Mismatch("common-line solver needs PB data".into())),
    }
}

/// Stacked first-order system in `ζ` for one azimuth.
fn line_system(jets: &dyn JetProvider, t_index: usize, phi: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let (u, up) = unit(phi);
    let nodes = jets.config().radial_nodes();
    let (mut col, mut rhs) = (Vec::with_capacity(nodes.len()), Vec::with_capacity(nodes.len()));
    for &lam in &nodes {
        let j = jets.jet(t_index, &(u * lam), JetOrder::First)?;
        col.push(j.d1(&(up * lam)));
        rhs.push(j.dt);
    }
    Ok(stack(&[col], &rhs))
}

/// Result of the first-order step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PbFirstOrder {
    /// Azimuth in `[0, π)`; zero for a `ρ = 0` family.
    pub phi: f64,
    pub zeta: f64,
    pub residual: f64,
    pub ambiguity: Ambiguity,
    pub condition: f64,
    pub ratio: f64,
}

pub fn pb_first_order_step(jets: &dyn JetProvider, t_index: usize, cfg: &SolverConfig) -> Result<PbFirstOrder> {
    cfg.validate()?;
    require_pb(jets)?;
    let sys = |phi: f64| line_system(jets, t_index, phi);
    let s = azimuth_search(sys, &[], cfg)?;
    if s.residual > cfg.sanity_bound {
        return Err(Error::NoSolution(format!(
            "step {t_index}: best normalized residual {:.3e} exceeds {}",
            s.residual, cfg.sanity_bound
        )));
    }
    if s.profile.iter().all(|p| p.1 <= cfg.residual_tol) {
        // Every azimuth fits: solve for the common ζ jointly.
        let step = std::f64::consts::PI / cfg.phi_grid as f64;
        let (mut rows, mut rhs) = (Vec::new(), Vec::new());
        for j in 0..cfg.phi_grid {
            let (a, b) = sys(j as f64 * step)?;
            rows.extend(a.iter().cloned());
            rhs.extend(b.iter().cloned());
        }
        let a = DMatrix::from_column_slice(rows.len(), 1, &rows);
        let sol = lstsq(&a, &DVector::from_vec(rhs), 1e-13);
        return Ok(PbFirstOrder {
            phi: 0.0,
            zeta: sol.x[0],
            residual: s.residual,
            ambiguity: Ambiguity::RhoZeroFamily,
            condition: sol.condition(),
            ratio: 1.0,
        });
    }
    let smax = s.solution.singular_values.iter().cloned().fold(0.0, f64::max);
    let ambiguity = if smax <= cfg.residual_tol * s.sigma_scale || s.ratio < cfg.ambiguity_ratio {
        Ambiguity::Degenerate
    } else {
        Ambiguity::Unique
    };
    Ok(PbFirstOrder {
        phi: s.phi,
        zeta: s.x[0],
        residual: s.residual,
        ambiguity,
        condition: s.solution.condition(),
        ratio: s.ratio,
    })
}

/// Residual of the first-order equation at a given `ω`, normalized by the
/// largest `‖∂_t m̂‖` over the azimuth grid.
pub fn pb_equation_residual(
    jets: &dyn JetProvider,
    t_index: usize,
    omega: &Vector3<f64>,
    cfg: &SolverConfig,
) -> Result<f64> {
    require_pb(jets)?;
    let c = to_cylindrical(omega);
    let (a, b) = line_system(jets, t_index, c.phi)?;
    let r = (&a * DVector::from_row_slice(&[c.zeta]) - &b).norm();
    Ok(r / data_scale(|phi| line_system(jets, t_index, phi), cfg)?)
}

/// Residual of the best `ζ` for each grid azimuth.
pub fn pb_phi_profile(jets: &dyn JetProvider, t_index: usize, cfg: &SolverConfig) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    require_pb(jets)?;
    Ok(azimuth_search(|phi| line_system(jets, t_index, phi), &[], cfg)?.profile)
}

/// First-order quantities with their time derivatives at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderState {
    /// Azimuth, continued in time (not reduced to `[0, π)`).
    pub phi: f64,
    pub zeta: f64,
    pub phi_dot: f64,
    pub zeta_dot: f64,
}

/// Azimuths continued modulo `π` so consecutive values differ by less than `π/2`.
pub(crate) fn unwrap_azimuth(phis: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(phis.len());
    for &p in phis {
        let v = match out.last() {
            Some(&prev) => nearest_branch(p, prev, std::f64::consts::PI).0,
            None => p,
        };
        out.push(v);
    }
    out
}

/// `φ, ζ, φ', ζ'` at step `i` from the first-order series on the whole grid.
pub fn first_order_state(
    times: &[f64],
    series: &[PbFirstOrder],
    i: usize,
    cfg: &SolverConfig,
) -> Result<FirstOrderState> {
    let n = times.len();
    if series.len() != n || i >= n {
        return Err(Error::invalid("first-order series does not match the time grid"));
    }
    let w = cfg.derivative_width;
    let win = stencil_window(i, n, w)
        .ok_or_else(|| Error::InsufficientStencil(format!("{n} steps cannot support a {w}-point stencil")))?;
    if !cfg.one_sided_boundary && (i < w / 2 || i + (w - 1) / 2 >= n) {
        return Err(Error::InsufficientStencil(format!(
            "step {i} is too close to the end of the grid"
        )));
    }
    let raw: Vec<f64> = series[win.clone()].iter().map(|s| s.phi).collect();
    // Continue the azimuth from the window's own start; only differences matter.
    let phis = unwrap_azimuth(&raw);
    let weights = fornberg_weights(times[i], &times[win.clone()], 1);
    let phi_dot: f64 = weights[1].iter().zip(&phis).map(|(c, v)| c * v).sum();
    let zeta_dot: f64 = weights[1]
        .iter()
        .zip(&series[win.clone()])
        .map(|(c, s)| c * s.zeta)
        .sum();
    let phi = phis[i - win.start];
    Ok(FirstOrderState {
        phi,
        zeta: series[i].zeta,
        phi_dot,
        zeta_dot,
    })
}

/// `a₀, a₀₂, a₁` at one `λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub lambda: f64,
    pub a0: C,
    pub a02: C,
    pub a1: C,
}

/// Third-order coefficient rows over the `λ` grid at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientRows {
    pub rows: Vec<Coefficients>,
    /// `ζ + φ'`, the factor multiplying the whole third-order equation.
    pub scale: f64,
}

/// Measurement-space coefficients at one `λ`.
pub fn pb_coefficients_at(
    jets: &dyn JetProvider,
    t_index: usize,
    s: &FirstOrderState,
    lam: f64,
) -> Result<Coefficients> {
    require_pb(jets)?;
    let (phi, phip) = unit(s.phi);
    let (z, zd, pd) = (s.zeta, s.zeta_dot, s.phi_dot);
    let u = phi * lam;
    let v = phip * lam;
    let j = jets.jet(t_index, &u, JetOrder::Third)?;
    let a0 = j.d3(&v, &v, &v) * (z * (z - pd))
        + j.d2(&v, &(u * (z * pd) - v * zd)) * 2.0
        + j.d1(&(v * (z * z) + u * zd)) * 2.0
        - j.dt_d2(&v, &v) * (3.0 * z - pd)
        + j.dtt_d1(&v) * 2.0;
    let a02 = j.d1(&v) * 2.0;
    let a1 = (j.d2(&v, &v) * z - j.d1(&u) * z - j.dt_d1(&v)) * 2.0;
    Ok(Coefficients {
        lambda: lam,
        a0,
        a02,
        a1,
    })
}

/// Measurement-space coefficients over the configured `λ` grid.
pub fn pb_coefficients(jets: &dyn JetProvider, t_index: usize, state: &FirstOrderState) -> Result<CoefficientRows> {
    require_pb(jets)?;
    let rows = jets
        .config()
        .radial_nodes()
        .into_iter()
        .map(|lam| pb_coefficients_at(jets, t_index, state, lam))
        .collect::<Result<Vec<_>>>()?;
    Ok(CoefficientRows {
        rows,
        scale: state.zeta + state.phi_dot,
    })
}

/// The same coefficients from the object and the true motion, using the
/// frame `ẽ₁ = R(φ,0)`, `ẽ₂ = R(φ^⊥,0)`, `ẽ₃ = R e₃`.
pub fn object_space_coefficients(
    obj: &dyn Spectral,
    r: &Matrix3<f64>,
    omega: &Vector3<f64>,
    omega_dot: &Vector3<f64>,
    lambda: f64,
) -> Coefficients {
    let c = to_cylindrical(omega);
    let rho_dot = radius_rate(omega, omega_dot);
    let (phi, phip) = unit(c.phi);
    let e1 = r * Vector3::new(phi.x, phi.y, 0.0);
    let e2 = r * Vector3::new(phip.x, phip.y, 0.0);
    let e3 = r * Vector3::z();
    let f = obj.spectral(&(e1 * lambda), 1);
    let g2 = f.d1(&(e2 * lambda));
    let g3 = f.d1(&(e3 * lambda));
    Coefficients {
        lambda,
        a0: g3 * (2.0 * rho_dot) - g2 * (2.0 * c.rho * c.rho),
        a02: g2 * 2.0,
        a1: g3 * (-2.0 * c.rho),
    }
}

/// Solution of the third-order system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThirdOrder {
    /// `ρ²`.
    pub x1: f64,
    /// `ρ'/ρ`.
    pub x2: f64,
    /// Singular-value ratio of the system including the factor `ζ + φ'`.
    pub condition: f64,
    pub degenerate: bool,
}

/// Least squares for `(X₁, X₂)`. The reported condition is
/// `σ_max / (|ζ + φ'| σ_min)`: the equation carries the factor `ζ + φ'`, so
/// it loses all information as that factor vanishes.
pub fn pb_third_order_step(rows: &CoefficientRows, cfg: &SolverConfig) -> Result<ThirdOrder> {
    if rows.rows.len() < 2 {
        return Err(Error::InsufficientData(
            "third-order step needs at least two rows".into(),
        ));
    }
    let a02: Vec<C> = rows.rows.iter().map(|r| r.a02).collect();
    let a1: Vec<C> = rows.rows.iter().map(|r| r.a1).collect();
    let rhs: Vec<C> = rows.rows.iter().map(|r| -r.a0).collect();
    let (a, b) = stack(&[a02, a1], &rhs);
    let sol = lstsq(&a, &b, 1e-14);
    let condition = sol.condition() / rows.scale.abs();
    let condition = if condition.is_finite() {
        condition
    } else {
        f64::INFINITY
    };
    let degenerate = condition > cfg.condition_max;
    let (x1, x2) = (sol.x[0], sol.x[1]);
    if !degenerate && x1 < -cfg.residual_tol.sqrt() {
        return Err(Error::ModelViolation(format!("recovered ρ² = {x1:.3e} is negative")));
    }
    Ok(ThirdOrder {
        x1,
        x2,
        condition,
        degenerate,
    })
}

/// `φ'` of a true angular velocity, or zero when `ρ = 0`.
pub(crate) fn true_phi_rate(omega: &Vector3<f64>, omega_dot: &Vector3<f64>) -> f64 {
    azimuth_rate(omega, omega_dot).unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unwrap_keeps_steps_below_half_period() {
        let pi = std::f64::consts::PI;
        let u = unwrap_azimuth(&[pi - 0.05, 0.02, 0.1, pi - 0.01]);
        assert!((u[1] - (pi + 0.02)).abs() < 1e-15);
        assert!((u[3] - (pi - 0.01)).abs() < 1e-15);
    }

    #[test]
    fn third_order_needs_two_rows() {
        let rows = CoefficientRows {
            rows: vec![Coefficients {
                lambda: 1.0,
                a0: C::new(1.0, 0.0),
                a02: C::new(1.0, 0.0),
                a1: C::new(0.0, 1.0),
            }],
            scale: 1.0,
        };
        assert!(matches!(
            pb_third_order_step(&rows, &SolverConfig::analytic()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn negative_rho_squared_is_a_model_violation() {
        let row = |l: f64| Coefficients {
            lambda: l,
            a0: C::new(l, 0.0),
            a02: C::new(1.0, 0.0),
            a1: C::new(0.0, l),
        };
        let rows = CoefficientRows {
            rows: vec![row(1.0), row(2.0)],
            scale: 1.0,
        };
        // a0 = λ, a02 = 1 ⇒ X₁ = −λ has no consistent solution; least squares gives X₁ < 0.
        assert!(matches!(
            pb_third_order_step(&rows, &SolverConfig::analytic()),
            Err(Error::ModelViolation(_))
        ));
    }
}
