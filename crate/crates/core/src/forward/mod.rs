//! Forward models for diffraction tomography (DT) and parallel-beam (PB)
//! tomography of a rotating object, and the derivative jets of the data.
//!
//! DT data are `m̂(t,k) = f̂(R(t)(k, h(‖k‖)))` with
//! `h(μ) = √(k₀² − μ²) − k₀`; PB data are `m̂(t,k) = f̂(R(t)(k, 0))`, the
//! Fourier-slice constant `√(2π)` being dropped.

mod measurement;
mod stencil;
mod voxel;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::{Motion, RotationState, Trajectory};
use crate::phantom::Spectral;

pub use measurement::{
    add_noise, measure_grid, sha256_hex, verify_common_line, KGrid, MeasurementHeader, MeasurementSet, NoiseRecord,
    SampledJets, MEASUREMENT_FORMAT_VERSION,
};
pub use stencil::StencilJets;
pub use voxel::{ingest_voxels, VoxelSpectrum};

type C = Complex64;

/// Largest usable DT frequency as a fraction of `k₀`.
pub const DT_BAND_FRACTION: f64 = 0.9;

/// `h(μ) = √(k₀² − μ²) − k₀`.
pub fn dt_height(k0: f64, mu: f64) -> f64 {
    (k0 * k0 - mu * mu).sqrt() - k0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Model {
    Dt { k0: f64 },
    Pb,
}

impl Model {
    pub fn validate(&self) -> Result<()> {
        if let Model::Dt { k0 } = self {
            if !(*k0 > 0.0 && k0.is_finite()) {
                return Err(Error::invalid("k0 must be positive"));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Dt { .. } => "dt",
            Model::Pb => "pb",
        }
    }
}

/// Deliberate defects for exercising the verification suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Flip the sign of the DT hemisphere height `h`.
    FlipDtHeight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Backend {
    Analytic,
    /// Central differences of re-measured data: second order in `t`, fourth
    /// order in `k`.
    FiniteDifference {
        dt: f64,
        dk: f64,
    },
}

/// Model, radial sampling of the frequency lines, and derivative backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model: Model,
    /// Number of `μ` (DT) or `λ` (PB) samples per frequency line.
    pub radial_samples: usize,
    /// PB line half-length `Λ`; DT lines always span `(−0.9 k₀, 0.9 k₀)`.
    pub lambda_max: f64,
    pub backend: Backend,
    #[serde(skip)]
    pub fault: Option<Fault>,
}

impl ModelConfig {
    pub fn new(model: Model, radial_samples: usize, lambda_max: f64, backend: Backend) -> Result<Self> {
        let c = ModelConfig {
            model,
            radial_samples,
            lambda_max,
            backend,
            fault: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.radial_samples < 2 {
            return Err(Error::invalid("need at least two radial samples"));
        }
        if matches!(self.model, Model::Pb) && !(self.lambda_max > 0.0) {
            return Err(Error::invalid("lambda_max must be positive"));
        }
        if let Backend::FiniteDifference { dt, dk } = self.backend {
            if !(dt > 0.0 && dk > 0.0) {
                return Err(Error::invalid("finite-difference steps must be positive"));
            }
        }
        Ok(())
    }

    /// Midpoint samples along a line: `μ ∈ (−0.9k₀, 0.9k₀)` or `λ ∈ (−Λ, Λ)`.
    pub fn radial_nodes(&self) -> Vec<f64> {
        let half = match self.model {
            Model::Dt { k0 } => DT_BAND_FRACTION * k0,
            Model::Pb => self.lambda_max,
        };
        let n = self.radial_samples;
        (0..n)
            .map(|j| -half + 2.0 * half * (j as f64 + 0.5) / n as f64)
            .collect()
    }

    pub(crate) fn height(&self, mu: f64) -> f64 {
        match self.model {
            Model::Dt { k0 } => {
                let h = dt_height(k0, mu);
                if self.fault == Some(Fault::FlipDtHeight) {
                    -h
                } else {
                    h
                }
            }
            Model::Pb => 0.0,
        }
    }

    pub(crate) fn check_band(&self, k: &Vector2<f64>) -> Result<()> {
        if let Model::Dt { k0 } = self.model {
            if k.norm() >= k0 {
                return Err(Error::OutOfBand(format!("‖k‖ = {} ≥ k0 = {k0}", k.norm())));
            }
        }
        Ok(())
    }
}

/// The lift `K(k)` into frequency space and its derivatives in `k`.
#[derive(Debug, Clone, Copy)]
struct Lift {
    k: Vector3<f64>,
    d1: [Vector3<f64>; 2],
    d2: [[Vector3<f64>; 2]; 2],
    d3: [[[Vector3<f64>; 2]; 2]; 2],
}

fn lift(cfg: &ModelConfig, k: &Vector2<f64>) -> Lift {
    let e = |a: usize| if a == 0 { Vector3::x() } else { Vector3::y() };
    let h = cfg.height(k.norm());
    let mut l = Lift {
        k: Vector3::new(k.x, k.y, h),
        d1: [e(0), e(1)],
        d2: [[Vector3::zeros(); 2]; 2],
        d3: [[[Vector3::zeros(); 2]; 2]; 2],
    };
    if let Model::Dt { k0 } = cfg.model {
        let sign = if cfg.fault == Some(Fault::FlipDtHeight) {
            -1.0
        } else {
            1.0
        };
        let s = (k0 * k0 - k.norm_squared()).sqrt();
        let (s3, s5) = (s.powi(3), s.powi(5));
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for a in 0..2 {
            l.d1[a].z = -sign * k[a] / s;
            for b in 0..2 {
                l.d2[a][b].z = sign * (-d(a, b) / s - k[a] * k[b] / s3);
                for c in 0..2 {
                    l.d3[a][b][c].z = sign
                        * (-(d(a, b) * k[c] + d(a, c) * k[b] + d(b, c) * k[a]) / s3 - 3.0 * k[a] * k[b] * k[c] / s5);
                }
            }
        }
    }
    l
}

/// `m̂` at one `(t, k)` from the rotation `R(t)`.
pub fn measure(obj: &dyn Spectral, r: &Matrix3<f64>, cfg: &ModelConfig, k: &Vector2<f64>) -> Result<C> {
    cfg.check_band(k)?;
    let l = lift(cfg, k);
    Ok(obj.spectral(&(r * l.k), 0).value)
}

/// How many derivatives a jet carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum JetOrder {
    /// `value`, `dt`, `grad_k`.
    First,
    /// Everything, including third `k` derivatives and mixed `t` derivatives.
    Third,
}

/// Derivatives of `m̂(t, k)` at one `(t, k)`. Fields beyond the requested
/// [`JetOrder`] are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementJet {
    pub value: C,
    pub dt: C,
    pub grad_k: Vector2<C>,
    pub hess_k: Matrix2<C>,
    /// `third_k[a][(b, c)] = ∂_a ∂_b ∂_c m̂`.
    pub third_k: [Matrix2<C>; 2],
    pub dt_grad_k: Vector2<C>,
    pub dt_hess_k: Matrix2<C>,
    pub dtt_grad_k: Vector2<C>,
}

impl Default for MeasurementJet {
    fn default() -> Self {
        MeasurementJet {
            value: C::new(0.0, 0.0),
            dt: C::new(0.0, 0.0),
            grad_k: Vector2::zeros(),
            hess_k: Matrix2::zeros(),
            third_k: [Matrix2::zeros(); 2],
            dt_grad_k: Vector2::zeros(),
            dt_hess_k: Matrix2::zeros(),
            dtt_grad_k: Vector2::zeros(),
        }
    }
}

fn form1(g: &Vector2<C>, u: &Vector2<f64>) -> C {
    g[0] * u[0] + g[1] * u[1]
}

fn form2(h: &Matrix2<C>, u: &Vector2<f64>, v: &Vector2<f64>) -> C {
    let mut s = C::new(0.0, 0.0);
    for a in 0..2 {
        for b in 0..2 {
            s += h[(a, b)] * (u[a] * v[b]);
        }
    }
    s
}

impl MeasurementJet {
    pub fn d1(&self, u: &Vector2<f64>) -> C {
        form1(&self.grad_k, u)
    }

    pub fn d2(&self, u: &Vector2<f64>, v: &Vector2<f64>) -> C {
        form2(&self.hess_k, u, v)
    }

    pub fn d3(&self, u: &Vector2<f64>, v: &Vector2<f64>, w: &Vector2<f64>) -> C {
        (0..2).map(|a| form2(&self.third_k[a], v, w) * u[a]).sum()
    }

    pub fn dt_d1(&self, u: &Vector2<f64>) -> C {
        form1(&self.dt_grad_k, u)
    }

    pub fn dt_d2(&self, u: &Vector2<f64>, v: &Vector2<f64>) -> C {
        form2(&self.dt_hess_k, u, v)
    }

    pub fn dtt_d1(&self, u: &Vector2<f64>) -> C {
        form1(&self.dtt_grad_k, u)
    }
}

/// Source of measurement jets on a time grid.
pub trait JetProvider: Sync {
    fn config(&self) -> &ModelConfig;

    fn times(&self) -> &[f64];

    fn jet(&self, t_index: usize, k: &Vector2<f64>, order: JetOrder) -> Result<MeasurementJet>;

    fn value(&self, t_index: usize, k: &Vector2<f64>) -> Result<C> {
        Ok(self.jet(t_index, k, JetOrder::First)?.value)
    }
}

/// Chain-rule jet from the rotation state and the spectral jet of `f̂`.
pub fn analytic_jet(
    obj: &dyn Spectral,
    state: &RotationState,
    cfg: &ModelConfig,
    k: &Vector2<f64>,
    order: JetOrder,
) -> Result<MeasurementJet> {
    cfg.check_band(k)?;
    let l = lift(cfg, k);
    let (r, rd, rdd) = (&state.r, &state.r_dot, &state.r_ddot);
    let kap = r * l.k;
    let kd = rd * l.k;
    let e = [r * l.d1[0], r * l.d1[1]];
    let sorder = if order == JetOrder::First { 1 } else { 3 };
    let f = obj.spectral(&kap, sorder);
    let mut j = MeasurementJet {
        value: f.value,
        dt: f.d1(&kd),
        grad_k: Vector2::new(f.d1(&e[0]), f.d1(&e[1])),
        ..Default::default()
    };
    if order == JetOrder::First {
        return Ok(j);
    }
    let kdd = rdd * l.k;
    let ed = [rd * l.d1[0], rd * l.d1[1]];
    let edd = [rdd * l.d1[0], rdd * l.d1[1]];
    let e2 = |a: usize, b: usize| r * l.d2[a][b];
    let ed2 = |a: usize, b: usize| rd * l.d2[a][b];
    for a in 0..2 {
        j.dt_grad_k[a] = f.d2(&kd, &e[a]) + f.d1(&ed[a]);
        j.dtt_grad_k[a] = f.d3(&kd, &kd, &e[a]) + f.d2(&kdd, &e[a]) + f.d2(&kd, &ed[a]) * 2.0 + f.d1(&edd[a]);
        for b in 0..2 {
            j.hess_k[(a, b)] = f.d2(&e[a], &e[b]) + f.d1(&e2(a, b));
            j.dt_hess_k[(a, b)] = f.d3(&kd, &e[a], &e[b])
                + f.d2(&ed[a], &e[b])
                + f.d2(&e[a], &ed[b])
                + f.d2(&kd, &e2(a, b))
                + f.d1(&ed2(a, b));
            for c in 0..2 {
                j.third_k[a][(b, c)] = f.d3(&e[a], &e[b], &e[c])
                    + f.d2(&e2(a, b), &e[c])
                    + f.d2(&e2(a, c), &e[b])
                    + f.d2(&e2(b, c), &e[a])
                    + f.d1(&(r * l.d3[a][b][c]));
            }
        }
    }
    Ok(j)
}

/// Jets by the chain rule from a known object and motion.
pub struct AnalyticJets<'a> {
    pub object: &'a dyn Spectral,
    pub motion: &'a Motion,
    pub config: ModelConfig,
}

impl<'a> AnalyticJets<'a> {
    pub fn new(object: &'a dyn Spectral, motion: &'a Motion, config: ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(AnalyticJets { object, motion, config })
    }
}

impl JetProvider for AnalyticJets<'_> {
    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn times(&self) -> &[f64] {
        self.motion.times()
    }

    fn jet(&self, t_index: usize, k: &Vector2<f64>, order: JetOrder) -> Result<MeasurementJet> {
        if t_index >= self.motion.times().len() {
            return Err(Error::OutOfGrid(format!("time index {t_index}")));
        }
        analytic_jet(self.object, &self.motion.state(t_index), &self.config, k, order)
    }
}

/// Jets from whichever backend the configuration selects.
pub fn measurement_jet<'a>(
    object: &'a dyn Spectral,
    motion: &'a Motion,
    config: ModelConfig,
) -> Result<Box<dyn JetProvider + 'a>> {
    Ok(match config.backend {
        Backend::Analytic => Box::new(AnalyticJets::new(object, motion, config)?),
        Backend::FiniteDifference { .. } => Box::new(StencilJets::new(object, motion, config)?),
    })
}

/// `m̂` for a whole trajectory at one frequency, mainly for tests.
pub fn measure_series(obj: &dyn Spectral, traj: &Trajectory, cfg: &ModelConfig, k: &Vector2<f64>) -> Result<Vec<C>> {
    traj.rotation.iter().map(|r| measure(obj, r, cfg, k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn height_vanishes_at_zero_and_is_negative() {
        assert_eq!(dt_height(10.0, 0.0), 0.0);
        assert!(dt_height(10.0, 5.0) < 0.0);
    }

    #[test]
    fn lift_derivatives_match_finite_differences() {
        let cfg = ModelConfig::new(Model::Dt { k0: 7.0 }, 8, 1.0, Backend::Analytic).unwrap();
        let k = Vector2::new(1.3, -2.1);
        let h = 1e-5;
        let l = lift(&cfg, &k);
        for a in 0..2 {
            let mut dk = Vector2::zeros();
            dk[a] = h;
            let up = lift(&cfg, &(k + dk));
            let dn = lift(&cfg, &(k - dk));
            assert!(((up.k - dn.k) / (2.0 * h) - l.d1[a]).norm() < 1e-8);
            for b in 0..2 {
                assert!(((up.d1[b] - dn.d1[b]) / (2.0 * h) - l.d2[a][b]).norm() < 1e-8);
                for c in 0..2 {
                    assert!(((up.d2[b][c] - dn.d2[b][c]) / (2.0 * h) - l.d3[a][b][c]).norm() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn out_of_band_is_rejected() {
        let cfg = ModelConfig::new(Model::Dt { k0: 2.0 }, 8, 1.0, Backend::Analytic).unwrap();
        assert!(matches!(
            cfg.check_band(&Vector2::new(2.0, 0.1)),
            Err(Error::OutOfBand(_))
        ));
    }

    #[test]
    fn radial_nodes_stay_inside_band() {
        let cfg = ModelConfig::new(Model::Dt { k0: 10.0 }, 16, 1.0, Backend::Analytic).unwrap();
        let nodes = cfg.radial_nodes();
        assert!(nodes.iter().all(|m| m.abs() < 9.0));
        assert!((nodes[0] + nodes[15]).abs() < 1e-14);
    }
}
