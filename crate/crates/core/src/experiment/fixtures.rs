//! Small reference objects and motions shared by the verification suites,
//! the tests and the browser demo.

use nalgebra::Vector3;

use crate::error::Result;
use crate::forward::{Backend, Model, ModelConfig};
use crate::motion::{Motion, MotionSpec, Profile, TimeGrid};
use crate::phantom::{generate_asymmetric_pointset, BlobProfile, Phantom, Placement};

pub const SUPPORT_RADIUS: f64 = 1.0;
pub const PLACEMENT_RADIUS: f64 = 0.5;
pub const BLOB_SIGMA: f64 = 0.08;
pub const DT_K0: f64 = 10.0;
pub const PB_LAMBDA_MAX: f64 = 8.0;
pub const RADIAL_SAMPLES: usize = 24;

/// Balanced Gaussian-blob phantom on a generated asymmetric point set.
pub fn gaussian_phantom(n: usize, seed: u64) -> Result<Phantom> {
    let p = generate_asymmetric_pointset(
        n,
        seed,
        Placement::Ball {
            radius: PLACEMENT_RADIUS,
        },
    )?;
    Phantom::balanced(p, BlobProfile::Gaussian { sigma: BLOB_SIGMA }, SUPPORT_RADIUS)
}

/// Smooth nonconstant `ω` with `ρ` away from zero and `ζ + φ' > 0` on `[0, 1]`.
pub fn smooth_motion() -> MotionSpec {
    MotionSpec::AnalyticOmega {
        omega: [
            Profile::constant(0.6).with_sine(0.2, 2.0, 0.0),
            Profile::constant(0.3).with_sine(0.1, 3.0, 1.0),
            Profile {
                poly: vec![1.0, 0.3],
                sines: vec![],
            },
        ],
    }
}

pub fn constant_motion(w: Vector3<f64>) -> MotionSpec {
    MotionSpec::AnalyticOmega {
        omega: [Profile::constant(w.x), Profile::constant(w.y), Profile::constant(w.z)],
    }
}

/// `R(t) = R_v(ρ(t)) R_{e₃}(ζ(t))`, degenerate at every instant.
pub fn degenerate_motion() -> MotionSpec {
    MotionSpec::Composite {
        axis: [0.8, 0.6, 0.0],
        rho: Profile {
            poly: vec![0.0, 0.7, 0.2],
            sines: vec![],
        },
        zeta: Profile {
            poly: vec![0.0, 1.1],
            sines: vec![[0.2, 2.0, 0.0]],
        },
    }
}

pub fn unit_motion(spec: MotionSpec, n_steps: usize) -> Result<Motion> {
    Motion::new(spec, TimeGrid::new(0.0, 1.0, n_steps)?)
}

pub fn dt_config(backend: Backend) -> ModelConfig {
    ModelConfig::new(Model::Dt { k0: DT_K0 }, RADIAL_SAMPLES, 0.0, backend).expect("valid DT config")
}

pub fn pb_config(backend: Backend) -> ModelConfig {
    ModelConfig::new(Model::Pb, RADIAL_SAMPLES, PB_LAMBDA_MAX, backend).expect("valid PB config")
}
