//! Recovery of the rotation of an object from diffraction-tomography or
//! parallel-beam measurements of its Fourier transform.

pub mod error;
pub mod experiment;
pub mod forward;
pub mod motion;
pub mod numerics;
pub mod phantom;
pub mod recovery;
pub mod so3;
pub mod sweep;

pub use error::{Error, Result};
