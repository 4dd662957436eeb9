//! Voxel grids: rasterization, first-moment removal and raw I/O.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::Phantom;
use crate::error::{Error, Result};

pub const VOXEL_FORMAT_VERSION: u32 = 1;
/// Radius of the moment-correction bump as a fraction of the support radius.
pub const BUMP_FRACTION: f64 = 0.4;

/// Sidecar header describing a raw voxel payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelHeader {
    pub format_version: u32,
    /// `[nx, ny, nz]`; the payload is x-fastest.
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    /// Position of voxel `(0, 0, 0)`.
    pub origin: [f64; 3],
    pub support_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub header: VoxelHeader,
    pub data: Vec<f64>,
}

impl VoxelGrid {
    pub fn new(
        dims: [usize; 3],
        spacing: [f64; 3],
        origin: [f64; 3],
        support_radius: f64,
        data: Vec<f64>,
    ) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) || spacing.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::invalid("voxel grid needs positive dimensions and spacing"));
        }
        if data.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::invalid(format!(
                "voxel payload has {} values, expected {}",
                data.len(),
                dims[0] * dims[1] * dims[2]
            )));
        }
        Ok(VoxelGrid {
            header: VoxelHeader {
                format_version: VOXEL_FORMAT_VERSION,
                dims,
                spacing,
                origin,
                support_radius,
            },
            data,
        })
    }

    /// Cubic grid of `n³` voxels covering `[-half, half]³`.
    pub fn centered(n: usize, half: f64, support_radius: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("grid needs at least two voxels per axis"));
        }
        let h = 2.0 * half / (n - 1) as f64;
        VoxelGrid::new([n; 3], [h; 3], [-half; 3], support_radius, vec![0.0; n * n * n])
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let [nx, ny, _] = self.header.dims;
        i + nx * (j + ny * k)
    }

    pub fn position(&self, i: usize, j: usize, k: usize) -> Vector3<f64> {
        let h = self.header.spacing;
        let o = self.header.origin;
        Vector3::new(o[0] + i as f64 * h[0], o[1] + j as f64 * h[1], o[2] + k as f64 * h[2])
    }

    pub fn cell_volume(&self) -> f64 {
        self.header.spacing.iter().product()
    }

    fn for_each(&self, mut f: impl FnMut(usize, Vector3<f64>)) {
        let [nx, ny, nz] = self.header.dims;
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    f(self.index(i, j, k), self.position(i, j, k));
                }
            }
        }
    }

    /// `∫ x f(x) dx` by the voxel sum.
    pub fn first_moments(&self) -> Vector3<f64> {
        let mut m = Vector3::zeros();
        self.for_each(|idx, x| m += x * self.data[idx]);
        m * self.cell_volume()
    }

    /// Largest `|x|` of a nonzero voxel.
    pub fn support_extent(&self) -> f64 {
        let mut r: f64 = 0.0;
        self.for_each(|idx, x| {
            if self.data[idx] != 0.0 {
                r = r.max(x.norm());
            }
        });
        r
    }

    /// Write `<stem>.raw` (little-endian f64) and `<stem>.json` header.
    pub fn save(&self, stem: &Path) -> Result<(PathBuf, PathBuf)> {
        let raw = stem.with_extension("raw");
        let hdr = stem.with_extension("json");
        let mut bytes = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&raw, bytes).map_err(|e| Error::io(&raw, e))?;
        let text = serde_json::to_string_pretty(&self.header).expect("header serializes");
        std::fs::write(&hdr, text).map_err(|e| Error::io(&hdr, e))?;
        Ok((raw, hdr))
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let raw = stem.with_extension("raw");
        let hdr = stem.with_extension("json");
        let text = std::fs::read_to_string(&hdr).map_err(|e| Error::io(&hdr, e))?;
        let header: VoxelHeader = serde_json::from_str(&text)
            .map_err(|e| Error::Schema(format!("voxel header line {} column {}: {e}", e.line(), e.column())))?;
        if header.format_version != VOXEL_FORMAT_VERSION {
            return Err(Error::Schema(format!("voxel format version {}", header.format_version)));
        }
        let bytes = std::fs::read(&raw).map_err(|e| Error::io(&raw, e))?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Corrupt(format!(
                "{} is not a multiple of 8 bytes",
                raw.display()
            )));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        VoxelGrid::new(header.dims, header.spacing, header.origin, header.support_radius, data)
            .map_err(|e| Error::Corrupt(e.to_string()))
    }
}

/// Point-sample a phantom on a grid.
pub fn rasterize(ph: &Phantom, dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<VoxelGrid> {
    let mut g = VoxelGrid::new(
        dims,
        spacing,
        origin,
        ph.support_radius,
        vec![0.0; dims[0] * dims[1] * dims[2]],
    )?;
    let mut data = std::mem::take(&mut g.data);
    g.for_each(|idx, x| data[idx] = ph.eval(&x));
    g.data = data;
    Ok(g)
}

fn bump(x: &Vector3<f64>, r: f64) -> f64 {
    let s = x.norm_squared() / (r * r);
    if s >= 1.0 {
        0.0
    } else {
        (1.0 - s).powi(3)
    }
}

/// Remove the first moments of a grid by subtracting `Σ a_j x_j φ(x)`, with
/// `φ` a radial bump supported in `B_{0.4 r_s}`. Coefficients solve the
/// discrete moment equations exactly.
pub fn moment_project(grid: &VoxelGrid) -> Result<VoxelGrid> {
    let rs = grid.header.support_radius;
    let extent = grid.support_extent();
    if extent >= rs {
        return Err(Error::SupportViolation(format!(
            "nonzero voxel at radius {extent:.4} ≥ {rs}"
        )));
    }
    let rb = BUMP_FRACTION * rs;
    let mut m = Matrix3::zeros();
    grid.for_each(|_, x| m += x * x.transpose() * bump(&x, rb));
    let m = m * grid.cell_volume();
    let moments = grid.first_moments();
    if moments.norm() == 0.0 {
        return Ok(grid.clone());
    }
    let a = m
        .try_inverse()
        .filter(|_| m.determinant().abs() > 1e-300)
        .ok_or_else(|| Error::InsufficientData("grid too coarse to resolve the correction bump".into()))?
        * moments;
    let mut out = grid.clone();
    grid.for_each(|idx, x| out.data[idx] -= a.dot(&x) * bump(&x, rb));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_removes_moments_and_keeps_outer_values() {
        let mut g = VoxelGrid::centered(24, 1.0, 1.2).unwrap();
        let (nx, ny, nz) = (24, 24, 24);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let x = g.position(i, j, k);
                    let idx = g.index(i, j, k);
                    if x.norm() < 1.0 {
                        g.data[idx] = (-(x - Vector3::new(0.3, 0.1, -0.2)).norm_squared() * 20.0).exp();
                    }
                }
            }
        }
        let p = moment_project(&g).unwrap();
        assert!(p.first_moments().norm() < 1e-12);
        for idx in 0..g.data.len() {
            let x = g.position(idx % nx, (idx / nx) % ny, idx / (nx * ny));
            if x.norm() >= BUMP_FRACTION * 1.2 {
                assert_eq!(p.data[idx], g.data[idx]);
            }
        }
    }

    #[test]
    fn raw_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut g = VoxelGrid::centered(4, 1.0, 2.0).unwrap();
        g.data[5] = 1.25;
        g.save(&dir.path().join("grid")).unwrap();
        let back = VoxelGrid::load(&dir.path().join("grid")).unwrap();
        assert_eq!(g, back);
    }
}
