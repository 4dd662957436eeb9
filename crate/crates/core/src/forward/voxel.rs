use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::phantom::{moment_project, Spectral, SpectralDerivatives, VoxelGrid};

type C = Complex64;

/// Samples of `f̂` on a Cartesian frequency lattice, interpolated by C¹
/// Catmull–Rom tricubics. Outside the stored box the provider returns zero.
#[derive(Debug, Clone)]
pub struct VoxelSpectrum {
    /// Lattice spacing per axis.
    pub dkappa: [f64; 3],
    /// Lattice indices run over `-half..=half` on every axis.
    pub half: usize,
    pub values: Vec<C>,
    pub support_radius: f64,
    /// The moment-corrected grid the spectrum was computed from.
    pub grid: VoxelGrid,
}

/// Project out first moments, then compute `f̂` on a lattice of spacing at
/// most `dkappa` covering `‖κ‖_∞ ≤ k_max`, via zero-padded FFTs.
pub fn ingest_voxels(grid: &VoxelGrid, k_max: f64, dkappa: f64) -> Result<VoxelSpectrum> {
    if !(k_max > 0.0 && dkappa > 0.0 && dkappa < k_max) {
        return Err(Error::invalid("need 0 < dkappa < k_max"));
    }
    let projected = moment_project(grid)?;
    let h = projected.header.spacing;
    let dims = projected.header.dims;
    let origin = projected.header.origin;
    let mut pads = [0usize; 3];
    let mut dk = [0.0; 3];
    for a in 0..3 {
        let p = (2.0 * std::f64::consts::PI / (h[a] * dkappa)).ceil() as usize;
        pads[a] = p.max(dims[a]);
        dk[a] = 2.0 * std::f64::consts::PI / (pads[a] as f64 * h[a]);
        if std::f64::consts::PI / h[a] < k_max {
            return Err(Error::invalid(format!(
                "voxel spacing {} cannot resolve k_max {k_max}",
                h[a]
            )));
        }
    }
    let half = (k_max / dk.iter().cloned().fold(f64::INFINITY, f64::min)).ceil() as usize + 3;
    let l = 2 * half + 1;
    let mut planner = FftPlanner::<f64>::new();

    // DFT along axis `ax`, keeping the `l` centred frequencies.
    let mut axis = |data: &[C], shape: [usize; 3], ax: usize| -> Vec<C> {
        let fft = planner.plan_fft_forward(pads[ax]);
        let mut out_shape = shape;
        out_shape[ax] = l;
        let mut out = vec![C::new(0.0, 0.0); out_shape.iter().product()];
        let idx = |s: [usize; 3], i: [usize; 3]| i[0] + s[0] * (i[1] + s[1] * i[2]);
        let others: Vec<usize> = (0..3).filter(|&a| a != ax).collect();
        let mut buf = vec![C::new(0.0, 0.0); pads[ax]];
        for u in 0..shape[others[0]] {
            for v in 0..shape[others[1]] {
                buf.iter_mut().for_each(|b| *b = C::new(0.0, 0.0));
                let mut pos = [0usize; 3];
                pos[others[0]] = u;
                pos[others[1]] = v;
                for n in 0..shape[ax] {
                    pos[ax] = n;
                    buf[n] = data[idx(shape, pos)];
                }
                fft.process(&mut buf);
                for m in 0..l {
                    let freq = m as i64 - half as i64;
                    let bin = freq.rem_euclid(pads[ax] as i64) as usize;
                    let kappa = freq as f64 * dk[ax];
                    pos[ax] = m;
                    out[idx(out_shape, pos)] = buf[bin] * C::from_polar(1.0, -kappa * origin[ax]);
                }
            }
        }
        out
    };

    let input: Vec<C> = projected.data.iter().map(|&v| C::new(v, 0.0)).collect();
    let s1 = axis(&input, dims, 0);
    let s2 = axis(&s1, [l, dims[1], dims[2]], 1);
    let mut s3 = axis(&s2, [l, l, dims[2]], 2);
    let scale = (2.0 * std::f64::consts::PI).powf(-1.5) * h[0] * h[1] * h[2];
    s3.iter_mut().for_each(|v| *v *= scale);
    Ok(VoxelSpectrum {
        dkappa: dk,
        half,
        values: s3,
        support_radius: projected.header.support_radius,
        grid: projected,
    })
}

/// Catmull–Rom weights and their derivatives in the fractional offset `t`.
fn catmull_rom(t: f64) -> [[f64; 4]; 4] {
    let (t2, t3) = (t * t, t * t * t);
    [
        [
            0.5 * (-t3 + 2.0 * t2 - t),
            0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
            0.5 * (-3.0 * t3 + 4.0 * t2 + t),
            0.5 * (t3 - t2),
        ],
        [
            0.5 * (-3.0 * t2 + 4.0 * t - 1.0),
            0.5 * (9.0 * t2 - 10.0 * t),
            0.5 * (-9.0 * t2 + 8.0 * t + 1.0),
            0.5 * (3.0 * t2 - 2.0 * t),
        ],
        [
            0.5 * (-6.0 * t + 4.0),
            0.5 * (18.0 * t - 10.0),
            0.5 * (-18.0 * t + 8.0),
            0.5 * (6.0 * t - 2.0),
        ],
        [-3.0, 9.0, -9.0, 3.0],
    ]
}

impl VoxelSpectrum {
    fn at(&self, i: usize, j: usize, k: usize) -> C {
        let l = 2 * self.half + 1;
        self.values[i + l * (j + l * k)]
    }
}

impl Spectral for VoxelSpectrum {
    fn spectral(&self, kappa: &Vector3<f64>, order: usize) -> SpectralDerivatives {
        let order = order.min(3);
        let l = 2 * self.half + 1;
        let mut base = [0usize; 3];
        let mut w = [[[0.0; 4]; 4]; 3];
        for a in 0..3 {
            let u = kappa[a] / self.dkappa[a] + self.half as f64;
            let f = u.floor();
            if f < 1.0 || f as usize + 2 >= l {
                return SpectralDerivatives::default();
            }
            base[a] = f as usize - 1;
            w[a] = catmull_rom(u - f);
            for (n, row) in w[a].iter_mut().enumerate() {
                let s = self.dkappa[a].powi(n as i32);
                row.iter_mut().for_each(|x| *x /= s);
            }
        }
        let d = |nx: usize, ny: usize, nz: usize| -> C {
            let mut s = C::new(0.0, 0.0);
            for c in 0..4 {
                for b in 0..4 {
                    let wyz = w[1][ny][b] * w[2][nz][c];
                    for a in 0..4 {
                        s += self.at(base[0] + a, base[1] + b, base[2] + c) * (w[0][nx][a] * wyz);
                    }
                }
            }
            s
        };
        let mut out = SpectralDerivatives {
            value: d(0, 0, 0),
            ..Default::default()
        };
        let unit = |i: usize| {
            let mut e = [0usize; 3];
            e[i] = 1;
            e
        };
        let add = |x: [usize; 3], y: [usize; 3]| [x[0] + y[0], x[1] + y[1], x[2] + y[2]];
        if order >= 1 {
            out.grad = Vector3::from_fn(|i, _| {
                let e = unit(i);
                d(e[0], e[1], e[2])
            });
        }
        if order >= 2 {
            out.hess = Matrix3::from_fn(|i, j| {
                let e = add(unit(i), unit(j));
                d(e[0], e[1], e[2])
            });
        }
        if order >= 3 {
            for i in 0..3 {
                out.third[i] = Matrix3::from_fn(|j, k| {
                    let e = add(add(unit(i), unit(j)), unit(k));
                    d(e[0], e[1], e[2])
                });
            }
        }
        out
    }

    fn support_radius(&self) -> f64 {
        self.support_radius
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catmull_rom_partition_of_unity() {
        for t in [0.0, 0.3, 0.99] {
            let w = catmull_rom(t);
            assert!((w[0].iter().sum::<f64>() - 1.0).abs() < 1e-15);
            assert!(w[1].iter().sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn zero_grid_gives_zero_spectrum() {
        let g = VoxelGrid::centered(16, 1.0, 1.5).unwrap();
        let s = ingest_voxels(&g, 5.0, 0.5).unwrap();
        let v = s.spectral(&Vector3::new(0.3, -1.0, 2.0), 3);
        assert_eq!(v.value, C::new(0.0, 0.0));
        assert_eq!(v.grad, Vector3::zeros());
    }
}
