use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix2, Vector2, Vector3};
use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{measure, JetOrder, JetProvider, MeasurementJet, Model, ModelConfig};
use crate::error::{Error, Result};
use crate::motion::{Motion, Trajectory};
use crate::numerics::{fornberg_weights, stencil_window};
use crate::phantom::Spectral;

type C = Complex64;

pub const MEASUREMENT_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8] = b"SPINRECON-MEASUREMENTS\n";
/// Nodes per axis of the local interpolation stencil in `k`.
const K_STENCIL: usize = 6;
/// Nodes of the local time stencil.
const T_STENCIL: usize = 5;

/// Square Cartesian grid of `n × n` frequencies over `[−extent, extent]²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KGrid {
    pub n: usize,
    pub extent: f64,
}

impl KGrid {
    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.extent + i as f64 * self.spacing()
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Frequency of flat sample index `s` (first axis fastest).
    pub fn point(&self, s: usize) -> Vector2<f64> {
        Vector2::new(self.node(s % self.n), self.node(s / self.n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub level: f64,
    pub seed: u64,
    /// Absolute standard deviation `level · rms(|m̂|)` of the complex noise.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementHeader {
    pub format_version: u32,
    pub model: Model,
    pub times: Vec<f64>,
    pub k_grid: KGrid,
    pub noise: Option<NoiseRecord>,
    pub phantom_sha256: Option<String>,
    pub trajectory_sha256: Option<String>,
    pub payload_sha256: String,
    pub value_count: usize,
    /// Normalization of the stored values.
    pub convention: String,
}

/// Sampled data `m̂(t_i, k_s)`, time-major; frequencies outside the DT band
/// are stored as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub header: MeasurementHeader,
    pub values: Vec<C>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn payload_bytes(values: &[C]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 16);
    for v in values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

impl MeasurementSet {
    pub fn n_times(&self) -> usize {
        self.header.times.len()
    }

    pub fn at(&self, t_index: usize, sample: usize) -> C {
        self.values[t_index * self.header.k_grid.len() + sample]
    }

    fn refresh_hash(&mut self) {
        self.header.value_count = self.values.len();
        self.header.payload_sha256 = sha256_hex(&payload_bytes(&self.values));
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(
            serde_json::to_string(&self.header)
                .expect("header serializes")
                .as_bytes(),
        );
        out.push(b'\n');
        out.extend_from_slice(&payload_bytes(&self.values));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let rest = bytes
            .strip_prefix(MAGIC)
            .ok_or_else(|| Error::Corrupt("missing measurement-set magic line".into()))?;
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Corrupt("unterminated measurement header".into()))?;
        let header: MeasurementHeader = serde_json::from_slice(&rest[..nl])
            .map_err(|e| Error::Schema(format!("measurement header line 2 column {}: {e}", e.column())))?;
        if header.format_version != MEASUREMENT_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "measurement format version {}",
                header.format_version
            )));
        }
        let payload = &rest[nl + 1..];
        if payload.len() != header.value_count * 16 {
            return Err(Error::Corrupt(format!(
                "payload has {} bytes, header promises {}",
                payload.len(),
                header.value_count * 16
            )));
        }
        if sha256_hex(payload) != header.payload_sha256 {
            return Err(Error::Corrupt("payload hash mismatch".into()));
        }
        if header.value_count != header.times.len() * header.k_grid.len() {
            return Err(Error::Corrupt("value count disagrees with grid".into()));
        }
        let values = payload
            .chunks_exact(16)
            .map(|c| {
                C::new(
                    f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                    f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
                )
            })
            .collect();
        Ok(MeasurementSet { header, values })
    }

    /// Writes via a `.partial` file renamed into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let partial = path.with_extension("partial");
        let mut f = std::fs::File::create(&partial).map_err(|e| Error::io(&partial, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(&partial, e))?;
        drop(f);
        std::fs::rename(&partial, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        MeasurementSet::from_bytes(&bytes)
    }
}

/// Sample `m̂` on a Cartesian frequency grid at every trajectory node.
pub fn measure_grid(obj: &dyn Spectral, motion: &Motion, cfg: &ModelConfig, grid: KGrid) -> Result<MeasurementSet> {
    cfg.validate()?;
    if grid.n < K_STENCIL || !(grid.extent > 0.0) {
        return Err(Error::invalid(format!(
            "k grid needs at least {K_STENCIL} nodes and positive extent"
        )));
    }
    let traj = &motion.trajectory;
    let rows: Vec<Vec<C>> = traj
        .rotation
        .par_iter()
        .map(|r| {
            (0..grid.len())
                .map(|s| {
                    let k = grid.point(s);
                    match cfg.model {
                        Model::Dt { k0 } if k.norm() >= k0 => Ok(C::new(f64::NAN, f64::NAN)),
                        _ => measure(obj, r, cfg, &k),
                    }
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut ms = MeasurementSet {
        header: MeasurementHeader {
            format_version: MEASUREMENT_FORMAT_VERSION,
            model: cfg.model,
            times: traj.times.clone(),
            k_grid: grid,
            noise: None,
            phantom_sha256: None,
            trajectory_sha256: None,
            payload_sha256: String::new(),
            value_count: 0,
            convention: match cfg.model {
                Model::Dt { .. } => "fhat(R(t)(k, h(|k|))), unit-free, transform (2pi)^(-3/2)".into(),
                Model::Pb => "fhat(R(t)(k, 0)), sqrt(2pi) slice factor dropped, transform (2pi)^(-3/2)".into(),
            },
        },
        values: rows.into_iter().flatten().collect(),
    };
    ms.refresh_hash();
    Ok(ms)
}

/// Two standard normals from a counter-positioned stream.
fn gaussian_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let unit = |x: u64| ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u1 = unit(rng.next_u64());
    let u2 = unit(rng.next_u64());
    let r = (-2.0 * u1.ln()).sqrt();
    let th = 2.0 * std::f64::consts::PI * u2;
    (r * th.cos(), r * th.sin())
}

/// Complex Gaussian noise with `E|n|² = (level · rms|m̂|)²`. The draw for
/// sample `s` at time `i` depends only on `(seed, i, s)`.
pub fn add_noise(ms: &MeasurementSet, level: f64, seed: u64) -> Result<MeasurementSet> {
    if !(level >= 0.0 && level.is_finite()) {
        return Err(Error::invalid("noise level must be nonnegative"));
    }
    let finite: Vec<&C> = ms.values.iter().filter(|v| v.re.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::InsufficientData("no finite samples".into()));
    }
    let rms = (finite.iter().map(|v| v.norm_sqr()).sum::<f64>() / finite.len() as f64).sqrt();
    let sigma = level * rms;
    let per_t = ms.header.k_grid.len();
    let mut out = ms.clone();
    out.values.par_chunks_mut(per_t).enumerate().for_each(|(ti, row)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(ti as u64);
        for (s, v) in row.iter_mut().enumerate() {
            rng.set_word_pos(4 * s as u128);
            let (a, b) = gaussian_pair(&mut rng);
            if v.re.is_finite() {
                *v += C::new(a, b) * (sigma / std::f64::consts::SQRT_2);
            }
        }
    });
    out.header.noise = Some(NoiseRecord { level, seed, sigma });
    out.refresh_hash();
    Ok(out)
}

/// Jets from sampled data: local degree-5 tensor interpolation in `k` and a
/// five-node polynomial in `t` (shifted at the ends of the grid).
pub struct SampledJets<'a> {
    pub set: &'a MeasurementSet,
    pub config: ModelConfig,
}

impl<'a> SampledJets<'a> {
    pub fn new(set: &'a MeasurementSet, config: ModelConfig) -> Result<Self> {
        config.validate()?;
        if config.model != set.header.model {
            return Err(Error::Mismatch("solver model differs from measurement model".into()));
        }
        if set.n_times() < 3 {
            return Err(Error::InsufficientStencil("need at least three time samples".into()));
        }
        Ok(SampledJets { set, config })
    }

    fn axis_weights(&self, x: f64, order: usize) -> Result<(usize, Vec<Vec<f64>>)> {
        let g = self.set.header.k_grid;
        let u = (x + g.extent) / g.spacing();
        let start = u.floor() as i64 - (K_STENCIL as i64 / 2 - 1);
        if start < 0 || start as usize + K_STENCIL > g.n {
            return Err(Error::OutOfGrid(format!("frequency {x} too close to the grid edge")));
        }
        let start = start as usize;
        let nodes: Vec<f64> = (start..start + K_STENCIL).map(|i| g.node(i)).collect();
        Ok((start, fornberg_weights(x, &nodes, order)))
    }
}

impl JetProvider for SampledJets<'_> {
    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn times(&self) -> &[f64] {
        &self.set.header.times
    }

    fn jet(&self, t_index: usize, k: &Vector2<f64>, order: JetOrder) -> Result<MeasurementJet> {
        let times = &self.set.header.times;
        if t_index >= times.len() {
            return Err(Error::OutOfGrid(format!("time index {t_index}")));
        }
        self.config.check_band(k)?;
        let korder = if order == JetOrder::First { 1 } else { 3 };
        let (sx, wx) = self.axis_weights(k.x, korder)?;
        let (sy, wy) = self.axis_weights(k.y, korder)?;
        let win = stencil_window(t_index, times.len(), T_STENCIL.min(times.len())).expect("three samples");
        let wt = fornberg_weights(times[t_index], &times[win.clone()], 2);
        let n = self.set.header.k_grid.n;
        // spatial[(a, b)][time node] for a + b ≤ korder
        let spatial = |a: usize, b: usize, ti: usize| -> Result<C> {
            let mut s = C::new(0.0, 0.0);
            for (jy, wyv) in wy[b].iter().enumerate() {
                for (jx, wxv) in wx[a].iter().enumerate() {
                    let v = self.set.at(ti, (sy + jy) * n + sx + jx);
                    if !v.re.is_finite() {
                        return Err(Error::OutOfBand(format!(
                            "stencil at {k:?} touches unmeasured frequencies"
                        )));
                    }
                    s += v * (wxv * wyv);
                }
            }
            Ok(s)
        };
        let deriv = |nt: usize, a: usize, b: usize| -> Result<C> {
            if nt == 0 {
                return spatial(a, b, t_index);
            }
            let mut s = C::new(0.0, 0.0);
            for (w, ti) in wt[nt].iter().zip(win.clone()) {
                s += spatial(a, b, ti)? * *w;
            }
            Ok(s)
        };
        let mut j = MeasurementJet {
            value: deriv(0, 0, 0)?,
            dt: deriv(1, 0, 0)?,
            grad_k: Vector2::new(deriv(0, 1, 0)?, deriv(0, 0, 1)?),
            ..Default::default()
        };
        if order == JetOrder::First {
            return Ok(j);
        }
        let mixed = deriv(0, 1, 1)?;
        j.hess_k = Matrix2::new(deriv(0, 2, 0)?, mixed, mixed, deriv(0, 0, 2)?);
        let (aaa, aab, abb, bbb) = (deriv(0, 3, 0)?, deriv(0, 2, 1)?, deriv(0, 1, 2)?, deriv(0, 0, 3)?);
        j.third_k = [Matrix2::new(aaa, aab, aab, abb), Matrix2::new(aab, abb, abb, bbb)];
        j.dt_grad_k = Vector2::new(deriv(1, 1, 0)?, deriv(1, 0, 1)?);
        let tm = deriv(1, 1, 1)?;
        j.dt_hess_k = Matrix2::new(deriv(1, 2, 0)?, tm, tm, deriv(1, 0, 2)?);
        j.dtt_grad_k = Vector2::new(deriv(2, 1, 0)?, deriv(2, 0, 1)?);
        Ok(j)
    }
}

/// Largest deviation `|m̂(t, λ a_t) − m̂(s, λ a_s)|` along the common line of
/// the PB slices at times `s` and `t`.
pub fn verify_common_line(provider: &dyn JetProvider, traj: &Trajectory, s: usize, t: usize) -> Result<f64> {
    let cfg = provider.config();
    if cfg.model != Model::Pb {
        return Err(Error::invalid("common lines are defined for parallel-beam data"));
    }
    let n = traj.len();
    if s >= n || t >= n {
        return Err(Error::OutOfGrid("time index outside trajectory".into()));
    }
    let e3 = Vector3::z();
    let (rs, rt) = (traj.rotation[s], traj.rotation[t]);
    let a = (rt * e3).cross(&(rs * e3));
    let norm = a.norm();
    if norm < 1e-12 {
        return Err(Error::DegeneratePair(format!(
            "slices at {s} and {t} share their normal"
        )));
    }
    let at = rt.transpose() * a / norm;
    let as_ = rs.transpose() * a / norm;
    let mut worst: f64 = 0.0;
    for lambda in cfg.radial_nodes() {
        let mt = provider.value(t, &(Vector2::new(at.x, at.y) * lambda))?;
        let ms = provider.value(s, &(Vector2::new(as_.x, as_.y) * lambda))?;
        worst = worst.max((mt - ms).norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_set() -> MeasurementSet {
        let mut ms = MeasurementSet {
            header: MeasurementHeader {
                format_version: MEASUREMENT_FORMAT_VERSION,
                model: Model::Pb,
                times: vec![0.0, 0.5],
                k_grid: KGrid { n: 6, extent: 1.0 },
                noise: None,
                phantom_sha256: None,
                trajectory_sha256: None,
                payload_sha256: String::new(),
                value_count: 0,
                convention: String::new(),
            },
            values: (0..72).map(|i| C::new(i as f64, -(i as f64))).collect(),
        };
        ms.refresh_hash();
        ms
    }

    #[test]
    fn bytes_round_trip_and_corruption() {
        let ms = tiny_set();
        let mut bytes = ms.to_bytes();
        assert_eq!(MeasurementSet::from_bytes(&bytes).unwrap(), ms);
        let last = bytes.len() - 3;
        bytes[last] ^= 0x40;
        assert!(matches!(MeasurementSet::from_bytes(&bytes), Err(Error::Corrupt(_))));
        bytes.truncate(bytes.len() - 5);
        assert!(matches!(MeasurementSet::from_bytes(&bytes), Err(Error::Corrupt(_))));
    }

    #[test]
    fn noise_is_reproducible_and_scaled() {
        let ms = tiny_set();
        let a = add_noise(&ms, 0.01, 42).unwrap();
        let b = add_noise(&ms, 0.01, 42).unwrap();
        assert_eq!(a.values, b.values);
        let c = add_noise(&ms, 0.01, 43).unwrap();
        assert_ne!(a.values, c.values);
        let zero = add_noise(&ms, 0.0, 42).unwrap();
        assert_eq!(zero.values, ms.values);
    }
}
