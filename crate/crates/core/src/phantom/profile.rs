//! Radial blob profiles and their Fourier transforms.
//!
//! Transforms use `ĝ(k) = (2π)^{-3/2} ∫ g(x) e^{-i⟨x,k⟩} dx`. Every profile
//! transform is written as `G(q)` with `q = ‖κ‖²/2`, which makes the
//! Cartesian derivatives polynomial in `κ` with coefficients `G⁽ⁿ⁾(q)`.

use serde::{Deserialize, Serialize};

/// Fraction of `σ` at which the Gaussian profile is cut off in space.
pub const GAUSSIAN_CUTOFF: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BlobProfile {
    /// Indicator of the ball of radius `radius`.
    Ball { radius: f64 },
    /// `σ⁻³ exp(-‖x‖²/(2σ²))`, truncated at `6σ`; transform `exp(-σ²‖κ‖²/2)`.
    Gaussian { sigma: f64 },
}

impl BlobProfile {
    /// Radius outside which the profile vanishes.
    pub fn extent(&self) -> f64 {
        match *self {
            BlobProfile::Ball { radius } => radius,
            BlobProfile::Gaussian { sigma } => GAUSSIAN_CUTOFF * sigma,
        }
    }

    pub fn is_valid(&self) -> bool {
        let s = match *self {
            BlobProfile::Ball { radius } => radius,
            BlobProfile::Gaussian { sigma } => sigma,
        };
        s.is_finite() && s > 0.0
    }

    /// Spatial value at distance `r` from the blob centre.
    pub fn spatial(&self, r: f64) -> f64 {
        match *self {
            BlobProfile::Ball { radius } => {
                if r < radius {
                    1.0
                } else {
                    0.0
                }
            }
            BlobProfile::Gaussian { sigma } => {
                if r >= GAUSSIAN_CUTOFF * sigma {
                    0.0
                } else {
                    (-(r * r) / (2.0 * sigma * sigma)).exp() / sigma.powi(3)
                }
            }
        }
    }

    /// `[G, G', G'', G''']` at `q = ‖κ‖²/2`, filled up to `order`.
    pub fn radial_derivatives(&self, q: f64, order: usize) -> [f64; 4] {
        let mut g = [0.0; 4];
        match *self {
            BlobProfile::Gaussian { sigma } => {
                let s2 = sigma * sigma;
                let base = (-s2 * q).exp();
                let mut f = 1.0;
                for gn in g.iter_mut().take(order + 1) {
                    *gn = f * base;
                    f *= -s2;
                }
            }
            BlobProfile::Ball { radius } => {
                let x = radius * (2.0 * q).sqrt();
                let c = (2.0 / std::f64::consts::PI).sqrt() * radius.powi(3);
                let e2 = radius * radius;
                let mut f = 1.0;
                for (n, gn) in g.iter_mut().enumerate().take(order + 1) {
                    *gn = c * f * reduced_bessel(n + 1, x);
                    f *= -e2;
                }
            }
        }
        g
    }

    /// Transform value at radius `s = ‖κ‖`.
    pub fn transform(&self, s: f64) -> f64 {
        self.radial_derivatives(0.5 * s * s, 0)[0]
    }
}

/// `j_m(x) / x^m` for the spherical Bessel function `j_m`, accurate at small `x`.
pub fn reduced_bessel(m: usize, x: f64) -> f64 {
    let x = x.abs();
    if x < 4.0 {
        let mut df = 1.0;
        for k in 1..=m {
            df *= (2 * k + 1) as f64;
        }
        let mut term = 1.0 / df;
        let mut sum = term;
        let y = -0.5 * x * x;
        for k in 0..200 {
            term *= y / (((k + 1) * (2 * m + 2 * k + 3)) as f64);
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        let (s, c) = x.sin_cos();
        let mut jm1 = s / x;
        if m == 0 {
            return jm1;
        }
        let mut j = s / (x * x) - c / x;
        for n in 1..m {
            let next = (2 * n + 1) as f64 / x * j - jm1;
            jm1 = j;
            j = next;
        }
        j / x.powi(m as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_transform_at_origin() {
        let p = BlobProfile::Ball { radius: 0.1 };
        let expect = (2.0 / std::f64::consts::PI).sqrt() * 1e-3 / 3.0;
        assert!((p.transform(0.0) - expect).abs() < 1e-17);
    }

    #[test]
    fn ball_transform_closed_form() {
        let p = BlobProfile::Ball { radius: 0.3 };
        for s in [0.5, 3.0, 13.0, 40.0] {
            let x: f64 = 0.3 * s;
            let closed = (2.0 / std::f64::consts::PI).sqrt() * (x.sin() - x * x.cos()) / s.powi(3);
            assert!(
                (p.transform(s) - closed).abs() < 1e-12 * closed.abs().max(1e-6),
                "s={s}"
            );
        }
    }

    #[test]
    fn reduced_bessel_continuous_at_switch() {
        for m in 1..=4 {
            let a = reduced_bessel(m, 4.0 - 1e-12);
            let b = reduced_bessel(m, 4.0 + 1e-12);
            assert!((a - b).abs() < 1e-10 * a.abs().max(1e-3), "m={m}: {a} vs {b}");
        }
    }

    #[test]
    fn radial_derivatives_match_finite_differences() {
        for p in [BlobProfile::Ball { radius: 0.2 }, BlobProfile::Gaussian { sigma: 0.1 }] {
            for q in [0.3, 20.0, 150.0] {
                let h = 1e-4 * q;
                for n in 0..3 {
                    let up = p.radial_derivatives(q + h, 3)[n];
                    let dn = p.radial_derivatives(q - h, 3)[n];
                    let fd = (up - dn) / (2.0 * h);
                    let an = p.radial_derivatives(q, 3)[n + 1];
                    assert!((fd - an).abs() < 1e-6 * an.abs().max(1e-9), "{p:?} q={q} n={n}");
                }
            }
        }
    }
}
