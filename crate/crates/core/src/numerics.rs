//! Small numerical kernels shared by the forward models and the solvers.

use nalgebra::{DMatrix, DVector};

/// Finite-difference weights for derivatives `0..=max_order` at `x0` from
/// arbitrary distinct nodes (Fornberg's recursion).
///
/// `w[m][j]` multiplies `f(nodes[j])` in the approximation of `f^(m)(x0)`.
pub fn fornberg_weights(x0: f64, nodes: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    if n == 0 {
        return c;
    }
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Index window of `width` consecutive nodes nearest to `i`, clamped to `0..n`.
pub fn stencil_window(i: usize, n: usize, width: usize) -> Option<std::ops::Range<usize>> {
    if n < width {
        return None;
    }
    let half = width / 2;
    let start = i.saturating_sub(half).min(n - width);
    Some(start..start + width)
}

/// Derivative of order `order` of a sampled series at node `i`, using a local
/// polynomial through `width` nodes (shifted near the ends).
pub fn series_derivative(times: &[f64], values: &[f64], i: usize, order: usize, width: usize) -> Option<f64> {
    let win = stencil_window(i, times.len(), width)?;
    let w = fornberg_weights(times[i], &times[win.clone()], order);
    Some(win.zip(w[order].iter()).map(|(j, c)| c * values[j]).sum())
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs()) {
            break;
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Outcome of a dense real least-squares solve.
#[derive(Debug, Clone)]
pub struct LstsqSolution {
    pub x: DVector<f64>,
    /// Euclidean norm of `A x - b`.
    pub residual: f64,
    pub singular_values: Vec<f64>,
}

impl LstsqSolution {
    pub fn condition(&self) -> f64 {
        let max = self.singular_values.iter().cloned().fold(0.0, f64::max);
        let min = self.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
        if min <= 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }
}

/// Minimum-norm least squares via SVD; singular values below
/// `rcond * sigma_max` are treated as zero.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> LstsqSolution {
    let svd = a.clone().svd(true, true);
    let sv: Vec<f64> = svd.singular_values.iter().cloned().collect();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let eps = (rcond * smax).max(f64::MIN_POSITIVE);
    let x = svd.solve(b, eps).unwrap_or_else(|_| DVector::zeros(a.ncols()));
    let residual = (a * &x - b).norm();
    LstsqSolution {
        x,
        residual,
        singular_values: sv,
    }
}

/// Shift `angle` by a multiple of `period` to lie closest to `reference`.
pub fn nearest_branch(angle: f64, reference: f64, period: f64) -> (f64, i64) {
    let m = ((reference - angle) / period).round();
    (angle + m * period, m as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_reproduces_central_stencils() {
        let w = fornberg_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((w[1][0] + 0.5).abs() < 1e-15 && (w[1][2] - 0.5).abs() < 1e-15);
        assert!((w[2][0] - 1.0).abs() < 1e-15 && (w[2][1] + 2.0).abs() < 1e-15);
        let w = fornberg_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 1);
        let expect = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        for (a, b) in w[1].iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn series_derivative_exact_on_quartics() {
        let t: Vec<f64> = (0..9).map(|i| 0.1 * i as f64).collect();
        let v: Vec<f64> = t.iter().map(|x| x.powi(4) - 2.0 * x).collect();
        for i in 0..t.len() {
            let d = series_derivative(&t, &v, i, 1, 5).unwrap();
            assert!((d - (4.0 * t[i].powi(3) - 2.0)).abs() < 1e-11);
        }
    }

    #[test]
    fn golden_section_finds_v_minimum() {
        let (x, fx) = golden_section(|x| (x - 0.3).abs(), 0.0, 1.0, 200);
        assert!((x - 0.3).abs() < 1e-12 && fx < 1e-12);
    }

    #[test]
    fn lstsq_flags_rank_deficiency() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let s = lstsq(&a, &b, 1e-14);
        assert!(s.condition() > 1e12);
        assert!(s.residual < 1e-12);
    }
}
