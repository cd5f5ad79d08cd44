//! Real spherical harmonics (ACN order, SN3D normalisation) and least-squares fitting.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::SpatialError;
use crate::model::Doa;

/// Smallest accepted ratio between the extreme singular values of the basis matrix.
pub const MIN_RECIPROCAL_CONDITION: f64 = 1e-8;

pub fn n_coefficients(order: usize) -> usize {
    (order + 1) * (order + 1)
}

/// Associated Legendre values `P_n^m(x)` for `0 <= m <= n <= order`, without the
/// Condon-Shortley phase, stored at `n * (n + 1) / 2 + m`.
fn legendre(order: usize, x: f64) -> Vec<f64> {
    let idx = |n: usize, m: usize| n * (n + 1) / 2 + m;
    let mut p = vec![0.0; idx(order, order) + 1];
    let s = (1.0 - x * x).max(0.0).sqrt();
    p[0] = 1.0;
    for m in 1..=order {
        p[idx(m, m)] = p[idx(m - 1, m - 1)] * (2 * m - 1) as f64 * s;
    }
    for m in 0..order {
        p[idx(m + 1, m)] = x * (2 * m + 1) as f64 * p[idx(m, m)];
    }
    for m in 0..=order {
        for n in m + 2..=order {
            p[idx(n, m)] = ((2 * n - 1) as f64 * x * p[idx(n - 1, m)]
                - (n + m - 1) as f64 * p[idx(n - 2, m)])
                / (n - m) as f64;
        }
    }
    p
}

/// Real SH basis up to `order` at `doa`, in ACN order (`n^2 + n + m`).
///
/// Order 1 gives `[W, Y, Z, X] = [1, cos el sin az, sin el, cos el cos az]`.
pub fn real_sh(order: usize, doa: Doa) -> Vec<f64> {
    let az = doa.azimuth.to_radians();
    let el = doa.elevation.to_radians();
    let p = legendre(order, el.sin());
    let mut out = vec![0.0; n_coefficients(order)];
    for n in 0..=order {
        for m in 0..=n {
            // (n - m)! / (n + m)!
            let ratio: f64 = ((n - m + 1)..=(n + m)).map(|k| 1.0 / k as f64).product();
            let delta = if m == 0 { 1.0 } else { 2.0 };
            let norm = (delta * ratio).sqrt();
            let base = norm * p[n * (n + 1) / 2 + m];
            let mf = m as f64;
            out[n * n + n + m] = base * (mf * az).cos();
            if m > 0 {
                out[n * n + n - m] = base * (mf * az).sin();
            }
        }
    }
    out
}

/// Least-squares projector from samples at fixed directions onto SH coefficients.
#[derive(Debug, Clone)]
pub struct ShFit {
    order: usize,
    pinv: DMatrix<f64>,
}

impl ShFit {
    pub fn new(order: usize, points: &[Doa]) -> Result<Self, SpatialError> {
        let k = n_coefficients(order);
        if points.len() < k {
            return Err(SpatialError::IllConditioned {
                order,
                nodes: points.len(),
                reason: format!("{k} coefficients need at least as many nodes"),
            });
        }
        let basis = DMatrix::from_fn(points.len(), k, |r, c| real_sh(order, points[r])[c]);
        let svd = basis.svd(true, true);
        let max = svd.singular_values.max();
        let min = svd.singular_values.min();
        if !(max > 0.0) || min / max < MIN_RECIPROCAL_CONDITION {
            return Err(SpatialError::IllConditioned {
                order,
                nodes: points.len(),
                reason: format!("singular value ratio {:.3e}", min / max),
            });
        }
        let pinv = svd
            .pseudo_inverse(0.0)
            .map_err(|e| SpatialError::IllConditioned {
                order,
                nodes: points.len(),
                reason: e.to_string(),
            })?;
        Ok(Self { order, pinv })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn fit(&self, values: &[Complex64]) -> Vec<Complex64> {
        (0..self.pinv.nrows())
            .map(|r| {
                self.pinv
                    .row(r)
                    .iter()
                    .zip(values)
                    .map(|(w, v)| v * *w)
                    .sum()
            })
            .collect()
    }

    pub fn fit_real(&self, values: &[f64]) -> Vec<f64> {
        (0..self.pinv.nrows())
            .map(|r| self.pinv.row(r).iter().zip(values).map(|(w, v)| w * v).sum())
            .collect()
    }
}

pub fn evaluate(order: usize, coefficients: &[Complex64], doa: Doa) -> Complex64 {
    real_sh(order, doa)
        .iter()
        .zip(coefficients)
        .map(|(y, c)| c * *y)
        .sum()
}
