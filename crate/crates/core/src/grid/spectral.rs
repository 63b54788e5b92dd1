//! Cosine-series solution of the 1D Neumann heat equation, used as an
//! independent oracle for the finite-difference stepping.

use std::f64::consts::PI;

use super::GridSpec;
use crate::numeric::CompensatedSum;

fn cosine_table(m: usize) -> Vec<f64> {
    let mut table = vec![0.0; m * m];
    for k in 0..m {
        for i in 0..m {
            // Reduce the angle argument modulo the period before evaluating.
            let phase = (k * (2 * i + 1)) % (4 * m);
            table[k * m + i] = (PI * phase as f64 / (2 * m) as f64).cos();
        }
    }
    table
}

/// Coefficients `c_k` of `u_i = Σ_k c_k cos(kπ x_i / L)` on cell centres
/// (a DCT-II with the usual `1/m`, `2/m` normalization).
pub fn cosine_coefficients(u: &[f64]) -> Vec<f64> {
    let m = u.len();
    let table = cosine_table(m);
    (0..m)
        .map(|k| {
            let acc: CompensatedSum = (0..m).map(|i| table[k * m + i] * u[i]).collect();
            let norm = if k == 0 { 1.0 } else { 2.0 };
            norm * acc.value() / m as f64
        })
        .collect()
}

/// `e^{t d Δ_N} u0` on a 1D grid: each cosine mode `k` of the grid data is
/// damped by `exp(−d (kπ/L)² t)`.
pub fn spectral_heat_solve_1d(grid: &GridSpec, u0: &[f64], d: f64, t: f64) -> Vec<f64> {
    assert_eq!(grid.dim(), 1, "spectral oracle is one-dimensional");
    assert!(d > 0.0 && t >= 0.0);
    let m = grid.cells_along(0);
    assert_eq!(u0.len(), m);
    let length = grid.extent(0);
    let coeffs = cosine_coefficients(u0);
    let damped: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let wave = k as f64 * PI / length;
            c * (-d * wave * wave * t).exp()
        })
        .collect();
    let table = cosine_table(m);
    (0..m)
        .map(|i| {
            let acc: CompensatedSum = (0..m).map(|k| damped[k] * table[k * m + i]).collect();
            acc.value()
        })
        .collect()
}
