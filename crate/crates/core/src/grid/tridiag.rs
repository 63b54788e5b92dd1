use thiserror::Error;

use super::GridSpec;

/// Relative residual accepted from a line solve.
pub const RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ImplicitSolveError {
    #[error("zero pivot in tridiagonal solve at row {0}")]
    ZeroPivot(usize),
    #[error("implicit diffusion solve residual {residual:e} exceeds {RESIDUAL_TOL:e}")]
    Residual { residual: f64 },
    #[error("non-finite value in implicit diffusion solve")]
    NonFinite,
}

/// Thomas algorithm for `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
/// `sub[0]` and `sup[n-1]` are ignored. The solution overwrites `rhs`.
pub fn thomas_solve(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) -> Result<(), ImplicitSolveError> {
    let n = diag.len();
    assert!(sub.len() == n && sup.len() == n && rhs.len() == n);
    let mut c_prime = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(ImplicitSolveError::ZeroPivot(0));
    }
    c_prime[0] = sup[0] / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = diag[i] - sub[i] * c_prime[i - 1];
        if denom == 0.0 {
            return Err(ImplicitSolveError::ZeroPivot(i));
        }
        c_prime[i] = sup[i] / denom;
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c_prime[i] * rhs[i + 1];
    }
    Ok(())
}

/// Solves `(I − r Δ_h) x = b` along one line with Neumann reflection, where
/// `r = dt·d/h²` has already been folded into the stencil. `line` holds `b`
/// on entry and `x` on exit; `work` is scratch of the same length.
///
/// The matrix is a symmetric M-matrix with unit column sums, so the solve
/// preserves both sign and sum of the data.
fn solve_line(r: f64, line: &mut [f64], work: &mut [f64]) -> Result<(), ImplicitSolveError> {
    let n = line.len();
    let rhs_copy: Vec<f64> = line.to_vec();
    // Forward elimination with c' stored in `work`.
    let diag = |i: usize| if i == 0 || i + 1 == n { 1.0 + r } else { 1.0 + 2.0 * r };
    let off = -r;
    let mut denom = diag(0);
    work[0] = off / denom;
    line[0] /= denom;
    for i in 1..n {
        denom = diag(i) - off * work[i - 1];
        work[i] = off / denom;
        line[i] = (line[i] - off * line[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        line[i] -= work[i] * line[i + 1];
    }
    // Residual check against the original right-hand side.
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..n {
        let mut ax = diag(i) * line[i];
        if i > 0 {
            ax += off * line[i - 1];
        }
        if i + 1 < n {
            ax += off * line[i + 1];
        }
        worst = worst.max((ax - rhs_copy[i]).abs());
        scale = scale.max(rhs_copy[i].abs()).max(line[i].abs() * (1.0 + 4.0 * r));
    }
    if !worst.is_finite() {
        return Err(ImplicitSolveError::NonFinite);
    }
    let residual = if scale > 0.0 { worst / scale } else { 0.0 };
    if residual > RESIDUAL_TOL {
        return Err(ImplicitSolveError::Residual { residual });
    }
    Ok(())
}

/// Applies `(I − dt·d·Δ_h)^{-1}` to `u` in place. In 2D the operator is
/// factored as `(I − dt·d·Δ_x)(I − dt·d·Δ_y)` with one sweep per axis.
pub fn solve_implicit_neumann(grid: &GridSpec, dt_d: f64, u: &mut [f64]) -> Result<(), ImplicitSolveError> {
    assert_eq!(u.len(), grid.num_cells());
    let (mx, my) = (grid.cells_along(0), grid.cells_along(1));
    let rx = dt_d / (grid.spacing(0) * grid.spacing(0));
    let mut work = vec![0.0; mx.max(my)];
    for row in u.chunks_mut(mx) {
        solve_line(rx, row, &mut work[..mx])?;
    }
    if grid.dim() == 2 {
        let ry = dt_d / (grid.spacing(1) * grid.spacing(1));
        let mut line = vec![0.0; my];
        for ix in 0..mx {
            for iy in 0..my {
                line[iy] = u[iy * mx + ix];
            }
            solve_line(ry, &mut line, &mut work[..my])?;
            for iy in 0..my {
                u[iy * mx + ix] = line[iy];
            }
        }
    }
    Ok(())
}
