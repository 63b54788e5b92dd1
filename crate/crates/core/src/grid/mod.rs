//! Cell-centred grids on intervals and rectangles with zero-flux (Neumann)
//! boundaries.
//!
//! The boundary condition is realised by ghost-cell reflection, so every
//! operator here has vanishing row sums and the discrete integral of a
//! Laplacian is zero up to rounding. Quadrature is the midpoint rule and all
//! norms are defined through it.

mod spectral;
mod tridiag;

pub use spectral::{cosine_coefficients, spectral_heat_solve_1d};
pub use tridiag::{solve_implicit_neumann, thomas_solve, ImplicitSolveError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::CompensatedSum;

pub const MIN_CELLS: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid dimension must be 1 or 2 (got {0})")]
    Dimension(usize),
    #[error("each axis needs at least {MIN_CELLS} cells (got {0})")]
    TooFewCells(usize),
    #[error("extents must be finite and positive (got {0})")]
    Extent(f64),
    #[error("field has {got} values, grid has {expected} cells")]
    Length { expected: usize, got: usize },
}

/// Uniform cell-centred grid on `[0, L_x]` or `[0, L_x] × [0, L_y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpecRepr", into = "GridSpecRepr")]
pub struct GridSpec {
    dim: usize,
    extents: [f64; 2],
    cells: [usize; 2],
}

/// Serialized form: `{"dim": 1, "extent": [1.0], "cells": [128]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpecRepr {
    dim: usize,
    extent: Vec<f64>,
    cells: Vec<usize>,
}

impl TryFrom<GridSpecRepr> for GridSpec {
    type Error = GridError;
    fn try_from(r: GridSpecRepr) -> Result<Self, GridError> {
        match (r.dim, r.extent.as_slice(), r.cells.as_slice()) {
            (1, [l], [m]) => GridSpec::line(*l, *m),
            (2, [lx, ly], [mx, my]) => GridSpec::rect(*lx, *ly, *mx, *my),
            (1 | 2, _, _) => Err(GridError::Dimension(r.extent.len().max(r.cells.len()))),
            (d, _, _) => Err(GridError::Dimension(d)),
        }
    }
}

impl From<GridSpec> for GridSpecRepr {
    fn from(g: GridSpec) -> Self {
        Self {
            dim: g.dim,
            extent: g.extents[..g.dim].to_vec(),
            cells: g.cells[..g.dim].to_vec(),
        }
    }
}

impl GridSpec {
    pub fn line(length: f64, cells: usize) -> Result<Self, GridError> {
        check_axis(length, cells)?;
        Ok(Self { dim: 1, extents: [length, 1.0], cells: [cells, 1] })
    }

    pub fn rect(lx: f64, ly: f64, mx: usize, my: usize) -> Result<Self, GridError> {
        check_axis(lx, mx)?;
        check_axis(ly, my)?;
        Ok(Self { dim: 2, extents: [lx, ly], cells: [mx, my] })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.extents[axis]
    }

    pub fn cells_along(&self, axis: usize) -> usize {
        self.cells[axis]
    }

    pub fn num_cells(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.extents[axis] / self.cells[axis] as f64
    }

    /// Smallest spacing over the active axes.
    pub fn min_spacing(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    /// `|Ω|`.
    pub fn measure(&self) -> f64 {
        self.extents[..self.dim].iter().product()
    }

    pub fn cell_measure(&self) -> f64 {
        self.measure() / self.num_cells() as f64
    }

    /// Cell-centre coordinates of cell `c` (y is 0 in 1D).
    pub fn center(&self, c: usize) -> (f64, f64) {
        let (ix, iy) = (c % self.cells[0], c / self.cells[0]);
        let x = (ix as f64 + 0.5) * self.spacing(0);
        let y = if self.dim == 2 { (iy as f64 + 0.5) * self.spacing(1) } else { 0.0 };
        (x, y)
    }

    /// Same grid with every axis refined or coarsened to `cells` cells.
    pub fn with_cells(&self, cells: usize) -> Result<Self, GridError> {
        match self.dim {
            1 => Self::line(self.extents[0], cells),
            _ => Self::rect(self.extents[0], self.extents[1], cells, cells),
        }
    }

    fn check_len(&self, u: &[f64]) {
        assert_eq!(u.len(), self.num_cells(), "field length does not match grid");
    }
}

fn check_axis(length: f64, cells: usize) -> Result<(), GridError> {
    if !(length.is_finite() && length > 0.0) {
        return Err(GridError::Extent(length));
    }
    if cells < MIN_CELLS {
        return Err(GridError::TooFewCells(cells));
    }
    Ok(())
}

/// Writes the Neumann Laplacian of `u` into `out`.
pub fn laplacian_neumann_into(grid: &GridSpec, u: &[f64], out: &mut [f64]) {
    grid.check_len(u);
    let (mx, my) = (grid.cells[0], grid.cells[1]);
    let ihx2 = 1.0 / (grid.spacing(0) * grid.spacing(0));
    for iy in 0..my {
        let row = &u[iy * mx..(iy + 1) * mx];
        let out_row = &mut out[iy * mx..(iy + 1) * mx];
        for ix in 0..mx {
            let left = if ix == 0 { row[ix] } else { row[ix - 1] };
            let right = if ix + 1 == mx { row[ix] } else { row[ix + 1] };
            out_row[ix] = ((left - row[ix]) + (right - row[ix])) * ihx2;
        }
    }
    if grid.dim == 2 {
        let ihy2 = 1.0 / (grid.spacing(1) * grid.spacing(1));
        for iy in 0..my {
            for ix in 0..mx {
                let c = iy * mx + ix;
                let down = if iy == 0 { u[c] } else { u[c - mx] };
                let up = if iy + 1 == my { u[c] } else { u[c + mx] };
                out[c] += ((down - u[c]) + (up - u[c])) * ihy2;
            }
        }
    }
}

pub fn laplacian_neumann(grid: &GridSpec, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    laplacian_neumann_into(grid, u, &mut out);
    out
}

/// Midpoint quadrature `∫_Ω u`, compensated, in cell order.
pub fn integrate(grid: &GridSpec, u: &[f64]) -> f64 {
    grid.check_len(u);
    let sum = crate::numeric::compensated_sum(u);
    sum * grid.measure() / grid.num_cells() as f64
}

pub fn l1_norm(grid: &GridSpec, u: &[f64]) -> f64 {
    let abs: CompensatedSum = u.iter().map(|x| x.abs()).collect();
    abs.value() * grid.measure() / grid.num_cells() as f64
}

pub fn l2_norm(grid: &GridSpec, u: &[f64]) -> f64 {
    let sq: CompensatedSum = u.iter().map(|x| x * x).collect();
    (sq.value() * grid.measure() / grid.num_cells() as f64).sqrt()
}

pub fn linf_norm(u: &[f64]) -> f64 {
    u.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Masked Dirichlet energy `∫_{mask} |∇u|²`.
///
/// Gradients live on interior faces; a face is active when both adjacent
/// cells are in the mask. Each cell contributes, per axis, the mean squared
/// gradient over its active faces along that axis, times the cell measure.
/// The rule integrates linear profiles exactly.
pub fn gradient_sq_integral(grid: &GridSpec, u: &[f64], mask: &[bool]) -> f64 {
    grid.check_len(u);
    assert_eq!(mask.len(), u.len(), "mask length does not match grid");
    let (mx, my) = (grid.cells[0], grid.cells[1]);
    let mut acc = CompensatedSum::new();
    let axes: &[(usize, usize, usize)] = if grid.dim == 1 { &[(0, 1, mx)] } else { &[(0, 1, mx), (1, mx, my)] };
    for &(axis, stride, len) in axes {
        let ih = 1.0 / grid.spacing(axis);
        for c in 0..u.len() {
            if !mask[c] {
                continue;
            }
            let pos = if axis == 0 { c % mx } else { c / mx };
            let mut sum = 0.0;
            let mut count = 0u32;
            if pos > 0 && mask[c - stride] {
                let g = (u[c] - u[c - stride]) * ih;
                sum += g * g;
                count += 1;
            }
            if pos + 1 < len && mask[c + stride] {
                let g = (u[c + stride] - u[c]) * ih;
                sum += g * g;
                count += 1;
            }
            if count > 0 {
                acc.add(sum / count as f64);
            }
        }
    }
    acc.value() * grid.cell_measure()
}

/// Grid-function with its grid attached.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.num_cells() {
            return Err(GridError::Length { expected: grid.num_cells(), got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.num_cells())
            .map(|c| {
                let (x, y) = grid.center(c);
                f(x, y)
            })
            .collect();
        Self { grid, values }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self { grid, values: vec![value; grid.num_cells()] }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn laplacian(&self) -> ScalarField {
        Self { grid: self.grid, values: laplacian_neumann(&self.grid, &self.values) }
    }

    pub fn integrate(&self) -> f64 {
        integrate(&self.grid, &self.values)
    }

    pub fn gradient_sq_integral(&self, mask: &[bool]) -> f64 {
        gradient_sq_integral(&self.grid, &self.values, mask)
    }

    /// Midpoint inner product `⟨u, v⟩`.
    pub fn dot(&self, other: &ScalarField) -> f64 {
        let prod: Vec<f64> = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        integrate(&self.grid, &prod)
    }

    /// CSV snapshot with `#`-prefixed metadata lines.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W, meta: &[(&str, String)]) -> std::io::Result<()> {
        for (k, v) in meta {
            writeln!(w, "# {k}: {v}")?;
        }
        if self.grid.dim == 1 {
            writeln!(w, "x,value")?;
        } else {
            writeln!(w, "x,y,value")?;
        }
        for (c, v) in self.values.iter().enumerate() {
            let (x, y) = self.grid.center(c);
            if self.grid.dim == 1 {
                writeln!(w, "{x:?},{v:?}")?;
            } else {
                writeln!(w, "{x:?},{y:?},{v:?}")?;
            }
        }
        Ok(())
    }
}
