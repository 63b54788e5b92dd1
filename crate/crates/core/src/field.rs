//! Size-spectrum fields `f_i(x)`, `i = 1..n`, on a spatial grid.

use crate::grid::{self, GridSpec, ScalarField};
use crate::numeric::CompensatedSum;

/// Densities of `n` species on every cell, stored species-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesField {
    grid: GridSpec,
    n: usize,
    data: Vec<f64>,
}

impl SpeciesField {
    pub fn zeros(grid: GridSpec, n: usize) -> Self {
        Self { grid, n, data: vec![0.0; n * grid.num_cells()] }
    }

    /// Builds a field from `f(i, x, y)` evaluated at cell centres.
    pub fn from_fn(grid: GridSpec, n: usize, f: impl Fn(usize, f64, f64) -> f64) -> Self {
        let cells = grid.num_cells();
        let mut data = Vec::with_capacity(n * cells);
        for i in 1..=n {
            for c in 0..cells {
                let (x, y) = grid.center(c);
                data.push(f(i, x, y));
            }
        }
        Self { grid, n, data }
    }

    pub fn from_species(grid: GridSpec, species: Vec<Vec<f64>>) -> Self {
        let n = species.len();
        let mut data = Vec::with_capacity(n * grid.num_cells());
        for s in species {
            assert_eq!(s.len(), grid.num_cells());
            data.extend(s);
        }
        Self { grid, n, data }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Number of species (truncation size).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_cells(&self) -> usize {
        self.grid.num_cells()
    }

    /// Values of species `i` (1-based).
    pub fn species(&self, i: usize) -> &[f64] {
        let m = self.num_cells();
        &self.data[(i - 1) * m..i * m]
    }

    pub fn species_mut(&mut self, i: usize) -> &mut [f64] {
        let m = self.num_cells();
        &mut self.data[(i - 1) * m..i * m]
    }

    pub fn species_field(&self, i: usize) -> ScalarField {
        ScalarField::new(self.grid, self.species(i).to_vec()).expect("length matches")
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Species vector `(f_1, …, f_n)` at cell `c`.
    pub fn gather_point(&self, c: usize, out: &mut [f64]) {
        let m = self.num_cells();
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.data[i * m + c];
        }
    }

    /// `∫ f_i` for every species.
    pub fn species_integrals(&self) -> Vec<f64> {
        (1..=self.n).map(|i| grid::integrate(&self.grid, self.species(i))).collect()
    }

    /// Pointwise mass density `Σ_i i f_i(x)`.
    pub fn mass_density(&self) -> Vec<f64> {
        self.weighted_density(|i| i as f64)
    }

    /// Pointwise `Σ_i w(i) f_i(x)`.
    pub fn weighted_density(&self, w: impl Fn(usize) -> f64) -> Vec<f64> {
        let m = self.num_cells();
        let weights: Vec<f64> = (1..=self.n).map(&w).collect();
        (0..m)
            .map(|c| {
                let acc: CompensatedSum = (0..self.n).map(|i| weights[i] * self.data[i * m + c]).collect();
                acc.value()
            })
            .collect()
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `Σ_i ∫ |f_i − g_i|`, species missing from one side counted as zero.
    pub fn l1_distance(&self, other: &SpeciesField) -> f64 {
        assert_eq!(self.grid, other.grid, "L1 distance needs matching grids");
        let n = self.n.max(other.n);
        let zeros = vec![0.0; self.num_cells()];
        let mut acc = CompensatedSum::new();
        for i in 1..=n {
            let a = if i <= self.n { self.species(i) } else { &zeros };
            let b = if i <= other.n { other.species(i) } else { &zeros };
            let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            acc.add(grid::l1_norm(&self.grid, &diff));
        }
        acc.value()
    }

    /// Restricts to a coarser grid whose cells are unions of `factor^dim`
    /// cells of this grid (averaging).
    pub fn restrict_to(&self, coarse: &GridSpec) -> Option<SpeciesField> {
        if coarse.dim() != self.grid.dim() {
            return None;
        }
        let factor = self.grid.cells_along(0) / coarse.cells_along(0);
        for axis in 0..coarse.dim() {
            if factor == 0 || coarse.cells_along(axis) * factor != self.grid.cells_along(axis) {
                return None;
            }
        }
        let (cx, cy) = (coarse.cells_along(0), coarse.cells_along(1));
        let fx = self.grid.cells_along(0);
        let fy_factor = if coarse.dim() == 2 { factor } else { 1 };
        let per = (factor * fy_factor) as f64;
        let mut out = SpeciesField::zeros(*coarse, self.n);
        for i in 1..=self.n {
            let fine = self.species(i);
            let dst = out.species_mut(i);
            for jy in 0..cy {
                for jx in 0..cx {
                    let mut acc = CompensatedSum::new();
                    for dy in 0..fy_factor {
                        for dx in 0..factor {
                            acc.add(fine[(jy * fy_factor + dy) * fx + jx * factor + dx]);
                        }
                    }
                    dst[jy * cx + jx] = acc.value() / per;
                }
            }
        }
        Some(out)
    }
}
