//! Initial-condition families.
//!
//! The exponential family `f_i^in(x) = A e^{-γ i} p(x)` has an explicit
//! size dependence, which lets the admissibility check sum the size series
//! analytically. Arbitrary data can be read from CSV behind the `unchecked`
//! flag; only a numeric admissibility report is available for it.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::SpeciesField;
use crate::grid::{self, GridSpec};

#[derive(Debug, Error)]
pub enum InitialError {
    #[error("exponential decay rate must be positive (got {0})")]
    Rate(f64),
    #[error("amplitude must be nonnegative (got {0})")]
    Amplitude(f64),
    #[error("profile is negative somewhere on the grid (min {0})")]
    NegativeProfile(f64),
    #[error("custom initial data must be explicitly enabled with \"unchecked\": true")]
    UncheckedRequired,
    #[error("gaussian centre has {got} coordinates for a {dim}D grid")]
    CenterDim { got: usize, dim: usize },
    #[error("initial data file {path}: {message}")]
    File { path: String, message: String },
}

fn default_amplitude() -> f64 {
    1.0
}

/// Spatial profile `p(x) ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant,
    /// `exp(−|x − c|² / (2 w²))`.
    Gaussian { center: Vec<f64>, width: f64 },
    /// `1 + a cos(2π k x / L_x)`.
    Cosine { amplitude: f64, wavenumber: u32 },
}

impl Profile {
    pub fn eval(&self, grid: &GridSpec, x: f64, y: f64) -> f64 {
        match self {
            Profile::Constant => 1.0,
            Profile::Gaussian { center, width } => {
                let dx = x - center[0];
                let dy = if grid.dim() == 2 { y - center.get(1).copied().unwrap_or(0.0) } else { 0.0 };
                (-(dx * dx + dy * dy) / (2.0 * width * width)).exp()
            }
            Profile::Cosine { amplitude, wavenumber } => {
                1.0 + amplitude * (2.0 * PI * *wavenumber as f64 * x / grid.extent(0)).cos()
            }
        }
    }

    pub fn sample(&self, grid: &GridSpec) -> Vec<f64> {
        (0..grid.num_cells())
            .map(|c| {
                let (x, y) = grid.center(c);
                self.eval(grid, x, y)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    Exponential {
        rate: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        profile: Profile,
    },
    /// CSV with columns `i,cell,value`; unlisted entries are zero.
    Custom { path: PathBuf, unchecked: bool },
}

impl InitialCondition {
    pub fn exponential(rate: f64, profile: Profile) -> Self {
        InitialCondition::Exponential { rate, amplitude: 1.0, profile }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<(), InitialError> {
        match self {
            InitialCondition::Exponential { rate, amplitude, profile } => {
                if !(*rate > 0.0) {
                    return Err(InitialError::Rate(*rate));
                }
                if !(*amplitude >= 0.0) {
                    return Err(InitialError::Amplitude(*amplitude));
                }
                if let Profile::Gaussian { center, .. } = profile {
                    if center.len() != grid.dim() {
                        return Err(InitialError::CenterDim { got: center.len(), dim: grid.dim() });
                    }
                }
                let min = profile.sample(grid).into_iter().fold(f64::INFINITY, f64::min);
                if min < 0.0 {
                    return Err(InitialError::NegativeProfile(min));
                }
                Ok(())
            }
            InitialCondition::Custom { unchecked, .. } => {
                if *unchecked {
                    Ok(())
                } else {
                    Err(InitialError::UncheckedRequired)
                }
            }
        }
    }

    /// Samples the first `n` species on `grid`. Relative custom paths are
    /// resolved against `base_dir`.
    pub fn build(&self, grid: &GridSpec, n: usize, base_dir: &Path) -> Result<SpeciesField, InitialError> {
        self.validate(grid)?;
        match self {
            InitialCondition::Exponential { rate, amplitude, profile } => {
                let p = profile.sample(grid);
                let mut field = SpeciesField::zeros(*grid, n);
                for i in 1..=n {
                    let s = amplitude * (-rate * i as f64).exp();
                    for (v, pc) in field.species_mut(i).iter_mut().zip(&p) {
                        *v = s * pc;
                    }
                }
                Ok(field)
            }
            InitialCondition::Custom { path, .. } => {
                let path = if path.is_relative() { base_dir.join(path) } else { path.clone() };
                load_custom(&path, grid, n)
            }
        }
    }

    /// `(A, γ, ∫p)` for the exponential family, so that
    /// `‖f_i^in‖_{L¹} = A e^{-γ i} ∫p`.
    pub fn exponential_parts(&self, grid: &GridSpec) -> Option<(f64, f64, f64)> {
        match self {
            InitialCondition::Exponential { rate, amplitude, profile } => {
                Some((*amplitude, *rate, grid::integrate(grid, &profile.sample(grid))))
            }
            InitialCondition::Custom { .. } => None,
        }
    }

    /// `‖p‖_{L²}` for the exponential family.
    pub fn profile_l2(&self, grid: &GridSpec) -> Option<f64> {
        match self {
            InitialCondition::Exponential { profile, .. } => Some(grid::l2_norm(grid, &profile.sample(grid))),
            InitialCondition::Custom { .. } => None,
        }
    }
}

fn load_custom(path: &Path, grid: &GridSpec, n: usize) -> Result<SpeciesField, InitialError> {
    let err = |message: String| InitialError::File { path: path.display().to_string(), message };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let mut field = SpeciesField::zeros(*grid, n);
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| err(e.to_string()))?;
        if record.len() != 3 {
            return Err(err(format!("row {}: expected columns i,cell,value", row + 1)));
        }
        let i: usize = record[0].parse().map_err(|e| err(format!("row {}: {e}", row + 1)))?;
        let c: usize = record[1].parse().map_err(|e| err(format!("row {}: {e}", row + 1)))?;
        let v: f64 = record[2].parse().map_err(|e| err(format!("row {}: {e}", row + 1)))?;
        if i == 0 || c >= grid.num_cells() {
            return Err(err(format!("row {}: index out of range", row + 1)));
        }
        if i <= n {
            field.species_mut(i)[c] = v;
        }
    }
    Ok(field)
}
