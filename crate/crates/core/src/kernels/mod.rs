//! Collision kernels `a_{ij}`, breakage kernels `b^k_{ij}`, diffusion
//! coefficients `d_i` and the regularization weights `c_j = Σ_i a_{ij}`.
//!
//! Three families are supported:
//!
//! * `power_law_uniform`: `a_{ij} = (ij)^{-λ}`, `b^k_{ij} = 2/(i+j-1)` for
//!   `k < i+j`, `d_i = i^{-α}`.
//! * `cheng_redner_uniform` (opt-in): same collision and diffusion, but each
//!   collider of size `i ≥ 2` shatters independently into `2/(i-1)` fragments
//!   of every size `k < i`; a monomer collider passes through unchanged.
//! * `table`: dense tables loaded from CSV, validated on load.

mod admissibility;
mod summability;
mod table;
mod validate;

pub use admissibility::{check_initial_data, AdmissibilityReport, RootMassSeries, SeriesJudgment, TailMethod};
pub use summability::{
    audit_summability, AuditProfile, ConditionReport, SummabilityReport, Verdict,
    A1, A4_TERM1, A4_TERM2, DEFAULT_AUDIT_LEVELS,
};
pub use table::KernelTable;
pub use validate::{
    validate_kernel_set, validate_mass_conservation_exact, ValidationReport, Violation,
    ViolationKind, MASS_RESIDUAL_TOL,
};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::FromPrimitive;
use thiserror::Error;

use crate::numeric::{zeta_enclosure, Enclosure};

/// Default width of the certified `c_j` enclosure.
pub const DEFAULT_REG_WEIGHT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("size index must be ≥ 1 (got {0})")]
    IndexDomain(usize),
    #[error("series Σ_i a_(i,j) diverges for λ = {lambda}")]
    Divergent { lambda: f64 },
    #[error("index {index} is outside the kernel table (size {size})")]
    OutsideTable { index: usize, size: usize },
    #[error("kernel validation failed: {0}")]
    Invalid(Box<ValidationReport>),
    #[error("kernel table {path}: {message}")]
    Table { path: String, message: String },
    #[error("the Cheng–Redner family changes the monomer convention and must be opted into")]
    OptInRequired,
    #[error("invalid kernel parameter: {0}")]
    Parameter(String),
    #[error("negative density {value:e} for species {species} at cell {cell}")]
    NegativeDensity { species: usize, cell: usize, value: f64 },
}

/// `a_{ij} = (ij)^{-λ}`.
pub fn collision_rate(i: usize, j: usize, lambda: f64) -> Result<f64, KernelError> {
    check_index(i)?;
    check_index(j)?;
    Ok(power_law_collision(i, j, lambda))
}

/// Uniform breakage `b^k_{ij} = 2/(i+j-1)` for `1 ≤ k ≤ i+j-1`, zero otherwise.
pub fn breakage_count(i: usize, j: usize, k: usize) -> Result<f64, KernelError> {
    check_index(i)?;
    check_index(j)?;
    check_index(k)?;
    Ok(uniform_breakage(i, j, k))
}

/// `d_i = i^{-α}`.
pub fn diffusion_coeff(i: usize, alpha: f64) -> Result<f64, KernelError> {
    check_index(i)?;
    Ok(power_law_diffusion(i, alpha))
}

/// Certified enclosure of `c_j = Σ_{i≥1} (ij)^{-λ} = j^{-λ} ζ(λ)`.
pub fn reg_weight(j: usize, lambda: f64, tol: f64) -> Result<Enclosure, KernelError> {
    check_index(j)?;
    let zeta = zeta_enclosure(lambda, tol).ok_or(KernelError::Divergent { lambda })?;
    Ok(zeta.scale_nonneg((j as f64).powf(-lambda)))
}

fn check_index(i: usize) -> Result<(), KernelError> {
    if i == 0 {
        Err(KernelError::IndexDomain(i))
    } else {
        Ok(())
    }
}

#[inline]
fn power_law_collision(i: usize, j: usize, lambda: f64) -> f64 {
    // Multiply in a canonical order so that a(i,j) == a(j,i) bit for bit.
    let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
    ((lo as f64) * (hi as f64)).powf(-lambda)
}

#[inline]
fn uniform_breakage(i: usize, j: usize, k: usize) -> f64 {
    let total = i + j;
    if k >= total {
        0.0
    } else {
        2.0 / (total - 1) as f64
    }
}

#[inline]
fn power_law_diffusion(i: usize, alpha: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else {
        (i as f64).powf(-alpha)
    }
}

/// Fragment count of size `k` contributed by a single collider of size `i`
/// under the Cheng–Redner uniform shattering rule.
#[inline]
fn cheng_redner_part(i: usize, k: usize) -> f64 {
    if i == 1 {
        if k == 1 {
            1.0
        } else {
            0.0
        }
    } else if k < i {
        2.0 / (i - 1) as f64
    } else {
        0.0
    }
}

fn cheng_redner_part_exact(i: usize, k: usize) -> BigRational {
    if i == 1 {
        BigRational::from_integer(BigInt::from((k == 1) as u8))
    } else if k < i {
        BigRational::new(BigInt::from(2), BigInt::from(i - 1))
    } else {
        BigRational::from_integer(BigInt::from(0))
    }
}

/// Kernel family selector together with its parameters.
#[derive(Debug, Clone)]
pub enum KernelFamily {
    PowerLawUniform { lambda: f64, alpha: f64 },
    ChengRednerUniform { lambda: f64, alpha: f64 },
    Table(KernelTable),
}

/// The triple `(a, b, d)` plus the certified regularization weights.
///
/// Immutable once built; evaluation methods are pure.
#[derive(Debug, Clone)]
pub struct KernelSet {
    family: KernelFamily,
    reg_weight_tol: f64,
}

impl KernelSet {
    pub fn power_law_uniform(lambda: f64, alpha: f64) -> Result<Self, KernelError> {
        check_exponents(lambda, alpha)?;
        Ok(Self {
            family: KernelFamily::PowerLawUniform { lambda, alpha },
            reg_weight_tol: DEFAULT_REG_WEIGHT_TOL,
        })
    }

    /// The Cheng–Redner family; `opt_in` must be set because the monomer
    /// convention is not part of the original breakage rule.
    pub fn cheng_redner_uniform(lambda: f64, alpha: f64, opt_in: bool) -> Result<Self, KernelError> {
        if !opt_in {
            return Err(KernelError::OptInRequired);
        }
        check_exponents(lambda, alpha)?;
        Ok(Self {
            family: KernelFamily::ChengRednerUniform { lambda, alpha },
            reg_weight_tol: DEFAULT_REG_WEIGHT_TOL,
        })
    }

    /// Builds a kernel set from tables, validating every identity up to the
    /// table size.
    pub fn from_table(table: KernelTable) -> Result<Self, KernelError> {
        let size = table.size();
        let ks = Self {
            family: KernelFamily::Table(table),
            reg_weight_tol: DEFAULT_REG_WEIGHT_TOL,
        };
        let report = validate_kernel_set(&ks, size.max(2));
        if !report.is_valid() {
            return Err(KernelError::Invalid(Box::new(report)));
        }
        Ok(ks)
    }

    /// Skips validation; used to exercise the validator on broken tables.
    pub fn from_table_unchecked(table: KernelTable) -> Self {
        Self {
            family: KernelFamily::Table(table),
            reg_weight_tol: DEFAULT_REG_WEIGHT_TOL,
        }
    }

    pub fn with_reg_weight_tol(mut self, tol: f64) -> Self {
        self.reg_weight_tol = tol;
        self
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            KernelFamily::PowerLawUniform { .. } => "power_law_uniform",
            KernelFamily::ChengRednerUniform { .. } => "cheng_redner_uniform",
            KernelFamily::Table(_) => "table",
        }
    }

    pub fn reg_weight_tol(&self) -> f64 {
        self.reg_weight_tol
    }

    /// Collision exponent for the power-law families.
    pub fn lambda(&self) -> Option<f64> {
        match self.family {
            KernelFamily::PowerLawUniform { lambda, .. }
            | KernelFamily::ChengRednerUniform { lambda, .. } => Some(lambda),
            KernelFamily::Table(_) => None,
        }
    }

    /// Diffusion exponent for the power-law families.
    pub fn alpha(&self) -> Option<f64> {
        match self.family {
            KernelFamily::PowerLawUniform { alpha, .. }
            | KernelFamily::ChengRednerUniform { alpha, .. } => Some(alpha),
            KernelFamily::Table(_) => None,
        }
    }

    /// Largest size index the kernel is defined for (`None` = unbounded).
    pub fn max_size(&self) -> Option<usize> {
        match &self.family {
            KernelFamily::Table(t) => Some(t.size()),
            _ => None,
        }
    }

    /// True when `b^k_{ij}` depends on `(i, j)` only through `i + j` and is
    /// constant in `k` below `i + j`.
    pub fn has_uniform_breakage(&self) -> bool {
        matches!(self.family, KernelFamily::PowerLawUniform { .. })
    }

    /// A pair `(B, θ)` with `b^k_{ij} ≤ B (i+j-1)^{-θ}` for all indices.
    pub fn breakage_majorant(&self) -> Option<(f64, f64)> {
        match self.family {
            KernelFamily::PowerLawUniform { .. } => Some((2.0, 1.0)),
            KernelFamily::ChengRednerUniform { .. } => Some((4.0, 0.0)),
            KernelFamily::Table(_) => None,
        }
    }

    fn check_in_range(&self, i: usize) -> Result<(), KernelError> {
        check_index(i)?;
        if let Some(size) = self.max_size() {
            if i > size {
                return Err(KernelError::OutsideTable { index: i, size });
            }
        }
        Ok(())
    }

    pub fn collision_rate(&self, i: usize, j: usize) -> Result<f64, KernelError> {
        self.check_in_range(i)?;
        self.check_in_range(j)?;
        Ok(self.collision_unchecked(i, j))
    }

    pub fn breakage_count(&self, i: usize, j: usize, k: usize) -> Result<f64, KernelError> {
        self.check_in_range(i)?;
        self.check_in_range(j)?;
        check_index(k)?;
        Ok(self.breakage_unchecked(i, j, k))
    }

    pub fn diffusion_coeff(&self, i: usize) -> Result<f64, KernelError> {
        self.check_in_range(i)?;
        Ok(self.diffusion_unchecked(i))
    }

    /// Certified enclosure of `c_j`. Tables are finite, so their `c_j` is
    /// the (exact up to rounding) row sum.
    pub fn reg_weight(&self, j: usize) -> Result<Enclosure, KernelError> {
        self.check_in_range(j)?;
        match &self.family {
            KernelFamily::PowerLawUniform { lambda, .. }
            | KernelFamily::ChengRednerUniform { lambda, .. } => {
                reg_weight(j, *lambda, self.reg_weight_tol)
            }
            KernelFamily::Table(t) => {
                let row: f64 = crate::numeric::compensated_sum(
                    &(1..=t.size()).map(|i| t.collision(i, j)).collect::<Vec<_>>(),
                );
                Ok(Enclosure::point(row).widen_ulps(t.size() as f64))
            }
        }
    }

    /// Indices must be ≥ 1 and inside any table.
    pub(crate) fn collision_unchecked(&self, i: usize, j: usize) -> f64 {
        match &self.family {
            KernelFamily::PowerLawUniform { lambda, .. }
            | KernelFamily::ChengRednerUniform { lambda, .. } => power_law_collision(i, j, *lambda),
            KernelFamily::Table(t) => t.collision(i, j),
        }
    }

    pub(crate) fn breakage_unchecked(&self, i: usize, j: usize, k: usize) -> f64 {
        match &self.family {
            KernelFamily::PowerLawUniform { .. } => uniform_breakage(i, j, k),
            KernelFamily::ChengRednerUniform { .. } => {
                cheng_redner_part(i, k) + cheng_redner_part(j, k)
            }
            KernelFamily::Table(t) => t.breakage(i, j, k),
        }
    }

    pub(crate) fn diffusion_unchecked(&self, i: usize) -> f64 {
        match &self.family {
            KernelFamily::PowerLawUniform { alpha, .. }
            | KernelFamily::ChengRednerUniform { alpha, .. } => power_law_diffusion(i, *alpha),
            KernelFamily::Table(t) => t.diffusion(i),
        }
    }

    /// Exact rational value of `b^k_{ij}`; table entries are converted from
    /// their binary floating-point value without rounding.
    pub fn breakage_exact(&self, i: usize, j: usize, k: usize) -> BigRational {
        let zero = || BigRational::from_integer(BigInt::from(0));
        match &self.family {
            KernelFamily::PowerLawUniform { .. } => {
                if k >= i + j {
                    zero()
                } else {
                    BigRational::new(BigInt::from(2), BigInt::from(i + j - 1))
                }
            }
            KernelFamily::ChengRednerUniform { .. } => {
                cheng_redner_part_exact(i, k) + cheng_redner_part_exact(j, k)
            }
            KernelFamily::Table(t) => {
                BigRational::from_f64(t.breakage(i, j, k)).unwrap_or_else(zero)
            }
        }
    }

    /// Warnings when the parameters leave the power-law profile
    /// (`λ ≥ 4`, `α ∈ [0, 1]`).
    pub fn profile_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let (Some(lambda), Some(alpha)) = (self.lambda(), self.alpha()) {
            if lambda < 4.0 {
                out.push(format!("collision exponent λ = {lambda} is below 4 (power-law profile)"));
            }
            if !(0.0..=1.0).contains(&alpha) {
                out.push(format!("diffusion exponent α = {alpha} is outside [0, 1] (power-law profile)"));
            }
        }
        if let KernelFamily::ChengRednerUniform { .. } = self.family {
            out.push(
                "cheng_redner_uniform: monomer colliders pass through unchanged (β^1_{1,j} = 1)"
                    .to_string(),
            );
        }
        out
    }
}

fn check_exponents(lambda: f64, alpha: f64) -> Result<(), KernelError> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(KernelError::Parameter(format!("λ must be finite and ≥ 0, got {lambda}")));
    }
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(KernelError::Parameter(format!("α must be finite and ≥ 0, got {alpha}")));
    }
    Ok(())
}
