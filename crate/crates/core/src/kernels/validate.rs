use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;

use super::{KernelFamily, KernelSet};
use crate::numeric::CompensatedSum;

/// Relative tolerance on `|Σ_k k b^k_{ij} − (i+j)| / (i+j)` in floating mode.
pub const MASS_RESIDUAL_TOL: f64 = 1e-12;

/// At most this many violations are recorded; the count keeps going.
const MAX_RECORDED: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    CollisionSymmetry,
    BreakageSymmetry,
    NegativeCollision,
    NegativeBreakage,
    Support,
    MassConservation,
    NonPositiveDiffusion,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub i: usize,
    pub j: usize,
    pub k: Option<usize>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub i_max: usize,
    /// Worst `|Σ_k k b^k_{ij} − (i+j)| / (i+j)` over the checked range.
    pub worst_mass_residual: f64,
    pub worst_mass_pair: (usize, usize),
    pub violation_count: usize,
    pub violations: Vec<Violation>,
    /// Documented deviations that are not failures.
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violation_count == 0
    }

    fn record(&mut self, v: Violation) {
        self.violation_count += 1;
        if self.violations.len() < MAX_RECORDED {
            self.violations.push(v);
        }
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} violation(s) up to size {}", self.violation_count, self.i_max)?;
        if let Some(v) = self.violations.first() {
            write!(f, "; first: {:?} at ({}, {})", v.kind, v.i, v.j)?;
            if let Some(k) = v.k {
                write!(f, ", k = {k}")?;
            }
            write!(f, ", residual {:e}", v.residual)?;
        }
        Ok(())
    }
}

/// Checks symmetry, nonnegativity, support and local mass conservation of
/// the breakage kernel for every pair `i, j ≤ i_max` (clamped to table size).
pub fn validate_kernel_set(ks: &KernelSet, i_max: usize) -> ValidationReport {
    let i_max = match ks.max_size() {
        Some(size) => i_max.min(size),
        None => i_max,
    };
    let mut report = ValidationReport {
        i_max,
        worst_mass_residual: 0.0,
        worst_mass_pair: (1, 1),
        violation_count: 0,
        violations: Vec::new(),
        notes: Vec::new(),
    };
    if let KernelFamily::ChengRednerUniform { .. } = ks.family() {
        report.notes.push(
            "monomer convention: a size-1 collider re-emits itself (β^1_{1,j} = 1); \
             the per-collider rule Σ_{k<i} kβ^k_{ij} = i has no solution at i = 1"
                .to_string(),
        );
    }

    for i in 1..=i_max {
        let d = ks.diffusion_unchecked(i);
        if !(d > 0.0) {
            report.record(Violation {
                kind: ViolationKind::NonPositiveDiffusion,
                i,
                j: i,
                k: None,
                residual: d,
            });
        }
        for j in 1..=i_max {
            let a = ks.collision_unchecked(i, j);
            if !(a >= 0.0) {
                report.record(Violation { kind: ViolationKind::NegativeCollision, i, j, k: None, residual: a });
            }
            if j > i {
                let a_t = ks.collision_unchecked(j, i);
                if a != a_t {
                    report.record(Violation {
                        kind: ViolationKind::CollisionSymmetry,
                        i,
                        j,
                        k: None,
                        residual: a - a_t,
                    });
                }
            }

            let total = i + j;
            let mut weighted = CompensatedSum::new();
            // Fragment sizes checked past i + j to catch support violations.
            for k in 1..=total + 1 {
                let b = ks.breakage_unchecked(i, j, k);
                if !(b >= 0.0) {
                    report.record(Violation { kind: ViolationKind::NegativeBreakage, i, j, k: Some(k), residual: b });
                }
                if k >= total {
                    if b != 0.0 {
                        report.record(Violation { kind: ViolationKind::Support, i, j, k: Some(k), residual: b });
                    }
                    continue;
                }
                if j > i {
                    let b_t = ks.breakage_unchecked(j, i, k);
                    if b != b_t {
                        report.record(Violation {
                            kind: ViolationKind::BreakageSymmetry,
                            i,
                            j,
                            k: Some(k),
                            residual: b - b_t,
                        });
                    }
                }
                weighted.add(k as f64 * b);
            }
            let residual = (weighted.value() - total as f64).abs() / total as f64;
            if residual > report.worst_mass_residual || residual.is_nan() {
                report.worst_mass_residual = residual;
                report.worst_mass_pair = (i, j);
            }
            if !(residual <= MASS_RESIDUAL_TOL) {
                report.record(Violation {
                    kind: ViolationKind::MassConservation,
                    i,
                    j,
                    k: None,
                    residual,
                });
            }
        }
    }
    report
}

/// Verifies `Σ_{k=1}^{i+j-1} k b^k_{ij} = i + j` in exact rational arithmetic
/// for all pairs with `i + j ≤ max_pair_sum`. Returns the first failure.
pub fn validate_mass_conservation_exact(ks: &KernelSet, max_pair_sum: usize) -> Result<usize, Violation> {
    let limit = ks.max_size().unwrap_or(usize::MAX);
    let mut checked = 0;
    for total in 2..=max_pair_sum {
        for i in 1..total {
            let j = total - i;
            if i > limit || j > limit {
                continue;
            }
            let mut sum = BigRational::from_integer(BigInt::from(0));
            for k in 1..total {
                sum += ks.breakage_exact(i, j, k) * BigRational::from_integer(BigInt::from(k));
            }
            let expected = BigRational::from_integer(BigInt::from(total));
            if sum != expected {
                let diff = &sum - &expected;
                let residual = num_traits::ToPrimitive::to_f64(&diff).unwrap_or(f64::NAN);
                return Err(Violation {
                    kind: ViolationKind::MassConservation,
                    i,
                    j,
                    k: None,
                    residual,
                });
            }
            checked += 1;
        }
    }
    Ok(checked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelTable;

    #[test]
    fn uniform_pair_three_five_sums_to_eight() {
        let ks = KernelSet::power_law_uniform(4.0, 0.5).unwrap();
        let s: f64 = (1..=7).map(|k| k as f64 * ks.breakage_count(3, 5, k).unwrap()).sum();
        assert!((s - 8.0).abs() < 1e-14);
    }

    #[test]
    fn uniform_family_validates_to_fifty() {
        let ks = KernelSet::power_law_uniform(4.0, 0.5).unwrap();
        let r = validate_kernel_set(&ks, 50);
        assert!(r.is_valid(), "{r}");
        assert!(r.worst_mass_residual <= 1e-12);
        // Independent exhaustive loop with plain summation.
        for i in 1..=50 {
            for j in 1..=50 {
                let s: f64 = (1..i + j).map(|k| k as f64 * 2.0 / (i + j - 1) as f64).sum();
                assert!((s - (i + j) as f64).abs() <= 1e-12 * (i + j) as f64);
            }
        }
    }

    #[test]
    fn exact_mode_uniform_and_cheng_redner() {
        let ks = KernelSet::power_law_uniform(4.0, 0.5).unwrap();
        assert_eq!(validate_mass_conservation_exact(&ks, 64).unwrap(), (2..=64).map(|t| t - 1).sum::<usize>());
        let cr = KernelSet::cheng_redner_uniform(4.0, 0.5, true).unwrap();
        assert!(validate_mass_conservation_exact(&cr, 64).is_ok());
        let r = validate_kernel_set(&cr, 40);
        assert!(r.is_valid(), "{r}");
        assert_eq!(r.notes.len(), 1);
    }

    #[test]
    fn exact_mode_flags_rounded_table() {
        // b = 1/3 stored in binary is not exactly 1/3.
        let mut t = KernelTable::zeros(2);
        t.set_collision(1, 1, 1.0);
        t.set_breakage(1, 1, 1, 2.0);
        for (i, j) in [(1, 2), (2, 1)] {
            t.set_collision(i, j, 1.0);
            t.set_breakage(i, j, 1, 1.0);
            t.set_breakage(i, j, 2, 1.0);
        }
        t.set_collision(2, 2, 1.0);
        for k in 1..=3 {
            t.set_breakage(2, 2, k, 2.0 / 3.0);
        }
        let ks = KernelSet::from_table_unchecked(t);
        assert!(validate_kernel_set(&ks, 2).is_valid());
        let err = validate_mass_conservation_exact(&ks, 4).unwrap_err();
        assert_eq!((err.i, err.j), (2, 2));
    }

    #[test]
    fn support_and_symmetry_violations_are_named() {
        let mut t = KernelTable::zeros(2);
        t.set_collision(1, 1, 1.0);
        t.set_breakage(1, 1, 1, 1.0);
        t.set_breakage(1, 1, 2, 0.5); // k = i + j
        t.set_collision(1, 2, 0.3);
        t.set_collision(2, 1, 0.2);
        let ks = KernelSet::from_table_unchecked(t);
        let r = validate_kernel_set(&ks, 2);
        assert!(!r.is_valid());
        assert!(r
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::Support && (v.i, v.j, v.k) == (1, 1, Some(2))));
        assert!(r
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::CollisionSymmetry && (v.i, v.j) == (1, 2)));
    }
}
