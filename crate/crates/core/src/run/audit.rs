//! Kernel audit: summability sums, kernel identities and, when the input is
//! a full run config, admissibility of the initial data.

use std::path::Path;

use serde::Deserialize;
use serde_json::{json, Value};

use super::{EXIT_INCONCLUSIVE, EXIT_INVARIANT, EXIT_OK};
use crate::config::{ConfigError, KernelConfig, SimConfig};
use crate::kernels::{
    audit_summability, check_initial_data, validate_kernel_set, AdmissibilityReport, AuditProfile, KernelSet,
    KernelTable, SeriesJudgment, SummabilityReport, ValidationReport, Verdict,
};

/// Pairs `i, j ≤ DEFAULT_VALIDATE_UP_TO` are checked unless the input says otherwise.
pub const DEFAULT_VALIDATE_UP_TO: usize = 200;

/// Audit input when no full run config is given.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelOnly {
    kernel: KernelConfig,
    #[serde(default)]
    levels: Vec<usize>,
    #[serde(default)]
    validate_up_to: Option<usize>,
}

pub struct AuditOutcome {
    pub summability: SummabilityReport,
    pub validation: ValidationReport,
    pub admissibility: Option<AdmissibilityReport>,
    pub exit_code: i32,
}

impl AuditOutcome {
    pub fn to_json(&self) -> Value {
        json!({
            "conditions": self.summability.to_json(),
            "warnings": self.summability.warnings,
            "validation": {
                "valid": self.validation.is_valid(),
                "i_max": self.validation.i_max,
                "worst_mass_residual": self.validation.worst_mass_residual,
                "violation_count": self.validation.violation_count,
                "violations": self.validation.violations,
                "notes": self.validation.notes,
            },
            "admissibility": self.admissibility.as_ref().map(|a| json!({
                "admissible": a.is_admissible(),
                "root_mass": a.root_mass,
                "mass_density_l2": a.mass_density_l2,
                "mass_density_l2_series": a.mass_density_l2_series,
            })),
            "exit_code": self.exit_code,
        })
    }
}

/// Table kernels are built without the constructor's validation so that a
/// broken table shows up as an invalid report rather than a config error.
fn build_unchecked(kernel: &KernelConfig, base_dir: &Path) -> Result<KernelSet, ConfigError> {
    match kernel {
        KernelConfig::Table { collision, breakage, diffusion } => {
            let resolve = |p: &Path| if p.is_relative() { base_dir.join(p) } else { p.to_path_buf() };
            let table = KernelTable::load(&resolve(collision), &resolve(breakage), &resolve(diffusion))?;
            Ok(KernelSet::from_table_unchecked(table))
        }
        other => Ok(other.build(base_dir)?),
    }
}

/// Audits the kernel described by `text`, either a full run config or
/// `{"kernel": ..., "levels": [...], "validate_up_to": N}`.
pub fn audit(text: &str, base_dir: &Path) -> Result<AuditOutcome, ConfigError> {
    let raw: Value = serde_json::from_str(text)?;
    let is_full = raw.get("grid").is_some() || raw.get("initial").is_some();
    let (kernel, levels, up_to, sim) = if is_full {
        let cfg = SimConfig::from_json(text)?;
        (cfg.kernel.clone(), Vec::new(), DEFAULT_VALIDATE_UP_TO, Some(cfg))
    } else {
        let k: KernelOnly = serde_json::from_value(raw)?;
        if k.validate_up_to == Some(0) {
            return Err(ConfigError::Invalid("validate_up_to must be ≥ 1".into()));
        }
        (k.kernel, k.levels, k.validate_up_to.unwrap_or(DEFAULT_VALIDATE_UP_TO), None)
    };

    let ks = build_unchecked(&kernel, base_dir)?;
    let profile = match kernel {
        KernelConfig::Table { .. } => AuditProfile::General,
        _ => AuditProfile::PowerLaw,
    };
    let summability = audit_summability(&ks, profile, &levels);
    let validation = validate_kernel_set(&ks, up_to);
    let admissibility = match &sim {
        Some(cfg) => {
            let f_in = cfg.initial.build(&cfg.grid, cfg.n, base_dir)?;
            Some(check_initial_data(&f_in, &ks, Some(&cfg.initial))?)
        }
        None => None,
    };

    let judgment = admissibility.as_ref().map(|a| (a.is_admissible(), a.root_mass.judgment));
    let exit_code = if summability.any(Verdict::Diverges)
        || !validation.is_valid()
        || matches!(judgment, Some((false, SeriesJudgment::Infinite | SeriesJudgment::Finite)))
    {
        EXIT_INVARIANT
    } else if summability.any(Verdict::Inconclusive) || matches!(judgment, Some((_, SeriesJudgment::Undetermined))) {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_OK
    };
    Ok(AuditOutcome { summability, validation, admissibility, exit_code })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::A1;

    fn kernel_only(lambda: f64, alpha: f64) -> String {
        format!(r#"{{"kernel": {{"family": "power_law_uniform", "lambda": {lambda}, "alpha": {alpha}}}}}"#)
    }

    #[test]
    fn exit_codes_follow_verdicts() {
        let here = Path::new(".");
        let ok = audit(&kernel_only(4.0, 0.0), here).unwrap();
        assert_eq!(ok.exit_code, EXIT_OK);
        assert!(ok.summability.condition(A1).unwrap().upper.is_some());
        assert_eq!(audit(&kernel_only(2.0, 1.0), here).unwrap().exit_code, EXIT_INVARIANT);
        let js = ok.to_json();
        assert_eq!(js["conditions"].as_array().unwrap().len(), 3);
        for key in ["condition", "lower", "upper", "verdict", "truncation"] {
            assert!(js["conditions"][0].get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn malformed_inputs_are_config_errors() {
        let here = Path::new(".");
        assert!(audit("{", here).is_err());
        assert!(audit(r#"{"kernel": {"family": "power_law_uniform", "lambda": 4}}"#, here).is_err());
        assert!(audit(r#"{"kernel": {"family": "power_law_uniform", "lambda": 4, "alpha": 0}, "extra": 1}"#, here).is_err());
    }

    #[test]
    fn broken_table_is_invalid_not_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path();
        std::fs::write(p.join("a.csv"), "i,j,a\n1,1,1\n1,2,1\n2,1,0.5\n2,2,1\n").unwrap();
        std::fs::write(p.join("b.csv"), "i,j,k,b\n1,1,1,2\n1,2,1,3\n2,1,1,3\n2,2,1,2\n2,2,2,1\n").unwrap();
        std::fs::write(p.join("d.csv"), "i,d\n1,1\n2,0.5\n").unwrap();
        let text = r#"{"kernel": {"family": "table", "collision": "a.csv", "breakage": "b.csv", "diffusion": "d.csv"}}"#;
        let out = audit(text, p).unwrap();
        assert!(!out.validation.is_valid());
        assert_eq!(out.exit_code, EXIT_INVARIANT);
    }
}
