//! End-of-run summary: final functionals plus the invariant checks with
//! the tolerances they were judged against.

use serde::Serialize;

use super::{DualityReport, EnergyReport, LinfReport, MonitorSeries};
use crate::config::Tolerances;
use crate::stepper::{Diagnostics, SimState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryStatus {
    Ok,
    InvariantFailure,
    NumericalAbort,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailValue {
    pub level: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub status: SummaryStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub t_final: f64,
    pub steps: u64,
    pub diagnostics: Diagnostics,
    pub samples: usize,
    pub mass_initial: f64,
    pub mass_final: f64,
    pub moment0_final: f64,
    pub min_final: f64,
    pub max_final: f64,
    pub tails: Vec<TailValue>,
    pub duality: DualityReport,
    pub reaction_budget: f64,
    pub linf: LinfReport,
    pub energy: Vec<EnergyReport>,
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn build(series: &MonitorSeries, state: &SimState, tol: &Tolerances) -> Summary {
        let rows = series.rows();
        let m0 = series.initial_mass();
        let mut checks = Vec::new();
        let mut check = |name: String, value: f64, tolerance: f64, pass: bool| {
            checks.push(Check { name, value, tolerance, pass: pass && !value.is_nan() });
        };

        check("finite".into(), f64::from(u8::from(!state.f.all_finite())), 0.0, state.f.all_finite());

        let drift = series.max_mass_drift();
        check("mass_drift".into(), drift, tol.mass_drift, drift <= tol.mass_drift);

        let min = rows.iter().map(|r| r.min).fold(state.f.min_value(), f64::min);
        check("min_value".into(), min, tol.min_value, min >= tol.min_value);

        let clipped = if m0 > 0.0 { state.diag.clipped_mass / m0 } else { state.diag.clipped_mass };
        check("clipped_mass".into(), clipped, tol.clipped_mass, clipped <= tol.clipped_mass);

        let decrease = rows
            .windows(2)
            .map(|w| if w[0].moment0 > 0.0 { (w[0].moment0 - w[1].moment0) / w[0].moment0 } else { 0.0 })
            .fold(0.0, f64::max);
        check("moment0_monotone".into(), decrease, tol.moment0_decrease, decrease <= tol.moment0_decrease);

        let energy = series.energy_reports();
        for (k, e) in energy.iter().enumerate() {
            let worst = rows.iter().map(|r| r.energy_slack[k]).fold(e.slack, f64::min);
            let rel = if e.rhs > 0.0 { worst / e.rhs } else { worst };
            check(format!("energy_slack@{}:{}", e.species, e.level), rel, -tol.energy_slack, rel >= -tol.energy_slack);
        }

        if let Some(last) = rows.last() {
            let mut pairs: Vec<(usize, f64)> = series.tail_levels().iter().copied().zip(last.tails.iter().copied()).collect();
            pairs.sort_by_key(|p| p.0);
            let rise = pairs.windows(2).map(|w| w[1].1 - w[0].1).fold(0.0, f64::max);
            check("tail_monotone".into(), rise, 0.0, rise <= 0.0);
        }

        let pass = checks.iter().all(|c| c.pass);
        let tails = match rows.last() {
            Some(last) => series.tail_levels().iter().zip(&last.tails).map(|(&level, &value)| TailValue { level, value }).collect(),
            None => Vec::new(),
        };
        Summary {
            status: if pass { SummaryStatus::Ok } else { SummaryStatus::InvariantFailure },
            message: None,
            t_final: state.t,
            steps: state.step,
            diagnostics: state.diag,
            samples: rows.len(),
            mass_initial: m0,
            mass_final: super::total_mass(&state.f),
            moment0_final: super::moment0(&state.f),
            min_final: state.f.min_value(),
            max_final: state.f.max_value(),
            tails,
            duality: series.duality(),
            reaction_budget: series.reaction_budget(),
            linf: series.linf(),
            energy,
            checks,
        }
    }

    /// Marks the run as aborted by the integrator.
    pub fn aborted(mut self, message: String) -> Summary {
        self.status = SummaryStatus::NumericalAbort;
        self.message = Some(message);
        self
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn exit_code(&self) -> i32 {
        match self.status {
            SummaryStatus::Ok => 0,
            SummaryStatus::InvariantFailure => 1,
            SummaryStatus::NumericalAbort => 3,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}
