//! Parameter sweeps over `n`, `ε` or the grid resolution.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::{io_err, simulate, RunError, SimulateOptions, EXIT_INVARIANT, EXIT_NUMERICAL, EXIT_OK};
use crate::config::{ConfigError, SimConfig};
use crate::field::SpeciesField;
use crate::monitors::Summary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    N,
    Eps,
    Grid,
}

impl FromStr for SweepAxis {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "n" => Ok(SweepAxis::N),
            "eps" => Ok(SweepAxis::Eps),
            "grid" => Ok(SweepAxis::Grid),
            other => Err(ConfigError::Invalid(format!("unknown sweep axis `{other}` (expected n, eps or grid)"))),
        }
    }
}

impl SweepAxis {
    fn name(self) -> &'static str {
        match self {
            SweepAxis::N => "n",
            SweepAxis::Eps => "eps",
            SweepAxis::Grid => "grid",
        }
    }

    /// Copy of `base` with the swept parameter set to `value`.
    pub fn apply(self, base: &SimConfig, value: f64) -> Result<SimConfig, ConfigError> {
        let mut cfg = base.clone();
        let count = |v: f64| -> Result<usize, ConfigError> {
            if v >= 1.0 && v.fract() == 0.0 && v.is_finite() {
                Ok(v as usize)
            } else {
                Err(ConfigError::Invalid(format!("{} sweep needs positive integers, got {v}", self.name())))
            }
        };
        match self {
            SweepAxis::N => {
                cfg.n = count(value)?;
                cfg.monitors.tail_levels.retain(|&m| m <= cfg.n);
                cfg.monitors.energy.retain(|p| p.species <= cfg.n);
            }
            SweepAxis::Eps => cfg.eps = value,
            SweepAxis::Grid => cfg.grid = cfg.grid.with_cells(count(value)?)?,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub dir: PathBuf,
    pub exit_code: i32,
    /// Terminal L¹ distance to the previous value's run.
    pub l1_diff_prev: Option<f64>,
    /// Terminal L¹ distance to the last value's run.
    pub l1_diff_last: Option<f64>,
    /// Observed convergence order from three consecutive runs.
    pub order: Option<f64>,
    pub summary: Summary,
}

pub struct SweepOutcome {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    pub finals: Vec<SpeciesField>,
}

impl SweepOutcome {
    /// Worst run outcome: numerical abort over invariant failure over success.
    pub fn exit_code(&self) -> i32 {
        let codes: Vec<i32> = self.rows.iter().map(|r| r.exit_code).collect();
        if codes.contains(&EXIT_NUMERICAL) {
            EXIT_NUMERICAL
        } else if codes.contains(&EXIT_INVARIANT) {
            EXIT_INVARIANT
        } else {
            EXIT_OK
        }
    }

    fn write_csv(&self, path: &Path) -> Result<(), RunError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err(path))?);
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        let mut text = String::from("value,exit_code,l1_diff_prev,l1_diff_last,order,mass_drift,D,R,D_over_R\n");
        for r in &self.rows {
            let drift = r.summary.checks.iter().find(|c| c.name == "mass_drift").map(|c| c.value);
            let dual = &r.summary.duality;
            text.push_str(&format!(
                "{:?},{},{},{},{},{},{:?},{:?},{:?}\n",
                r.value,
                r.exit_code,
                opt(r.l1_diff_prev),
                opt(r.l1_diff_last),
                opt(r.order),
                opt(drift),
                dual.d,
                dual.r,
                dual.ratio
            ));
        }
        w.write_all(text.as_bytes()).map_err(io_err(path))?;
        w.flush().map_err(io_err(path))
    }
}

/// L¹ distance between terminal states; on the grid axis the finer state is
/// averaged onto the coarser grid first.
fn terminal_distance(a: &SpeciesField, b: &SpeciesField) -> Option<f64> {
    if a.grid() == b.grid() {
        return Some(a.l1_distance(b));
    }
    let (coarse, fine) = if a.num_cells() < b.num_cells() { (a, b) } else { (b, a) };
    fine.restrict_to(coarse.grid()).map(|r| r.l1_distance(coarse))
}

fn check_monotone(values: &[f64]) -> Result<(), ConfigError> {
    if values.is_empty() {
        return Err(ConfigError::Invalid("sweep needs at least one value".into()));
    }
    let up = values.windows(2).all(|w| w[1] > w[0]);
    let down = values.windows(2).all(|w| w[1] < w[0]);
    if up || down {
        Ok(())
    } else {
        Err(ConfigError::Invalid("sweep values must be strictly monotone".into()))
    }
}

/// Runs one simulation per value in `out_dir/<axis>_<k>` and writes
/// `sweep.csv`, rewritten after every run so partial sweeps keep their rows.
pub fn sweep(base: &SimConfig, base_dir: &Path, axis: SweepAxis, values: &[f64], out_dir: &Path) -> Result<SweepOutcome, RunError> {
    check_monotone(values)?;
    let configs = values.iter().map(|&v| axis.apply(base, v)).collect::<Result<Vec<_>, _>>()?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let csv = out_dir.join("sweep.csv");
    let mut out = SweepOutcome { axis, rows: Vec::new(), finals: Vec::new() };

    for (k, (cfg, &value)) in configs.iter().zip(values).enumerate() {
        let dir = out_dir.join(format!("{}_{k}", axis.name()));
        let run = simulate(cfg, base_dir, &dir, &SimulateOptions::default())?;
        let l1_diff_prev = out.finals.last().and_then(|prev| terminal_distance(prev, &run.state.f));
        let order = match (out.rows.last().and_then(|r| r.l1_diff_prev), l1_diff_prev, k) {
            (Some(d_prev), Some(d), k) if k >= 2 && d > 0.0 && values[k - 2..=k].iter().all(|&v| v > 0.0) => {
                let ratio = (value / values[k - 1]).ln().abs();
                Some((d_prev / d).ln() / ratio)
            }
            _ => None,
        };
        out.rows.push(SweepRow { value, dir, exit_code: run.exit_code(), l1_diff_prev, l1_diff_last: None, order, summary: run.summary });
        out.finals.push(run.state.f);
        out.write_csv(&csv)?;
    }

    let last = out.finals.last().cloned().expect("at least one run");
    for (row, f) in out.rows.iter_mut().zip(&out.finals) {
        row.l1_diff_last = terminal_distance(f, &last);
    }
    out.write_csv(&csv)?;
    Ok(out)
}
