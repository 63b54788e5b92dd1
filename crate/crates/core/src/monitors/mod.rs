//! Functionals along trajectories: mass and moments, tail mass, the
//! duality functional, the reaction L¹ budget and the truncation energy
//! inequality. Time integrals use the trapezoid rule on the sample times.

mod summary;

pub use summary::{Check, Summary, SummaryStatus};

use std::io::Write;

use serde::Serialize;

use crate::config::{EnergyProbe, MonitorConfig};
use crate::field::SpeciesField;
use crate::grid;
use crate::numeric::CompensatedSum;

/// `M = Σ_i i ∫ f_i`.
pub fn total_mass(f: &SpeciesField) -> f64 {
    f.species_integrals().iter().enumerate().map(|(k, v)| (k + 1) as f64 * v).collect::<CompensatedSum>().value()
}

/// `Σ_i ∫ f_i`.
pub fn moment0(f: &SpeciesField) -> f64 {
    f.species_integrals().into_iter().collect::<CompensatedSum>().value()
}

/// `τ_M = Σ_{i>M} i ∫ f_i`.
pub fn tail_mass(f: &SpeciesField, level: usize) -> f64 {
    f.species_integrals()
        .iter()
        .enumerate()
        .skip(level)
        .map(|(k, v)| (k + 1) as f64 * v)
        .collect::<CompensatedSum>()
        .value()
}

/// `(M+1) e^{-M} / (1 − e^{-1})²`, which bounds `Σ_{i>M} i e^{-i}`.
pub fn exponential_tail_envelope(level: usize) -> f64 {
    let m = level as f64;
    let q = 1.0 - (-1.0f64).exp();
    (m + 1.0) * (-m).exp() / (q * q)
}

/// `‖Σ_i i f_i‖_{L²}`.
pub fn mass_density_l2(f: &SpeciesField) -> f64 {
    grid::l2_norm(f.grid(), &f.mass_density())
}

/// `∫ (Σ_i i d_i f_i)(Σ_i i f_i)`.
pub fn duality_integrand(f: &SpeciesField, d: &[f64]) -> f64 {
    let weighted = f.weighted_density(|i| i as f64 * d[i - 1]);
    let mass = f.mass_density();
    let prod: Vec<f64> = weighted.iter().zip(&mass).map(|(a, b)| a * b).collect();
    grid::integrate(f.grid(), &prod)
}

/// `Σ_i ∫ |Q_i| / d_i`.
pub fn reaction_l1_over_d(q: &SpeciesField, d: &[f64]) -> f64 {
    (1..=q.n()).map(|i| grid::l1_norm(q.grid(), q.species(i)) / d[i - 1]).collect::<CompensatedSum>().value()
}

/// `d_i ∫_{|f_i| ≤ level} |∇f_i|²`.
pub fn energy_integrand(f: &SpeciesField, species: usize, level: f64, d_i: f64) -> f64 {
    let u = f.species(species);
    let mask: Vec<bool> = u.iter().map(|v| v.abs() <= level).collect();
    d_i * grid::gradient_sq_integral(f.grid(), u, &mask)
}

/// Trapezoid accumulator over possibly uneven sample times.
#[derive(Debug, Clone, Copy, Default)]
pub struct TimeIntegral {
    last: Option<(f64, f64)>,
    acc: CompensatedSum,
}

impl TimeIntegral {
    pub fn push(&mut self, t: f64, value: f64) {
        if let Some((t0, v0)) = self.last {
            self.acc.add(0.5 * (t - t0) * (v0 + value));
        }
        self.last = Some((t, value));
    }

    pub fn value(&self) -> f64 {
        self.acc.value()
    }
}

/// Monitored states with their times.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpeciesField>,
}

impl Trajectory {
    pub fn push(&mut self, t: f64, f: SpeciesField) {
        self.times.push(t);
        self.states.push(f);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualityReport {
    /// `∫_0^T ∫ (Σ i d_i f_i)(Σ i f_i)`.
    pub d: f64,
    /// `sup_i d_i · ‖Σ i f_i^in‖²_{L²}`.
    pub r: f64,
    pub ratio: f64,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else if a == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

pub fn duality_functional(traj: &Trajectory, d: &[f64]) -> DualityReport {
    let mut integral = TimeIntegral::default();
    for (t, f) in traj.times.iter().zip(&traj.states) {
        integral.push(*t, duality_integrand(f, d));
    }
    let r = match traj.states.first() {
        Some(f0) => d.iter().copied().fold(0.0, f64::max) * mass_density_l2(f0).powi(2),
        None => 0.0,
    };
    let d_value = integral.value();
    DualityReport { d: d_value, r, ratio: ratio(d_value, r) }
}

/// Total `Σ_i ‖Q_{i,ε}/d_i‖_{L¹((0,T)×Ω)}` and its per-species parts, given
/// the reaction field at every sample.
pub fn reaction_budget(traj: &Trajectory, q: &[SpeciesField], d: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(traj.len(), q.len());
    let n = d.len();
    let mut per = vec![TimeIntegral::default(); n];
    for (t, qf) in traj.times.iter().zip(q) {
        for (i, acc) in per.iter_mut().enumerate() {
            acc.push(*t, grid::l1_norm(qf.grid(), qf.species(i + 1)) / d[i]);
        }
    }
    let parts: Vec<f64> = per.iter().map(TimeIntegral::value).collect();
    (parts.iter().copied().collect::<CompensatedSum>().value(), parts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub species: usize,
    pub level: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

/// `LHS = d_i ∫∫_{|f_i|≤M} |∇f_i|²` against `RHS = M (‖Q_i‖_{L¹} + ‖f_i^in‖_{L¹})`.
pub fn truncation_energy_check(traj: &Trajectory, q: &[SpeciesField], probe: EnergyProbe, d_i: f64) -> EnergyReport {
    let mut lhs = TimeIntegral::default();
    let mut q_l1 = TimeIntegral::default();
    for ((t, f), qf) in traj.times.iter().zip(&traj.states).zip(q) {
        lhs.push(*t, energy_integrand(f, probe.species, probe.level, d_i));
        q_l1.push(*t, grid::l1_norm(qf.grid(), qf.species(probe.species)));
    }
    let f_in_l1 = traj.states.first().map_or(0.0, |f| grid::l1_norm(f.grid(), f.species(probe.species)));
    let rhs = probe.level * (q_l1.value() + f_in_l1);
    EnergyReport { species: probe.species, level: probe.level, lhs: lhs.value(), rhs, slack: rhs - lhs.value() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinfReport {
    pub sup: f64,
    pub eps: f64,
    /// `sup · ε`, the ratio of the supremum to the `1/ε` envelope.
    pub ratio: f64,
}

pub fn linf_bound_check(traj: &Trajectory, eps: f64) -> LinfReport {
    let sup = traj.states.iter().map(SpeciesField::max_value).fold(0.0, f64::max);
    LinfReport { sup, eps, ratio: sup * eps }
}

/// One monitor sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorRow {
    pub t: f64,
    pub mass: f64,
    pub moment0: f64,
    pub min: f64,
    pub max: f64,
    pub tails: Vec<f64>,
    pub d_cum: f64,
    pub b_cum: f64,
    pub energy_slack: Vec<f64>,
}

struct EnergyAcc {
    probe: EnergyProbe,
    d_i: f64,
    f_in_l1: f64,
    lhs: TimeIntegral,
    q_l1: TimeIntegral,
}

impl EnergyAcc {
    fn report(&self) -> EnergyReport {
        let rhs = self.probe.level * (self.q_l1.value() + self.f_in_l1);
        let lhs = self.lhs.value();
        EnergyReport { species: self.probe.species, level: self.probe.level, lhs, rhs, slack: rhs - lhs }
    }
}

/// Online version of the trajectory functionals, fed one sample at a time.
pub struct MonitorSeries {
    d: Vec<f64>,
    eps: f64,
    tail_levels: Vec<usize>,
    mass0: f64,
    r: f64,
    duality: TimeIntegral,
    budget: TimeIntegral,
    energy: Vec<EnergyAcc>,
    sup: f64,
    rows: Vec<MonitorRow>,
}

impl MonitorSeries {
    pub fn new(cfg: &MonitorConfig, f_in: &SpeciesField, d: &[f64], eps: f64) -> Self {
        let energy = cfg
            .energy
            .iter()
            .map(|&probe| EnergyAcc {
                probe,
                d_i: d[probe.species - 1],
                f_in_l1: grid::l1_norm(f_in.grid(), f_in.species(probe.species)),
                lhs: TimeIntegral::default(),
                q_l1: TimeIntegral::default(),
            })
            .collect();
        Self {
            d: d.to_vec(),
            eps,
            tail_levels: cfg.tail_levels.clone(),
            mass0: total_mass(f_in),
            r: d.iter().copied().fold(0.0, f64::max) * mass_density_l2(f_in).powi(2),
            duality: TimeIntegral::default(),
            budget: TimeIntegral::default(),
            energy,
            sup: 0.0,
            rows: Vec::new(),
        }
    }

    /// Records the state `f` at time `t` with its reaction field `q`.
    pub fn sample(&mut self, t: f64, f: &SpeciesField, q: &SpeciesField) -> &MonitorRow {
        self.duality.push(t, duality_integrand(f, &self.d));
        self.budget.push(t, reaction_l1_over_d(q, &self.d));
        for e in &mut self.energy {
            e.lhs.push(t, energy_integrand(f, e.probe.species, e.probe.level, e.d_i));
            e.q_l1.push(t, grid::l1_norm(q.grid(), q.species(e.probe.species)));
        }
        let max = f.max_value();
        self.sup = self.sup.max(max);
        let row = MonitorRow {
            t,
            mass: total_mass(f),
            moment0: moment0(f),
            min: f.min_value(),
            max,
            tails: self.tail_levels.iter().map(|&m| tail_mass(f, m)).collect(),
            d_cum: self.duality.value(),
            b_cum: self.budget.value(),
            energy_slack: self.energy.iter().map(|e| e.report().slack).collect(),
        };
        self.rows.push(row);
        self.rows.last().expect("just pushed")
    }

    pub fn rows(&self) -> &[MonitorRow] {
        &self.rows
    }

    pub fn tail_levels(&self) -> &[usize] {
        &self.tail_levels
    }

    pub fn initial_mass(&self) -> f64 {
        self.mass0
    }

    pub fn duality(&self) -> DualityReport {
        let d = self.duality.value();
        DualityReport { d, r: self.r, ratio: ratio(d, self.r) }
    }

    pub fn reaction_budget(&self) -> f64 {
        self.budget.value()
    }

    pub fn energy_reports(&self) -> Vec<EnergyReport> {
        self.energy.iter().map(EnergyAcc::report).collect()
    }

    pub fn linf(&self) -> LinfReport {
        LinfReport { sup: self.sup, eps: self.eps, ratio: self.sup * self.eps }
    }

    /// Largest `|M(t) − M(0)| / M(0)` over the samples.
    pub fn max_mass_drift(&self) -> f64 {
        let worst = self.rows.iter().map(|r| (r.mass - self.mass0).abs()).fold(0.0, f64::max);
        ratio(worst, self.mass0)
    }

    pub fn header(&self) -> String {
        let mut cols = vec!["t".to_string(), "M".into(), "moment0".into(), "min".into(), "max".into()];
        cols.extend(self.tail_levels.iter().map(|m| format!("tail@{m}")));
        cols.push("D_cum".into());
        cols.push("B_cum".into());
        cols.extend(self.energy.iter().map(|e| format!("energy_slack@{}:{}", e.probe.species, e.probe.level)));
        cols.join(",")
    }

    pub fn write_row<W: Write>(row: &MonitorRow, mut w: W) -> std::io::Result<()> {
        let mut fields = vec![row.t, row.mass, row.moment0, row.min, row.max];
        fields.extend(&row.tails);
        fields.push(row.d_cum);
        fields.push(row.b_cum);
        fields.extend(&row.energy_slack);
        let line: Vec<String> = fields.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(","))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.header())?;
        for row in &self.rows {
            Self::write_row(row, &mut w)?;
        }
        Ok(())
    }
}
