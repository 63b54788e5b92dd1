//! Method-of-lines time stepping of `∂_t f_i = d_i Δ f_i + Q_{i,ε}(f)`.

mod checkpoint;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointError};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::SpeciesField;
use crate::grid::{laplacian_neumann_into, solve_implicit_neumann, GridSpec, ImplicitSolveError};
use crate::reaction::{ReactionError, ReactionOperator};

pub const DEFAULT_DT_MIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Rk4Explicit,
    #[default]
    ImexEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativityPolicy {
    /// Retry the step as two half steps, down to `dt_min`.
    #[default]
    RejectAndHalve,
    /// Set negative entries to zero and account for the removed mass.
    ClipToZero,
}

fn default_dt_min() -> f64 {
    DEFAULT_DT_MIN
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperConfig {
    #[serde(default)]
    pub scheme: Scheme,
    /// Fixed step; exclusive with `cfl`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Step as a fraction of the explicit diffusion limit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl: Option<f64>,
    #[serde(default)]
    pub negativity: NegativityPolicy,
    #[serde(default = "default_dt_min")]
    pub dt_min: f64,
    pub t_end: f64,
}

impl StepperConfig {
    pub fn imex(dt: f64, t_end: f64) -> Self {
        Self { scheme: Scheme::ImexEuler, dt: Some(dt), cfl: None, negativity: NegativityPolicy::RejectAndHalve, dt_min: DEFAULT_DT_MIN, t_end }
    }

    pub fn rk4(dt: f64, t_end: f64) -> Self {
        Self { scheme: Scheme::Rk4Explicit, ..Self::imex(dt, t_end) }
    }

    pub fn validate(&self) -> Result<(), StepperError> {
        let bad = |m: String| Err(StepperError::Config(m));
        match (self.dt, self.cfl) {
            (Some(_), Some(_)) => return bad("give either stepper.dt or stepper.cfl, not both".into()),
            (None, None) => return bad("stepper.dt or stepper.cfl is required".into()),
            (Some(dt), None) if !(dt > 0.0 && dt.is_finite()) => return bad(format!("dt must be positive, got {dt}")),
            (None, Some(c)) if !(c > 0.0 && c <= 1.0) => return bad(format!("cfl must be in (0, 1], got {c}")),
            _ => {}
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be finite and ≥ 0, got {}", self.t_end));
        }
        if !(self.dt_min > 0.0) {
            return bad(format!("dt_min must be positive, got {}", self.dt_min));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum StepperError {
    #[error("{0}")]
    Config(String),
    #[error("dt = {dt:e} exceeds the explicit stability limit {limit:e}")]
    Cfl { dt: f64, limit: f64 },
    #[error("non-finite density at t = {t}")]
    NonFinite { t: f64 },
    #[error("negative densities persist at dt = {dt:e} < dt_min (t = {t})")]
    DtUnderflow { t: f64, dt: f64 },
    #[error(transparent)]
    Reaction(#[from] ReactionError),
    #[error(transparent)]
    Solve(#[from] ImplicitSolveError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub last_dt: f64,
    pub rejected_steps: u64,
    pub clip_events: u64,
    /// `Σ_i i ∫ (negative part)` removed by clipping.
    pub clipped_mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub f: SpeciesField,
    pub step: u64,
    pub diag: Diagnostics,
}

impl SimState {
    pub fn new(f: SpeciesField) -> Self {
        Self { t: 0.0, f, step: 0, diag: Diagnostics::default() }
    }
}

/// Outcome of a single attempt.
enum Attempt {
    Accepted(SpeciesField),
    Negative,
}

/// `h_min² / (2 · dim · max_i d_i)`.
pub fn cfl_limit(grid: &GridSpec, d_max: f64) -> f64 {
    let h = grid.min_spacing();
    h * h / (2.0 * grid.dim() as f64 * d_max)
}

/// Time integrator bound to one grid, reaction operator and step size.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: GridSpec,
    op: Option<ReactionOperator>,
    d: Vec<f64>,
    cfg: StepperConfig,
    dt: f64,
}

impl Stepper {
    /// `op = None` switches the reaction off; `d` are the diffusion
    /// coefficients of the `n` species.
    pub fn new(grid: GridSpec, op: Option<ReactionOperator>, d: Vec<f64>, cfg: StepperConfig) -> Result<Self, StepperError> {
        cfg.validate()?;
        if let Some(op) = &op {
            assert_eq!(op.n(), d.len(), "reaction operator and diffusion sizes differ");
        }
        let d_max = d.iter().copied().fold(0.0, f64::max);
        let limit = cfl_limit(&grid, d_max);
        let dt = match (cfg.dt, cfg.cfl) {
            (Some(dt), _) => dt,
            (None, Some(c)) => c * limit,
            (None, None) => unreachable!("validated"),
        };
        if cfg.scheme == Scheme::Rk4Explicit && dt > limit {
            return Err(StepperError::Cfl { dt, limit });
        }
        Ok(Self { grid, op, d, cfg, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn reaction(&self) -> Option<&ReactionOperator> {
        self.op.as_ref()
    }

    pub fn diffusion(&self) -> &[f64] {
        &self.d
    }

    /// Number of steps to reach `t_end` and the time after step `k`
    /// (`k·dt`, the last step clamped to `t_end`).
    pub fn schedule(&self) -> (u64, impl Fn(u64) -> f64) {
        let (dt, t_end) = (self.dt, self.cfg.t_end);
        let steps = if t_end == 0.0 { 0 } else { ((t_end / dt) - 1e-9).ceil().max(1.0) as u64 };
        (steps, move |k: u64| if k >= steps { t_end } else { k as f64 * dt })
    }

    /// Reaction field `Q_{·,ε}(f)`; zero when the reaction is off.
    pub fn reaction_field(&self, f: &SpeciesField) -> Result<SpeciesField, StepperError> {
        let mut q = SpeciesField::zeros(self.grid, f.n());
        if let Some(op) = &self.op {
            op.apply_field(f, &mut q)?;
        }
        Ok(q)
    }

    /// Advances `s` by `dt`, applying the negativity policy.
    pub fn step(&self, s: &mut SimState, dt: f64) -> Result<(), StepperError> {
        self.advance(s, dt)?;
        s.step += 1;
        Ok(())
    }

    fn advance(&self, s: &mut SimState, dt: f64) -> Result<(), StepperError> {
        let attempt = match self.cfg.scheme {
            Scheme::ImexEuler => self.attempt_imex(s, dt)?,
            Scheme::Rk4Explicit => self.attempt_rk4(s, dt)?,
        };
        match attempt {
            Attempt::Accepted(f) => {
                if !f.all_finite() {
                    return Err(StepperError::NonFinite { t: s.t + dt });
                }
                s.f = f;
                s.t += dt;
                s.diag.last_dt = dt;
                Ok(())
            }
            Attempt::Negative => {
                let half = 0.5 * dt;
                if half < self.cfg.dt_min {
                    return Err(StepperError::DtUnderflow { t: s.t, dt: half });
                }
                s.diag.rejected_steps += 1;
                self.advance(s, half)?;
                self.advance(s, half)
            }
        }
    }

    /// Handles negative entries of `f` per policy; `false` means reject.
    fn enforce_sign(&self, f: &mut SpeciesField, diag: &mut Diagnostics) -> bool {
        if f.min_value() >= 0.0 {
            return true;
        }
        match self.cfg.negativity {
            NegativityPolicy::RejectAndHalve => false,
            NegativityPolicy::ClipToZero => {
                let m = f.num_cells();
                let w = self.grid.cell_measure();
                for (idx, v) in f.as_mut_slice().iter_mut().enumerate() {
                    if *v < 0.0 {
                        diag.clip_events += 1;
                        diag.clipped_mass += (idx / m + 1) as f64 * (-*v) * w;
                        *v = 0.0;
                    }
                }
                true
            }
        }
    }

    /// IMEX Euler: `f ← (I − dt d_i Δ)^{-1} (f + dt Q(f))`.
    pub fn step_imex(&self, s: &mut SimState, dt: f64) -> Result<(), StepperError> {
        match self.attempt_imex(s, dt)? {
            Attempt::Accepted(f) => {
                s.f = f;
                s.t += dt;
                s.step += 1;
                s.diag.last_dt = dt;
                Ok(())
            }
            Attempt::Negative => Err(StepperError::DtUnderflow { t: s.t, dt }),
        }
    }

    fn attempt_imex(&self, s: &mut SimState, dt: f64) -> Result<Attempt, StepperError> {
        let q = self.reaction_field(&s.f)?;
        let mut g = s.f.clone();
        for (v, r) in g.as_mut_slice().iter_mut().zip(q.as_slice()) {
            *v += dt * r;
        }
        if !self.enforce_sign(&mut g, &mut s.diag) {
            return Ok(Attempt::Negative);
        }
        self.implicit_diffusion(&mut g, dt)?;
        if !self.enforce_sign(&mut g, &mut s.diag) {
            return Ok(Attempt::Negative);
        }
        Ok(Attempt::Accepted(g))
    }

    fn implicit_diffusion(&self, g: &mut SpeciesField, dt: f64) -> Result<(), StepperError> {
        let m = g.num_cells();
        let grid = self.grid;
        let d = &self.d;
        g.as_mut_slice()
            .par_chunks_mut(m)
            .enumerate()
            .try_for_each(|(k, u)| solve_implicit_neumann(&grid, dt * d[k], u))?;
        Ok(())
    }

    /// Classical RK4 on the full right-hand side. Requires `dt` within the
    /// explicit diffusion limit.
    pub fn step_rk4(&self, s: &mut SimState, dt: f64) -> Result<(), StepperError> {
        match self.attempt_rk4(s, dt)? {
            Attempt::Accepted(f) => {
                s.f = f;
                s.t += dt;
                s.step += 1;
                s.diag.last_dt = dt;
                Ok(())
            }
            Attempt::Negative => Err(StepperError::DtUnderflow { t: s.t, dt }),
        }
    }

    fn rhs(&self, f: &SpeciesField) -> Result<SpeciesField, StepperError> {
        let mut out = self.reaction_field(f)?;
        let m = f.num_cells();
        let grid = self.grid;
        let d = &self.d;
        out.as_mut_slice().par_chunks_mut(m).zip(f.as_slice().par_chunks(m)).enumerate().for_each(
            |(k, (o, u))| {
                let mut lap = vec![0.0; m];
                laplacian_neumann_into(&grid, u, &mut lap);
                for (o, l) in o.iter_mut().zip(&lap) {
                    *o += d[k] * l;
                }
            },
        );
        Ok(out)
    }

    fn attempt_rk4(&self, s: &mut SimState, dt: f64) -> Result<Attempt, StepperError> {
        let limit = cfl_limit(&self.grid, self.d.iter().copied().fold(0.0, f64::max));
        if dt > limit * (1.0 + 1e-12) {
            return Err(StepperError::Cfl { dt, limit });
        }
        let stage = |base: &SpeciesField, k: &SpeciesField, c: f64| {
            let mut out = base.clone();
            for (v, kv) in out.as_mut_slice().iter_mut().zip(k.as_slice()) {
                *v += c * kv;
            }
            out
        };
        let k1 = self.rhs(&s.f)?;
        let mut y = stage(&s.f, &k1, 0.5 * dt);
        if !self.enforce_sign(&mut y, &mut s.diag) {
            return Ok(Attempt::Negative);
        }
        let k2 = self.rhs(&y)?;
        let mut y = stage(&s.f, &k2, 0.5 * dt);
        if !self.enforce_sign(&mut y, &mut s.diag) {
            return Ok(Attempt::Negative);
        }
        let k3 = self.rhs(&y)?;
        let mut y = stage(&s.f, &k3, dt);
        if !self.enforce_sign(&mut y, &mut s.diag) {
            return Ok(Attempt::Negative);
        }
        let k4 = self.rhs(&y)?;
        let mut out = s.f.clone();
        let w = dt / 6.0;
        for (idx, v) in out.as_mut_slice().iter_mut().enumerate() {
            *v += w * (k1.as_slice()[idx] + 2.0 * k2.as_slice()[idx] + 2.0 * k3.as_slice()[idx] + k4.as_slice()[idx]);
        }
        if !self.enforce_sign(&mut out, &mut s.diag) {
            return Ok(Attempt::Negative);
        }
        Ok(Attempt::Accepted(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSet;
    use crate::monitors::total_mass;
    use std::f64::consts::PI;

    fn setup(n: usize, cells: usize, cfg: StepperConfig) -> (Stepper, SimState) {
        let grid = GridSpec::line(1.0, cells).unwrap();
        let ks = KernelSet::power_law_uniform(4.0, 0.5).unwrap();
        let op = ReactionOperator::new(&ks, n, 0.0).unwrap();
        let d = op.diffusion().to_vec();
        let f = SpeciesField::from_fn(grid, n, |i, x, _| (-(i as f64)).exp() * (1.0 + 0.5 * (2.0 * PI * x).cos()));
        (Stepper::new(grid, Some(op), d, cfg).unwrap(), SimState::new(f))
    }

    #[test]
    fn neutral_two_species_conserve_each_integral() {
        let (st, mut s) = setup(2, 16, StepperConfig::rk4(1e-4, 0.1));
        let before = s.f.species_integrals();
        for _ in 0..1000 {
            st.step(&mut s, 1e-4).unwrap();
        }
        for (a, b) in s.f.species_integrals().iter().zip(&before) {
            assert!((a - b).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn rk4_eigenmode_decay_matches_scalar_dahlquist() {
        let grid = GridSpec::line(1.0, 32).unwrap();
        let h = grid.spacing(0);
        let lam = -(2.0 / (h * h)) * (1.0 - (PI * h).cos());
        let dt = 0.4 * cfl_limit(&grid, 1.0);
        let st = Stepper::new(grid, None, vec![1.0], StepperConfig::rk4(dt, 1.0)).unwrap();
        let f = SpeciesField::from_fn(grid, 1, |_, x, _| 1.0 + (PI * x).cos());
        let mut s = SimState::new(f.clone());
        st.step(&mut s, dt).unwrap();
        let z = lam * dt;
        let rk4_factor = 1.0 + z + z * z / 2.0 + z.powi(3) / 6.0 + z.powi(4) / 24.0;
        for (a, b) in s.f.as_slice().iter().zip(f.as_slice()) {
            assert!((a - 1.0 - rk4_factor * (b - 1.0)).abs() < 1e-14);
            assert!((rk4_factor - z.exp()).abs() < 2.0 * z.abs().powi(5) / 120.0);
        }
    }

    #[test]
    fn zero_state_is_fixed() {
        for cfg in [StepperConfig::rk4(1e-5, 1.0), StepperConfig::imex(1e-2, 1.0)] {
            let (st, mut s) = setup(6, 16, cfg);
            s.f = SpeciesField::zeros(*st.grid(), 6);
            for _ in 0..10 {
                st.step(&mut s, st.dt()).unwrap();
            }
            assert!(s.f.as_slice().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn imex_conserves_mass_and_sign() {
        let (st, mut s) = setup(8, 32, StepperConfig::imex(5e-3, 1.0));
        let m0 = total_mass(&s.f);
        for _ in 0..200 {
            st.step(&mut s, 5e-3).unwrap();
        }
        assert!((total_mass(&s.f) - m0).abs() <= 1e-12 * m0);
        assert!(s.f.min_value() >= 0.0);
        assert_eq!(s.diag.rejected_steps, 0);
    }

    #[test]
    fn imex_pure_diffusion_keeps_sign_for_huge_steps() {
        let grid = GridSpec::rect(1.0, 1.0, 8, 8).unwrap();
        let mut f = SpeciesField::zeros(grid, 1);
        f.species_mut(1)[10] = 1.0;
        let st = Stepper::new(grid, None, vec![1.0], StepperConfig::imex(10.0, 100.0)).unwrap();
        let mut s = SimState::new(f);
        st.step(&mut s, 10.0).unwrap();
        assert!(s.f.min_value() >= 0.0);
        let c = SpeciesField::from_fn(grid, 1, |_, _, _| 0.3);
        let mut s = SimState::new(c);
        st.step(&mut s, 10.0).unwrap();
        assert!(s.f.as_slice().iter().all(|v| (v - 0.3).abs() < 1e-14));
    }

    #[test]
    fn rk4_refuses_unstable_steps() {
        let grid = GridSpec::line(1.0, 64).unwrap();
        let err = Stepper::new(grid, None, vec![1.0], StepperConfig::rk4(1e-3, 1.0)).unwrap_err();
        assert!(matches!(err, StepperError::Cfl { .. }));
    }

    #[test]
    fn negativity_policies() {
        // A huge explicit reaction step drives f_3 negative.
        let grid = GridSpec::line(1.0, 8).unwrap();
        let ks = KernelSet::power_law_uniform(0.0, 0.0).unwrap();
        let op = ReactionOperator::new(&ks, 4, 0.0).unwrap();
        let f = SpeciesField::from_fn(grid, 4, |i, _, _| if i == 1 { 1.0 } else { 0.01 });
        let st = Stepper::new(grid, Some(op.clone()), vec![1.0; 4], StepperConfig::imex(10.0, 10.0)).unwrap();
        let mut s = SimState::new(f.clone());
        st.step(&mut s, 10.0).unwrap();
        assert!(s.diag.rejected_steps > 0);
        assert!(s.f.min_value() >= 0.0);
        assert!((s.t - 10.0).abs() < 1e-14);

        let mut cfg = StepperConfig::imex(10.0, 10.0);
        cfg.negativity = NegativityPolicy::ClipToZero;
        let st = Stepper::new(grid, Some(op), vec![1.0; 4], cfg).unwrap();
        let mut s = SimState::new(f);
        st.step(&mut s, 10.0).unwrap();
        assert!(s.diag.clip_events > 0 && s.diag.clipped_mass > 0.0);
        assert_eq!(s.diag.rejected_steps, 0);
    }

    #[test]
    fn schedule_hits_end_time() {
        let (st, _) = setup(2, 8, StepperConfig::imex(0.3, 1.0));
        let (steps, t_of) = st.schedule();
        assert_eq!(steps, 4);
        assert_eq!(t_of(3), 0.8999999999999999);
        assert_eq!(t_of(4), 1.0);
        let (st, _) = setup(2, 8, StepperConfig::imex(1e-3, 1.0));
        assert_eq!(st.schedule().0, 1000);
    }
}
