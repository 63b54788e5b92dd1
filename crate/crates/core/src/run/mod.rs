//! Run orchestration: single simulations with on-disk artifacts, parameter
//! sweeps and kernel audits. Every function here maps its outcome onto the
//! process exit codes used by the command-line tool.

mod audit;
mod sweep;

pub use audit::{audit, AuditOutcome};
pub use sweep::{sweep, SweepAxis, SweepOutcome, SweepRow};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{ConfigError, SimConfig};
use crate::field::SpeciesField;
use crate::grid::ScalarField;
use crate::kernels::KernelSet;
use crate::monitors::{MonitorRow, MonitorSeries, Summary, Trajectory};
use crate::reaction::ReactionOperator;
use crate::stepper::{read_checkpoint, write_checkpoint, CheckpointError, SimState, Stepper, StepperError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_INCONCLUSIVE: i32 = 4;

/// Environment variable capping intra-run parallelism.
pub const THREADS_ENV: &str = "FRAGDIFF_THREADS";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("output {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        EXIT_CONFIG
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.display().to_string(), source }
}

/// Everything needed to integrate one configuration.
pub struct Prepared {
    pub kernels: KernelSet,
    pub stepper: Stepper,
    pub f_in: SpeciesField,
}

impl Prepared {
    /// Builds kernels, reaction operator, stepper and initial data.
    /// Relative paths in the config resolve against `base_dir`.
    pub fn new(cfg: &SimConfig, base_dir: &Path) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let kernels = cfg.kernel.build(base_dir)?;
        let d = (1..=cfg.n).map(|i| kernels.diffusion_coeff(i)).collect::<Result<Vec<_>, _>>()?;
        let op = if cfg.reaction {
            Some(ReactionOperator::new(&kernels, cfg.n, cfg.eps).map_err(|e| ConfigError::Invalid(e.to_string()))?)
        } else {
            None
        };
        let stepper = Stepper::new(cfg.grid, op, d, cfg.stepper).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let f_in = cfg.initial.build(&cfg.grid, cfg.n, base_dir)?;
        Ok(Self { kernels, stepper, f_in })
    }
}

/// Result of integrating to `t_end` or to the first integrator failure.
pub struct Integration {
    pub series: MonitorSeries,
    pub state: SimState,
    pub error: Option<StepperError>,
    pub trajectory: Option<Trajectory>,
}

impl Integration {
    pub fn summary(&self, cfg: &SimConfig) -> Summary {
        let s = Summary::build(&self.series, &self.state, &cfg.tolerances);
        match &self.error {
            Some(e) => s.aborted(e.to_string()),
            None => s,
        }
    }
}

/// Callbacks fired during integration.
pub trait Observer {
    fn on_sample(&mut self, _row: &MonitorRow, _series: &MonitorSeries) -> std::io::Result<()> {
        Ok(())
    }
    fn on_checkpoint(&mut self, _state: &SimState) -> Result<(), RunError> {
        Ok(())
    }
}

impl Observer for () {}

/// Integrates from `state` (the initial state or a restored checkpoint).
/// Samples are taken at the start, every `cadence` steps and at the end.
pub fn integrate(cfg: &SimConfig, prep: &Prepared, mut state: SimState, obs: &mut dyn Observer) -> Result<Integration, RunError> {
    let st = &prep.stepper;
    let d = st.diffusion().to_vec();
    let mut series = MonitorSeries::new(&cfg.monitors, &prep.f_in, &d, cfg.eps);
    let mut trajectory = cfg.monitors.store_trajectory.then(Trajectory::default);
    let (steps, t_of) = st.schedule();
    let cadence = cfg.monitors.cadence as u64;
    let every = cfg.monitors.checkpoint_every as u64;

    take_sample(st, &state, &mut series, &mut trajectory, obs)?;
    let mut error = None;
    let mut k = state.step;
    while k < steps {
        let dt = t_of(k + 1) - state.t;
        if let Err(e) = st.step(&mut state, dt) {
            error = Some(e);
            break;
        }
        k += 1;
        state.t = t_of(k);
        if k.is_multiple_of(cadence) || k == steps {
            take_sample(st, &state, &mut series, &mut trajectory, obs)?;
        }
        if every > 0 && k.is_multiple_of(every) && k < steps {
            obs.on_checkpoint(&state)?;
        }
    }
    Ok(Integration { series, state, error, trajectory })
}

fn take_sample(
    st: &Stepper,
    state: &SimState,
    series: &mut MonitorSeries,
    traj: &mut Option<Trajectory>,
    obs: &mut dyn Observer,
) -> Result<(), RunError> {
    let q = st.reaction_field(&state.f).unwrap_or_else(|_| SpeciesField::zeros(*state.f.grid(), state.f.n()));
    let row = series.sample(state.t, &state.f, &q).clone();
    if let Some(tr) = traj {
        tr.push(state.t, state.f.clone());
    }
    obs.on_sample(&row, series).map_err(io_err(Path::new("monitors.csv")))
}

/// Options of a single simulation.
#[derive(Debug, Clone, Default)]
pub struct SimulateOptions {
    /// Resume from this checkpoint instead of the initial data.
    pub restart: Option<PathBuf>,
}

pub struct SimulateOutcome {
    pub summary: Summary,
    pub state: SimState,
    pub trajectory: Option<Trajectory>,
}

impl SimulateOutcome {
    pub fn exit_code(&self) -> i32 {
        self.summary.exit_code()
    }
}

struct DiskObserver {
    monitors: BufWriter<File>,
    checkpoint: PathBuf,
    config_json: String,
}

impl Observer for DiskObserver {
    fn on_sample(&mut self, row: &MonitorRow, _series: &MonitorSeries) -> std::io::Result<()> {
        MonitorSeries::write_row(row, &mut self.monitors)?;
        self.monitors.flush()
    }

    fn on_checkpoint(&mut self, state: &SimState) -> Result<(), RunError> {
        write_checkpoint(&self.checkpoint, &self.config_json, state)?;
        Ok(())
    }
}

/// Runs `cfg` and writes `config.json`, `monitors.csv`, `summary.json`,
/// `checkpoint.txt` and `snapshots/` into `out_dir`.
pub fn simulate(cfg: &SimConfig, base_dir: &Path, out_dir: &Path, opts: &SimulateOptions) -> Result<SimulateOutcome, RunError> {
    let prep = Prepared::new(cfg, base_dir)?;
    let state = match &opts.restart {
        Some(path) => {
            let ck = read_checkpoint(path)?;
            if ck.state.f.grid() != &cfg.grid || ck.state.f.n() != cfg.n {
                return Err(ConfigError::Invalid("checkpoint grid or species count does not match the config".into()).into());
            }
            ck.state
        }
        None => SimState::new(prep.f_in.clone()),
    };

    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let config_json = cfg.to_json();
    let cfg_path = out_dir.join("config.json");
    std::fs::write(&cfg_path, format!("{config_json}\n")).map_err(io_err(&cfg_path))?;

    let mon_path = out_dir.join("monitors.csv");
    let mut monitors = BufWriter::new(File::create(&mon_path).map_err(io_err(&mon_path))?);
    let header = MonitorSeries::new(&cfg.monitors, &prep.f_in, prep.stepper.diffusion(), cfg.eps).header();
    writeln!(monitors, "{header}").map_err(io_err(&mon_path))?;
    let mut obs = DiskObserver { monitors, checkpoint: out_dir.join("checkpoint.txt"), config_json };

    let run = integrate(cfg, &prep, state, &mut obs)?;
    obs.monitors.flush().map_err(io_err(&mon_path))?;
    write_checkpoint(&obs.checkpoint, &obs.config_json, &run.state)?;
    write_snapshots(&run.state, &out_dir.join("snapshots"))?;

    let summary = run.summary(cfg);
    let sum_path = out_dir.join("summary.json");
    std::fs::write(&sum_path, format!("{}\n", summary.to_json())).map_err(io_err(&sum_path))?;
    Ok(SimulateOutcome { summary, state: run.state, trajectory: run.trajectory })
}

/// Integrates without touching the filesystem.
pub fn simulate_in_memory(cfg: &SimConfig, base_dir: &Path) -> Result<SimulateOutcome, RunError> {
    let prep = Prepared::new(cfg, base_dir)?;
    let run = integrate(cfg, &prep, SimState::new(prep.f_in.clone()), &mut ())?;
    Ok(SimulateOutcome { summary: run.summary(cfg), state: run.state, trajectory: run.trajectory })
}

/// One CSV per species plus the mass density `Σ i f_i`.
pub fn write_snapshots(state: &SimState, dir: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let grid = *state.f.grid();
    let t = format!("{:?}", state.t);
    let write = |name: String, values: Vec<f64>, meta: Vec<(&str, String)>| -> Result<(), RunError> {
        let path = dir.join(name);
        let field = ScalarField::new(grid, values).expect("grid-sized field");
        let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
        field.write_csv(&mut w, &meta).map_err(io_err(&path))?;
        w.flush().map_err(io_err(&path))
    };
    let width = state.f.n().to_string().len();
    for i in 1..=state.f.n() {
        write(format!("species_{i:0width$}.csv"), state.f.species(i).to_vec(), vec![("species", i.to_string()), ("t", t.clone())])?;
    }
    write("mass_density.csv".into(), state.f.mass_density(), vec![("quantity", "mass_density".into()), ("t", t)])
}

/// Runs `f` on a pool capped by `FRAGDIFF_THREADS` when set.
pub fn with_thread_cap<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let cap = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0);
    match cap.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}
