use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fragdiff_core::config::SimConfig;
use fragdiff_core::run::{self, SimulateOptions, SweepAxis, EXIT_CONFIG};

mod plot;

#[derive(Parser)]
#[command(name = "fragdiff", version, about = "Discrete nonlinear fragmentation with size-dependent diffusion")]
struct Cli {
    /// Suppress progress and status messages.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its artifacts.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's `output` or `fragdiff-out`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Resume from a checkpoint file.
        #[arg(long)]
        restart: Option<PathBuf>,
    },
    /// Run the config once per value of one parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// One of n, eps, grid.
        #[arg(long)]
        axis: String,
        /// Comma-separated, strictly monotone.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
    },
    /// Audit the kernel summability conditions and identities.
    Audit {
        #[arg(long)]
        config: PathBuf,
        /// Also write the report to DIR/audit.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write gnuplot-ready data and a script for a run directory.
    Plot {
        /// Run directory containing monitors.csv and snapshots/.
        run_dir: PathBuf,
        /// Defaults to RUN_DIR/plots.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn load(config: &Path) -> Result<SimConfig, i32> {
    SimConfig::load(config).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })
}

fn out_dir(cli_out: Option<PathBuf>, cfg: &SimConfig) -> PathBuf {
    cli_out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("fragdiff-out"))
}

fn simulate(config: &Path, out: Option<PathBuf>, restart: Option<PathBuf>, quiet: bool) -> i32 {
    let cfg = match load(config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let dir = out_dir(out, &cfg);
    match run::with_thread_cap(|| run::simulate(&cfg, &base_dir(config), &dir, &SimulateOptions { restart })) {
        Ok(outcome) => {
            let s = &outcome.summary;
            if !quiet {
                eprintln!(
                    "{:?}: t = {}, steps = {}, mass drift = {:e}, min = {:e}",
                    s.status,
                    s.t_final,
                    s.steps,
                    s.checks.iter().find(|c| c.name == "mass_drift").map_or(f64::NAN, |c| c.value),
                    s.min_final
                );
            }
            for c in s.failed_checks() {
                eprintln!("check failed: {} = {:e} (tolerance {:e})", c.name, c.value, c.tolerance);
            }
            if let Some(m) = &s.message {
                eprintln!("aborted: {m}");
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn sweep(config: &Path, out: Option<PathBuf>, axis: &str, values: &[f64], quiet: bool) -> i32 {
    let cfg = match load(config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let axis: SweepAxis = match axis.parse() {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let dir = out_dir(out, &cfg);
    match run::with_thread_cap(|| run::sweep(&cfg, &base_dir(config), axis, values, &dir)) {
        Ok(outcome) => {
            if !quiet {
                for r in &outcome.rows {
                    eprintln!(
                        "{} = {}: exit {}, L1 to previous {}, order {}",
                        serde_json::to_string(&axis).unwrap_or_default().trim_matches('"'),
                        r.value,
                        r.exit_code,
                        r.l1_diff_prev.map_or("-".into(), |v| format!("{v:e}")),
                        r.order.map_or("-".into(), |v| format!("{v:.3}"))
                    );
                }
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn audit(config: &Path, out: Option<PathBuf>) -> i32 {
    let text = match std::fs::read_to_string(config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config.display());
            return EXIT_CONFIG;
        }
    };
    match run::with_thread_cap(|| run::audit(&text, &base_dir(config))) {
        Ok(outcome) => {
            let json = serde_json::to_string_pretty(&outcome.to_json()).expect("report serializes");
            println!("{json}");
            if let Some(dir) = out {
                let written = std::fs::create_dir_all(&dir).and_then(|_| std::fs::write(dir.join("audit.json"), format!("{json}\n")));
                if let Err(e) = written {
                    eprintln!("error: cannot write audit report: {e}");
                    return EXIT_CONFIG;
                }
            }
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Simulate { config, out, restart } => simulate(&config, out, restart, cli.quiet),
        Command::Sweep { config, out, axis, values } => sweep(&config, out, &axis, &values, cli.quiet),
        Command::Audit { config, out } => audit(&config, out),
        Command::Plot { run_dir, out } => {
            let out = out.unwrap_or_else(|| run_dir.join("plots"));
            match plot::write_plot_files(&run_dir, &out) {
                Ok(files) => {
                    if !cli.quiet {
                        for f in files {
                            eprintln!("wrote {}", f.display());
                        }
                    }
                    0
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_CONFIG
                }
            }
        }
    };
    ExitCode::from(code as u8)
}
