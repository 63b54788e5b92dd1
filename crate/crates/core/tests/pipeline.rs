//! End-to-end runs through the public API.

use std::path::Path;

use fragdiff_core::config::{KernelConfig, MonitorConfig, SimConfig, Tolerances};
use fragdiff_core::field::SpeciesField;
use fragdiff_core::grid::GridSpec;
use fragdiff_core::initial::{InitialCondition, Profile};
use fragdiff_core::kernels::{KernelSet, KernelTable};
use fragdiff_core::monitors::{duality_functional, linf_bound_check, total_mass, SummaryStatus};
use fragdiff_core::reaction::ReactionOperator;
use fragdiff_core::run::{integrate, simulate_in_memory, Prepared};
use fragdiff_core::stepper::{NegativityPolicy, SimState, Stepper, StepperConfig};
use proptest::prelude::*;

fn base(grid: GridSpec, profile: Profile) -> SimConfig {
    SimConfig {
        kernel: KernelConfig::power_law(4.0, 0.5),
        n: 12,
        eps: 0.01,
        grid,
        initial: InitialCondition::exponential(1.0, profile),
        stepper: StepperConfig::imex(0.005, 0.2),
        monitors: MonitorConfig { cadence: 4, tail_levels: vec![4, 8], store_trajectory: true, ..Default::default() },
        tolerances: Tolerances::default(),
        reaction: true,
        output: None,
        seed: 0,
    }
}

#[test]
fn online_monitors_agree_with_stored_trajectory() {
    let cfg = base(GridSpec::line(1.0, 32).unwrap(), Profile::Cosine { amplitude: 0.5, wavenumber: 2 });
    let prep = Prepared::new(&cfg, Path::new(".")).unwrap();
    let run = integrate(&cfg, &prep, SimState::new(prep.f_in.clone()), &mut ()).unwrap();
    let traj = run.trajectory.as_ref().unwrap();
    assert_eq!(traj.len(), run.series.rows().len());
    let offline = duality_functional(traj, prep.stepper.diffusion());
    assert!((offline.d - run.series.duality().d).abs() <= 1e-15 * offline.d);
    assert_eq!(linf_bound_check(traj, cfg.eps), run.series.linf());
    assert_eq!(run.summary(&cfg).status, SummaryStatus::Ok);
}

#[test]
fn two_dimensional_gaussian_run_conserves_mass() {
    let grid = GridSpec::rect(1.0, 0.5, 24, 12).unwrap();
    let cfg = base(grid, Profile::Gaussian { center: vec![0.3, 0.2], width: 0.1 });
    let out = simulate_in_memory(&cfg, Path::new(".")).unwrap();
    assert_eq!(out.summary.status, SummaryStatus::Ok, "{:?}", out.summary.checks);
    assert!(out.state.f.min_value() >= 0.0);
    let drift = (out.summary.mass_final - out.summary.mass_initial).abs() / out.summary.mass_initial;
    assert!(drift < 1e-12, "{drift:e}");
}

#[test]
fn tabulated_kernel_reproduces_power_law_run() {
    let grid = GridSpec::line(1.0, 16).unwrap();
    let ks = KernelSet::power_law_uniform(4.0, 0.5).unwrap();
    let n = 10;
    let table = KernelSet::from_table(KernelTable::tabulate(&ks, n)).unwrap();
    let f0 = SpeciesField::from_fn(grid, n, |i, x, _| (-(i as f64) / 2.0).exp() * (1.0 + 0.5 * (6.0 * x).sin()));
    let mut finals = Vec::new();
    for kernels in [&ks, &table] {
        let op = ReactionOperator::new(kernels, n, 0.0).unwrap();
        let d = op.diffusion().to_vec();
        let st = Stepper::new(grid, Some(op), d, StepperConfig::imex(0.01, 0.2)).unwrap();
        let mut s = SimState::new(f0.clone());
        for _ in 0..20 {
            st.step(&mut s, 0.01).unwrap();
        }
        finals.push(s.f);
    }
    assert!(finals[0].l1_distance(&finals[1]) <= 1e-13 * total_mass(&finals[0]));
}

#[test]
fn clipping_is_reported_and_bounded() {
    let grid = GridSpec::line(1.0, 8).unwrap();
    let mut cfg = base(grid, Profile::Constant);
    cfg.kernel = KernelConfig::power_law(0.0, 0.0);
    cfg.eps = 0.0;
    cfg.n = 4;
    // Monomers drain the larger species within one large step.
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("i,cell,value\n");
    for c in 0..8 {
        csv.push_str(&format!("1,{c},1.0\n2,{c},0.01\n3,{c},0.01\n4,{c},0.01\n"));
    }
    std::fs::write(dir.path().join("f0.csv"), csv).unwrap();
    cfg.initial = InitialCondition::Custom { path: dir.path().join("f0.csv"), unchecked: true };
    cfg.stepper = StepperConfig { negativity: NegativityPolicy::ClipToZero, ..StepperConfig::imex(10.0, 20.0) };
    cfg.monitors.tail_levels.clear();
    let out = simulate_in_memory(&cfg, Path::new(".")).unwrap();
    let diag = out.summary.diagnostics;
    assert!(diag.clip_events > 0);
    assert!(out.state.f.min_value() >= 0.0);
    let gained = out.summary.mass_final - out.summary.mass_initial;
    assert!((gained - diag.clipped_mass).abs() <= 1e-6 * out.summary.mass_initial, "{gained} vs {}", diag.clipped_mass);
    assert_eq!(out.summary.status, SummaryStatus::InvariantFailure);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn terminal_distance_to_unregularized_run_grows_with_eps(k in 1u32..4) {
        let grid = GridSpec::line(1.0, 16).unwrap();
        let mut cfg = base(grid, Profile::Cosine { amplitude: 0.5, wavenumber: k });
        cfg.kernel = KernelConfig::power_law(2.0, 0.5);
        cfg.monitors.store_trajectory = false;
        let run = |eps: f64| {
            let mut c = cfg.clone();
            c.eps = eps;
            simulate_in_memory(&c, Path::new(".")).unwrap().state.f
        };
        let f0 = run(0.0);
        let dists: Vec<f64> = [1e-3, 1e-2, 1e-1].iter().map(|&e| run(e).l1_distance(&f0)).collect();
        prop_assert!(dists[0] < dists[1] && dists[1] < dists[2], "{:?}", dists);
    }
}
