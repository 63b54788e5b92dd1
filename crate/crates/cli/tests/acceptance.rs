//! Acceptance suite. Each criterion prints one PASS/FAIL line; the target
//! exits nonzero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use fragdiff_core::field::SpeciesField;
use fragdiff_core::grid::{spectral_heat_solve_1d, GridSpec};
use fragdiff_core::kernels::{validate_kernel_set, validate_mass_conservation_exact, KernelSet};
use fragdiff_core::reaction::ReactionOperator;
use fragdiff_core::stepper::{SimState, Stepper, StepperConfig};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

const SCENARIO_A: &str = r#"{
    "kernel": {"family": "power_law_uniform", "lambda": 4.0, "alpha": 0.5},
    "n": 32,
    "eps": 0.01,
    "grid": {"dim": 1, "extent": [1.0], "cells": [128]},
    "initial": {"family": "exponential", "rate": 1.0,
                "profile": {"kind": "cosine", "amplitude": 0.5, "wavenumber": 1}},
    "stepper": {"scheme": "imex_euler", "dt": 0.001, "t_end": 1.0, "negativity": "reject_and_halve"},
    "monitors": {"cadence": 10, "tail_levels": [8, 16, 24],
                 "energy": [{"species": 1, "level": 0.5}, {"species": 1, "level": 1.0}]}
}"#;

fn scenario_a() -> Value {
    serde_json::from_str(SCENARIO_A).unwrap()
}

struct Cli {
    code: i32,
    stdout: String,
    stderr: String,
}

fn fragdiff(args: &[&str]) -> Cli {
    let out = Command::new(env!("CARGO_BIN_EXE_fragdiff")).args(args).output().expect("binary runs");
    Cli {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Rows of a CSV file as name → column maps.
fn read_csv(path: &Path) -> Vec<std::collections::HashMap<String, String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines.next().unwrap().split(',').map(str::to_string).collect();
    lines.map(|l| header.iter().cloned().zip(l.split(',').map(str::to_string)).collect()).collect()
}

fn num(s: &str) -> Option<f64> {
    s.parse().ok()
}

fn simulate(dir: &Path, name: &str, cfg: &Value) -> Result<(Value, PathBuf), String> {
    let config = write_config(dir, &format!("{name}.json"), cfg);
    let out = dir.join(name);
    let run = fragdiff(&["simulate", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"]);
    ensure!(run.code == 0, "simulate exited {}: {}", run.code, run.stderr.trim());
    Ok((read_json(&out.join("summary.json")), out))
}

fn sweep(dir: &Path, name: &str, cfg: &Value, axis: &str, values: &str) -> Result<Vec<std::collections::HashMap<String, String>>, String> {
    let config = write_config(dir, &format!("{name}.json"), cfg);
    let out = dir.join(name);
    let run = fragdiff(&[
        "sweep", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--axis", axis, "--values", values, "--quiet",
    ]);
    ensure!(run.code == 0, "sweep exited {}: {}", run.code, run.stderr.trim());
    Ok(read_csv(&out.join("sweep.csv")))
}

fn check(summary: &Value, name: &str) -> f64 {
    summary["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).map(|c| c["value"].as_f64().unwrap()).unwrap()
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| match rng.gen_range(0..6) {
            0 => 0.0,
            1 => rng.gen_range(0.0..1e-6),
            _ => rng.gen_range(0.0..2.0) * (-(rng.gen_range(0.0..0.3)) * 1.0f64).exp(),
        })
        .collect()
}

/// Independent evaluation of the truncated operator with uniform breakage:
/// for every `i`, loop over all ordered pairs `(p, q)` with `p + q ≤ n`.
fn naive_q(f: &[f64], lambda: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = f.len();
    let a = |p: usize, q: usize| ((p * q) as f64).powf(-lambda);
    let mut q_out = vec![0.0; n];
    let mut gains = vec![0.0; n];
    let mut losses = vec![0.0; n];
    for i in 1..=n {
        let mut gain = 0.0;
        for p in 1..=n {
            for q in 1..=n {
                if p + q <= n && i < p + q {
                    let b = 2.0 / (p + q - 1) as f64;
                    gain += 0.5 * b * a(p, q) * f[p - 1] * f[q - 1];
                }
            }
        }
        let mut loss = 0.0;
        for j in 1..=n {
            if i + j <= n {
                loss += a(i, j) * f[j - 1];
            }
        }
        loss *= f[i - 1];
        gains[i - 1] = gain;
        losses[i - 1] = loss;
        q_out[i - 1] = gain - loss;
    }
    (q_out, gains, losses)
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure!(elapsed.as_secs_f64() < limit_s, "took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64());
    Ok(())
}

fn weighted_null_sum() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for trial in 0..1000 {
        let lambda = [2.0, 4.0, 6.0][trial % 3];
        let eps = [0.0, 0.1][(trial / 3) % 2];
        let n = rng.gen_range(1..=64);
        let op = ReactionOperator::new(&KernelSet::power_law_uniform(lambda, 0.5).unwrap(), n, eps).unwrap();
        let f = random_vector(&mut rng, n);
        let q = op.q_regularized(&f).unwrap();
        let weighted: f64 = q.iter().enumerate().map(|(k, v)| (k + 1) as f64 * v).sum();
        let scale: f64 = q.iter().enumerate().map(|(k, v)| (k + 1) as f64 * v.abs()).sum();
        ensure!(weighted.abs() <= 1e-12 * scale + 1e-300, "trial {trial}: |Σ i Q_i| = {weighted:e}, Σ i|Q_i| = {scale:e}");
        if scale > 0.0 {
            worst = worst.max(weighted.abs() / scale);
        }
    }
    within(start.elapsed(), 10.0)?;
    Ok(format!("1000 vectors, worst |Σ iQ_i| / Σ i|Q_i| = {worst:.2e}"))
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for trial in 0..200 {
        let n = rng.gen_range(1..=32);
        let lambda = [2.0, 4.0, 6.0][trial % 3];
        let op = ReactionOperator::new(&KernelSet::power_law_uniform(lambda, 1.0).unwrap(), n, 0.0).unwrap();
        let f = random_vector(&mut rng, n);
        let q = op.q_truncated(&f).unwrap();
        let (expected, gains, losses) = naive_q(&f, lambda);
        for i in 0..n {
            let scale = gains[i] + losses[i];
            let err = (q[i] - expected[i]).abs();
            ensure!(err <= 1e-14 * scale + 1e-300, "trial {trial}, i = {}: {} vs oracle {}", i + 1, q[i], expected[i]);
            if scale > 0.0 {
                worst = worst.max(err / scale);
            }
        }
    }
    let op = ReactionOperator::new(&KernelSet::power_law_uniform(4.0, 0.0).unwrap(), 4, 0.0).unwrap();
    let q = op.q_truncated(&[1.0, 1.0, 0.0, 0.0]).unwrap();
    let hand = [1.0 / 768.0, -1.0 / 384.0, 1.0 / 768.0, 0.0];
    for (got, want) in q.iter().zip(hand) {
        ensure!((got - want).abs() <= 1e-15, "hand case: {q:?} vs {hand:?}");
    }
    within(start.elapsed(), 5.0)?;
    Ok(format!("200 instances, worst relative error {worst:.2e}; hand case exact"))
}

fn breakage_mass_conservation() -> Outcome {
    let start = Instant::now();
    let ks = KernelSet::power_law_uniform(4.0, 0.5).unwrap();
    let checked = validate_mass_conservation_exact(&ks, 64).map_err(|v| format!("rational check failed at ({}, {})", v.i, v.j))?;
    let mut pairs = 0;
    for total in 2..=64usize {
        for i in 1..total {
            let j = total - i;
            let mut sum = BigRational::from_integer(BigInt::from(0));
            for k in 1..total {
                sum += ks.breakage_exact(i, j, k) * BigRational::from_integer(BigInt::from(k));
            }
            ensure!(sum == BigRational::from_integer(BigInt::from(total)), "Σ k b^k({i},{j}) = {sum} ≠ {total}");
            pairs += 1;
        }
    }
    let mut worst: f64 = 0.0;
    for i in 1..=200 {
        for j in 1..=200 {
            let s: f64 = (1..i + j).map(|k| k as f64 * ks.breakage_count(i, j, k).unwrap()).sum();
            worst = worst.max((s - (i + j) as f64).abs() / (i + j) as f64);
        }
    }
    ensure!(worst <= 1e-12, "floating residual {worst:e}");
    let report = validate_kernel_set(&ks, 200);
    ensure!(report.is_valid() && report.worst_mass_residual <= 1e-12, "validator: {report}");
    within(start.elapsed(), 5.0)?;
    Ok(format!("{checked} + {pairs} pairs exact; worst floating residual {worst:.2e} for i, j ≤ 200"))
}

fn quasipositivity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for trial in 0..1000 {
        let n = rng.gen_range(1..=48);
        let lambda = [2.0, 4.0, 6.0][trial % 3];
        let eps = [0.0, 0.1][(trial / 3) % 2];
        let op = ReactionOperator::new(&KernelSet::power_law_uniform(lambda, 0.5).unwrap(), n, eps).unwrap();
        let mut f = random_vector(&mut rng, n);
        let i = rng.gen_range(1..=n);
        f[i - 1] = 0.0;
        let terms = op.breakdown(&f).unwrap();
        let t = terms[i - 1];
        ensure!(t.q >= -1e-14 * t.gain, "trial {trial}: Q_{i} = {:e} with gain {:e}", t.q, t.gain);
        op.check_quasipositivity(&f, i).map_err(|e| e.to_string())?;
        if t.gain > 0.0 {
            worst = worst.max(-t.q / t.gain);
        }
    }
    within(start.elapsed(), 5.0)?;
    Ok(format!("1000 vectors, worst −Q_i / gain_i = {worst:.2e}"))
}

fn scenario_a_run(dir: &Path) -> Outcome {
    let start = Instant::now();
    let (summary, out) = simulate(dir, "scenario_a", &scenario_a())?;
    let drift = check(&summary, "mass_drift");
    ensure!(drift <= 1e-10, "mass drift {drift:e}");
    let rows = read_csv(&out.join("monitors.csv"));
    let min = rows.iter().filter_map(|r| num(&r["min"])).fold(f64::INFINITY, f64::min);
    ensure!(min >= -1e-12, "min f = {min:e}");
    let clips = summary["diagnostics"]["clip_events"].as_u64().unwrap();
    ensure!(clips == 0, "{clips} clip events");
    ensure!(summary["status"] == "ok", "status {}", summary["status"]);
    within(start.elapsed(), 120.0)?;
    Ok(format!("mass drift {drift:.2e}, min f {min:.2e}, {clips} clip events, {:.1} s", start.elapsed().as_secs_f64()))
}

fn spatial_convergence(dir: &Path) -> Outcome {
    let rows = sweep(dir, "grid_sweep", &scenario_a(), "grid", "64,128,256")?;
    let order = num(&rows[2]["order"]).ok_or("no order estimate")?;
    ensure!((1.7..=2.3).contains(&order), "order {order}");
    Ok(format!("L¹ differences {} and {}, order {order:.3}", rows[1]["l1_diff_prev"], rows[2]["l1_diff_prev"]))
}

fn spectral_vs_stencil() -> Outcome {
    let discrepancy = |m: usize, dt: f64| -> Result<f64, String> {
        let grid = GridSpec::line(1.0, m).unwrap();
        let ic = |x: f64| 1.0 + (std::f64::consts::PI * x).cos() + 0.3 * (2.0 * std::f64::consts::PI * x).cos();
        let f0 = SpeciesField::from_fn(grid, 1, |_, x, _| ic(x));
        let st = Stepper::new(grid, None, vec![1.0], StepperConfig::imex(dt, 0.1)).map_err(|e| e.to_string())?;
        let mut s = SimState::new(f0.clone());
        let (steps, t_of) = st.schedule();
        for k in 0..steps {
            let h = t_of(k + 1) - s.t;
            st.step(&mut s, h).map_err(|e| e.to_string())?;
            s.t = t_of(k + 1);
        }
        let spectral = spectral_heat_solve_1d(&grid, f0.species(1), 1.0, 0.1);
        // The spectral result itself is checked against the closed-form modes.
        for (c, v) in spectral.iter().enumerate() {
            let x = grid.center(c).0;
            let pi2 = std::f64::consts::PI.powi(2);
            let exact = 1.0 + (-pi2 * 0.1f64).exp() * (std::f64::consts::PI * x).cos()
                + 0.3 * (-4.0 * pi2 * 0.1f64).exp() * (2.0 * std::f64::consts::PI * x).cos();
            ensure!((v - exact).abs() < 1e-12, "spectral oracle off by {:e}", (v - exact).abs());
        }
        Ok(s.f.species(1).iter().zip(&spectral).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    };
    let coarse = discrepancy(128, 4e-5)?;
    let fine = discrepancy(256, 1e-5)?;
    ensure!(fine <= 1e-4, "L∞ discrepancy {fine:e} at m = 256");
    ensure!(fine < coarse, "no improvement: {coarse:e} → {fine:e}");
    Ok(format!("L∞ discrepancy {coarse:.2e} at m = 128, {fine:.2e} at m = 256"))
}

fn duality_functional(dir: &Path) -> Outcome {
    let rows = sweep(dir, "n_sweep", &scenario_a(), "n", "16,32,64")?;
    let d: Vec<f64> = rows.iter().map(|r| num(&r["D"]).unwrap()).collect();
    let ratio: Vec<f64> = rows.iter().map(|r| num(&r["D_over_R"]).unwrap()).collect();
    ensure!(d.iter().all(|v| v.is_finite() && *v > 0.0), "D = {d:?}");
    let variation = (d[2] - d[1]).abs() / d[1];
    ensure!(variation <= 0.05, "D varies by {variation:e} between n = 32 and 64");
    let summary = read_json(&dir.join("n_sweep/n_2/summary.json"));
    let logged = summary["duality"]["ratio"].as_f64().ok_or("D/R not logged in summary")?;
    ensure!(logged == ratio[2], "summary D/R {logged} differs from sweep {}", ratio[2]);
    ensure!(ratio[2] <= ratio[1] * 1.05 && ratio[1] <= ratio[0] * 1.05, "D/R grows with n: {ratio:?}");
    Ok(format!("D = {:.6} / {:.6} / {:.6}, variation {variation:.1e}, D/R = {:.4}", d[0], d[1], d[2], ratio[2]))
}

fn energy_inequality(dir: &Path) -> Outcome {
    let mut detail = Vec::new();
    let mut fine = scenario_a();
    fine["grid"]["cells"] = json!([256]);
    fine["stepper"]["dt"] = json!(1e-4);
    for (name, mut cfg) in [("energy_a", scenario_a()), ("energy_fine", fine)] {
        cfg["monitors"]["cadence"] = json!(1);
        let (summary, out) = simulate(dir, name, &cfg)?;
        let rows = read_csv(&out.join("monitors.csv"));
        for e in summary["energy"].as_array().unwrap() {
            let level = e["level"].as_f64().unwrap();
            let (lhs, rhs) = (e["lhs"].as_f64().unwrap(), e["rhs"].as_f64().unwrap());
            ensure!(rhs - lhs >= -1e-3 * rhs, "{name}, level {level}: LHS {lhs:e} > RHS {rhs:e}");
            let col = format!("energy_slack@1:{level}");
            let worst = rows.iter().filter_map(|r| num(&r[&col])).fold(f64::INFINITY, f64::min);
            ensure!(worst >= -1e-3 * rhs, "{name}, level {level}: slack {worst:e} along the run");
            detail.push(format!("{name} M={level}: slack/RHS {:.3}", (rhs - lhs) / rhs));
        }
    }
    Ok(detail.join(", "))
}

fn tail_summability(dir: &Path) -> Outcome {
    let summary = read_json(&dir.join("scenario_a/summary.json"));
    let tails = summary["tails"].as_array().ok_or("scenario A summary missing")?;
    let x = (-1.0f64).exp();
    let mut prev = f64::INFINITY;
    let mut detail = Vec::new();
    for t in tails {
        let m = t["level"].as_u64().unwrap() as f64;
        let value = t["value"].as_f64().unwrap();
        // Σ_{i>M} i x^i for x = e^{-1}, times ∫(1 + 0.5 cos 2πx) = 1.
        let envelope = x.powf(m + 1.0) * ((m + 1.0) - m * x) / (1.0 - x).powi(2);
        ensure!(value < prev, "τ not decreasing at M = {m}: {value:e} ≥ {prev:e}");
        ensure!(value <= 2.0 * envelope, "τ_{m} = {value:e} exceeds 2 × {envelope:e}");
        detail.push(format!("τ_{m} = {value:.3e} (envelope {envelope:.3e})"));
        prev = value;
    }
    ensure!(tails.len() == 3, "expected three tail levels");
    Ok(detail.join(", "))
}

fn eps_sweep(dir: &Path) -> Outcome {
    let rows = sweep(dir, "eps_sweep", &scenario_a(), "eps", "0.1,0.01,0.001,0")?;
    let diffs: Vec<f64> = rows[..3].iter().map(|r| num(&r["l1_diff_last"]).unwrap()).collect();
    ensure!(diffs[0] > diffs[1] && diffs[1] > diffs[2] && diffs[2] > 0.0, "distances to ε = 0: {diffs:?}");
    Ok(format!("L¹ distance to ε = 0: {:.3e}, {:.3e}, {:.3e}", diffs[0], diffs[1], diffs[2]))
}

/// `Σ_{i,j ≤ N} (i + j)(ij)^{-4}` plus integral tails of the two zeta factors.
fn a1_oracle() -> f64 {
    const N: usize = 10_000;
    let p3: Vec<f64> = (1..=N).map(|i| (i as f64).powi(-3)).collect();
    let p4: Vec<f64> = (1..=N).map(|i| (i as f64).powi(-4)).collect();
    let mut double = 0.0;
    for i in 0..N {
        let mut row = 0.0;
        for j in 0..N {
            row += ((i + j + 2) as f64) * p4[i] * p4[j];
        }
        double += row;
    }
    let s3: f64 = p3.iter().rev().sum();
    let s4: f64 = p4.iter().rev().sum();
    let nf = N as f64;
    // Euler–Maclaurin tails Σ_{i>N} i^{-p}.
    let tail = |p: f64| nf.powf(1.0 - p) / (p - 1.0) - 0.5 * nf.powf(-p) + p / 12.0 * nf.powf(-p - 1.0);
    let (t3, t4) = (tail(3.0), tail(4.0));
    double + 2.0 * (s3 * t4 + t3 * s4 + t3 * t4)
}

fn summability_audit(dir: &Path) -> Outcome {
    let start = Instant::now();
    let run = |lambda: f64, alpha: f64| {
        let cfg = json!({"kernel": {"family": "power_law_uniform", "lambda": lambda, "alpha": alpha}});
        let path = write_config(dir, &format!("audit_{lambda}_{alpha}.json"), &cfg);
        fragdiff(&["audit", "--config", path.to_str().unwrap()])
    };
    let ok = run(4.0, 0.0);
    ensure!(ok.code == 0, "λ=4, α=0 exited {}", ok.code);
    let report: Value = serde_json::from_str(&ok.stdout).map_err(|e| e.to_string())?;
    let a1 = report["conditions"].as_array().unwrap().iter().find(|c| c["condition"] == "A1").ok_or("no A1 entry")?;
    let (lo, hi) = (a1["lower"].as_f64().unwrap(), a1["upper"].as_f64().ok_or("A1 upper bound missing")?);
    let oracle = a1_oracle();
    ensure!(lo <= oracle && oracle <= hi, "A1 enclosure [{lo}, {hi}] misses {oracle}");
    let diverges = run(2.0, 1.0);
    ensure!(diverges.code == 1, "λ=2, α=1 exited {}", diverges.code);
    let borderline = run(4.0, 1.0);
    ensure!(borderline.code == 4, "λ=4, α=1 exited {}", borderline.code);
    within(start.elapsed(), 30.0)?;
    Ok(format!("A1 ∈ [{lo:.15}, {hi:.15}] ∋ {oracle:.15}; exits 0 / 1 / 4 in {:.1} s", start.elapsed().as_secs_f64()))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let d = dir.path();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("weighted null sum", Box::new(weighted_null_sum)),
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("breakage mass conservation", Box::new(breakage_mass_conservation)),
        ("quasipositivity", Box::new(quasipositivity)),
        ("scenario A invariants", Box::new(|| scenario_a_run(d))),
        ("spatial convergence", Box::new(|| spatial_convergence(d))),
        ("spectral vs stencil diffusion", Box::new(spectral_vs_stencil)),
        ("duality functional", Box::new(|| duality_functional(d))),
        ("truncation energy inequality", Box::new(|| energy_inequality(d))),
        ("tail summability", Box::new(|| tail_summability(d))),
        ("eps sweep", Box::new(|| eps_sweep(d))),
        ("summability auditor", Box::new(|| summability_audit(d))),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS {:02} {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:02} {name}: {why}", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
