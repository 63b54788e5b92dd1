//! Numerical audit of the summability conditions on the kernels:
//!
//! * A1: `Σ_{i,j} (i+j) a_{ij}`
//! * A4 (first sum): `Σ_{j,k} Σ_{i<j+k} √(b^i_{jk} a_{jk}) / √(kj d_i d_j)`
//! * A4 (second sum): `Σ_{i,j} √a_{ij} / √(ij d_i d_j)`
//!
//! Partial sums are taken over squares `[1, N]²`. For the power-law families
//! the tails outside the square are bounded by separable power majorants,
//! which gives certified upper bounds; sums that factorize exactly into
//! divergent power series are reported as diverging. Anything else is
//! reported as inconclusive together with the logarithmic growth rate of the
//! partial sums.

use serde::Serialize;

use super::{KernelFamily, KernelSet};
use crate::numeric::{linear_fit, power_sum_partial, power_tail_bounds, CompensatedSum, Enclosure};

/// Square truncation levels used when none are given.
pub const DEFAULT_AUDIT_LEVELS: [usize; 5] = [128, 256, 512, 1024, 2048];

/// The first A4 sum is quadratic in N for uniform breakage and cubic otherwise.
const TERM1_CAP_UNIFORM: usize = 4096;
const TERM1_CAP_GENERIC: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AuditProfile {
    /// Power-law kernels with `λ ≥ 4`, `α ∈ [0, 1]`.
    PowerLaw,
    /// General bounded kernels with diffusion vanishing at large sizes.
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Converges,
    Diverges,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub condition: String,
    pub lower: f64,
    /// `None` when no finite upper bound is certified.
    pub upper: Option<f64>,
    pub verdict: Verdict,
    /// Largest square truncation used.
    pub truncation: usize,
    #[serde(skip)]
    pub partial_sums: Vec<(usize, f64)>,
    /// Slope of partial sums against `ln N` over the last levels.
    #[serde(skip)]
    pub log_growth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummabilityReport {
    pub conditions: Vec<ConditionReport>,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

impl SummabilityReport {
    pub fn condition(&self, name: &str) -> Option<&ConditionReport> {
        self.conditions.iter().find(|c| c.condition == name)
    }

    pub fn any(&self, verdict: Verdict) -> bool {
        self.conditions.iter().any(|c| c.verdict == verdict)
    }

    /// JSON array of `{condition, lower, upper, verdict, truncation}` objects.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.conditions).expect("report serializes")
    }
}

pub const A1: &str = "A1";
pub const A4_TERM1: &str = "A4.term1";
pub const A4_TERM2: &str = "A4.term2";

/// Runs the A1/A4 audit at the given square truncation levels.
pub fn audit_summability(ks: &KernelSet, profile: AuditProfile, levels: &[usize]) -> SummabilityReport {
    let mut levels: Vec<usize> = levels.iter().copied().filter(|&n| n >= 2).collect();
    if levels.is_empty() {
        levels = DEFAULT_AUDIT_LEVELS.to_vec();
    }
    levels.sort_unstable();
    levels.dedup();

    let mut warnings = Vec::new();
    if profile == AuditProfile::PowerLaw {
        warnings.extend(ks.profile_warnings());
    }
    if profile == AuditProfile::General {
        if let Some(alpha) = ks.alpha() {
            if alpha <= 0.0 {
                warnings.push("diffusion coefficients do not vanish at large sizes (α = 0)".to_string());
            }
        }
    }

    let conditions = match ks.family() {
        KernelFamily::Table(t) => finite_table_audit(ks, t.size()),
        KernelFamily::PowerLawUniform { lambda, alpha }
        | KernelFamily::ChengRednerUniform { lambda, alpha } => {
            let (b_max, theta) = ks.breakage_majorant().expect("power-law families have majorants");
            vec![
                audit_a1(*lambda, &levels),
                audit_term1(ks, *lambda, *alpha, b_max, theta, &levels),
                audit_term2(*lambda, *alpha, &levels),
            ]
        }
    };
    SummabilityReport { conditions, warnings }
}

/// `Σ_{i,j≤N} u(i) v(j)` with `u = i^{-p}`, `v = j^{-q}`, plus certified
/// bounds on the full sum when both series converge.
struct Separable {
    p: f64,
    q: f64,
}

impl Separable {
    fn partial(&self, n: usize) -> (f64, f64) {
        (power_sum_partial(self.p, n), power_sum_partial(self.q, n))
    }

    fn converges(&self) -> bool {
        self.p > 1.0 && self.q > 1.0
    }

    /// Enclosure of the full double sum given partial sums at `n`.
    fn full(&self, n: usize, (u, v): (f64, f64)) -> Enclosure {
        let slack = |x: f64| 8.0 * f64::EPSILON * x;
        let tu = power_tail_bounds(self.p, n);
        let tv = power_tail_bounds(self.q, n);
        let eu = Enclosure::new(u - slack(u) + tu.lo, u + slack(u) + tu.hi);
        let ev = Enclosure::new(v - slack(v) + tv.lo, v + slack(v) + tv.hi);
        eu.mul_nonneg(ev)
    }

    /// Upper bound on the sum over the complement of `[1, n]²`.
    fn complement_upper(&self, n: usize, (u, v): (f64, f64)) -> f64 {
        let full = self.full(n, (u, v));
        (full.hi - u * v * (1.0 - 4.0 * f64::EPSILON)).max(0.0)
    }
}

fn log_growth(partials: &[(usize, f64)]) -> f64 {
    let tail = &partials[partials.len().saturating_sub(3)..];
    if tail.len() < 2 {
        return 0.0;
    }
    let xs: Vec<f64> = tail.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = tail.iter().map(|(_, s)| *s).collect();
    linear_fit(&xs, &ys).0
}

fn audit_a1(lambda: f64, levels: &[usize]) -> ConditionReport {
    // Σ (i+j)(ij)^{-λ} = 2 (Σ i^{1-λ}) (Σ j^{-λ}).
    let sep = Separable { p: lambda - 1.0, q: lambda };
    separable_report(A1, &sep, 2.0, levels, true)
}

fn audit_term2(lambda: f64, alpha: f64, levels: &[usize]) -> ConditionReport {
    // √a/√(ij d_i d_j) = (ij)^{-(λ+1-α)/2}.
    let e = 0.5 * (lambda + 1.0 - alpha);
    let sep = Separable { p: e, q: e };
    separable_report(A4_TERM2, &sep, 1.0, levels, true)
}

fn separable_report(name: &str, sep: &Separable, scale: f64, levels: &[usize], exact: bool) -> ConditionReport {
    let partial_sums: Vec<(usize, f64)> = levels
        .iter()
        .map(|&n| {
            let (u, v) = sep.partial(n);
            (n, scale * u * v)
        })
        .collect();
    let n = *levels.last().unwrap();
    let (last_n, last) = *partial_sums.last().unwrap();
    let growth = log_growth(&partial_sums);
    if sep.converges() {
        let full = sep.full(n, sep.partial(n)).scale_nonneg(scale);
        ConditionReport {
            condition: name.to_string(),
            lower: full.lo,
            upper: Some(full.hi),
            verdict: Verdict::Converges,
            truncation: last_n,
            partial_sums,
            log_growth: growth,
        }
    } else {
        ConditionReport {
            condition: name.to_string(),
            lower: last,
            upper: None,
            verdict: if exact { Verdict::Diverges } else { Verdict::Inconclusive },
            truncation: last_n,
            partial_sums,
            log_growth: growth,
        }
    }
}

fn audit_term1(ks: &KernelSet, lambda: f64, alpha: f64, b_max: f64, theta: f64, levels: &[usize]) -> ConditionReport {
    let cap = if ks.has_uniform_breakage() { TERM1_CAP_UNIFORM } else { TERM1_CAP_GENERIC };
    let mut lv: Vec<usize> = levels.iter().map(|&n| n.min(cap)).collect();
    lv.dedup();
    let n_max = *lv.last().unwrap();

    // Summand: (jk)^{-(λ+1)/2} j^{α/2} Σ_{i<j+k} √(b^i_{jk}) i^{α/2}.
    let q = 0.5 * (lambda + 1.0);
    let p = q - 0.5 * alpha;
    let j_factor: Vec<f64> = (0..=n_max).map(|j| if j == 0 { 0.0 } else { (j as f64).powf(-p) }).collect();
    let k_factor: Vec<f64> = (0..=n_max).map(|k| if k == 0 { 0.0 } else { (k as f64).powf(-q) }).collect();
    let root_inv_d: Vec<f64> = (0..=2 * n_max)
        .map(|i| if i == 0 { 0.0 } else { ks.diffusion_unchecked(i).sqrt().recip() })
        .collect();
    // prefix[m] = Σ_{i≤m} 1/√d_i
    let mut prefix = vec![0.0; 2 * n_max + 1];
    for m in 1..=2 * n_max {
        prefix[m] = prefix[m - 1] + root_inv_d[m];
    }

    let inner = |j: usize, k: usize| -> f64 {
        let m = j + k - 1;
        if ks.has_uniform_breakage() {
            (2.0 / m as f64).sqrt() * prefix[m]
        } else {
            let mut acc = CompensatedSum::new();
            for i in 1..=m {
                acc.add(ks.breakage_unchecked(j, k, i).sqrt() * root_inv_d[i]);
            }
            acc.value()
        }
    };

    // Shell sums: level index ℓ collects (j, k) with max(j, k) in (lv[ℓ-1], lv[ℓ]].
    let mut shells = vec![CompensatedSum::new(); lv.len()];
    let mut level_of = vec![0usize; n_max + 1];
    {
        let mut l = 0;
        for (m, slot) in level_of.iter_mut().enumerate().skip(1) {
            while m > lv[l] {
                l += 1;
            }
            *slot = l;
        }
    }
    for j in 1..=n_max {
        for k in 1..=n_max {
            let term = k_factor[k] * j_factor[j] * inner(j, k);
            shells[level_of[j.max(k)]].add(term);
        }
    }
    let mut partial_sums = Vec::with_capacity(lv.len());
    let mut running = CompensatedSum::new();
    for (l, shell) in shells.iter().enumerate() {
        running.add(shell.value());
        partial_sums.push((lv[l], running.value()));
    }
    let last = running.value();
    let growth = log_growth(&partial_sums);

    // Majorant: summand ≤ C (j+k)^s j^{-p} k^{-q} ≤ Cκ (j^{s-p} k^{-q} + j^{-p} k^{s-q}).
    let s = (1.0 + 0.5 * alpha - 0.5 * theta).max(0.0);
    let c = b_max.sqrt() * 2f64.powf(0.5 * theta) / (1.0 + 0.5 * alpha);
    let kappa = 2f64.powf(s - 1.0).max(1.0);
    let pieces = [Separable { p: p - s, q }, Separable { p, q: q - s }];
    let lower = last * (1.0 - 16.0 * f64::EPSILON * n_max as f64);
    if pieces.iter().all(Separable::converges) {
        let tail: f64 = pieces
            .iter()
            .map(|sep| sep.complement_upper(n_max, sep.partial(n_max)))
            .sum::<f64>()
            * c
            * kappa;
        let upper = (last + tail) * (1.0 + 16.0 * f64::EPSILON * n_max as f64);
        ConditionReport {
            condition: A4_TERM1.to_string(),
            lower,
            upper: Some(upper),
            verdict: Verdict::Converges,
            truncation: n_max,
            partial_sums,
            log_growth: growth,
        }
    } else {
        ConditionReport {
            condition: A4_TERM1.to_string(),
            lower,
            upper: None,
            verdict: Verdict::Inconclusive,
            truncation: n_max,
            partial_sums,
            log_growth: growth,
        }
    }
}

/// Tables have finite support, so every sum is a finite sum.
fn finite_table_audit(ks: &KernelSet, n: usize) -> Vec<ConditionReport> {
    let mut a1 = CompensatedSum::new();
    let mut t1 = CompensatedSum::new();
    let mut t2 = CompensatedSum::new();
    let mut terms = 0usize;
    for i in 1..=n {
        for j in 1..=n {
            let a = ks.collision_unchecked(i, j);
            let di = ks.diffusion_unchecked(i);
            let dj = ks.diffusion_unchecked(j);
            a1.add((i + j) as f64 * a);
            t2.add(a.sqrt() / ((i * j) as f64 * di * dj).sqrt());
            // (j, k) = (i, j) here; fragment index runs below i + j within the table.
            for frag in 1..(i + j).min(n + 1) {
                let b = ks.breakage_unchecked(i, j, frag);
                let d_frag = ks.diffusion_unchecked(frag);
                t1.add((b * a).sqrt() / ((i * j) as f64 * d_frag * di).sqrt());
                terms += 1;
            }
        }
    }
    let finite = |name: &str, v: f64, count: usize| {
        let slack = 8.0 * f64::EPSILON * v * (count.max(1) as f64).sqrt();
        ConditionReport {
            condition: name.to_string(),
            lower: v - slack,
            upper: Some(v + slack),
            verdict: if v.is_finite() { Verdict::Converges } else { Verdict::Diverges },
            truncation: n,
            partial_sums: vec![(n, v)],
            log_growth: 0.0,
        }
    };
    vec![
        finite(A1, a1.value(), n * n),
        finite(A4_TERM1, t1.value(), terms),
        finite(A4_TERM2, t2.value(), n * n),
    ]
}
