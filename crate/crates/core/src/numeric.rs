//! Small numerical building blocks: compensated summation and certified
//! enclosures of power series `Σ_{i≥1} i^{-p}`.

use serde::{Deserialize, Serialize};

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of a slice in index order.
pub fn compensated_sum(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<CompensatedSum>().value()
}

/// A closed interval `[lo, hi]` known to contain a real quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Enclosure {
    pub lo: f64,
    pub hi: f64,
}

impl Enclosure {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted enclosure [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Product of two enclosures of nonnegative quantities.
    pub fn mul_nonneg(self, other: Enclosure) -> Enclosure {
        debug_assert!(self.lo >= 0.0 && other.lo >= 0.0);
        Enclosure::new(self.lo * other.lo, self.hi * other.hi).widen_ulps(2.0)
    }

    pub fn scale_nonneg(self, c: f64) -> Enclosure {
        debug_assert!(c >= 0.0);
        Enclosure::new(self.lo * c, self.hi * c).widen_ulps(1.0)
    }

    pub fn add(self, other: Enclosure) -> Enclosure {
        Enclosure::new(self.lo + other.lo, self.hi + other.hi).widen_ulps(1.0)
    }

    /// Outward widening by `k` units of relative machine precision.
    pub fn widen_ulps(self, k: f64) -> Enclosure {
        let lo = self.lo - k * f64::EPSILON * self.lo.abs();
        let hi = self.hi + k * f64::EPSILON * self.hi.abs();
        Enclosure { lo, hi }
    }
}

/// Relative rounding allowance applied to every partial power sum.
const PARTIAL_SUM_SLACK: f64 = 8.0;

/// Partial sum `Σ_{i=1}^{n} i^{-p}`, accumulated from the smallest term up.
pub fn power_sum_partial(p: f64, n: usize) -> f64 {
    let mut acc = CompensatedSum::new();
    for i in (1..=n).rev() {
        acc.add((i as f64).powf(-p));
    }
    acc.value()
}

/// Bounds on the tail `Σ_{i>n} i^{-p}` for `p > 1` and `n ≥ 1`.
///
/// `x ↦ x^{-p}` is convex, so the trapezoid rule over-estimates and the
/// midpoint rule under-estimates its integral; this yields
/// `∫_n^∞ − n^{-p}/2 ≤ tail ≤ ∫_{n+1/2}^∞`.
pub fn power_tail_bounds(p: f64, n: usize) -> Enclosure {
    assert!(p > 1.0, "power tail requires p > 1, got {p}");
    assert!(n >= 1);
    let nf = n as f64;
    let integral = |from: f64| from.powf(1.0 - p) / (p - 1.0);
    let lo = (integral(nf) - 0.5 * nf.powf(-p)).max(0.0);
    let hi = integral(nf + 0.5);
    Enclosure::new(lo, hi).widen_ulps(4.0)
}

/// Certified enclosure of `Σ_{i≥1} i^{-p}` truncated at `n` terms plus tail bounds.
pub fn power_series_enclosure(p: f64, n: usize) -> Enclosure {
    let partial = power_sum_partial(p, n);
    let tail = power_tail_bounds(p, n);
    let slack = PARTIAL_SUM_SLACK * f64::EPSILON * partial;
    Enclosure::new(partial - slack + tail.lo, partial + slack + tail.hi)
}

/// Largest truncation tried before giving up on a requested width.
pub const MAX_SERIES_TERMS: usize = 1 << 24;

/// Enclosure of the zeta value `ζ(p) = Σ i^{-p}` with width at most `tol`
/// (or the narrowest reachable within [`MAX_SERIES_TERMS`]). `None` when `p ≤ 1`.
pub fn zeta_enclosure(p: f64, tol: f64) -> Option<Enclosure> {
    if !(p > 1.0) {
        return None;
    }
    // Width of the tail bracket is ≈ p·n^{-p-1}/8; pick n from that and
    // refine by doubling if rounding slack dominates.
    let mut n = ((p / (8.0 * tol.max(1e-300))).powf(1.0 / (p + 1.0)).ceil() as usize).clamp(16, MAX_SERIES_TERMS);
    loop {
        let enc = power_series_enclosure(p, n);
        if enc.width() <= tol || n >= MAX_SERIES_TERMS {
            return Some(enc);
        }
        let tail_width = power_tail_bounds(p, n).width();
        if tail_width <= 0.25 * tol {
            // Rounding slack, not truncation, limits the width.
            return Some(enc);
        }
        n = (n * 2).min(MAX_SERIES_TERMS);
    }
}

/// Least-squares slope and residual RMS of `ys` against `xs`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    (slope, intercept, (rss / n).sqrt())
}
