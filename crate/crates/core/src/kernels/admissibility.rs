//! Admissibility of initial data: finiteness of
//! `Σ_i d_i^{-1/2} ‖f_i‖_{L¹}^{1/2}` and of `‖Σ_i i f_i‖_{L²}`.

use serde::Serialize;

use super::{KernelError, KernelSet};
use crate::field::SpeciesField;
use crate::grid;
use crate::initial::InitialCondition;
use crate::numeric::{linear_fit, CompensatedSum};

/// Relative size of the first neglected term when summing an analytic tail.
const MACHINE_TAIL: f64 = 1e-18;
/// Number of trailing terms used for the decay fit.
const FIT_TERMS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesJudgment {
    Finite,
    Infinite,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMethod {
    /// Exact size dependence of the initial-condition family.
    Analytic,
    GeometricFit,
    PowerFit,
    /// Trailing terms vanish.
    None,
}

/// `Σ_i d_i^{-1/2} ‖f_i‖_{L¹}^{1/2}` split at the truncation size.
#[derive(Debug, Clone, Serialize)]
pub struct RootMassSeries {
    pub partial: f64,
    pub tail: f64,
    pub total: f64,
    pub judgment: SeriesJudgment,
    pub tail_method: TailMethod,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub root_mass: RootMassSeries,
    /// `‖Σ_{i≤n} i f_i‖_{L²}` on the grid.
    pub mass_density_l2: f64,
    /// The same norm with all sizes included, when the family allows it.
    pub mass_density_l2_series: Option<f64>,
}

impl AdmissibilityReport {
    pub fn is_admissible(&self) -> bool {
        self.root_mass.judgment == SeriesJudgment::Finite
            && self.mass_density_l2.is_finite()
            && self.mass_density_l2_series.is_none_or(f64::is_finite)
    }
}

/// Evaluates both admissibility quantities for `f_in`. When `family` is the
/// exponential family and the kernel is a power law, the tail beyond the
/// truncation is summed from the closed-form size dependence; otherwise a
/// decay fit on the trailing terms extrapolates it.
pub fn check_initial_data(
    f_in: &SpeciesField,
    ks: &KernelSet,
    family: Option<&InitialCondition>,
) -> Result<AdmissibilityReport, KernelError> {
    let m = f_in.num_cells();
    for (idx, &v) in f_in.as_slice().iter().enumerate() {
        if v < 0.0 || v.is_nan() {
            return Err(KernelError::NegativeDensity { species: idx / m + 1, cell: idx % m, value: v });
        }
    }
    let g = f_in.grid();
    let n = match ks.max_size() {
        Some(size) => f_in.n().min(size),
        None => f_in.n(),
    };
    let terms: Vec<f64> = (1..=n)
        .map(|i| (grid::integrate(g, f_in.species(i)) / ks.diffusion_unchecked(i)).sqrt())
        .collect();
    let partial: f64 = terms.iter().copied().collect::<CompensatedSum>().value();

    let analytic = match (family.and_then(|ic| ic.exponential_parts(g)), ks.alpha()) {
        (Some((a, rate, p)), Some(alpha)) => Some(exponential_tail(a * p, rate, alpha, n)),
        _ => None,
    };
    let (tail, judgment, tail_method) = match analytic {
        Some(tail) => (tail, SeriesJudgment::Finite, TailMethod::Analytic),
        None => fitted_tail(&terms),
    };
    let total = if judgment == SeriesJudgment::Infinite { f64::INFINITY } else { partial + tail };

    let mass_density_l2 = grid::l2_norm(g, &f_in.mass_density());
    let mass_density_l2_series = match family {
        Some(ic @ InitialCondition::Exponential { rate, amplitude, .. }) => {
            let r = (-rate).exp();
            ic.profile_l2(g).map(|p| amplitude * r / ((1.0 - r) * (1.0 - r)) * p)
        }
        _ => None,
    };

    Ok(AdmissibilityReport {
        root_mass: RootMassSeries { partial, tail, total, judgment, tail_method },
        mass_density_l2,
        mass_density_l2_series,
    })
}

/// `Σ_{i>n} i^{α/2} √(scale) e^{-γ i/2}`, summed until the terms fall below
/// the machine tail, then closed with the geometric bound of the decreasing
/// term ratio.
fn exponential_tail(scale: f64, rate: f64, alpha: f64, n: usize) -> f64 {
    let root = scale.sqrt();
    if root == 0.0 {
        return 0.0;
    }
    let term = |i: usize| (i as f64).powf(0.5 * alpha) * (-0.5 * rate * i as f64).exp() * root;
    let mut acc = CompensatedSum::new();
    let mut i = n + 1;
    loop {
        let t = term(i);
        acc.add(t);
        let ratio = term(i + 1) / t;
        if ratio < 1.0 && t <= MACHINE_TAIL * acc.value().max(f64::MIN_POSITIVE) {
            acc.add(term(i + 1) / (1.0 - ratio));
            break;
        }
        i += 1;
    }
    acc.value()
}

fn fitted_tail(terms: &[f64]) -> (f64, SeriesJudgment, TailMethod) {
    let n = terms.len();
    let last_nonzero = terms.iter().rposition(|&t| t > 0.0);
    let Some(last) = last_nonzero else {
        return (0.0, SeriesJudgment::Finite, TailMethod::None);
    };
    if last + 1 < n {
        // Data vanish beyond `last`; nothing to extrapolate.
        return (0.0, SeriesJudgment::Finite, TailMethod::None);
    }
    let start = n.saturating_sub(FIT_TERMS.min(n / 2));
    let window: Vec<(f64, f64)> = (start..n)
        .filter(|&k| terms[k] > 0.0)
        .map(|k| ((k + 1) as f64, terms[k].ln()))
        .collect();
    if window.len() < 3 {
        return (f64::NAN, SeriesJudgment::Undetermined, TailMethod::None);
    }
    let is: Vec<f64> = window.iter().map(|w| w.0).collect();
    let log_is: Vec<f64> = is.iter().map(|i| i.ln()).collect();
    let logs: Vec<f64> = window.iter().map(|w| w.1).collect();
    let (geo_slope, _, geo_rms) = linear_fit(&is, &logs);
    let (pow_slope, _, pow_rms) = linear_fit(&log_is, &logs);
    let t_n = terms[n - 1];
    let nf = n as f64;
    if geo_rms < pow_rms {
        if geo_slope >= 0.0 {
            return (f64::INFINITY, SeriesJudgment::Infinite, TailMethod::GeometricFit);
        }
        let r = geo_slope.exp();
        (t_n * r / (1.0 - r), SeriesJudgment::Finite, TailMethod::GeometricFit)
    } else {
        if pow_slope >= -1.0 {
            return (f64::INFINITY, SeriesJudgment::Infinite, TailMethod::PowerFit);
        }
        // t_n n^{-p} ∫_n^∞ x^p dx
        (t_n * nf / (-pow_slope - 1.0), SeriesJudgment::Finite, TailMethod::PowerFit)
    }
}
