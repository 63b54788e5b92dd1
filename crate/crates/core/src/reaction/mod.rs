//! Truncated and regularized fragmentation operators.
//!
//! ```text
//! Q_i = ½ Σ_{j=i+1}^{n} Σ_{p+q=j} b^i_{p,q} a_{p,q} f_p f_q − f_i Σ_{j=1}^{n-i} a_{i,j} f_j
//! Q_{i,ε} = Q_i / (1 + ε Σ_{j≤n} c_j f_j²)
//! ```

mod truncation;

pub use truncation::TruncationFn;

use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::field::SpeciesField;
use crate::kernels::{KernelError, KernelSet};
use crate::numeric::CompensatedSum;

/// Relative slack for the quasipositivity contract.
pub const QUASIPOSITIVITY_TOL: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum ReactionError {
    #[error("species vector has length {got}, operator expects {expected}")]
    Length { expected: usize, got: usize },
    #[error("negative or non-finite density f_{index} = {value:e}")]
    NegativeInput { index: usize, value: f64 },
    #[error("regularization parameter must be finite and ≥ 0 (got {0})")]
    Epsilon(f64),
    #[error("truncation size must be ≥ 1")]
    EmptyTruncation,
    #[error("quasipositivity requires f_{0} = 0")]
    NotZeroed(usize),
    #[error("quasipositivity violated: Q_{index} = {value:e} with gain {gain:e}")]
    Quasipositivity { index: usize, value: f64, gain: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone)]
enum Breakage {
    /// `b^k_{pq} = 2/(p+q−1)`; gains follow from the pair sums alone.
    Uniform,
    /// For each unordered pair `p ≤ q` with `p + q ≤ n`, the net
    /// coefficients `w_k b^k_{pq} − δ_{kp} − δ_{kq}` for `k < p + q`
    /// (`w = 1`, or `½` with a single loss when `p = q`), stored contiguously.
    Dense { offsets: Vec<usize>, values: Vec<f64> },
}

/// Per-species terms of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactionTerms {
    pub i: usize,
    pub gain: f64,
    pub loss: f64,
    pub denominator: f64,
    pub q: f64,
}

/// Kernel data tabulated up to the truncation size `n`.
#[derive(Debug, Clone)]
pub struct ReactionOperator {
    n: usize,
    eps: f64,
    a: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
    breakage: Breakage,
}

impl ReactionOperator {
    pub fn new(ks: &KernelSet, n: usize, eps: f64) -> Result<Self, ReactionError> {
        if n == 0 {
            return Err(ReactionError::EmptyTruncation);
        }
        if !eps.is_finite() || eps < 0.0 {
            return Err(ReactionError::Epsilon(eps));
        }
        if let Some(size) = ks.max_size() {
            if n > size {
                return Err(KernelError::OutsideTable { index: n, size }.into());
            }
        }
        let mut a = vec![0.0; n * n];
        for i in 1..=n {
            for j in 1..=n {
                a[(i - 1) * n + (j - 1)] = ks.collision_unchecked(i, j);
            }
        }
        let c = if eps > 0.0 {
            (1..=n).map(|j| ks.reg_weight(j).map(|e| e.mid())).collect::<Result<Vec<_>, _>>()?
        } else {
            vec![0.0; n]
        };
        let d = (1..=n).map(|i| ks.diffusion_unchecked(i)).collect();
        let breakage = if ks.has_uniform_breakage() {
            Breakage::Uniform
        } else {
            let mut offsets = vec![0; n * n];
            let mut values = Vec::new();
            for p in 1..n {
                for q in p..=n - p {
                    offsets[(p - 1) * n + (q - 1)] = values.len();
                    let w = if p == q { 0.5 } else { 1.0 };
                    values.extend((1..p + q).map(|k| {
                        let colliders = f64::from(u8::from(k == p)) + f64::from(u8::from(k == q && p != q));
                        w * ks.breakage_unchecked(p, q, k) - colliders
                    }));
                }
            }
            Breakage::Dense { offsets, values }
        };
        Ok(Self { n, eps, a, c, d, breakage })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Diffusion coefficients `d_1..d_n`.
    pub fn diffusion(&self) -> &[f64] {
        &self.d
    }

    /// Regularization weights (enclosure midpoints) `c_1..c_n`; zero when
    /// `ε = 0`.
    pub fn reg_weights(&self) -> &[f64] {
        &self.c
    }

    #[inline]
    fn a(&self, i: usize, j: usize) -> f64 {
        self.a[(i - 1) * self.n + (j - 1)]
    }

    /// `a_{pq} f_p f_q`, multiplied in a canonical order so that gain and
    /// loss use bit-identical collision rates.
    #[inline]
    fn pair_rate(&self, f: &[f64], p: usize, q: usize) -> f64 {
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        self.a(lo, hi) * f[lo - 1] * f[hi - 1]
    }

    fn check_input(&self, f: &[f64]) -> Result<(), ReactionError> {
        if f.len() != self.n {
            return Err(ReactionError::Length { expected: self.n, got: f.len() });
        }
        for (k, &v) in f.iter().enumerate() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ReactionError::NegativeInput { index: k + 1, value: v });
            }
        }
        Ok(())
    }

    /// Gain and loss vectors of the truncated operator (inputs unchecked).
    ///
    /// Collisions whose fragments reproduce the colliders are left out of
    /// both sides: under uniform breakage these are the pairs with
    /// `p + q ≤ 3`, for tables the part of `b^p_{pq}` that returns a collider.
    /// `Q` is unchanged, but the large cancelling terms they would add are
    /// gone.
    fn gain_loss(&self, f: &[f64], gain: &mut [f64], loss: &mut [f64]) {
        let n = self.n;
        match &self.breakage {
            Breakage::Uniform => {
                for i in 1..=n {
                    let mut acc = CompensatedSum::new();
                    for j in 1..=n - i {
                        if i + j > 3 {
                            acc.add(self.pair_rate(f, i, j));
                        }
                    }
                    loss[i - 1] = acc.value();
                }
                // gain_i = Σ_{j>max(i,3)} S_j / (j−1), accumulated from the top.
                let mut acc = CompensatedSum::new();
                for i in (1..=n).rev() {
                    gain[i - 1] = acc.value();
                    if i >= 4 {
                        let j = i;
                        let mut s = CompensatedSum::new();
                        for p in 1..j {
                            s.add(self.pair_rate(f, p, j - p));
                        }
                        acc.add(s.value() / (j - 1) as f64);
                    }
                }
            }
            Breakage::Dense { offsets, values } => {
                let mut gains = vec![CompensatedSum::new(); n];
                let mut losses = vec![CompensatedSum::new(); n];
                for p in 1..n {
                    for q in p..=n - p {
                        let rate = self.pair_rate(f, p, q);
                        if rate == 0.0 {
                            continue;
                        }
                        let off = offsets[(p - 1) * n + (q - 1)];
                        for k in 1..p + q {
                            let c = values[off + k - 1];
                            if c > 0.0 {
                                gains[k - 1].add(c * rate);
                            } else if c < 0.0 {
                                losses[k - 1].add(-c * rate);
                            }
                        }
                    }
                }
                for k in 0..n {
                    gain[k] = gains[k].value();
                    loss[k] = losses[k].value();
                }
            }
        }
    }

    /// `1 + ε Σ c_j f_j²`.
    pub fn denominator(&self, f: &[f64]) -> f64 {
        if self.eps == 0.0 {
            return 1.0;
        }
        let acc: CompensatedSum = self.c.iter().zip(f).map(|(c, v)| c * v * v).collect();
        1.0 + self.eps * acc.value()
    }

    /// The truncated operator, ignoring `ε`.
    pub fn q_truncated(&self, f: &[f64]) -> Result<Vec<f64>, ReactionError> {
        self.check_input(f)?;
        let mut out = vec![0.0; self.n];
        self.truncated_into(f, &mut out);
        Ok(out)
    }

    fn truncated_into(&self, f: &[f64], out: &mut [f64]) {
        let mut loss = vec![0.0; self.n];
        self.gain_loss(f, out, &mut loss);
        for (q, l) in out.iter_mut().zip(&loss) {
            *q -= l;
        }
    }

    /// The regularized operator; identical to [`Self::q_truncated`] when
    /// `ε = 0`.
    pub fn q_regularized(&self, f: &[f64]) -> Result<Vec<f64>, ReactionError> {
        self.check_input(f)?;
        let mut out = vec![0.0; self.n];
        self.regularized_into(f, &mut out);
        Ok(out)
    }

    fn regularized_into(&self, f: &[f64], out: &mut [f64]) {
        self.truncated_into(f, out);
        if self.eps > 0.0 {
            let den = self.denominator(f);
            for q in out.iter_mut() {
                *q /= den;
            }
        }
    }

    /// `Q_{i,ε}(f)` for a vector with `f_i = 0`; errors if it is negative
    /// beyond rounding of the gain.
    pub fn check_quasipositivity(&self, f: &[f64], i: usize) -> Result<f64, ReactionError> {
        self.check_input(f)?;
        if i == 0 || i > self.n {
            return Err(KernelError::IndexDomain(i).into());
        }
        if f[i - 1] != 0.0 {
            return Err(ReactionError::NotZeroed(i));
        }
        let terms = self.breakdown(f)?;
        let t = terms[i - 1];
        if t.q < -QUASIPOSITIVITY_TOL * t.gain {
            return Err(ReactionError::Quasipositivity { index: i, value: t.q, gain: t.gain });
        }
        Ok(t.q)
    }

    pub fn breakdown(&self, f: &[f64]) -> Result<Vec<ReactionTerms>, ReactionError> {
        self.check_input(f)?;
        let mut gain = vec![0.0; self.n];
        let mut loss = vec![0.0; self.n];
        self.gain_loss(f, &mut gain, &mut loss);
        let denominator = self.denominator(f);
        Ok((0..self.n)
            .map(|k| {
                let mut q = gain[k] - loss[k];
                if self.eps > 0.0 {
                    q /= denominator;
                }
                ReactionTerms { i: k + 1, gain: gain[k], loss: loss[k], denominator, q }
            })
            .collect())
    }

    /// Debug dump with columns `i,gain,loss,denominator,Q`.
    pub fn write_breakdown_csv<W: Write>(&self, f: &[f64], mut w: W) -> Result<(), ReactionError> {
        let terms = self.breakdown(f)?;
        let io = |e: std::io::Error| KernelError::Parameter(format!("writing breakdown: {e}"));
        writeln!(w, "i,gain,loss,denominator,Q").map_err(io)?;
        for t in terms {
            writeln!(w, "{},{:?},{:?},{:?},{:?}", t.i, t.gain, t.loss, t.denominator, t.q).map_err(io)?;
        }
        Ok(())
    }

    /// Evaluates `Q_{·,ε}` at every cell of `f` into `out` (same shape).
    /// Points are independent, so the result does not depend on the thread
    /// partition.
    pub fn apply_field(&self, f: &SpeciesField, out: &mut SpeciesField) -> Result<(), ReactionError> {
        if f.n() != self.n {
            return Err(ReactionError::Length { expected: self.n, got: f.n() });
        }
        assert_eq!(out.n(), self.n);
        assert_eq!(out.num_cells(), f.num_cells());
        let (n, m) = (self.n, f.num_cells());
        let src = f.as_slice();
        let mut cell_major = vec![0.0; n * m];
        cell_major.par_chunks_mut(n).enumerate().try_for_each(|(c, q)| {
            let mut point = vec![0.0; n];
            for (k, p) in point.iter_mut().enumerate() {
                *p = src[k * m + c];
            }
            self.check_input(&point)?;
            self.regularized_into(&point, q);
            Ok::<(), ReactionError>(())
        })?;
        let dst = out.as_mut_slice();
        for c in 0..m {
            for k in 0..n {
                dst[k * m + c] = cell_major[c * n + k];
            }
        }
        Ok(())
    }

    /// `max_i Σ_j a_{ij} f_j` over all cells: the explicit loss rate that
    /// bounds positivity-preserving step sizes.
    pub fn max_loss_rate(&self, f: &SpeciesField) -> f64 {
        let (n, m) = (self.n, f.num_cells());
        let src = f.as_slice();
        (0..m)
            .into_par_iter()
            .map(|c| {
                let mut worst = 0.0f64;
                for i in 1..=n {
                    let mut acc = 0.0;
                    for j in 1..=n - i {
                        acc += self.a(i, j) * src[(j - 1) * m + c].max(0.0);
                    }
                    worst = worst.max(acc);
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }
}
