//! Brute-force n-step transition probabilities by banded matrix powers.
//!
//! A path of length `n` started at `i` never leaves `[0, i + n]`, so the
//! window `W = max(i, j) + n + 1` gives `(P^n)_{ij}` exactly. Rows are
//! propagated as vectors over the active band only.

use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::polynomials::eval_q;
use crate::scaled::ScaledValue;
use crate::spectral::DiscreteMeasure;
use crate::walk::{BirthDeath, Walk};

pub const DEFAULT_STATE_CAP: usize = 20_000;
pub const DEFAULT_OP_CAP: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResourceCap {
    pub states: usize,
    pub ops: u64,
}

impl Default for ResourceCap {
    fn default() -> Self {
        ResourceCap {
            states: DEFAULT_STATE_CAP,
            ops: DEFAULT_OP_CAP,
        }
    }
}

impl ResourceCap {
    fn check(&self, window: usize, steps: usize) -> Result<()> {
        if window > self.states {
            return Err(Error::ResourceLimit {
                what: "states",
                needed: window as u64,
                cap: self.states as u64,
            });
        }
        let ops = steps as u64 * window as u64;
        if ops > self.ops {
            return Err(Error::ResourceLimit {
                what: "band operations",
                needed: ops,
                cap: self.ops,
            });
        }
        Ok(())
    }
}

/// `W x W` leading block of the transition matrix, stored as three bands.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowedKernel {
    pub window: usize,
    pub up: Vec<f64>,
    pub hold: Vec<f64>,
    pub down: Vec<f64>,
}

impl WindowedKernel {
    pub fn new<W: BirthDeath + ?Sized>(walk: &W, window: usize) -> WindowedKernel {
        WindowedKernel {
            window,
            up: (0..window).map(|s| walk.p(s)).collect(),
            hold: (0..window).map(|s| walk.r(s)).collect(),
            down: (0..window).map(|s| walk.q(s)).collect(),
        }
    }

    /// Sum of row `s` inside the window; 1 except in the last row.
    pub fn row_sum(&self, s: usize) -> f64 {
        let mut total = self.hold[s];
        if s + 1 < self.window {
            total += self.up[s];
        }
        if s > 0 {
            total += self.down[s];
        }
        total
    }

    /// `v P` restricted to the window, where `v` is supported on `[lo, hi]`.
    /// Returns the new support.
    fn advance(&self, v: &[f64], out: &mut [f64], lo: usize, hi: usize) -> (usize, usize) {
        let new_lo = lo.saturating_sub(1);
        let new_hi = (hi + 1).min(self.window - 1);
        for s in new_lo..=new_hi {
            let mut x = 0.0;
            if s >= lo && s <= hi {
                x += v[s] * self.hold[s];
            }
            if s > lo && s - 1 <= hi {
                x += v[s - 1] * self.up[s - 1];
            }
            if s + 1 >= lo && s < hi {
                x += v[s + 1] * self.down[s + 1];
            }
            out[s] = x;
        }
        (new_lo, new_hi)
    }
}

/// `(P^n)_{ij}` with the default resource cap.
pub fn n_step<W: BirthDeath + ?Sized>(walk: &W, i: usize, j: usize, n: usize) -> Result<f64> {
    n_step_with(walk, i, j, n, ResourceCap::default())
}

pub fn n_step_with<W: BirthDeath + ?Sized>(
    walk: &W,
    i: usize,
    j: usize,
    n: usize,
    cap: ResourceCap,
) -> Result<f64> {
    let window = i.max(j) + n + 1;
    cap.check(window, n)?;
    Ok(n_step_with_window(walk, i, j, n, window))
}

/// Same computation in an explicitly chosen window (at least `i + 1` and
/// `j + 1` states). Windows of `max(i, j) + n + 1` or more are exact.
pub fn n_step_with_window<W: BirthDeath + ?Sized>(
    walk: &W,
    i: usize,
    j: usize,
    n: usize,
    window: usize,
) -> f64 {
    assert!(window > i.max(j), "window must contain both states");
    let kernel = WindowedKernel::new(walk, window);
    let mut v = vec![0.0; window];
    let mut next = vec![0.0; window];
    v[i] = 1.0;
    let (mut lo, mut hi) = (i, i);
    for _ in 0..n {
        let band = kernel.advance(&v, &mut next, lo, hi);
        std::mem::swap(&mut v, &mut next);
        lo = band.0;
        hi = band.1;
    }
    v[j]
}

/// `(P^n)_{ij}` for every `n <= n_max`, from a single propagated row.
pub fn n_step_sequence<W: BirthDeath + ?Sized>(
    walk: &W,
    i: usize,
    j: usize,
    n_max: usize,
    cap: ResourceCap,
) -> Result<Vec<f64>> {
    let window = i.max(j) + n_max + 1;
    cap.check(window, n_max)?;
    let kernel = WindowedKernel::new(walk, window);
    let mut v = vec![0.0; window];
    let mut next = vec![0.0; window];
    v[i] = 1.0;
    let (mut lo, mut hi) = (i, i);
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(v[j]);
    for _ in 0..n_max {
        let band = kernel.advance(&v, &mut next, lo, hi);
        std::mem::swap(&mut v, &mut next);
        lo = band.0;
        hi = band.1;
        out.push(if j >= lo && j <= hi { v[j] } else { 0.0 });
    }
    Ok(out)
}

/// Full row `(P^n)_{i, .}` over the window `[0, i + n]`.
pub fn n_step_row<W: BirthDeath + ?Sized>(walk: &W, i: usize, n: usize, cap: ResourceCap) -> Result<Vec<f64>> {
    let window = i + n + 1;
    cap.check(window, n)?;
    let kernel = WindowedKernel::new(walk, window);
    let mut v = vec![0.0; window];
    let mut next = vec![0.0; window];
    v[i] = 1.0;
    let (mut lo, mut hi) = (i, i);
    for _ in 0..n {
        let band = kernel.advance(&v, &mut next, lo, hi);
        std::mem::swap(&mut v, &mut next);
        lo = band.0;
        hi = band.1;
    }
    Ok(v)
}

/// Exact `(P^n)_{ij}` for walks specified with rational strings.
pub fn n_step_exact(walk: &Walk, i: usize, j: usize, n: usize, cap: ResourceCap) -> Result<BigRational> {
    n_step_exact_with_window(walk, i, j, n, i.max(j) + n + 1, cap)
}

pub fn n_step_exact_with_window(
    walk: &Walk,
    i: usize,
    j: usize,
    n: usize,
    window: usize,
    cap: ResourceCap,
) -> Result<BigRational> {
    let mut seq = exact_propagate(walk, i, j, n, window, cap)?;
    Ok(seq.pop().expect("n + 1 entries"))
}

/// Exact `(P^m)_{ij}` for every `m <= n_max`, from one propagated row.
pub fn n_step_exact_sequence(walk: &Walk, i: usize, j: usize, n_max: usize, cap: ResourceCap) -> Result<Vec<BigRational>> {
    exact_propagate(walk, i, j, n_max, i.max(j) + n_max + 1, cap)
}

fn exact_propagate(
    walk: &Walk,
    i: usize,
    j: usize,
    n: usize,
    window: usize,
    cap: ResourceCap,
) -> Result<Vec<BigRational>> {
    let exact = walk.exact().ok_or_else(|| {
        Error::ExactUnavailable("walk parameters were not given as exact rationals".to_string())
    })?;
    assert!(window > i.max(j), "window must contain both states");
    cap.check(window, n)?;
    let rows: Vec<[BigRational; 3]> = (0..window).map(|s| exact.row(s).clone()).collect();
    let zero = BigRational::zero();
    let mut v = vec![zero.clone(); window];
    v[i] = BigRational::from_integer(1.into());
    let (mut lo, mut hi) = (i, i);
    let mut out = Vec::with_capacity(n + 1);
    out.push(v[j].clone());
    for _ in 0..n {
        let new_lo = lo.saturating_sub(1);
        let new_hi = (hi + 1).min(window - 1);
        let mut next = vec![zero.clone(); window];
        for (s, slot) in next.iter_mut().enumerate().take(new_hi + 1).skip(new_lo) {
            let mut x = zero.clone();
            if s >= lo && s <= hi {
                x += &v[s] * &rows[s][1];
            }
            if s > lo && s - 1 <= hi {
                x += &v[s - 1] * &rows[s - 1][0];
            }
            if s + 1 >= lo && s < hi {
                x += &v[s + 1] * &rows[s + 1][2];
            }
            *slot = x;
        }
        v = next;
        lo = new_lo;
        hi = new_hi;
        out.push(v[j].clone());
    }
    Ok(out)
}

/// Relative gap between the matrix-power value of `P_ij(n)` and its
/// quadrature representation `pi_j sum_k w_k x_k^n Q_i(x_k) Q_j(x_k)`.
///
/// The denominator is the larger of `P_ij(n)` and the same sum taken in
/// absolute value, so vanishing entries (odd moments of a periodic walk)
/// are judged against the size of the cancelling terms.
pub fn km_representation_residual<W: BirthDeath + ?Sized>(
    walk: &W,
    measure: &DiscreteMeasure,
    i: usize,
    j: usize,
    n: usize,
) -> Result<f64> {
    let direct = n_step(walk, i, j, n)?;
    let degree = i.max(j);
    let mut signed = Vec::with_capacity(measure.nodes.len());
    let mut absolute = Vec::with_capacity(measure.nodes.len());
    for (&x, &w) in measure.nodes.iter().zip(&measure.weights) {
        let q = eval_q(walk, degree, x);
        let term = ScaledValue::from_f64(w) * ScaledValue::from_f64(x).powi(n as i32) * q.get(i) * q.get(j);
        signed.push(term);
        absolute.push(term.abs());
    }
    let pi_j = ScaledValue::from_ln(walk.log_pi(j));
    let spectral = (pi_j * ScaledValue::sum(signed.iter())).to_f64();
    let scale = (pi_j * ScaledValue::sum(absolute.iter())).to_f64();
    let denom = direct.abs().max(scale).max(f64::MIN_POSITIVE);
    Ok((direct - spectral).abs() / denom)
}

// ---------------------------------------------------------------------------
// Ratio traces

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    Comparable,
    NonComparable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioPoint {
    pub n: usize,
    /// `None` where `P_kl(n) = 0`.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioTrace {
    pub indices: [usize; 4],
    pub points: Vec<RatioPoint>,
    pub predicted_limit: f64,
    pub eta: f64,
    pub status: TraceStatus,
}

impl RatioTrace {
    pub fn ratio_at(&self, n: usize) -> Option<f64> {
        self.points.iter().find(|pt| pt.n == n).and_then(|pt| pt.ratio)
    }
}

/// `pi_j Q_i(eta) Q_j(eta) / (pi_l Q_k(eta) Q_l(eta))`.
pub fn predicted_ratio_limit<W: BirthDeath + ?Sized>(walk: &W, [i, j, k, l]: [usize; 4], eta: f64) -> f64 {
    let q = eval_q(walk, i.max(j).max(k).max(l), eta);
    let num = ScaledValue::from_ln(walk.log_pi(j)) * q.get(i) * q.get(j);
    let den = ScaledValue::from_ln(walk.log_pi(l)) * q.get(k) * q.get(l);
    (num / den).to_f64()
}

/// Geometric grid `16, 32, ..., <= n_max` with each `n + 1` alongside, so
/// even and odd steps are both sampled.
pub fn default_ratio_grid(n_max: usize) -> Vec<usize> {
    let mut grid = Vec::new();
    let mut n = 16;
    while n <= n_max {
        grid.push(n);
        if n < n_max {
            grid.push(n + 1);
        }
        n *= 2;
    }
    if grid.last().is_none_or(|&last| last < n_max) {
        grid.push(n_max);
    }
    grid.dedup();
    grid
}

/// `P_ij(n) / P_kl(n)` along `n_grid`.
pub fn ratio_trace<W: BirthDeath + ?Sized>(
    walk: &W,
    indices: [usize; 4],
    n_grid: &[usize],
    eta: f64,
    cap: ResourceCap,
) -> Result<RatioTrace> {
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::DegenerateInput("n_grid must be strictly ascending".to_string()));
    }
    let [i, j, k, l] = indices;
    let n_max = n_grid.last().copied().unwrap_or(0);
    let window = i.max(j).max(k).max(l) + n_max + 1;
    cap.check(window, 2 * n_max)?;

    let (num, den) = Execution::default().join(
        || n_step_sequence(walk, i, j, n_max, cap),
        || n_step_sequence(walk, k, l, n_max, cap),
    );
    let (num, den) = (num?, den?);
    let points = n_grid
        .iter()
        .map(|&n| RatioPoint {
            n,
            ratio: (den[n] > 0.0).then(|| num[n] / den[n]),
        })
        .collect();
    let status = if walk.is_periodic() && (i + j) % 2 != (k + l) % 2 {
        TraceStatus::NonComparable
    } else {
        TraceStatus::Comparable
    };
    Ok(RatioTrace {
        indices,
        points,
        predicted_limit: predicted_ratio_limit(walk, indices, eta),
        eta,
        status,
    })
}
