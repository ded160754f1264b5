//! Spectral side of a walk: truncated Jacobi matrices, their eigen-decomposition,
//! the spectral edge `eta` and Gaussian quadrature for the random walk measure.
//!
//! The `N x N` truncation has diagonal `r_j` and off-diagonal
//! `sqrt(p_j q_{j+1})`. Its eigenvalues are the zeros of `Q_N`, and the
//! squared first components of its normalized eigenvectors are the
//! Gauss weights. The solver is Sturm-sequence bisection for the eigenvalues
//! and inverse iteration for the vectors.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::polynomials::eval_q;
use crate::scaled::ScaledValue;
use crate::walk::BirthDeath;

pub const DEFAULT_ETA_TOL: f64 = 1e-8;
pub const DEFAULT_N0: usize = 16;
pub const DEFAULT_NMAX: usize = 65_536;

/// Eigenvectors whose eigenvalues are closer than this (times the matrix
/// norm) are reorthogonalized against each other.
const CLUSTER_TOL: f64 = 1e-3;
const INVERSE_ITERATION_STEPS: usize = 3;
const RESIDUAL_FAIL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JacobiTruncation {
    pub diagonal: Vec<f64>,
    pub offdiagonal: Vec<f64>,
}

/// Symmetrized `N x N` leading block of the transition matrix.
pub fn jacobi_truncation<W: BirthDeath + ?Sized>(walk: &W, order: usize) -> JacobiTruncation {
    assert!(order >= 1, "truncation order must be at least 1");
    let diagonal = (0..order).map(|j| walk.r(j)).collect();
    let offdiagonal = (0..order - 1)
        .map(|j| (walk.p(j) * walk.q(j + 1)).sqrt())
        .collect();
    JacobiTruncation {
        diagonal,
        offdiagonal,
    }
}

impl JacobiTruncation {
    pub fn order(&self) -> usize {
        self.diagonal.len()
    }

    /// Gershgorin interval containing every eigenvalue.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.order();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let left = if i > 0 { self.offdiagonal[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { self.offdiagonal[i].abs() } else { 0.0 };
            lo = lo.min(self.diagonal[i] - left - right);
            hi = hi.max(self.diagonal[i] + left + right);
        }
        (lo, hi)
    }

    fn norm(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE)
    }

    fn squared_offdiagonal(&self) -> Vec<f64> {
        self.offdiagonal.iter().map(|e| e * e).collect()
    }

    /// Number of eigenvalues below `x`, from the signs of the LDL^T pivots.
    pub fn sturm_count(&self, x: f64) -> usize {
        sturm_count(&self.diagonal, &self.squared_offdiagonal(), x)
    }

    /// `k`-th smallest eigenvalue (0-based) by bisection to machine precision.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let e2 = self.squared_offdiagonal();
        bisect(&self.diagonal, &e2, self.gershgorin(), self.norm(), k)
    }

    pub fn largest_eigenvalue(&self) -> f64 {
        self.eigenvalue(self.order() - 1)
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self, exec: Execution) -> Vec<f64> {
        if self.order() == 1 {
            return self.diagonal.clone();
        }
        let e2 = self.squared_offdiagonal();
        let bounds = self.gershgorin();
        let norm = self.norm();
        let mut values = exec.map_range(self.order(), |k| bisect(&self.diagonal, &e2, bounds, norm, k));
        // bisection results are monotone in k up to the last ulp
        for k in 1..values.len() {
            if values[k] < values[k - 1] {
                values[k] = values[k - 1];
            }
        }
        values
    }
}

fn sturm_count(d: &[f64], e2: &[f64], x: f64) -> usize {
    let pivmin = f64::MIN_POSITIVE * e2.iter().copied().fold(1.0, f64::max);
    let mut count = 0;
    let mut t = d[0] - x;
    if t <= pivmin {
        count += 1;
        t = t.min(-pivmin);
    }
    for i in 1..d.len() {
        t = d[i] - x - e2[i - 1] / t;
        if t <= pivmin {
            count += 1;
            t = t.min(-pivmin);
        }
    }
    count
}

fn bisect(d: &[f64], e2: &[f64], (lo, hi): (f64, f64), norm: f64, k: usize) -> f64 {
    let mut a = lo - 1e-12 * norm;
    let mut b = hi + 1e-12 * norm;
    let atol = 0.5 * f64::EPSILON * norm;
    for _ in 0..200 {
        let width = b - a;
        if width <= (2.0 * f64::EPSILON * a.abs().max(b.abs())).max(atol) {
            break;
        }
        let mid = a + 0.5 * width;
        if sturm_count(d, e2, mid) <= k {
            a = mid;
        } else {
            b = mid;
        }
    }
    a + 0.5 * (b - a)
}

/// Eigenvalues with the squared first components of their eigenvectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenPairs {
    pub eigenvalues: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn eigen_decompose(jacobi: &JacobiTruncation) -> Result<EigenPairs> {
    eigen_decompose_with(jacobi, Execution::default())
}

pub fn eigen_decompose_with(jacobi: &JacobiTruncation, exec: Execution) -> Result<EigenPairs> {
    let eigenvalues = jacobi.eigenvalues(exec);
    let norm = jacobi.norm();

    let mut clusters: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for k in 1..=eigenvalues.len() {
        if k == eigenvalues.len() || eigenvalues[k] - eigenvalues[k - 1] > CLUSTER_TOL * norm {
            clusters.push((start, k));
            start = k;
        }
    }

    let per_cluster = exec.map_slice(&clusters, |&(a, b)| {
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(b - a);
        let mut firsts = Vec::with_capacity(b - a);
        for (offset, &lambda) in eigenvalues[a..b].iter().enumerate() {
            let v = inverse_iteration(jacobi, lambda, norm, a + offset, &vectors)?;
            firsts.push(v[0] * v[0]);
            vectors.push(v);
        }
        Ok(firsts)
    });

    let mut weights = Vec::with_capacity(eigenvalues.len());
    for w in per_cluster {
        weights.extend(w?);
    }
    Ok(EigenPairs {
        eigenvalues,
        weights,
    })
}

/// LU factors of a shifted tridiagonal matrix with partial pivoting.
struct TridiagLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    fn factor(jacobi: &JacobiTruncation, shift: f64, norm: f64) -> TridiagLu {
        let n = jacobi.order();
        let tiny = f64::EPSILON * norm;
        let mut d: Vec<f64> = jacobi.diagonal.iter().map(|x| x - shift).collect();
        let mut dl = jacobi.offdiagonal.clone();
        let mut du = jacobi.offdiagonal.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        for x in d.iter_mut() {
            if x.abs() < tiny {
                *x = tiny.copysign(*x);
            }
        }
        TridiagLu {
            dl,
            d,
            du,
            du2,
            swapped,
        }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= self.dl[i] * b[i];
        }
        b[n - 1] /= self.d[n - 1];
        if n >= 2 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

fn normalize(v: &mut [f64]) {
    let m = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m == 0.0 {
        return;
    }
    let norm = m * v.iter().map(|x| (x / m) * (x / m)).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

fn residual(jacobi: &JacobiTruncation, lambda: f64, v: &[f64]) -> f64 {
    let n = v.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        let mut y = (jacobi.diagonal[i] - lambda) * v[i];
        if i > 0 {
            y += jacobi.offdiagonal[i - 1] * v[i - 1];
        }
        if i + 1 < n {
            y += jacobi.offdiagonal[i] * v[i + 1];
        }
        worst = worst.max(y.abs());
    }
    worst
}

fn inverse_iteration(
    jacobi: &JacobiTruncation,
    lambda: f64,
    norm: f64,
    index: usize,
    previous: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let n = jacobi.order();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let lu = TridiagLu::factor(jacobi, lambda, norm);
    // deterministic pseudo-random start
    let mut state = 0x9E37_79B9_7F4A_7C15u64 ^ (index as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect();
    normalize(&mut v);
    let good = 16.0 * n as f64 * f64::EPSILON * norm;
    let mut res = f64::INFINITY;
    for _ in 0..INVERSE_ITERATION_STEPS {
        lu.solve(&mut v);
        for u in previous {
            let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(x, a)| *x -= dot * a);
        }
        normalize(&mut v);
        res = residual(jacobi, lambda, &v);
        if res <= good {
            break;
        }
    }
    if !(res <= RESIDUAL_FAIL * norm.max(1.0)) {
        return Err(Error::ConvergenceFailure {
            eigenvalue: lambda,
            residual: res,
        });
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// eta

/// Sequence of largest truncation zeros and the resulting edge estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaEstimate {
    /// Reported edge: the last largest zero, extrapolated when possible.
    pub value: f64,
    pub truncation_orders: Vec<usize>,
    pub largest_zeros: Vec<f64>,
    /// Raw successive largest zeros differ by less than `tol`.
    pub converged: bool,
    pub extrapolated: bool,
    pub tol: f64,
}

impl EtaEstimate {
    /// Largest zero at the last order; a lower bound for eta.
    pub fn raw(&self) -> f64 {
        *self.largest_zeros.last().expect("at least one order")
    }

    /// A point at or just above eta: the estimate plus `tol`, capped by the
    /// known edge when the walk provides one.
    pub fn upper(&self) -> f64 {
        self.value + self.tol
    }
}

/// Doubles the truncation order from `n0` to `n_max`, recording the largest
/// zero of `Q_N` each time. Three or more orders allow a geometric
/// extrapolation on the increments.
pub fn estimate_eta<W: BirthDeath + ?Sized>(
    walk: &W,
    tol: f64,
    n0: usize,
    n_max: usize,
) -> Result<EtaEstimate> {
    if !(tol > 0.0) || n0 < 1 || n_max < n0 {
        return Err(Error::DegenerateInput(format!(
            "estimate_eta needs tol > 0 and 1 <= n0 <= n_max (got {tol}, {n0}, {n_max})"
        )));
    }
    let mut orders = Vec::new();
    let mut zeros: Vec<f64> = Vec::new();
    let mut converged_at = None;
    let mut n = n0;
    while n <= n_max {
        let x = jacobi_truncation(walk, n).largest_eigenvalue();
        orders.push(n);
        zeros.push(x);
        let k = zeros.len();
        if converged_at.is_none() && k >= 2 && (zeros[k - 1] - zeros[k - 2]).abs() < tol {
            converged_at = Some(k);
        }
        if converged_at.is_some() && k >= 3 {
            break;
        }
        n *= 2;
    }

    let raw = *zeros.last().expect("n0 <= n_max");
    let (value, extrapolated) = extrapolate(&zeros).map_or((raw, false), |v| (v, true));
    let estimate = EtaEstimate {
        value: value.min(1.0),
        truncation_orders: orders,
        largest_zeros: zeros,
        converged: converged_at.is_some(),
        extrapolated,
        tol,
    };
    if estimate.converged {
        Ok(estimate)
    } else {
        Err(Error::NotConverged(Box::new(estimate)))
    }
}

/// Limit of `x_k` assuming increments shrink geometrically from the last
/// three entries.
fn extrapolate(xs: &[f64]) -> Option<f64> {
    let k = xs.len();
    if k < 3 {
        return None;
    }
    let d1 = xs[k - 2] - xs[k - 3];
    let d2 = xs[k - 1] - xs[k - 2];
    if !(d1 > 0.0 && d2 >= 0.0 && d2 < d1) {
        return None;
    }
    let rho = d2 / d1;
    if rho > 0.9 {
        return None;
    }
    Some(xs[k - 1] + d2 * rho / (1.0 - rho))
}

// ---------------------------------------------------------------------------
// Quadrature and derived quantities

/// `N`-point Gaussian quadrature for the random walk measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub order: usize,
    pub exactness_degree: usize,
}

impl DiscreteMeasure {
    /// `sum_k w_k x_k^m`.
    pub fn moment(&self, m: u32) -> f64 {
        let terms: Vec<ScaledValue> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| ScaledValue::from_f64(w) * ScaledValue::from_f64(x).powi(m as i32))
            .collect();
        ScaledValue::sum(terms.iter()).to_f64()
    }

    /// `sum_k w_k |x_k|^m`, the scale against which a signed moment is judged.
    pub fn abs_moment(&self, m: u32) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * x.abs().powi(m as i32))
            .sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

pub fn quadrature_measure<W: BirthDeath + ?Sized>(walk: &W, order: usize) -> Result<DiscreteMeasure> {
    quadrature_measure_with(walk, order, Execution::default())
}

pub fn quadrature_measure_with<W: BirthDeath + ?Sized>(
    walk: &W,
    order: usize,
    exec: Execution,
) -> Result<DiscreteMeasure> {
    let pairs = eigen_decompose_with(&jacobi_truncation(walk, order), exec)?;
    Ok(DiscreteMeasure {
        nodes: pairs.eigenvalues,
        weights: pairs.weights,
        order,
        exactness_degree: 2 * order - 1,
    })
}

/// `C_n = sum_{x_k < 0} w_k (-x_k)^n / sum_{x_k > 0} w_k x_k^n` for `n <= n_max`.
///
/// Values past `exactness_degree` are extrapolations of the truncated measure.
pub fn c_n_sequence(measure: &DiscreteMeasure, n_max: usize) -> Vec<f64> {
    let split = |negative: bool| -> Vec<(f64, f64)> {
        measure
            .nodes
            .iter()
            .zip(&measure.weights)
            .filter(|(&x, &w)| w > 0.0 && if negative { x < 0.0 } else { x > 0.0 })
            .map(|(&x, &w)| (w.ln(), x.abs().ln()))
            .collect()
    };
    let neg = split(true);
    let pos = split(false);
    let log_sum = |terms: &[(f64, f64)], n: usize| -> f64 {
        let logs: Vec<f64> = terms.iter().map(|&(lw, lx)| lw + n as f64 * lx).collect();
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return m;
        }
        m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
    };
    (0..=n_max)
        .map(|n| {
            let num = log_sum(&neg, n);
            if num == f64::NEG_INFINITY {
                0.0
            } else {
                (num - log_sum(&pos, n)).exp()
            }
        })
        .collect()
}

/// Quadrature values of `integral x Q_n(x)^2 dpsi` for `n <= n_max`.
pub fn whitehurst_check<W: BirthDeath + ?Sized>(
    walk: &W,
    measure: &DiscreteMeasure,
    n_max: usize,
) -> Vec<f64> {
    whitehurst_check_with(walk, measure, n_max, Execution::default())
}

pub fn whitehurst_check_with<W: BirthDeath + ?Sized>(
    walk: &W,
    measure: &DiscreteMeasure,
    n_max: usize,
    exec: Execution,
) -> Vec<f64> {
    let per_node: Vec<Vec<ScaledValue>> = exec.map_range(measure.nodes.len(), |k| {
        let x = measure.nodes[k];
        let scale = ScaledValue::from_f64(measure.weights[k] * x);
        eval_q(walk, n_max, x)
            .values
            .iter()
            .map(|&v| scale * v * v)
            .collect()
    });
    (0..=n_max)
        .map(|n| {
            let column: Vec<ScaledValue> = per_node.iter().map(|vals| vals[n]).collect();
            ScaledValue::sum(column.iter()).to_f64()
        })
        .collect()
}
