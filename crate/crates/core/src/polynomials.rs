//! Birth-death polynomials `Q_n(x)`.
//!
//! `Q_0 = 1`, `p_0 Q_1 = x - r_0` and
//! `x Q_n = q_n Q_{n-1} + r_n Q_n + p_n Q_{n+1}`. Values are produced by the
//! forward recurrence; the running pair is rescaled by exact powers of two
//! whenever it leaves `[1e-100, 1e100]`, with the scale kept as a logarithm.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scaled::ScaledValue;
use crate::walk::BirthDeath;

const RESCALE_HI: f64 = 1e100;
const RESCALE_LO: f64 = 1e-100;

/// `Q_0(x), ..., Q_N(x)` at a single point.
#[derive(Debug, Clone, Serialize)]
pub struct PolySequence {
    pub x: f64,
    pub values: Vec<ScaledValue>,
}

impl PolySequence {
    /// Highest degree held.
    pub fn degree(&self) -> usize {
        self.values.len() - 1
    }

    pub fn get(&self, n: usize) -> ScaledValue {
        self.values[n]
    }
}

/// Power-of-two exponent that brings `m` back near 1, or 0 when no rescale
/// is needed.
fn rescale_exponent(m: f64) -> i32 {
    if m > RESCALE_HI || (m < RESCALE_LO && m > 0.0) {
        -(m.log2().floor() as i32)
    } else {
        0
    }
}

/// One step of the three-term recurrence: returns `Q_{n+1}` given
/// `Q_{n-1}`, `Q_n` in a common scale.
#[inline]
pub(crate) fn step<W: BirthDeath + ?Sized>(walk: &W, n: usize, x: f64, prev: f64, cur: f64) -> f64 {
    let t = walk.triple(n);
    ((x - t.r) * cur - t.q * prev) / t.p
}

/// Evaluates `Q_0..=Q_N` at `x`.
pub fn eval_q<W: BirthDeath + ?Sized>(walk: &W, n_max: usize, x: f64) -> PolySequence {
    let mut values = Vec::with_capacity(n_max + 1);
    values.push(ScaledValue::ONE);
    let (mut prev, mut cur) = (0.0, 1.0);
    let mut log_scale = 0.0;
    for n in 0..n_max {
        let next = step(walk, n, x, prev, cur);
        prev = cur;
        cur = next;
        let k = rescale_exponent(prev.abs().max(cur.abs()));
        if k != 0 {
            let f = 2f64.powi(k);
            prev *= f;
            cur *= f;
            log_scale -= f64::from(k) * std::f64::consts::LN_2;
        }
        let v = ScaledValue::from_f64(cur);
        values.push(ScaledValue::from_parts(v.sign(), v.log_mag() + log_scale));
    }
    PolySequence { x, values }
}

/// `Q_{j+1}(x) / Q_j(x)` for `j < n_max`, by the ratio form of the
/// recurrence. Fails when a ratio is not positive, which for `x = theta`
/// means `theta < eta`.
pub fn q_ratios<W: BirthDeath + ?Sized>(walk: &W, n_max: usize, x: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n_max);
    let mut extend = RatioExtender::new(x);
    for _ in 0..n_max {
        out.push(extend.next_ratio(walk)?);
    }
    Ok(out)
}

/// Incremental generator of `Q_{j+1}(x) / Q_j(x)`.
#[derive(Debug, Clone)]
pub(crate) struct RatioExtender {
    x: f64,
    j: usize,
    last: f64,
}

impl RatioExtender {
    pub(crate) fn new(x: f64) -> Self {
        RatioExtender { x, j: 0, last: f64::NAN }
    }

    pub(crate) fn next_ratio<W: BirthDeath + ?Sized>(&mut self, walk: &W) -> Result<f64> {
        let t = walk.triple(self.j);
        let rho = if self.j == 0 {
            (self.x - t.r) / t.p
        } else {
            ((self.x - t.r) - t.q / self.last) / t.p
        };
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::ThetaBelowEta {
                theta: self.x,
                index: self.j + 1,
            });
        }
        self.j += 1;
        self.last = rho;
        Ok(rho)
    }
}

/// `ln Q_0(x), ..., ln Q_N(x)` for a point where all values are positive.
pub fn log_q_positive<W: BirthDeath + ?Sized>(walk: &W, n_max: usize, x: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(0.0);
    let mut acc = 0.0;
    let mut ratios = RatioExtender::new(x);
    for _ in 0..n_max {
        acc += ratios.next_ratio(walk)?.ln();
        out.push(acc);
    }
    Ok(out)
}

/// `(-1)^n Q_n(-1)` for `n <= N` from the summation form
/// `Qb_{n+1} = Qb_n + 2/(p_n pi_n) * sum_{k<=n} r_k pi_k Qb_k`.
///
/// Every term is nonnegative, so there is no cancellation.
pub fn q_at_minus_one<W: BirthDeath + ?Sized>(walk: &W, n_max: usize) -> Vec<ScaledValue> {
    // Carry s_n = sum_{k<=n} r_k (pi_k / pi_n) Qbar_k, which lives on the same
    // scale as Qbar_n, so both share one power-of-two exponent.
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(ScaledValue::ONE);
    let (mut qb, mut s) = (1.0f64, 0.0f64);
    let mut exponent: i64 = 0;
    for n in 0..n_max {
        let t = walk.triple(n);
        if n > 0 {
            s *= t.q / walk.p(n - 1);
        }
        s += t.r * qb;
        qb += 2.0 * s / t.p;
        let e = rescale_exponent(qb);
        if e != 0 {
            let f = 2f64.powi(e);
            qb *= f;
            s *= f;
            exponent -= e as i64;
        }
        out.push(ScaledValue::from_ln(qb.ln() + exponent as f64 * std::f64::consts::LN_2));
    }
    out
}

/// `(-1)^n Q_n(-1)` straight from the three-term recurrence at `x = -1`.
pub fn q_at_minus_one_direct<W: BirthDeath + ?Sized>(walk: &W, n_max: usize) -> Vec<ScaledValue> {
    eval_q(walk, n_max, -1.0)
        .values
        .into_iter()
        .enumerate()
        .map(|(n, v)| if n % 2 == 1 { -v } else { v })
        .collect()
}

/// Relative mismatch in the Christoffel-Darboux identity
/// `p_n pi_n (Q_n(x) Q_{n+1}(y) - Q_n(y) Q_{n+1}(x)) = (y - x) sum_{j<=n} pi_j Q_j(x) Q_j(y)`,
/// scaled by the larger side.
pub fn christoffel_darboux_residual<W: BirthDeath + ?Sized>(
    walk: &W,
    n: usize,
    x: f64,
    y: f64,
) -> Result<f64> {
    if x == y {
        return Err(Error::DegenerateInput(
            "Christoffel-Darboux needs x != y".to_string(),
        ));
    }
    let qx = eval_q(walk, n + 1, x);
    let qy = eval_q(walk, n + 1, y);
    let mut log_pi = 0.0;
    let mut terms = Vec::with_capacity(n + 1);
    for j in 0..=n {
        terms.push(ScaledValue::from_ln(log_pi) * qx.get(j) * qy.get(j));
        log_pi += walk.p(j).ln() - walk.q(j + 1).ln();
    }
    let rhs = ScaledValue::from_f64(y - x) * ScaledValue::sum(terms.iter());
    let weight = ScaledValue::from_ln(walk.p(n).ln() + walk.log_pi(n));
    let lhs = weight * (qx.get(n) * qy.get(n + 1) - qy.get(n) * qx.get(n + 1));

    let scale = if lhs.abs().cmp_value(&rhs.abs()).is_ge() {
        lhs.abs()
    } else {
        rhs.abs()
    };
    if scale.is_zero() {
        return Ok(0.0);
    }
    Ok(((lhs - rhs).abs() / scale).to_f64())
}

/// `|Q_n(theta) / Q_n(-theta)|` for `n <= N`. Each lane keeps its own
/// power-of-two exponent, so rescaling introduces no rounding.
pub fn q_ratio_sequence<W: BirthDeath + ?Sized>(walk: &W, theta: f64, n_max: usize) -> Result<Vec<f64>> {
    if !(theta > 0.0) {
        return Err(Error::DegenerateInput(format!("theta must be > 0, got {theta}")));
    }
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    let mut plus = Lane::new();
    let mut minus = Lane::new();
    for n in 0..n_max {
        plus.advance(walk, n, theta);
        minus.advance(walk, n, -theta);
        if !(plus.cur > 0.0) {
            return Err(Error::ThetaBelowEta { theta, index: n + 1 });
        }
        let shift = (plus.exponent - minus.exponent).clamp(-4000, 4000) as i32;
        let half = shift / 2;
        out.push((plus.cur / minus.cur).abs() * 2f64.powi(half) * 2f64.powi(shift - half));
    }
    Ok(out)
}

/// `(Q_{n-1}, Q_n) * 2^-exponent`.
struct Lane {
    prev: f64,
    cur: f64,
    exponent: i64,
}

impl Lane {
    fn new() -> Lane {
        Lane { prev: 0.0, cur: 1.0, exponent: 0 }
    }

    fn advance<W: BirthDeath + ?Sized>(&mut self, walk: &W, n: usize, x: f64) {
        let next = step(walk, n, x, self.prev, self.cur);
        self.prev = self.cur;
        self.cur = next;
        let k = rescale_exponent(self.prev.abs().max(self.cur.abs()));
        if k != 0 {
            let f = 2f64.powi(k);
            self.prev *= f;
            self.cur *= f;
            self.exponent -= k as i64;
        }
    }
}
