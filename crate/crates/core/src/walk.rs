//! Birth-death walk parameters.
//!
//! A walk on `{0, 1, 2, ...}` moves up with probability `p_j`, holds with
//! `r_j` and moves down with `q_j`, where `q_0 = 0`, `p_j > 0` and
//! `q_{j+1} > 0`. Specs come in as JSON and are resolved into a [`Walk`].

use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sum-to-one tolerance; triples within it are renormalized, beyond it rejected.
pub const RENORM_TOL: f64 = 1e-12;

/// Default index horizon over which a `linear_rational` spec is checked.
pub const DEFAULT_RATIONAL_HORIZON: usize = 10_000;

/// One row of the transition matrix: up, hold, down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Triple {
    pub p: f64,
    pub r: f64,
    pub q: f64,
}

impl Triple {
    /// Rebuilds `p` as `(1 - r) - q`, so that the polynomial recurrence at
    /// `x = 1` reproduces `Q_n(1) = 1` bit for bit.
    fn canonical(r: f64, q: f64) -> Triple {
        Triple {
            p: (1.0 - r) - q,
            r,
            q,
        }
    }
}

/// Anything with birth-death transition parameters.
///
/// Implementors must satisfy `p(j) > 0`, `r(j) >= 0`, `q(0) = 0`,
/// `q(j) > 0` for `j >= 1` and `p + q + r = 1` up to rounding.
pub trait BirthDeath: Send + Sync {
    fn p(&self, j: usize) -> f64;
    fn r(&self, j: usize) -> f64;
    fn q(&self, j: usize) -> f64;

    /// True iff `r_j = 0` for every `j`.
    fn is_periodic(&self) -> bool;

    /// Smallest `J` with `r_j = 0` for all `j >= J`, when that is known
    /// from the structure of the walk rather than from sampling.
    fn r_support_end(&self) -> Option<usize> {
        None
    }

    /// `ln pi_n` with `pi_0 = 1`, `pi_n = p_0...p_{n-1} / (q_1...q_n)`.
    fn log_pi(&self, n: usize) -> f64 {
        (0..n).map(|k| self.p(k).ln() - self.q(k + 1).ln()).sum()
    }

    /// Exact spectral edge when it is known by construction.
    fn eta_hint(&self) -> Option<f64> {
        None
    }

    fn label(&self) -> &str {
        ""
    }

    fn triple(&self, j: usize) -> Triple {
        Triple {
            p: self.p(j),
            r: self.r(j),
            q: self.q(j),
        }
    }
}

impl<T: BirthDeath + ?Sized> BirthDeath for &T {
    fn p(&self, j: usize) -> f64 {
        (**self).p(j)
    }
    fn r(&self, j: usize) -> f64 {
        (**self).r(j)
    }
    fn q(&self, j: usize) -> f64 {
        (**self).q(j)
    }
    fn is_periodic(&self) -> bool {
        (**self).is_periodic()
    }
    fn r_support_end(&self) -> Option<usize> {
        (**self).r_support_end()
    }
    fn log_pi(&self, n: usize) -> f64 {
        (**self).log_pi(n)
    }
    fn eta_hint(&self) -> Option<f64> {
        (**self).eta_hint()
    }
    fn label(&self) -> &str {
        (**self).label()
    }
    fn triple(&self, j: usize) -> Triple {
        (**self).triple(j)
    }
}

impl<T: BirthDeath + ?Sized> BirthDeath for std::sync::Arc<T> {
    fn p(&self, j: usize) -> f64 {
        (**self).p(j)
    }
    fn r(&self, j: usize) -> f64 {
        (**self).r(j)
    }
    fn q(&self, j: usize) -> f64 {
        (**self).q(j)
    }
    fn is_periodic(&self) -> bool {
        (**self).is_periodic()
    }
    fn r_support_end(&self) -> Option<usize> {
        (**self).r_support_end()
    }
    fn log_pi(&self, n: usize) -> f64 {
        (**self).log_pi(n)
    }
    fn eta_hint(&self) -> Option<f64> {
        (**self).eta_hint()
    }
    fn label(&self) -> &str {
        (**self).label()
    }
    fn triple(&self, j: usize) -> Triple {
        (**self).triple(j)
    }
}

// ---------------------------------------------------------------------------
// JSON spec

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Constant,
    TabularWithConstantTail,
    LinearRational,
}

/// A probability as written in a spec: a JSON number, or a string holding
/// an exact rational (`"3/10"`, `"0.3"`, `"1"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Prob {
    Number(f64),
    Text(String),
}

impl Prob {
    fn exact(&self) -> Result<Option<BigRational>> {
        match self {
            Prob::Number(_) => Ok(None),
            Prob::Text(s) => parse_rational(s).map(Some),
        }
    }

    fn value(&self) -> Result<f64> {
        match self {
            Prob::Number(x) => Ok(*x),
            Prob::Text(s) => parse_rational(s)?
                .to_f64()
                .ok_or_else(|| Error::InvalidSpec(format!("'{s}' is not representable"))),
        }
    }
}

impl From<f64> for Prob {
    fn from(x: f64) -> Self {
        Prob::Number(x)
    }
}

impl From<&str> for Prob {
    fn from(s: &str) -> Self {
        Prob::Text(s.to_string())
    }
}

/// Parses `"a/b"`, `"a"` or a plain decimal such as `"0.35"` exactly.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::InvalidSpec(format!("cannot parse '{s}' as an exact rational"));
    if let Some((num, den)) = s.split_once('/') {
        let num = BigInt::from_str(num.trim()).map_err(|_| bad())?;
        let den = BigInt::from_str(den.trim()).map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(num, den));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = int.starts_with('-');
        let int_part = if int.is_empty() || int == "-" {
            BigInt::zero()
        } else {
            BigInt::from_str(int).map_err(|_| bad())?.abs()
        };
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let frac_part = BigInt::from_str(frac).map_err(|_| bad())?;
        let mut value = BigRational::new(int_part * &scale + frac_part, scale);
        if negative {
            value = -value;
        }
        return Ok(value);
    }
    BigInt::from_str(s)
        .map(BigRational::from_integer)
        .map_err(|_| bad())
}

/// Rational function of the state index: `num(j) / den(j)`, coefficients in
/// ascending powers of `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RationalFn {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

impl RationalFn {
    pub fn eval(&self, j: usize) -> f64 {
        let x = j as f64;
        horner(&self.num, x) / horner(&self.den, x)
    }

    fn degree(coeffs: &[f64]) -> Option<usize> {
        coeffs.iter().rposition(|&c| c != 0.0)
    }

    /// Limit as `j -> inf`; `None` when it diverges.
    fn limit(&self) -> Option<f64> {
        let dn = Self::degree(&self.num);
        let dd = Self::degree(&self.den)?;
        match dn {
            None => Some(0.0),
            Some(dn) if dn < dd => Some(0.0),
            Some(dn) if dn == dd => Some(self.num[dn] / self.den[dd]),
            _ => None,
        }
    }

    fn is_zero(&self) -> bool {
        Self::degree(&self.num).is_none()
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn default_horizon() -> usize {
    DEFAULT_RATIONAL_HORIZON
}

/// Parameters of the `linear_rational` family: `p_j` and `r_j` as rational
/// functions of `j`, with `q_j = 1 - p_j - r_j` for `j >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RationalParams {
    pub p: RationalFn,
    pub r: RationalFn,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkSpec {
    pub family: Family,
    /// `[p, r, q]` rows for the leading states (tabular family).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prefix: Vec<[Prob; 3]>,
    /// `[p, r, q]` row repeated for every state past the prefix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<[Prob; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<RationalParams>,
    #[serde(default)]
    pub label: String,
}

impl WalkSpec {
    pub fn from_json(text: &str) -> Result<WalkSpec> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn constant(p: f64, r: f64, q: f64) -> WalkSpec {
        WalkSpec {
            family: Family::Constant,
            prefix: Vec::new(),
            tail: Some([p.into(), r.into(), q.into()]),
            params: None,
            label: format!("constant p={p} r={r} q={q}"),
        }
    }

    pub fn tabular(prefix: &[[f64; 3]], tail: [f64; 3]) -> WalkSpec {
        WalkSpec {
            family: Family::TabularWithConstantTail,
            prefix: prefix
                .iter()
                .map(|t| [t[0].into(), t[1].into(), t[2].into()])
                .collect(),
            tail: Some([tail[0].into(), tail[1].into(), tail[2].into()]),
            params: None,
            label: "tabular".to_string(),
        }
    }

    pub fn linear_rational(p: RationalFn, r: RationalFn) -> WalkSpec {
        WalkSpec {
            family: Family::LinearRational,
            prefix: Vec::new(),
            tail: None,
            params: Some(RationalParams {
                p,
                r,
                horizon: DEFAULT_RATIONAL_HORIZON,
            }),
            label: "linear_rational".to_string(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> WalkSpec {
        self.label = label.into();
        self
    }
}

// ---------------------------------------------------------------------------
// Resolved walk

/// Exact rational rows, available when every probability in the spec was
/// written as a string.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactParams {
    prefix: Vec<[BigRational; 3]>,
    tail: [BigRational; 3],
}

impl ExactParams {
    /// `(p_j, r_j, q_j)` as exact rationals.
    pub fn row(&self, j: usize) -> &[BigRational; 3] {
        self.prefix.get(j).unwrap_or(&self.tail)
    }
}

#[derive(Debug, Clone)]
enum Tail {
    Constant(Triple),
    Rational(RationalParams),
}

#[derive(Debug, Clone)]
pub struct Walk {
    label: String,
    prefix: Vec<Triple>,
    tail: Tail,
    periodic: bool,
    r_support_end: Option<usize>,
    /// `ln pi_n` for `n <= prefix.len()`.
    log_pi_cache: Vec<f64>,
    exact: Option<ExactParams>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidSpec(msg.into())
}

/// Validates a float row and renormalizes it; state 0 must have `q = 0`.
fn check_triple(p: f64, r: f64, q: f64, j: usize) -> Result<Triple> {
    if !(p.is_finite() && r.is_finite() && q.is_finite()) {
        return Err(invalid(format!("state {j}: non-finite probability")));
    }
    if p <= 0.0 {
        return Err(invalid(format!("state {j}: p must be > 0, got {p}")));
    }
    if r < 0.0 {
        return Err(invalid(format!("state {j}: r must be >= 0, got {r}")));
    }
    if j == 0 {
        if q != 0.0 {
            return Err(invalid(format!(
                "state 0: q_0 must be 0 (q_0 = 0 is required), got {q}"
            )));
        }
    } else if q <= 0.0 {
        return Err(invalid(format!("state {j}: q must be > 0, got {q}")));
    }
    let sum = p + r + q;
    if (sum - 1.0).abs() > RENORM_TOL {
        return Err(invalid(format!(
            "state {j}: p + r + q = {sum} differs from 1 by more than {RENORM_TOL:e}"
        )));
    }
    Ok(Triple::canonical(r / sum, q / sum))
}

fn check_exact(row: &[BigRational; 3], j: usize) -> Result<[BigRational; 3]> {
    let [p, r, q] = row;
    let zero = BigRational::zero();
    if *p <= zero || *r < zero || (j == 0 && *q != zero) || (j > 0 && *q <= zero) {
        return Err(invalid(format!("state {j}: exact row violates constraints")));
    }
    let sum = p + r + q;
    if sum.is_one() {
        return Ok(row.clone());
    }
    let off = (&sum - BigRational::one()).abs().to_f64().unwrap_or(f64::INFINITY);
    if off > RENORM_TOL {
        return Err(invalid(format!(
            "state {j}: p + r + q differs from 1 by {off:e}"
        )));
    }
    Ok([p / &sum, r / &sum, q / &sum])
}

/// Moves the down-mass of a row onto `p` and `r` in proportion, giving `q = 0`.
fn index_zero_rule(p: f64, r: f64) -> (f64, f64) {
    (p / (p + r), r / (p + r))
}

fn probs(row: &[Prob; 3]) -> Result<[f64; 3]> {
    Ok([row[0].value()?, row[1].value()?, row[2].value()?])
}

fn exact_row(row: &[Prob; 3]) -> Result<Option<[BigRational; 3]>> {
    match (row[0].exact()?, row[1].exact()?, row[2].exact()?) {
        (Some(p), Some(r), Some(q)) => Ok(Some([p, r, q])),
        _ => Ok(None),
    }
}

impl Walk {
    /// Resolves and validates a spec.
    pub fn from_spec(spec: &WalkSpec) -> Result<Walk> {
        let (prefix, tail, exact) = match spec.family {
            Family::Constant => Self::resolve_constant(spec)?,
            Family::TabularWithConstantTail => Self::resolve_tabular(spec)?,
            Family::LinearRational => Self::resolve_rational(spec)?,
        };

        let tail_r_zero = match &tail {
            Tail::Constant(t) => t.r == 0.0,
            Tail::Rational(params) => params.r.is_zero(),
        };
        let r_support_end = tail_r_zero.then(|| {
            prefix
                .iter()
                .rposition(|t| t.r != 0.0)
                .map_or(0, |i| i + 1)
        });
        let periodic = r_support_end == Some(0);

        let mut walk = Walk {
            label: spec.label.clone(),
            prefix,
            tail,
            periodic,
            r_support_end,
            log_pi_cache: Vec::new(),
            exact,
        };
        let mut cache = Vec::with_capacity(walk.prefix.len() + 1);
        let mut acc = 0.0;
        cache.push(acc);
        for k in 0..walk.prefix.len() {
            acc += walk.p(k).ln() - walk.q(k + 1).ln();
            cache.push(acc);
        }
        walk.log_pi_cache = cache;
        Ok(walk)
    }

    pub fn from_json(text: &str) -> Result<Walk> {
        Walk::from_spec(&WalkSpec::from_json(text)?)
    }

    pub fn constant(p: f64, r: f64, q: f64) -> Result<Walk> {
        Walk::from_spec(&WalkSpec::constant(p, r, q))
    }

    pub fn tabular(prefix: &[[f64; 3]], tail: [f64; 3]) -> Result<Walk> {
        Walk::from_spec(&WalkSpec::tabular(prefix, tail))
    }

    fn resolve_constant(spec: &WalkSpec) -> Result<(Vec<Triple>, Tail, Option<ExactParams>)> {
        if !spec.prefix.is_empty() || spec.params.is_some() {
            return Err(invalid("constant family takes only a tail"));
        }
        let row = spec
            .tail
            .as_ref()
            .ok_or_else(|| invalid("constant family needs a tail [p, r, q]"))?;
        let [p, r, q] = probs(row)?;
        let tail = check_triple(p, r, q, 1)?;
        let (p0, r0) = index_zero_rule(tail.p, tail.r);
        let head = check_triple(p0, r0, 0.0, 0)?;

        let exact = match exact_row(row)? {
            Some(row) => {
                let tail = check_exact(&row, 1)?;
                let [p, r, _] = &tail;
                let s = p + r;
                let head = [p / &s, r / &s, BigRational::zero()];
                Some(ExactParams {
                    prefix: vec![head],
                    tail,
                })
            }
            None => None,
        };
        Ok((vec![head], Tail::Constant(tail), exact))
    }

    fn resolve_tabular(spec: &WalkSpec) -> Result<(Vec<Triple>, Tail, Option<ExactParams>)> {
        if spec.params.is_some() {
            return Err(invalid("tabular family takes no params"));
        }
        if spec.prefix.is_empty() {
            return Err(invalid("tabular family needs a prefix holding state 0"));
        }
        let tail_row = spec
            .tail
            .as_ref()
            .ok_or_else(|| invalid("tabular family needs a tail [p, r, q]"))?;
        let mut prefix = Vec::with_capacity(spec.prefix.len());
        for (j, row) in spec.prefix.iter().enumerate() {
            let [p, r, q] = probs(row)?;
            prefix.push(check_triple(p, r, q, j)?);
        }
        let [p, r, q] = probs(tail_row)?;
        let tail = check_triple(p, r, q, spec.prefix.len().max(1))?;

        let mut exact_prefix = Vec::with_capacity(spec.prefix.len());
        let mut all_exact = true;
        for (j, row) in spec.prefix.iter().enumerate() {
            match exact_row(row)? {
                Some(row) => exact_prefix.push(check_exact(&row, j)?),
                None => {
                    all_exact = false;
                    break;
                }
            }
        }
        let exact = match (all_exact, exact_row(tail_row)?) {
            (true, Some(row)) => Some(ExactParams {
                prefix: exact_prefix,
                tail: check_exact(&row, 1)?,
            }),
            _ => None,
        };
        Ok((prefix, Tail::Constant(tail), exact))
    }

    fn resolve_rational(spec: &WalkSpec) -> Result<(Vec<Triple>, Tail, Option<ExactParams>)> {
        if !spec.prefix.is_empty() || spec.tail.is_some() {
            return Err(invalid("linear_rational family takes only params"));
        }
        let params = spec
            .params
            .clone()
            .ok_or_else(|| invalid("linear_rational family needs params {p, r}"))?;
        if params.p.den.iter().all(|&c| c == 0.0) || params.r.den.iter().all(|&c| c == 0.0) {
            return Err(invalid("rational function with zero denominator"));
        }
        let p_lim = params
            .p
            .limit()
            .ok_or_else(|| invalid("p_j is unbounded as j grows"))?;
        let r_lim = params
            .r
            .limit()
            .ok_or_else(|| invalid("r_j is unbounded as j grows"))?;
        let q_lim = 1.0 - p_lim - r_lim;
        if !(p_lim > 0.0 && r_lim >= 0.0 && q_lim > 0.0) {
            return Err(invalid(format!(
                "limits p = {p_lim}, r = {r_lim}, q = {q_lim} leave the open simplex"
            )));
        }

        let (p0, r0) = (params.p.eval(0), params.r.eval(0));
        let q0 = 1.0 - p0 - r0;
        if q0 < -RENORM_TOL {
            return Err(invalid(format!("state 0: p_0 + r_0 = {} exceeds 1", p0 + r0)));
        }
        let (p0, r0) = index_zero_rule(p0, r0);
        let mut prefix = Vec::with_capacity(params.horizon + 1);
        prefix.push(check_triple(p0, r0, 0.0, 0)?);
        for j in 1..=params.horizon {
            let (p, r) = (params.p.eval(j), params.r.eval(j));
            prefix.push(check_triple(p, r, 1.0 - p - r, j)?);
        }
        Ok((prefix, Tail::Rational(params), None))
    }

    pub fn prefix_len(&self) -> usize {
        self.prefix.len()
    }

    /// Exact rows, when the spec used exact strings throughout.
    pub fn exact(&self) -> Option<&ExactParams> {
        self.exact.as_ref()
    }

    fn row(&self, j: usize) -> Triple {
        if let Some(t) = self.prefix.get(j) {
            return *t;
        }
        match &self.tail {
            Tail::Constant(t) => *t,
            Tail::Rational(params) => {
                let p = params.p.eval(j);
                let r = params.r.eval(j);
                Triple::canonical(r, (1.0 - r) - p)
            }
        }
    }
}

impl BirthDeath for Walk {
    fn p(&self, j: usize) -> f64 {
        self.row(j).p
    }
    fn r(&self, j: usize) -> f64 {
        self.row(j).r
    }
    fn q(&self, j: usize) -> f64 {
        self.row(j).q
    }
    fn triple(&self, j: usize) -> Triple {
        self.row(j)
    }
    fn is_periodic(&self) -> bool {
        self.periodic
    }
    fn r_support_end(&self) -> Option<usize> {
        self.r_support_end
    }
    fn log_pi(&self, n: usize) -> f64 {
        let last = self.log_pi_cache.len() - 1;
        if n <= last {
            return self.log_pi_cache[n];
        }
        let base = self.log_pi_cache[last];
        match &self.tail {
            Tail::Constant(t) => base + (n - last) as f64 * (t.p.ln() - t.q.ln()),
            Tail::Rational(_) => {
                base + (last..n)
                    .map(|k| self.p(k).ln() - self.q(k + 1).ln())
                    .sum::<f64>()
            }
        }
    }
    fn label(&self) -> &str {
        &self.label
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_family_index_zero_rule() {
        let w = Walk::constant(0.3, 0.4, 0.3).unwrap();
        assert_eq!(w.r(5), 0.4);
        assert_eq!(w.q(0), 0.0);
        assert!((w.p(0) - 3.0 / 7.0).abs() < 1e-15);
        assert!((w.r(0) - 4.0 / 7.0).abs() < 1e-15);
        assert!(!w.is_periodic());
    }

    #[test]
    fn periodic_flag() {
        let w = Walk::constant(0.5, 0.0, 0.5).unwrap();
        assert!(w.is_periodic());
        assert_eq!(w.p(0), 1.0);
        assert_eq!(w.r_support_end(), Some(0));
    }

    #[test]
    fn tabular_lookup() {
        let w = Walk::tabular(&[[1.0, 0.0, 0.0]], [0.3, 0.4, 0.3]).unwrap();
        assert_eq!(w.p(0), 1.0);
        assert_eq!(w.r(3), 0.4);
        assert!(!w.is_periodic());
    }

    #[test]
    fn rejects_bad_rows() {
        let off = Walk::tabular(&[[0.5, 0.4, 0.0]], [0.3, 0.4, 0.3]);
        assert!(matches!(off, Err(Error::InvalidSpec(_))));
        let q0 = Walk::tabular(&[[0.5, 0.3, 0.2]], [0.3, 0.4, 0.3]).unwrap_err();
        assert!(q0.to_string().contains("q_0"));
        let qzero = Walk::tabular(&[[1.0, 0.0, 0.0], [0.5, 0.5, 0.0]], [0.3, 0.4, 0.3]);
        assert!(qzero.is_err());
        assert!(Walk::constant(0.0, 0.5, 0.5).is_err());
    }

    #[test]
    fn renormalizes_within_tolerance() {
        let w = Walk::tabular(&[[0.6 + 5e-13, 0.4, 0.0]], [0.3, 0.4, 0.3]).unwrap();
        let t = w.triple(0);
        assert!((t.p + t.r + t.q - 1.0).abs() < 1e-15);
    }

    #[test]
    fn log_pi_values() {
        let w = Walk::constant(0.4, 0.4, 0.2).unwrap();
        assert_eq!(w.log_pi(0), 0.0);
        // pi_2 = p_0 p_1 / (q_1 q_2), p_0 = 0.4 / 0.8
        let expected = (0.5f64 * 0.4 / (0.2 * 0.2)).ln();
        assert!((w.log_pi(2) - expected).abs() < 1e-14);
        let sym = Walk::constant(0.3, 0.4, 0.3).unwrap();
        // p_0 = 3/7 so pi_n = (3/7)/0.3 for all n >= 1
        assert!((sym.log_pi(50) - (10.0f64 / 7.0).ln()).abs() < 1e-13);
    }

    #[test]
    fn log_pi_telescopes_past_cache() {
        let w = Walk::constant(0.4, 0.4, 0.2).unwrap();
        let direct: f64 = (0..300).map(|k| w.p(k).ln() - w.q(k + 1).ln()).sum();
        assert!((w.log_pi(300) - direct).abs() < 1e-10);
    }

    #[test]
    fn exact_strings() {
        let spec = WalkSpec::from_json(
            r#"{"family":"constant","tail":["3/10","2/5","0.3"],"label":"x"}"#,
        )
        .unwrap();
        let w = Walk::from_spec(&spec).unwrap();
        let exact = w.exact().expect("exact mode");
        assert_eq!(exact.row(0)[0], BigRational::new(3.into(), 7.into()));
        assert_eq!(exact.row(9)[2], BigRational::new(3.into(), 10.into()));
        assert!(Walk::constant(0.3, 0.4, 0.3).unwrap().exact().is_none());
    }

    #[test]
    fn parse_rational_forms() {
        assert_eq!(parse_rational("1/4").unwrap(), BigRational::new(1.into(), 4.into()));
        assert_eq!(parse_rational("0.25").unwrap(), BigRational::new(1.into(), 4.into()));
        assert_eq!(parse_rational("1").unwrap(), BigRational::one());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn rational_family() {
        let spec = WalkSpec::linear_rational(
            RationalFn { num: vec![0.5], den: vec![1.0] },
            RationalFn { num: vec![0.5], den: vec![1.0, 2.0, 1.0] },
        );
        let w = Walk::from_spec(&spec).unwrap();
        assert_eq!(w.q(0), 0.0);
        assert!((w.r(3) - 0.5 / 16.0).abs() < 1e-15);
        assert!((w.q(20_000) - (0.5 - 0.5 / (20_001.0f64).powi(2))).abs() < 1e-15);
        assert!(!w.is_periodic());
        assert_eq!(w.r_support_end(), None);
    }

    #[test]
    fn rational_family_rejects_bad_limits() {
        let spec = WalkSpec::linear_rational(
            RationalFn { num: vec![0.0, 1.0], den: vec![1.0] },
            RationalFn { num: vec![0.0], den: vec![1.0] },
        );
        assert!(Walk::from_spec(&spec).is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = WalkSpec::from_json(r#"{"family":"constant","tail":[0.3,0.4,0.3],"bogus":1}"#);
        assert!(err.is_err());
    }

    #[test]
    fn sampled_rows_sum_to_one() {
        let walks = [
            Walk::constant(0.3, 0.4, 0.3).unwrap(),
            Walk::constant(0.5, 0.0, 0.5).unwrap(),
            Walk::tabular(&[[0.25, 0.75, 0.0], [0.5, 0.1, 0.4]], [0.2, 0.4, 0.4]).unwrap(),
        ];
        for w in &walks {
            for j in (0..100_000).step_by(7) {
                let t = w.triple(j);
                assert!((t.p + t.q + t.r - 1.0).abs() <= 2.0 * f64::EPSILON);
                assert!(t.p > 0.0 && t.r >= 0.0);
                assert!(j == 0 || t.q > 0.0);
                if w.is_periodic() {
                    assert_eq!(t.r, 0.0);
                }
            }
            assert_eq!(w.q(0), 0.0);
        }
    }
}
