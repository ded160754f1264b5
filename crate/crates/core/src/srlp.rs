//! Series criteria for the strong ratio limit property and the combined
//! diagnosis.
//!
//! Every series has nonnegative terms. Partial sums are recorded at
//! checkpoints and a verdict is only issued with explicit evidence:
//! a certified tail bound for convergence, sustained growth over the last
//! three doublings for divergence, inconclusive otherwise.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::oracle::ResourceCap;
use crate::polynomials::{q_ratio_sequence, RatioExtender};
use crate::scaled::BinaryScaled;
use crate::spectral::{
    c_n_sequence, estimate_eta, quadrature_measure_with, EtaEstimate, DEFAULT_ETA_TOL, DEFAULT_N0,
    DEFAULT_NMAX,
};
use crate::walk::BirthDeath;

pub const SCHEMA_VERSION: u32 = 1;

/// Minimum increment per doubling counted as growth.
const GROWTH_FLOOR: f64 = 1e-6;
/// Each increment must be at least this fraction of the previous one.
const GROWTH_RATIO: f64 = 0.1;
/// Geometric tail bounds must be below this fraction of the partial sum.
const TAIL_FRACTION: f64 = 1e-9;
/// Smallest fitted power-law exponent accepted as a convergence certificate.
const MIN_POWER: f64 = 1.05;

/// `2^6, 2^7, ..., 2^20`.
pub fn default_checkpoints() -> Vec<usize> {
    (6..=20).map(|k| 1usize << k).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum SeriesName {
    M1,
    L,
    #[serde(rename = "L_eta")]
    LEta,
    #[serde(rename = "R_over_P")]
    ROverP,
    #[serde(rename = "M_theta")]
    MTheta,
}

impl SeriesName {
    pub const ALL: [SeriesName; 5] = [
        SeriesName::M1,
        SeriesName::L,
        SeriesName::LEta,
        SeriesName::ROverP,
        SeriesName::MTheta,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SeriesName::M1 => "M1",
            SeriesName::L => "L",
            SeriesName::LEta => "L_eta",
            SeriesName::ROverP => "R_over_P",
            SeriesName::MTheta => "M_theta",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Diverges,
    Converges,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Diverges => "diverges",
            Verdict::Converges => "converges",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checkpoint {
    /// Number of terms summed.
    pub n: usize,
    /// `inf` when the sum leaves the double range; see `log_partial_sum`.
    pub partial_sum: f64,
    pub log_partial_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesReport {
    pub name: SeriesName,
    pub theta: Option<f64>,
    pub checkpoints: Vec<Checkpoint>,
    pub verdict: Verdict,
    pub evidence: String,
}

impl SeriesReport {
    pub fn partial_sum_at(&self, n: usize) -> Option<f64> {
        self.checkpoints.iter().find(|c| c.n == n).map(|c| c.partial_sum)
    }

    pub fn last_partial_sum(&self) -> Option<f64> {
        self.checkpoints.last().map(|c| c.partial_sum)
    }

    fn failed(name: SeriesName, theta: Option<f64>, err: &Error) -> SeriesReport {
        SeriesReport {
            name,
            theta,
            checkpoints: Vec::new(),
            verdict: Verdict::Inconclusive,
            evidence: format!("not evaluated: {err}"),
        }
    }
}

fn check_grid(checkpoints: &[usize]) -> Result<()> {
    if checkpoints.is_empty() || checkpoints[0] == 0 || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::DegenerateInput(
            "checkpoints must be a nonempty strictly ascending list of positive counts".to_string(),
        ));
    }
    Ok(())
}

/// Partial sums of `terms(0), terms(1), ...` at the checkpoints, plus the
/// verdict. `zero_from` marks an index past which every term is exactly 0.
fn evaluate<F>(
    name: SeriesName,
    theta: Option<f64>,
    checkpoints: &[usize],
    zero_from: Option<usize>,
    mut terms: F,
) -> Result<SeriesReport>
where
    F: FnMut(usize) -> Result<BinaryScaled>,
{
    check_grid(checkpoints)?;
    let last = *checkpoints.last().expect("nonempty");
    let window_start = if checkpoints.len() >= 2 { checkpoints[checkpoints.len() - 2] } else { 0 };

    let mut sum = BinaryScaled::ZERO;
    let mut window = BinaryScaled::ZERO;
    let mut sums = Vec::with_capacity(checkpoints.len());
    let mut windows = Vec::with_capacity(checkpoints.len());
    // ln of the final term of each checkpoint block
    let mut last_terms = Vec::with_capacity(checkpoints.len());
    // ln of every term in the final block
    let mut tail_terms = Vec::with_capacity(last - window_start);
    let mut next = 0;
    for j in 0..last {
        let t = terms(j)?;
        sum = sum + t;
        window = window + t;
        let lt = if t.is_zero() { f64::NEG_INFINITY } else { t.ln() };
        if j >= window_start {
            tail_terms.push(lt);
        }
        if j + 1 == checkpoints[next] {
            sums.push(sum);
            windows.push(window);
            last_terms.push(lt);
            window = BinaryScaled::ZERO;
            next += 1;
        }
    }

    let points = checkpoints
        .iter()
        .zip(&sums)
        .map(|(&n, s)| Checkpoint {
            n,
            partial_sum: s.to_f64(),
            log_partial_sum: if s.is_zero() { f64::NEG_INFINITY } else { s.ln() },
        })
        .collect();
    let (verdict, evidence) = judge(checkpoints, &sums, &windows, &last_terms, &tail_terms, window_start, zero_from);
    Ok(SeriesReport {
        name,
        theta,
        checkpoints: points,
        verdict,
        evidence,
    })
}

fn judge(
    checkpoints: &[usize],
    sums: &[BinaryScaled],
    windows: &[BinaryScaled],
    last_terms: &[f64],
    tail_terms: &[f64],
    window_start: usize,
    zero_from: Option<usize>,
) -> (Verdict, String) {
    let m = checkpoints.len();
    let last = checkpoints[m - 1];
    let total = sums[m - 1];

    if let Some(z) = zero_from {
        if z <= last {
            return (
                Verdict::Converges,
                format!("all terms vanish from index {z}; sum is exact"),
            );
        }
    }

    if m >= 2 && !tail_terms.is_empty() {
        if let Some(text) = geometric_certificate(tail_terms, window_start, total) {
            return (Verdict::Converges, text);
        }
    }
    if m >= 3 {
        if let Some(text) = power_certificate(checkpoints, last_terms, tail_terms, window_start, total) {
            return (Verdict::Converges, text);
        }
    }

    if m >= 5 {
        let increments: Vec<&BinaryScaled> = windows[m - 4..].iter().collect();
        let sustained = (1..4).all(|k| {
            let (prev, cur) = (increments[k - 1], increments[k]);
            let floor_ok = !cur.is_zero() && cur.ln() >= GROWTH_FLOOR.ln();
            let ratio_ok = prev.is_zero() || (!cur.is_zero() && cur.ratio(*prev) >= GROWTH_RATIO);
            floor_ok && ratio_ok
        });
        let mut text = String::from("increments over the last doublings:");
        for w in &increments[1..] {
            let _ = write!(text, " {:.3e}", w.to_f64());
        }
        if sustained {
            text.push_str("; each at least 0.1 of the previous and above 1e-6");
            return (Verdict::Diverges, text);
        }
        text.push_str("; growth not sustained and no tail bound");
        return (Verdict::Inconclusive, text);
    }
    (
        Verdict::Inconclusive,
        format!("{m} checkpoints are too few to judge"),
    )
}

/// Tail bound `t_last * rho / (1 - rho)` with `rho` the largest term ratio
/// in the final block.
fn geometric_certificate(tail_terms: &[f64], window_start: usize, total: BinaryScaled) -> Option<String> {
    let mut log_rho = f64::NEG_INFINITY;
    for pair in tail_terms.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b == f64::NEG_INFINITY {
            continue;
        }
        if a == f64::NEG_INFINITY {
            return None;
        }
        log_rho = log_rho.max(b - a);
    }
    let rho = log_rho.exp();
    let t_last = *tail_terms.last()?;
    if !(rho < 1.0) || t_last == f64::NEG_INFINITY || total.is_zero() {
        return None;
    }
    let log_tail = t_last + rho.ln() - (1.0 - rho).ln();
    let log_rel = log_tail - total.ln();
    if log_rel < TAIL_FRACTION.ln() {
        let end = window_start + tail_terms.len();
        Some(format!(
            "term ratio <= {rho:.6e} on [{window_start}, {end}); tail <= {:.3e} of the partial sum",
            log_rel.exp()
        ))
    } else {
        None
    }
}

/// Integral comparison against `C (j + 1)^-s`, with `s` fitted on the last
/// two blocks and the envelope checked on the final one.
fn power_certificate(
    checkpoints: &[usize],
    last_terms: &[f64],
    tail_terms: &[f64],
    window_start: usize,
    total: BinaryScaled,
) -> Option<String> {
    let m = checkpoints.len();
    if last_terms[m - 3..].contains(&f64::NEG_INFINITY) || total.is_zero() {
        return None;
    }
    let slope = |a: usize, b: usize| {
        -(last_terms[b] - last_terms[a]) / ((checkpoints[b] as f64).ln() - (checkpoints[a] as f64).ln())
    };
    let s1 = slope(m - 3, m - 2);
    let s2 = slope(m - 2, m - 1);
    if !(s1 >= MIN_POWER && s2 >= MIN_POWER) || (s1 - s2).abs() > 0.05 * s1.max(s2) {
        return None;
    }
    let s = s1.min(s2);
    // g_j = ln t_j + s ln(j + 1) must not increase across the final block
    let mut prev = f64::INFINITY;
    for (offset, &lt) in tail_terms.iter().enumerate() {
        if lt == f64::NEG_INFINITY {
            continue;
        }
        let g = lt + s * ((window_start + offset + 1) as f64).ln();
        if g > prev + 1e-9 * prev.abs().max(1.0) {
            return None;
        }
        prev = g;
    }
    let last = checkpoints[m - 1] as f64;
    let log_tail = last_terms[m - 1] + last.ln() - (s - 1.0).ln();
    Some(format!(
        "terms decay like (j+1)^-{s:.4} (fits {s1:.4}, {s2:.4}); tail <= {:.3e} of the partial sum",
        (log_tail - total.ln()).exp()
    ))
}

/// `sum_j 1/(p_j pi_j) sum_{k<=j} r_k pi_k`.
pub fn series_m1<W: BirthDeath + ?Sized>(walk: &W, checkpoints: &[usize]) -> Result<SeriesReport> {
    // s_j = sum_{k<=j} r_k pi_k / pi_j
    let mut s = BinaryScaled::ZERO;
    let zero_from = walk.is_periodic().then_some(0);
    evaluate(SeriesName::M1, None, checkpoints, zero_from, |j| {
        let t = walk.triple(j);
        if j > 0 {
            s = s.scale(t.q / walk.p(j - 1));
        }
        s = s + BinaryScaled::from_f64(t.r);
        Ok(s.scale(1.0 / t.p))
    })
}

/// `L = sum_j 1/(p_j pi_j)`.
pub fn series_l<W: BirthDeath + ?Sized>(walk: &W, checkpoints: &[usize]) -> Result<SeriesReport> {
    let mut u = BinaryScaled::ZERO;
    evaluate(SeriesName::L, None, checkpoints, None, |j| {
        let t = walk.triple(j);
        u = if j == 0 {
            BinaryScaled::from_f64(1.0 / t.p)
        } else {
            u.scale(t.q / t.p)
        };
        Ok(u)
    })
}

/// `L(eta) = sum_j 1/(p_j pi_j Q_j(eta) Q_{j+1}(eta))`.
///
/// The evidence also states whether every partial sum dominates that of `L`.
pub fn series_l_eta<W: BirthDeath + ?Sized>(walk: &W, eta: f64, checkpoints: &[usize]) -> Result<SeriesReport> {
    let mut ratios = RatioExtender::new(eta);
    let mut v = BinaryScaled::ZERO;
    let mut prev_rho = 1.0;
    let mut report = evaluate(SeriesName::LEta, Some(eta), checkpoints, None, |j| {
        let t = walk.triple(j);
        let rho = ratios.next_ratio(walk)?;
        v = if j == 0 {
            BinaryScaled::from_f64(1.0 / (t.p * rho))
        } else {
            v.scale(t.q / (t.p * prev_rho * rho))
        };
        prev_rho = rho;
        Ok(v)
    })?;
    let plain = series_l(walk, checkpoints)?;
    let dominates = report
        .checkpoints
        .iter()
        .zip(&plain.checkpoints)
        .all(|(a, b)| a.log_partial_sum >= b.log_partial_sum - 1e-12 * b.log_partial_sum.abs().max(1.0));
    let _ = write!(
        report.evidence,
        "; L(eta) >= L at every checkpoint: {dominates}"
    );
    Ok(report)
}

/// `sum_j r_j / p_j`.
pub fn series_r_over_p<W: BirthDeath + ?Sized>(walk: &W, checkpoints: &[usize]) -> Result<SeriesReport> {
    evaluate(SeriesName::ROverP, None, checkpoints, walk.r_support_end(), |j| {
        let t = walk.triple(j);
        Ok(BinaryScaled::from_f64(t.r / t.p))
    })
}

/// `M(theta)`, the `M1` series of the walk transformed at `theta`, written in
/// the original parameters:
/// `term_j = sum_{k<=j} r_k pi_k Q_k(theta)^2 / (p_j pi_j Q_j(theta) Q_{j+1}(theta))`.
pub fn series_m_theta<W: BirthDeath + ?Sized>(walk: &W, theta: f64, checkpoints: &[usize]) -> Result<SeriesReport> {
    let mut ratios = RatioExtender::new(theta);
    // s_j = sum_{k<=j} r_k pi_k Q_k^2 / (pi_j Q_j^2)
    let mut s = BinaryScaled::ZERO;
    let mut prev_rho = 1.0;
    let zero_from = walk.is_periodic().then_some(0);
    evaluate(SeriesName::MTheta, Some(theta), checkpoints, zero_from, |j| {
        let t = walk.triple(j);
        let rho = ratios.next_ratio(walk)?;
        if j > 0 {
            s = s.scale(t.q / (walk.p(j - 1) * prev_rho * prev_rho));
        }
        s = s + BinaryScaled::from_f64(t.r);
        prev_rho = rho;
        Ok(s.scale(1.0 / (t.p * rho)))
    })
}

/// Eight evenly spaced points in `[eta, 1]`, or just `1` when `eta = 1`.
pub fn theta_grid(eta: f64) -> Vec<f64> {
    if eta >= 1.0 {
        return vec![1.0];
    }
    (0..8).map(|i| if i == 7 { 1.0 } else { eta + (1.0 - eta) * i as f64 / 7.0 }).collect()
}

/// `M(theta)` at each grid point.
pub fn theta_sweep<W: BirthDeath + ?Sized>(
    walk: &W,
    thetas: &[f64],
    checkpoints: &[usize],
    exec: Execution,
) -> Result<Vec<SeriesReport>> {
    exec.map_slice(thetas, |&theta| series_m_theta(walk, theta, checkpoints))
        .into_iter()
        .collect()
}

// ---------------------------------------------------------------------------
// Diagnosis

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SrlpVerdict {
    SrlpEstablished,
    SrlpFailsPeriodic,
    Inconclusive,
}

impl SrlpVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            SrlpVerdict::SrlpEstablished => "srlp_established",
            SrlpVerdict::SrlpFailsPeriodic => "srlp_fails_periodic",
            SrlpVerdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnoseConfig {
    pub eta_tol: f64,
    pub n0: usize,
    pub n_max: usize,
    pub checkpoints: Vec<usize>,
    pub quadrature_order: usize,
    pub c_n_tail_len: usize,
    pub q_ratio_n: usize,
    pub cap: ResourceCap,
    pub exec: Execution,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        DiagnoseConfig {
            eta_tol: DEFAULT_ETA_TOL,
            n0: DEFAULT_N0,
            n_max: DEFAULT_NMAX,
            checkpoints: default_checkpoints(),
            quadrature_order: 60,
            c_n_tail_len: 8,
            q_ratio_n: 10_000,
            cap: ResourceCap::default(),
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SrlpReport {
    pub schema_version: u32,
    pub label: String,
    pub eta: EtaEstimate,
    /// Point at which the eta-dependent criteria were evaluated.
    pub theta_eta: Option<f64>,
    pub periodic: bool,
    pub criteria: Vec<SeriesReport>,
    /// `|Q_n(eta)/Q_n(-eta)|` at `n = q_ratio_n`.
    pub q_ratio_limit_estimate: Option<f64>,
    pub quadrature_order: usize,
    /// `C_n` for the last `c_n_tail_len` exactly integrated `n`.
    pub c_n_tail: Vec<f64>,
    pub c_n_first_index: usize,
    pub verdict: SrlpVerdict,
    pub reasons: Vec<String>,
    pub resource_limited: bool,
}

impl SrlpReport {
    pub fn criterion(&self, name: SeriesName) -> Option<&SeriesReport> {
        self.criteria.iter().find(|c| c.name == name)
    }
}

/// Picks a point at or just above eta where `Q_n` stays positive for every
/// index the criteria touch. Tries the walk's known edge first, then the
/// estimate plus a margin that grows tenfold on failure. Never exceeds 1.
pub fn eta_evaluation_point<W: BirthDeath + ?Sized>(walk: &W, est: &EtaEstimate, horizon: usize) -> Result<f64> {
    let positive = |theta: f64| -> Result<f64> {
        let mut ext = RatioExtender::new(theta);
        for _ in 0..horizon {
            ext.next_ratio(walk)?;
        }
        Ok(theta)
    };
    if let Some(hint) = walk.eta_hint() {
        if let Ok(theta) = positive(hint) {
            return Ok(theta);
        }
    }
    let mut margin = est.tol;
    let mut last_err = None;
    for _ in 0..4 {
        let theta = (est.value + margin).min(1.0);
        match positive(theta) {
            Ok(t) => return Ok(t),
            Err(e) => last_err = Some(e),
        }
        margin *= 10.0;
    }
    Err(last_err.expect("at least one attempt"))
}

pub fn diagnose<W: BirthDeath + ?Sized>(walk: &W, config: &DiagnoseConfig) -> SrlpReport {
    let exec = config.exec;
    let periodic = walk.is_periodic();
    let mut reasons = Vec::new();
    let mut resource_limited = false;
    let mut blocked = false;

    let eta = match estimate_eta(walk, config.eta_tol, config.n0, config.n_max) {
        Ok(e) => e,
        Err(Error::NotConverged(partial)) => {
            reasons.push(format!("eta: {}", Error::NotConverged(partial.clone())));
            blocked = true;
            *partial
        }
        Err(e) => {
            reasons.push(format!("eta: {e}"));
            blocked = true;
            EtaEstimate {
                value: f64::NAN,
                truncation_orders: Vec::new(),
                largest_zeros: Vec::new(),
                converged: false,
                extrapolated: false,
                tol: config.eta_tol,
            }
        }
    };

    let checkpoints = &config.checkpoints;
    let horizon = checkpoints.last().copied().unwrap_or(0).max(config.q_ratio_n);
    let budget = 5 * horizon as u64;
    let series_gate = if budget > config.cap.ops {
        Err(Error::ResourceLimit {
            what: "series terms",
            needed: budget,
            cap: config.cap.ops,
        })
    } else {
        Ok(())
    };
    if let Err(e) = &series_gate {
        resource_limited = true;
        blocked = true;
        reasons.push(format!("series: {e}"));
    }

    let theta = if eta.converged && series_gate.is_ok() {
        match eta_evaluation_point(walk, &eta, horizon) {
            Ok(t) => Some(t),
            Err(e) => {
                reasons.push(format!("eta-dependent criteria: {e}"));
                None
            }
        }
    } else {
        None
    };

    let run = |name: SeriesName| -> SeriesReport {
        if let Err(e) = &series_gate {
            return SeriesReport::failed(name, None, e);
        }
        let result = match name {
            SeriesName::M1 => series_m1(walk, checkpoints),
            SeriesName::L => series_l(walk, checkpoints),
            SeriesName::ROverP => series_r_over_p(walk, checkpoints),
            SeriesName::LEta | SeriesName::MTheta => match theta {
                None => {
                    return SeriesReport {
                        name,
                        theta: None,
                        checkpoints: Vec::new(),
                        verdict: Verdict::Inconclusive,
                        evidence: "not evaluated: no usable estimate of eta".to_string(),
                    }
                }
                Some(t) if name == SeriesName::LEta => series_l_eta(walk, t, checkpoints),
                Some(t) => series_m_theta(walk, t, checkpoints),
            },
        };
        result.unwrap_or_else(|e| SeriesReport::failed(name, theta, &e))
    };

    let ((criteria, q_ratio), (quadrature, c_n)) = exec.join(
        || {
            exec.join(
                || exec.map_slice(&SeriesName::ALL, |&name| run(name)),
                || {
                    theta.and_then(|t| {
                        q_ratio_sequence(walk, t, config.q_ratio_n)
                            .ok()
                            .and_then(|v| v.last().copied())
                    })
                },
            )
        },
        || {
            let order = config.quadrature_order;
            match quadrature_measure_with(walk, order, exec) {
                Ok(m) => {
                    let top = m.exactness_degree;
                    let seq = c_n_sequence(&m, top);
                    let first = (top + 1).saturating_sub(config.c_n_tail_len);
                    (Ok(first), seq[first..].to_vec())
                }
                Err(e) => (Err(e), Vec::new()),
            }
        },
    );
    let c_n_first_index = match quadrature {
        Ok(i) => i,
        Err(e) => {
            reasons.push(format!("quadrature: {e}"));
            0
        }
    };

    let verdict = if periodic {
        reasons.insert(0, "periodic".to_string());
        SrlpVerdict::SrlpFailsPeriodic
    } else if blocked {
        SrlpVerdict::Inconclusive
    } else {
        let sufficient: Vec<String> = criteria
            .iter()
            .filter(|c| c.verdict == Verdict::Diverges)
            .map(|c| c.name.as_str().to_string())
            .collect();
        if sufficient.is_empty() {
            reasons.push("no sufficient criterion diverges".to_string());
            SrlpVerdict::Inconclusive
        } else {
            reasons.splice(0..0, sufficient);
            SrlpVerdict::SrlpEstablished
        }
    };

    SrlpReport {
        schema_version: SCHEMA_VERSION,
        label: walk.label().to_string(),
        eta,
        theta_eta: theta,
        periodic,
        criteria,
        q_ratio_limit_estimate: q_ratio,
        quadrature_order: config.quadrature_order,
        c_n_tail: c_n,
        c_n_first_index,
        verdict,
        reasons,
        resource_limited,
    }
}
