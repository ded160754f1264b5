//! The walk transformed at `theta >= eta`:
//! `p_j(theta) = Q_{j+1}(theta)/Q_j(theta) * p_j/theta`,
//! `r_j(theta) = r_j/theta`,
//! `q_{j+1}(theta) = Q_j(theta)/Q_{j+1}(theta) * q_{j+1}/theta`,
//! and the counterexample built from it on a recurrent base.

use std::sync::{Arc, RwLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::polynomials::{eval_q, log_q_positive, RatioExtender};
use crate::scaled::ScaledValue;
use crate::spectral::{estimate_eta, EtaEstimate};
use crate::srlp::{default_checkpoints, series_l, Verdict};
use crate::walk::{BirthDeath, Prob, Triple, Walk, WalkSpec};

/// Indices checked for `Q_j(theta) > 0` when a transform is built.
pub const VALIDATION_HORIZON: usize = (1 << 20) + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ThetaTransform,
    Example44,
}

#[derive(Debug)]
struct Memo {
    /// `Q_{j+1}(theta) / Q_j(theta)` of the base walk.
    ratios: Vec<f64>,
    extender: RatioExtender,
    /// `ln pi_n(theta)` accumulated from the transformed parameters.
    log_pi: Vec<f64>,
}

/// Transformed walk with lazily extended, memoized polynomial ratios.
///
/// Parameters are validated up to the construction horizon. Querying an
/// index past it where `Q_j(theta)` turns nonpositive panics.
pub struct TransformedWalk {
    base: Arc<dyn BirthDeath>,
    theta: f64,
    provenance: Provenance,
    label: String,
    eta_hint: Option<f64>,
    memo: RwLock<Memo>,
}

impl std::fmt::Debug for TransformedWalk {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransformedWalk")
            .field("label", &self.label)
            .field("theta", &self.theta)
            .field("provenance", &self.provenance)
            .finish()
    }
}

/// `X_theta` for `theta >= eta` of `walk`, checked to `VALIDATION_HORIZON`.
pub fn transform<W: BirthDeath + 'static>(walk: W, theta: f64) -> Result<TransformedWalk> {
    transform_with_horizon(Arc::new(walk), theta, VALIDATION_HORIZON)
}

pub fn transform_with_horizon(base: Arc<dyn BirthDeath>, theta: f64, horizon: usize) -> Result<TransformedWalk> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::DegenerateInput(format!("theta must be positive, got {theta}")));
    }
    let mut probe = RatioExtender::new(theta);
    for _ in 0..horizon {
        probe.next_ratio(&base)?;
    }
    let label = if base.label().is_empty() {
        format!("theta={theta}")
    } else {
        format!("{} @ theta={theta}", base.label())
    };
    let eta_hint = base.eta_hint().map(|h| h / theta);
    Ok(TransformedWalk {
        base,
        theta,
        provenance: Provenance::ThetaTransform,
        label,
        eta_hint,
        memo: RwLock::new(Memo {
            ratios: Vec::new(),
            extender: RatioExtender::new(theta),
            log_pi: vec![0.0],
        }),
    })
}

impl TransformedWalk {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn base(&self) -> &dyn BirthDeath {
        &*self.base
    }

    /// `rho_0..rho_j`, extending the memo when needed.
    fn with_ratios<T>(&self, j: usize, f: impl FnOnce(&[f64]) -> T) -> T {
        {
            let memo = self.memo.read().expect("memo lock");
            if j < memo.ratios.len() {
                return f(&memo.ratios);
            }
        }
        let mut memo = self.memo.write().expect("memo lock");
        let target = (j + 1).max(2 * memo.ratios.len()).max(64);
        while memo.ratios.len() < target {
            let rho = memo
                .extender
                .next_ratio(&self.base)
                .unwrap_or_else(|e| panic!("transformed walk queried past its valid range: {e}"));
            memo.ratios.push(rho);
        }
        f(&memo.ratios)
    }

    fn row(&self, j: usize, ratios: &[f64]) -> Triple {
        let b = self.base.triple(j);
        let r = b.r / self.theta;
        let q = if j == 0 { 0.0 } else { b.q / (self.theta * ratios[j - 1]) };
        // the unit row sum fixes p; it equals rho_j p_j / theta up to rounding
        Triple { p: (1.0 - r) - q, r, q }
    }

    /// `p_j(theta)` straight from the defining product.
    pub fn p_direct(&self, j: usize) -> f64 {
        self.with_ratios(j, |rho| rho[j] * self.base.p(j) / self.theta)
    }

    /// Tabular spec with `prefix_len` exact rows and the next row frozen
    /// as the tail, together with a warning that the tail is approximate.
    pub fn to_walk_spec(&self, prefix_len: usize) -> (WalkSpec, String) {
        let row = |j: usize| {
            let t = self.triple(j);
            [Prob::Number(t.p), Prob::Number(t.r), Prob::Number(t.q)]
        };
        let prefix: Vec<[Prob; 3]> = (0..prefix_len.max(1)).map(row).collect();
        let tail = row(prefix_len.max(1));
        let spec = WalkSpec {
            family: crate::walk::Family::TabularWithConstantTail,
            prefix,
            tail: Some(tail),
            params: None,
            label: self.label.clone(),
        };
        let warning = format!(
            "approximate tail: parameters past index {} are frozen at their value there",
            prefix_len.max(1)
        );
        (spec, warning)
    }
}

impl BirthDeath for TransformedWalk {
    fn p(&self, j: usize) -> f64 {
        self.triple(j).p
    }
    fn r(&self, j: usize) -> f64 {
        self.base.r(j) / self.theta
    }
    fn q(&self, j: usize) -> f64 {
        self.triple(j).q
    }
    fn triple(&self, j: usize) -> Triple {
        self.with_ratios(j, |rho| self.row(j, rho))
    }
    fn is_periodic(&self) -> bool {
        self.base.is_periodic()
    }
    fn r_support_end(&self) -> Option<usize> {
        self.base.r_support_end()
    }
    fn log_pi(&self, n: usize) -> f64 {
        {
            let memo = self.memo.read().expect("memo lock");
            if n < memo.log_pi.len() {
                return memo.log_pi[n];
            }
        }
        // rows first: triple() takes the lock itself
        let first = self.memo.read().expect("memo lock").log_pi.len() - 1;
        let rows: Vec<Triple> = (first..=n).map(|k| self.triple(k)).collect();
        let mut memo = self.memo.write().expect("memo lock");
        while memo.log_pi.len() <= n {
            let k = memo.log_pi.len() - 1;
            let value = memo.log_pi[k] + rows[k - first].p.ln() - rows[k + 1 - first].q.ln();
            memo.log_pi.push(value);
        }
        memo.log_pi[n]
    }
    fn eta_hint(&self) -> Option<f64> {
        self.eta_hint
    }
    fn label(&self) -> &str {
        &self.label
    }
}

/// Relative gap between `Q_n(x)` of the transformed walk and
/// `Q_n(theta x) / Q_n(theta)` of the base.
pub fn transformed_q_identity_residual(tw: &TransformedWalk, n: usize, x: f64) -> f64 {
    let lhs = eval_q(tw, n, x).get(n);
    let base = tw.base();
    let rhs = eval_q(base, n, tw.theta * x).get(n) / eval_q(base, n, tw.theta).get(n);
    relative_gap(lhs, rhs)
}

/// Relative gap between `pi_n(theta)` from the transformed parameters and
/// `pi_n Q_n(theta)^2` from the base.
pub fn transformed_pi_identity_residual(tw: &TransformedWalk, n: usize) -> f64 {
    let lhs = tw.log_pi(n);
    let log_q = log_q_positive(tw.base(), n, tw.theta).expect("theta validated at construction");
    let rhs = tw.base().log_pi(n) + 2.0 * log_q[n];
    (lhs - rhs).exp_m1().abs()
}

fn relative_gap(a: ScaledValue, b: ScaledValue) -> f64 {
    if a.is_zero() && b.is_zero() {
        return 0.0;
    }
    let scale = if a.abs().cmp_value(&b.abs()).is_ge() { a.abs() } else { b.abs() };
    ((a - b).abs() / scale).to_f64()
}

/// Edge of the transformed walk, estimated from its own truncations.
pub fn eta_of_transform(tw: &TransformedWalk, tol: f64, n0: usize, n_max: usize) -> Result<EtaEstimate> {
    estimate_eta(tw, tol, n0, n_max)
}

/// Transform at `alpha > 1` of a recurrent base with `r_0 > 0` and
/// `r_j = 0` for `j > 0`. The result has `eta = 1/alpha`, is transient, and
/// its `M(eta)` series diverges while `M1` converges.
pub fn example_44(base: &WalkSpec, alpha: f64) -> Result<TransformedWalk> {
    let walk = Walk::from_spec(base)?;
    if !(walk.r(0) > 0.0) {
        return Err(Error::InvalidBase("base needs r_0 > 0".to_string()));
    }
    if walk.r_support_end() != Some(1) {
        return Err(Error::InvalidBase(
            "base needs r_j = 0 for every j > 0".to_string(),
        ));
    }
    let recurrence = series_l(&walk, &default_checkpoints())?;
    if recurrence.verdict != Verdict::Diverges {
        return Err(Error::InvalidBase(format!(
            "base must be recurrent; L verdict is {}: {}",
            recurrence.verdict.as_str(),
            recurrence.evidence
        )));
    }
    if !(alpha > 1.0) {
        return Err(Error::ThetaBelowEta { theta: alpha, index: 0 });
    }
    let base_label = walk.label().to_string();
    let mut tw = transform_with_horizon(Arc::new(walk), alpha, VALIDATION_HORIZON)?;
    tw.provenance = Provenance::Example44;
    // a recurrent base has eta = 1
    tw.eta_hint = Some(1.0 / alpha);
    tw.label = if base_label.is_empty() {
        format!("example44 alpha={alpha}")
    } else {
        format!("example44({base_label}) alpha={alpha}")
    };
    Ok(tw)
}

/// Base used for the standard instance: `p_0 = r_0 = 1/2`, then a simple
/// symmetric walk.
pub fn standard_example_base() -> WalkSpec {
    WalkSpec::tabular(&[[0.5, 0.5, 0.0]], [0.5, 0.0, 0.5]).with_label("lazy-origin simple walk")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polynomials::{q_at_minus_one, q_ratio_sequence};
    use crate::spectral::{DEFAULT_ETA_TOL, DEFAULT_N0, DEFAULT_NMAX};
    use crate::srlp::{series_m1, series_m_theta};

    const HORIZON: usize = 20_000;

    fn tw(walk: Walk, theta: f64) -> Result<TransformedWalk> {
        transform_with_horizon(Arc::new(walk), theta, HORIZON)
    }

    fn drift_up() -> Walk {
        Walk::constant(0.4, 0.4, 0.2).unwrap()
    }

    #[test]
    fn identity_at_one() {
        let w = Walk::tabular(&[[0.6, 0.4, 0.0], [0.2, 0.3, 0.5]], [0.3, 0.4, 0.3]).unwrap();
        let t = tw(w.clone(), 1.0).unwrap();
        for j in 0..200 {
            assert!((t.p(j) - w.p(j)).abs() <= 1e-14);
            assert!((t.q(j) - w.q(j)).abs() <= 1e-14);
            assert_eq!(t.r(j), w.r(j));
        }
        assert_eq!(t.provenance(), Provenance::ThetaTransform);
    }

    #[test]
    fn rows_and_positivity() {
        let t = tw(drift_up(), 0.97).unwrap();
        for j in 0..=10_000 {
            let row = t.triple(j);
            assert!(row.p > 0.0 && row.r >= 0.0);
            assert!(j == 0 || row.q > 0.0);
            assert!((row.p + row.r + row.q - 1.0).abs() <= 1e-12);
            assert_eq!(row.r, drift_up().r(j) / 0.97);
            assert!((row.p - t.p_direct(j)).abs() <= 1e-12);
        }
    }

    #[test]
    fn below_eta_rejected() {
        assert!(matches!(tw(drift_up(), 0.9), Err(Error::ThetaBelowEta { .. })));
        // drift toward the origin has eta = 1 from the atom at 1
        let down = Walk::constant(0.2, 0.4, 0.4).unwrap();
        assert!(matches!(tw(down, 0.97), Err(Error::ThetaBelowEta { .. })));
        assert!(tw(drift_up(), 0.0).is_err());
    }

    #[test]
    fn periodicity_preserved() {
        let w = Walk::constant(0.5, 0.0, 0.5).unwrap();
        let t = tw(w, 1.0).unwrap();
        assert!(t.is_periodic());
        assert!((0..100).all(|j| t.r(j) == 0.0));
    }

    #[test]
    fn q_identity() {
        let t = tw(drift_up(), 0.97).unwrap();
        assert_eq!(transformed_q_identity_residual(&t, 0, 0.3), 0.0);
        assert!(transformed_q_identity_residual(&t, 40, 1.0) <= 1e-12);
        for x in [-1.0, -0.5, 0.2, 0.9] {
            assert!(transformed_q_identity_residual(&t, 50, x) <= 1e-9);
        }
    }

    #[test]
    fn pi_identity() {
        let eta = 0.4 + 2.0 * 0.08f64.sqrt();
        let t = tw(drift_up(), eta + 1e-7).unwrap();
        assert_eq!(transformed_pi_identity_residual(&t, 0), 0.0);
        assert!(transformed_pi_identity_residual(&t, 200) <= 1e-9);
        let one = tw(drift_up(), 1.0).unwrap();
        for n in [1, 10, 100] {
            assert!(transformed_pi_identity_residual(&one, n) <= 1e-12);
        }
    }

    #[test]
    fn ratio_at_theta_through_transform() {
        let theta = 0.97;
        let t = tw(drift_up(), theta).unwrap();
        let ratios = q_ratio_sequence(&drift_up(), theta, 2000).unwrap();
        let qb = q_at_minus_one(&t, 2000);
        for n in 0..=2000 {
            let rhs = qb[n].recip().to_f64();
            assert!((ratios[n] - rhs).abs() <= 1e-9 * rhs.max(f64::MIN_POSITIVE), "n={n}");
        }
    }

    #[test]
    fn p_increases_with_theta() {
        let eta = 0.4 + 2.0 * 0.08f64.sqrt();
        let a = tw(drift_up(), eta + 1e-6).unwrap();
        let b = tw(drift_up(), 0.99).unwrap();
        for j in (0..5000).step_by(37) {
            assert!(a.p_direct(j) < b.p_direct(j));
        }
    }

    #[test]
    fn eta_scales() {
        let eta = 0.4 + 2.0 * 0.08f64.sqrt();
        let t = tw(drift_up(), 0.97).unwrap();
        let est = eta_of_transform(&t, DEFAULT_ETA_TOL, DEFAULT_N0, DEFAULT_NMAX).unwrap();
        assert!((est.value - eta / 0.97).abs() < 1e-6, "{est:?}");
    }

    #[test]
    fn example_standard_instance() {
        let ex = example_44(&standard_example_base(), 1.25).unwrap();
        assert_eq!(ex.provenance(), Provenance::Example44);
        assert_eq!(ex.eta_hint(), Some(0.8));
        let grid: Vec<usize> = (6..=16).map(|k| 1usize << k).collect();
        let m1 = series_m1(&ex, &grid).unwrap();
        assert_eq!(m1.verdict, Verdict::Converges, "{m1:?}");
        let mt = series_m_theta(&ex, 0.8, &grid).unwrap();
        assert_eq!(mt.verdict, Verdict::Diverges, "{mt:?}");
    }

    #[test]
    fn example_rejections() {
        let no_hold = WalkSpec::tabular(&[[1.0, 0.0, 0.0]], [0.5, 0.0, 0.5]);
        assert!(matches!(example_44(&no_hold, 1.25), Err(Error::InvalidBase(_))));
        let holds_later = WalkSpec::tabular(&[[0.5, 0.5, 0.0]], [0.3, 0.4, 0.3]);
        assert!(matches!(example_44(&holds_later, 1.25), Err(Error::InvalidBase(_))));
        let transient = WalkSpec::tabular(&[[0.5, 0.5, 0.0]], [0.6, 0.0, 0.4]);
        assert!(matches!(example_44(&transient, 1.25), Err(Error::InvalidBase(_))));
        assert!(matches!(
            example_44(&standard_example_base(), 1.0),
            Err(Error::ThetaBelowEta { .. })
        ));
    }

    #[test]
    fn export_round_trip() {
        let t = tw(drift_up(), 0.97).unwrap();
        let (spec, warning) = t.to_walk_spec(50);
        assert!(warning.contains("approximate"));
        let back = Walk::from_spec(&spec).unwrap();
        for j in 0..50 {
            assert!((back.p(j) - t.p(j)).abs() <= 1e-15);
            assert!((back.q(j) - t.q(j)).abs() <= 1e-15);
        }
    }
}
