//! Walk corpus and independent reference computations shared by the
//! integration tests.

#![allow(dead_code)]

use std::sync::Arc;

use srlp_core::oracle::{n_step_exact_sequence, n_step_sequence, ResourceCap};
use srlp_core::theta::{example_44, standard_example_base};
use srlp_core::walk::{RationalFn, WalkSpec};
use srlp_core::{BirthDeath, Walk};

pub struct Entry {
    pub name: &'static str,
    pub walk: Arc<dyn BirthDeath>,
    /// Same walk as a `Walk`, when it has one (needed for exact powers).
    pub plain: Option<Walk>,
    /// Edge known in closed form.
    pub eta: Option<f64>,
}

fn rational_constant(p: &str, r: &str, q: &str, label: &str) -> Walk {
    let spec = format!(
        r#"{{"family":"constant","prefix":[],"tail":["{p}","{r}","{q}"],"label":"{label}"}}"#
    );
    Walk::from_json(&spec).expect("corpus spec")
}

fn entry(name: &'static str, walk: Walk, eta: Option<f64>) -> Entry {
    Entry {
        name,
        walk: Arc::new(walk.clone()),
        plain: Some(walk),
        eta,
    }
}

pub fn drift_up_eta() -> f64 {
    0.4 + 2.0 * 0.08f64.sqrt()
}

pub fn squares_walk() -> Walk {
    Walk::from_spec(
        &WalkSpec::linear_rational(
            RationalFn { num: vec![0.5], den: vec![1.0] },
            RationalFn { num: vec![0.5], den: vec![1.0, 2.0, 1.0] },
        )
        .with_label("hold 1/(2(j+1)^2)"),
    )
    .expect("corpus spec")
}

pub fn harmonic_walk() -> Walk {
    Walk::from_spec(
        &WalkSpec::linear_rational(
            RationalFn { num: vec![2.0, 3.0], den: vec![5.0, 5.0] },
            RationalFn { num: vec![1.0], den: vec![5.0, 5.0] },
        )
        .with_label("hold 1/(5j+5)"),
    )
    .expect("corpus spec")
}

pub fn lazy_origin_walk() -> Walk {
    let spec = r#"{"family":"tabular_with_constant_tail","prefix":[["3/10","7/10","0"]],"tail":["3/10","2/5","3/10"],"label":"lazy, p_0 = 3/10"}"#;
    Walk::from_json(spec).expect("corpus spec")
}

pub fn corpus() -> Vec<Entry> {
    let example = example_44(&standard_example_base(), 1.25).expect("standard example");
    vec![
        entry("periodic", rational_constant("1/2", "0", "1/2", "simple"), Some(1.0)),
        entry("lazy", rational_constant("3/10", "2/5", "3/10", "lazy symmetric"), Some(1.0)),
        entry("drift_up", rational_constant("2/5", "2/5", "1/5", "drift away"), Some(drift_up_eta())),
        entry("drift_down", rational_constant("1/5", "2/5", "2/5", "drift home"), Some(1.0)),
        entry("lazy_origin", lazy_origin_walk(), Some(1.0)),
        entry("squares", squares_walk(), Some(1.0)),
        entry("harmonic", harmonic_walk(), None),
        Entry {
            name: "example44",
            walk: Arc::new(example),
            plain: None,
            eta: Some(0.8),
        },
    ]
}

/// Largest zero of `Q_N` by bisection on "Q_n(x) > 0 for all n <= N",
/// using a plain recurrence (no Jacobi matrix, no Sturm counts).
pub fn largest_zero_by_sign(walk: &dyn BirthDeath, n: usize) -> f64 {
    let positive = |x: f64| {
        let (mut a, mut b) = (0.0f64, 1.0f64);
        for k in 0..n {
            let p = walk.p(k);
            let c = ((x - walk.r(k)) * b - walk.q(k) * a) / p;
            a = b;
            b = c;
            if !(b > 0.0) {
                return false;
            }
            let m = a.abs().max(b.abs());
            if m > 1e150 || m < 1e-150 {
                a /= m;
                b /= m;
            }
        }
        true
    };
    let (mut lo, mut hi) = (-1.0f64, 1.0f64 + 1e-9);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if positive(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `P_00(m)` for `m <= m_max`: exact rationals when the walk has them,
/// banded products otherwise.
pub fn p00_reference(entry: &Entry, m_max: usize) -> Vec<f64> {
    let cap = ResourceCap::default();
    match entry.plain.as_ref().filter(|w| w.exact().is_some()) {
        Some(w) => n_step_exact_sequence(w, 0, 0, m_max, cap)
            .expect("exact power")
            .iter()
            .map(|e| num_traits::ToPrimitive::to_f64(e).expect("finite"))
            .collect(),
        None => n_step_sequence(&*entry.walk, 0, 0, m_max, cap).expect("band power"),
    }
}

/// `integral x Q_n(x)^2 dpsi = r_n / pi_n`, from orthogonality and the
/// recurrence.
pub fn whitehurst_closed_form(walk: &dyn BirthDeath, n: usize) -> f64 {
    walk.r(n) * (-walk.log_pi(n)).exp()
}
