use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use srlp_core::oracle::{default_ratio_grid, n_step_exact, n_step_with, ratio_trace};
use srlp_core::spectral::quadrature_measure;
use srlp_core::srlp::{default_checkpoints, series_m1, series_m_theta};
use srlp_core::theta::{
    standard_example_base, transformed_pi_identity_residual, transformed_q_identity_residual, VALIDATION_HORIZON,
};
use srlp_core::{
    diagnose as run_diagnose, estimate_eta, eval_q, example_44, transform as theta_transform, BirthDeath,
    DiagnoseConfig, Error, EtaEstimate, Walk,
};

use crate::output::{num, opt, Report};
use crate::Global;

const SHOWN_ROWS: usize = 11;
const SAMPLES: usize = 256;

type Outcome = (Report, u8);

fn load_walk(g: &Global) -> Result<Walk> {
    Ok(Walk::from_spec(&g.require_spec()?)?)
}

fn shown_label(label: &str) -> &str {
    if label.is_empty() {
        "(unlabeled)"
    } else {
        label
    }
}

fn rows_json<W: BirthDeath + ?Sized>(walk: &W) -> Value {
    (0..SHOWN_ROWS)
        .map(|j| {
            let t = walk.triple(j);
            json!({"j": j, "p": t.p, "r": t.r, "q": t.q})
        })
        .collect()
}

fn push_rows<W: BirthDeath + ?Sized>(report: &mut Report, walk: &W) {
    for j in 0..SHOWN_ROWS {
        let t = walk.triple(j);
        report.row(vec![j.to_string(), num(t.p), num(t.r), num(t.q)]);
    }
}

/// Row checks at seeded random indices in `[SHOWN_ROWS, limit)`.
fn sampled_rows<W: BirthDeath + ?Sized>(walk: &W, seed: u64, limit: usize) -> Value {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut max_err, mut min_p, mut min_q) = (0.0f64, f64::INFINITY, f64::INFINITY);
    for _ in 0..SAMPLES {
        let j = rng.random_range(SHOWN_ROWS..limit);
        let t = walk.triple(j);
        max_err = max_err.max((t.p + t.r + t.q - 1.0).abs());
        min_p = min_p.min(t.p);
        min_q = min_q.min(t.q);
    }
    json!({
        "seed": seed,
        "count": SAMPLES,
        "index_limit": limit,
        "max_row_sum_error": max_err,
        "min_p": min_p,
        "min_q": min_q,
    })
}

pub fn validate(g: &Global) -> Result<Outcome> {
    let spec = g.require_spec()?;
    let walk = Walk::from_spec(&spec)?;
    let sampled = sampled_rows(&walk, g.seed, 1 << 20);
    let mut report = Report::new(
        json!({
            "label": walk.label(),
            "family": serde_json::to_value(spec.family)?,
            "periodic": walk.is_periodic(),
            "exact": walk.exact().is_some(),
            "rows": rows_json(&walk),
            "sampled": sampled.clone(),
        }),
        &["j", "p", "r", "q"],
    );
    report.note(format!("label: {}", shown_label(walk.label())));
    report.note(format!("periodic: {}", walk.is_periodic()));
    report.note(format!("exact arithmetic: {}", walk.exact().is_some()));
    report.note(format!(
        "sampled rows (seed {}): max |p+r+q-1| = {}",
        g.seed,
        num(sampled["max_row_sum_error"].as_f64().unwrap_or(f64::NAN))
    ));
    push_rows(&mut report, &walk);
    Ok((report, 0))
}

fn eta_report(est: &EtaEstimate) -> Result<Report> {
    let mut report = Report::new(serde_json::to_value(est)?, &["order", "largest_zero", "increment"]);
    report.note(format!("eta: {}", num(est.value)));
    report.note(format!("converged: {}", est.converged));
    report.note(format!("extrapolated: {}", est.extrapolated));
    let mut prev: Option<f64> = None;
    for (order, &z) in est.truncation_orders.iter().zip(&est.largest_zeros) {
        report.row(vec![order.to_string(), num(z), opt(prev.map(|p| z - p))]);
        prev = Some(z);
    }
    Ok(report)
}

pub fn eta(g: &Global, n0: usize, n_max: usize) -> Result<Outcome> {
    let walk = load_walk(g)?;
    match estimate_eta(&walk, g.tol, n0, n_max) {
        Ok(est) => Ok((eta_report(&est)?, 0)),
        Err(Error::NotConverged(est)) => {
            eprintln!("warning: eta did not converge to {:e} by order {n_max}", g.tol);
            Ok((eta_report(&est)?, 2))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn qpoly(g: &Global, x: f64, n: usize) -> Result<Outcome> {
    let walk = load_walk(g)?;
    let seq = eval_q(&walk, n, x);
    let values: Vec<Value> = seq
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| json!({"n": k, "value": v.to_f64(), "sign": v.sign(), "log_abs": v.log_mag()}))
        .collect();
    let mut report = Report::new(json!({"x": x, "values": values}), &["n", "value", "sign", "log_abs"]);
    report.note(format!("x = {}", num(x)));
    for (k, v) in seq.values.iter().enumerate() {
        report.row(vec![k.to_string(), num(v.to_f64()), v.sign().to_string(), num(v.log_mag())]);
    }
    Ok((report, 0))
}

pub fn measure(g: &Global, order: usize) -> Result<Outcome> {
    let walk = load_walk(g)?;
    let m = quadrature_measure(&walk, order)?;
    let mut report = Report::new(serde_json::to_value(&m)?, &["k", "node", "weight"]);
    report.note(format!("order: {}, exact through degree {}", m.order, m.exactness_degree));
    report.note(format!("total mass: {}", num(m.total_mass())));
    for (k, (x, w)) in m.nodes.iter().zip(&m.weights).enumerate() {
        report.row(vec![k.to_string(), num(*x), num(*w)]);
    }
    Ok((report, 0))
}

pub fn pn(g: &Global, i: usize, j: usize, n: usize) -> Result<Outcome> {
    let walk = load_walk(g)?;
    let cap = g.resource_cap();
    let value = n_step_with(&walk, i, j, n, cap)?;
    let exact = match walk.exact() {
        Some(_) => Some(n_step_exact(&walk, i, j, n, cap)?.to_string()),
        None => None,
    };
    let mut report = Report::new(
        json!({"i": i, "j": j, "n": n, "value": value, "exact": exact}),
        &["i", "j", "n", "value", "exact"],
    );
    report.row(vec![i.to_string(), j.to_string(), n.to_string(), num(value), exact.unwrap_or_default()]);
    Ok((report, 0))
}

/// Known edge if the walk carries one, else the estimate (partial if need be).
fn edge<W: BirthDeath + ?Sized>(walk: &W, tol: f64) -> Result<f64> {
    if let Some(eta) = walk.eta_hint() {
        return Ok(eta);
    }
    match estimate_eta(walk, tol, srlp_core::spectral::DEFAULT_N0, srlp_core::spectral::DEFAULT_NMAX) {
        Ok(est) => Ok(est.value),
        Err(Error::NotConverged(est)) => {
            eprintln!("warning: eta not converged; using {}", num(est.value));
            Ok(est.value)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn ratios(g: &Global, indices: [usize; 4], n_max: usize) -> Result<Outcome> {
    let walk = load_walk(g)?;
    let eta = edge(&walk, g.tol)?;
    let trace = ratio_trace(&walk, indices, &default_ratio_grid(n_max), eta, g.resource_cap())?;
    let mut report = Report::new(serde_json::to_value(&trace)?, &["n", "ratio", "predicted_limit"]);
    let [i, j, k, l] = indices;
    report.note(format!("P_{i}{j}(n) / P_{k}{l}(n)"));
    report.note(format!("eta: {}", num(eta)));
    report.note(format!("status: {}", serde_json::to_value(trace.status)?.as_str().unwrap_or("")));
    for pt in &trace.points {
        report.row(vec![pt.n.to_string(), opt(pt.ratio), num(trace.predicted_limit)]);
    }
    Ok((report, 0))
}

pub fn diagnose(g: &Global, n_max: usize, quadrature_order: usize, q_ratio_n: usize) -> Result<Outcome> {
    let walk = load_walk(g)?;
    let config = DiagnoseConfig {
        eta_tol: g.tol,
        n_max,
        quadrature_order,
        q_ratio_n,
        checkpoints: g.checkpoints.clone().unwrap_or_else(default_checkpoints),
        cap: g.resource_cap(),
        ..DiagnoseConfig::default()
    };
    let rep = run_diagnose(&walk, &config);
    let mut report = Report::new(
        serde_json::to_value(&rep)?,
        &["series", "theta", "n", "partial_sum", "log_partial_sum", "verdict"],
    );
    report.note(format!("label: {}", shown_label(&rep.label)));
    report.note(format!("verdict: {}", rep.verdict.as_str()));
    if !rep.reasons.is_empty() {
        report.note(format!("reasons: {}", rep.reasons.join(", ")));
    }
    report.note(format!("eta: {} (converged: {})", num(rep.eta.value), rep.eta.converged));
    report.note(format!("periodic: {}", rep.periodic));
    report.note(format!("|Q_n(eta)/Q_n(-eta)| at n = {q_ratio_n}: {}", opt(rep.q_ratio_limit_estimate)));
    for c in &rep.criteria {
        for cp in &c.checkpoints {
            report.row(vec![
                c.name.as_str().to_string(),
                opt(c.theta),
                cp.n.to_string(),
                num(cp.partial_sum),
                num(cp.log_partial_sum),
                c.verdict.as_str().to_string(),
            ]);
        }
    }
    let code = if rep.resource_limited {
        eprintln!("error: a resource limit was hit; the verdict is inconclusive");
        3
    } else {
        0
    };
    Ok((report, code))
}

pub fn transform(g: &Global, theta: f64, prefix_len: usize) -> Result<Outcome> {
    let walk = load_walk(g)?;
    let tw = theta_transform(walk, theta)?;
    let (spec, warning) = tw.to_walk_spec(prefix_len);
    eprintln!("warning: {warning}");
    let n = prefix_len.clamp(1, 50);
    let q_res = transformed_q_identity_residual(&tw, n, 0.5);
    let pi_res = transformed_pi_identity_residual(&tw, n);
    let sampled = sampled_rows(&tw, g.seed, VALIDATION_HORIZON);
    let mut report = Report::new(
        json!({
            "label": tw.label(),
            "theta": theta,
            "rows": rows_json(&tw),
            "q_identity_residual": q_res,
            "pi_identity_residual": pi_res,
            "sampled": sampled,
            "warning": warning,
            "spec": serde_json::to_value(&spec)?,
        }),
        &["j", "p", "r", "q"],
    );
    report.note(format!("theta: {}", num(theta)));
    report.note(format!("Q_n identity residual (n = {n}, x = 0.5): {}", num(q_res)));
    report.note(format!("pi_n identity residual (n = {n}): {}", num(pi_res)));
    push_rows(&mut report, &tw);
    Ok((report, 0))
}

pub fn example44(g: &Global, alpha: f64) -> Result<Outcome> {
    let base = match g.spec()? {
        Some(spec) => spec,
        None => standard_example_base(),
    };
    let tw = example_44(&base, alpha)?;
    let eta = 1.0 / alpha;
    let checkpoints = g.checkpoints.clone().unwrap_or_else(default_checkpoints);
    let m1 = series_m1(&tw, &checkpoints)?;
    let m_eta = series_m_theta(&tw, eta, &checkpoints)?;
    let mut report = Report::new(
        json!({
            "label": tw.label(),
            "alpha": alpha,
            "eta": eta,
            "m1": serde_json::to_value(&m1)?,
            "m_eta": serde_json::to_value(&m_eta)?,
        }),
        &["n", "M1", "M(eta)"],
    );
    report.note(format!("{} (eta = {})", tw.label(), num(eta)));
    report.note(format!("M1: {} ({})", m1.verdict.as_str(), m1.evidence));
    report.note(format!("M(eta): {} ({})", m_eta.verdict.as_str(), m_eta.evidence));
    for (a, b) in m1.checkpoints.iter().zip(&m_eta.checkpoints) {
        report.row(vec![a.n.to_string(), num(a.partial_sum), num(b.partial_sum)]);
    }
    Ok((report, 0))
}
