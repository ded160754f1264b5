//! Discrete-time birth-death walks: orthogonal polynomials, spectral measure,
//! transition probabilities and ratio-limit diagnostics.
//!
//! A walk on `{0, 1, ...}` moves up with probability `p_j`, holds with `r_j`
//! and moves down with `q_j` (`q_0 = 0`). Its polynomials satisfy
//! `x Q_n = q_n Q_{n-1} + r_n Q_n + p_n Q_{n+1}` with `Q_0 = 1`.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod oracle;
pub mod polynomials;
pub mod report;
pub mod scaled;
pub mod spectral;
pub mod srlp;
pub mod theta;
pub mod walk;

pub use error::{Error, Result};
pub use exec::Execution;
pub use oracle::{ratio_trace, n_step, RatioTrace, ResourceCap};
pub use polynomials::{eval_q, q_at_minus_one, q_ratio_sequence, PolySequence};
pub use scaled::{BinaryScaled, ScaledValue};
pub use spectral::{estimate_eta, quadrature_measure, DiscreteMeasure, EtaEstimate, JacobiTruncation};
pub use srlp::{diagnose, DiagnoseConfig, SeriesName, SeriesReport, SrlpReport, SrlpVerdict, Verdict};
pub use theta::{example_44, transform, TransformedWalk};
pub use walk::{BirthDeath, Walk, WalkSpec};
