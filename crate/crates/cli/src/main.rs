use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use srlp_core::oracle::{DEFAULT_OP_CAP, DEFAULT_STATE_CAP};
use srlp_core::spectral::DEFAULT_ETA_TOL;
use srlp_core::{Error, ResourceCap, WalkSpec};

mod commands;
mod output;

use output::Format;

/// Birth-death walk lab: orthogonal polynomials, spectral edge, matrix
/// powers and ratio-limit diagnostics.
#[derive(Parser, Debug)]
#[command(name = "srlp-lab", version)]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Walk spec file (JSON).
    #[arg(long, global = true, conflicts_with = "spec_inline")]
    pub spec: Option<PathBuf>,

    /// Walk spec as an inline JSON string.
    #[arg(long, global = true)]
    pub spec_inline: Option<String>,

    #[arg(long, global = true, value_enum, default_value = "table")]
    pub format: Format,

    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Convergence tolerance for the eta estimate.
    #[arg(long, global = true, default_value_t = DEFAULT_ETA_TOL)]
    pub tol: f64,

    /// Comma-separated, strictly ascending series checkpoints.
    #[arg(long, global = true, value_delimiter = ',')]
    pub checkpoints: Option<Vec<usize>>,

    /// Band-operation budget for matrix powers and series.
    #[arg(long, global = true, env = "SRLP_LAB_CAP", default_value_t = DEFAULT_OP_CAP)]
    pub cap: u64,

    /// Seed for sampled checks.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

impl Global {
    pub fn spec(&self) -> Result<Option<WalkSpec>> {
        let text = match (&self.spec, &self.spec_inline) {
            (Some(path), _) => std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
            (None, Some(text)) => text.clone(),
            (None, None) => return Ok(None),
        };
        Ok(Some(WalkSpec::from_json(&text)?))
    }

    pub fn require_spec(&self) -> Result<WalkSpec> {
        match self.spec()? {
            Some(spec) => Ok(spec),
            None => bail!("a walk is required: pass --spec FILE or --spec-inline JSON"),
        }
    }

    pub fn resource_cap(&self) -> ResourceCap {
        ResourceCap {
            states: DEFAULT_STATE_CAP,
            ops: self.cap,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            bail!("--tol must be positive, got {}", self.tol);
        }
        if let Some(grid) = &self.checkpoints {
            if grid.is_empty() || grid[0] == 0 || grid.windows(2).any(|w| w[0] >= w[1]) {
                bail!("--checkpoints must be positive and strictly ascending");
            }
        }
        Ok(())
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Resolve a spec and print its leading parameters.
    Validate,
    /// Estimate the spectral edge from truncation zeros.
    Eta {
        #[arg(long, default_value_t = srlp_core::spectral::DEFAULT_N0)]
        n0: usize,
        #[arg(long, default_value_t = srlp_core::spectral::DEFAULT_NMAX)]
        n_max: usize,
    },
    /// Tabulate Q_n(x).
    Qpoly {
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, default_value_t = 20)]
        n: usize,
    },
    /// Gaussian quadrature for the walk measure.
    Measure {
        #[arg(long, default_value_t = 30)]
        order: usize,
    },
    /// n-step transition probability P_ij(n).
    Pn {
        #[arg(long, default_value_t = 0)]
        i: usize,
        #[arg(long, default_value_t = 0)]
        j: usize,
        #[arg(long)]
        n: usize,
    },
    /// Trace P_ij(n) / P_kl(n) against its predicted limit.
    Ratios {
        /// i,j,k,l
        #[arg(long, value_delimiter = ',', default_value = "0,0,0,0")]
        indices: Vec<usize>,
        #[arg(long, default_value_t = 2048)]
        n_max: usize,
    },
    /// Run every ratio-limit criterion and give a verdict.
    Diagnose {
        #[arg(long, default_value_t = srlp_core::spectral::DEFAULT_NMAX)]
        n_max: usize,
        #[arg(long, default_value_t = 60)]
        quadrature_order: usize,
        #[arg(long, default_value_t = 10_000)]
        q_ratio_n: usize,
    },
    /// Apply the theta transform and export the result as a tabular spec.
    Transform {
        #[arg(long)]
        theta: f64,
        #[arg(long, default_value_t = 64)]
        prefix_len: usize,
    },
    /// Build the transient walk with a recurrent eta-transform and compare
    /// M1 with M(eta).
    Example44 {
        #[arg(long, default_value_t = 1.25)]
        alpha: f64,
    },
}

/// Exit status for a library error.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::NotConverged(_)) => 2,
        Some(Error::ResourceLimit { .. }) => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<u8> {
    cli.global.validate()?;
    let g = &cli.global;
    let (report, code) = match cli.command {
        Command::Validate => commands::validate(g)?,
        Command::Eta { n0, n_max } => commands::eta(g, n0, n_max)?,
        Command::Qpoly { x, n } => commands::qpoly(g, x, n)?,
        Command::Measure { order } => commands::measure(g, order)?,
        Command::Pn { i, j, n } => commands::pn(g, i, j, n)?,
        Command::Ratios { indices, n_max } => {
            let Ok(indices) = <[usize; 4]>::try_from(indices) else {
                bail!("--indices takes exactly four values i,j,k,l");
            };
            commands::ratios(g, indices, n_max)?
        }
        Command::Diagnose {
            n_max,
            quadrature_order,
            q_ratio_n,
        } => commands::diagnose(g, n_max, quadrature_order, q_ratio_n)?,
        Command::Transform { theta, prefix_len } => commands::transform(g, theta, prefix_len)?,
        Command::Example44 { alpha } => commands::example44(g, alpha)?,
    };
    report.emit(g.format, g.out.as_deref())?;
    Ok(code)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            if matches!(err.downcast_ref::<Error>(), Some(Error::ResourceLimit { .. })) {
                eprintln!("hint: lower n, or raise --cap / SRLP_LAB_CAP; sampling by Monte Carlo is not provided");
            }
            ExitCode::from(exit_code(&err))
        }
    }
}
