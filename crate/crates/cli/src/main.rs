//! Batch front-end for the skew-product experiments in `hetdim-core`.
//!
//! Six subcommands: `check` (covering hypotheses and the fixed-point chain),
//! `acim` (stationary densities of the one-sided core maps), `segment`
//! (periodic approximations of two-term mixtures), `hull` (weighted
//! families), `convex` (pairwise exponent decompositions), and `local` (the
//! linear two-saddle model). Every run writes plot-ready CSV/JSON files into
//! `--out` together with a `report.json` listing each emitted file with a
//! SHA-256 content hash.
//!
//! Runs are deterministic for a fixed `(config, seed)`: parallel tasks draw
//! from disjoint RNG streams derived from the base seed by task counter, and
//! all floating-point output uses full round-trip precision.

mod commands;
mod config;
mod report;
mod tasks;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use hetdim_core::{Side, Twist};
use serde_json::json;

/// Failure classes mapped onto process exit codes: `1` for usage and I/O
/// problems, `2` for violated model hypotheses or semantically invalid
/// inputs, `3` when an iterative routine fails to converge.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Violation(String),
    NoConvergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Violation(_) => 2,
            CliError::NoConvergence(_) => 3,
        }
    }

    /// Short machine-readable tag for run reports.
    pub fn status(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage-error",
            CliError::Violation(_) => "violation",
            CliError::NoConvergence(_) => "no-convergence",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Violation(m) | CliError::NoConvergence(m) => {
                f.write_str(m)
            }
        }
    }
}

impl From<hetdim_core::Error> for CliError {
    fn from(e: hetdim_core::Error) -> Self {
        match e {
            hetdim_core::Error::NoConvergence { .. } => CliError::NoConvergence(e.to_string()),
            _ => CliError::Violation(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(format!("malformed JSON: {e}"))
    }
}

/// Flags shared by every subcommand.
#[derive(Args)]
struct Common {
    /// System description: the literal `CANON` or a path to a JSON file.
    #[arg(long, default_value = "CANON")]
    config: String,
    /// Base seed; parallel tasks use derived, non-overlapping streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for emitted files (created if missing).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Minus,
    Plus,
}

impl From<SideArg> for Side {
    fn from(s: SideArg) -> Side {
        match s {
            SideArg::Minus => Side::Minus,
            SideArg::Plus => Side::Plus,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "hetdim",
    version,
    about = "Experiments with cycles of measures in affine step skew products"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify the covering hypotheses and the fixed-point chain.
    Check {
        #[command(flatten)]
        common: Common,
    },
    /// Stationary density of one side's expanding core map.
    Acim {
        #[command(flatten)]
        common: Common,
        /// Which family of fiber maps induces the core map.
        #[arg(long, value_enum)]
        side: SideArg,
        /// Switch point between the two branches.
        #[arg(long)]
        t_switch: f64,
        /// Number of histogram bins.
        #[arg(long, default_value_t = 4096)]
        bins: usize,
        /// Residual target for the power iteration.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Iteration budget for the power iteration.
        #[arg(long, default_value_t = 50_000)]
        max_iter: usize,
    },
    /// Periodic approximations of two-term mixtures s·μ⁻ + (1−s)·μ⁺.
    Segment {
        #[command(flatten)]
        common: Common,
        /// Switch point of the contraction-side core map.
        #[arg(long, default_value_t = 0.4)]
        t_minus: f64,
        /// Switch point of the dilation-side core map.
        #[arg(long, default_value_t = 0.4)]
        t_plus: f64,
        /// Mixture parameters, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.75")]
        s_list: Vec<f64>,
        /// Word lengths, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "200,800,3200")]
        n_list: Vec<usize>,
        /// Window radius of the comparison partition.
        #[arg(long, default_value_t = 2)]
        depth: usize,
        /// Fiber bin width of the comparison partition.
        #[arg(long, default_value_t = 0.02)]
        bin_width: f64,
        /// Fraction of the mixture exponent used as the certificate rate.
        #[arg(long, default_value_t = 0.9)]
        safety: f64,
    },
    /// Periodic approximations of weighted families Σ wₖ·μₖ.
    Hull {
        #[command(flatten)]
        common: Common,
        /// JSON file listing the weighted terms.
        #[arg(long)]
        terms: PathBuf,
        /// Word lengths, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "400,1600,6400")]
        n_list: Vec<usize>,
        /// Window radius of the comparison partition.
        #[arg(long, default_value_t = 2)]
        depth: usize,
        /// Fiber bin width of the comparison partition.
        #[arg(long, default_value_t = 0.02)]
        bin_width: f64,
        /// Fraction of the mixture exponent used as the certificate rate.
        #[arg(long, default_value_t = 0.9)]
        safety: f64,
    },
    /// Pairwise decomposition of a mixed family of exponents.
    Convex {
        #[command(flatten)]
        common: Common,
        /// JSON instance file; required unless --fuzz is given.
        #[arg(long, required_unless_present = "fuzz")]
        instance: Option<PathBuf>,
        /// Verification tolerance.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Verify this many random instances instead of an instance file.
        #[arg(long)]
        fuzz: Option<usize>,
    },
    /// Linear two-saddle model: escape sweep or twisted periodic orbits.
    Local {
        #[command(flatten)]
        common: Common,
        /// Orientation of the strong connection: +1 preserving, -1 reversing.
        #[arg(long, allow_hyphen_values = true)]
        twist: i64,
        /// Block sizes for the reversing twist; defaults to k_min..=8·k_min.
        #[arg(long, value_delimiter = ',')]
        k_list: Option<Vec<usize>>,
        /// Sample count for the preserving-twist escape sweep.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Forward/backward step budget per sample.
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        /// Smallest admissible distance of a sample to the characterized set.
        #[arg(long, default_value_t = 1e-6)]
        exclusion: f64,
        /// Chart collar half-width δ.
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        /// Steps spent in the centre connection.
        #[arg(long, default_value_t = 1)]
        n_trans: usize,
        /// Steps spent in the strong connection.
        #[arg(long, default_value_t = 1)]
        m_trans: usize,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hetdim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run() -> Result<(), CliError> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return Ok(());
            }
            return Err(CliError::Usage(e.to_string()));
        }
    };

    match cli.command {
        Command::Check { common } => {
            let invocation = json!({ "config": common.config, "seed": common.seed });
            execute("check", invocation, &common, |rep| {
                let sys = config::load_system(&common.config)?;
                commands::check::run(rep, &sys)
            })
        }
        Command::Acim {
            common,
            side,
            t_switch,
            bins,
            tol,
            max_iter,
        } => {
            let side: Side = side.into();
            let invocation = json!({
                "config": common.config, "seed": common.seed,
                "side": config::side_name(side), "t_switch": t_switch,
                "bins": bins, "tol": tol, "max_iter": max_iter,
            });
            execute("acim", invocation, &common, |rep| {
                let sys = config::load_system(&common.config)?;
                commands::acim::run(rep, &sys, side, t_switch, bins, tol, max_iter)
            })
        }
        Command::Segment {
            common,
            t_minus,
            t_plus,
            s_list,
            n_list,
            depth,
            bin_width,
            safety,
        } => {
            let invocation = json!({
                "config": common.config, "seed": common.seed,
                "t_minus": t_minus, "t_plus": t_plus, "s_list": s_list, "n_list": n_list,
                "depth": depth, "bin_width": bin_width, "safety": safety,
            });
            let params = commands::segment::Params {
                t_minus,
                t_plus,
                s_list,
                n_list,
                depth,
                bin_width,
                safety,
            };
            execute("segment", invocation, &common, |rep| {
                let sys = config::load_system(&common.config)?;
                commands::segment::run(rep, &sys, common.seed, &params)
            })
        }
        Command::Hull {
            common,
            terms,
            n_list,
            depth,
            bin_width,
            safety,
        } => {
            let invocation = json!({
                "config": common.config, "seed": common.seed,
                "terms": terms.display().to_string(), "n_list": n_list,
                "depth": depth, "bin_width": bin_width, "safety": safety,
            });
            let params = commands::hull::Params {
                terms,
                n_list,
                depth,
                bin_width,
                safety,
            };
            execute("hull", invocation, &common, |rep| {
                let sys = config::load_system(&common.config)?;
                commands::hull::run(rep, &sys, common.seed, &params)
            })
        }
        Command::Convex {
            common,
            instance,
            tol,
            fuzz,
        } => {
            let invocation = json!({
                "config": common.config, "seed": common.seed,
                "instance": instance.as_ref().map(|p| p.display().to_string()),
                "tol": tol, "fuzz": fuzz,
            });
            execute("convex", invocation, &common, |rep| {
                commands::convex::run(rep, common.seed, instance.as_deref(), tol, fuzz)
            })
        }
        Command::Local {
            common,
            twist,
            k_list,
            samples,
            max_iter,
            exclusion,
            delta,
            n_trans,
            m_trans,
        } => {
            // A twist other than ±1 is a malformed flag value, not a model
            // hypothesis, so it fails before a run starts.
            let twist = Twist::from_sign(twist).map_err(|e| CliError::Usage(e.to_string()))?;
            let invocation = json!({
                "config": common.config, "seed": common.seed,
                "twist": twist.sign(), "k_list": k_list, "samples": samples,
                "max_iter": max_iter, "exclusion": exclusion,
                "delta": delta, "n_trans": n_trans, "m_trans": m_trans,
            });
            let params = commands::local::Params {
                twist,
                k_list,
                samples,
                max_iter,
                exclusion,
                delta,
                n_trans,
                m_trans,
            };
            execute("local", invocation, &common, |rep| {
                commands::local::run(rep, common.seed, &params)
            })
        }
    }
}

/// Runs one command body against a fresh reporter and always finishes the
/// report, so failed runs still leave `report.json` behind.
fn execute(
    name: &'static str,
    invocation: serde_json::Value,
    common: &Common,
    body: impl FnOnce(&mut report::Reporter) -> Result<serde_json::Value, CliError>,
) -> Result<(), CliError> {
    let mut rep = report::Reporter::new(name, invocation, common.seed, &common.out)?;
    let result = body(&mut rep);
    rep.finish(&result)?;
    result.map(|_| ())
}
