//! One module per subcommand. Each `run` returns the JSON summary that the
//! reporter embeds in `report.json`; files are written through the reporter
//! so they end up hashed in the same report.

pub mod acim;
pub mod check;
pub mod convex;
pub mod hull;
pub mod local;
pub mod segment;

use hetdim_core::{sample_generic_orbit, support_formula, CoreMap, Side, SkewSystem};

use crate::CliError;

/// Short tag for a core error in a per-cell CSV status column.
pub(crate) fn status_of(e: &hetdim_core::Error) -> &'static str {
    match e {
        hetdim_core::Error::InvalidInput(_) => "invalid-input",
        hetdim_core::Error::Hypothesis(_) => "hypothesis",
        hetdim_core::Error::NoConvergence { .. } => "no-convergence",
    }
}

/// Mean fiber log-slope of one side's dynamics: exact when both branches of
/// the core map share a slope, otherwise estimated from one long generic
/// run started at the support midpoint.
pub(crate) fn side_exponent(sys: &SkewSystem, cm: &CoreMap) -> Result<f64, CliError> {
    let low = cm.branch_low().slope;
    let high = cm.branch_high().slope;
    let sign = match cm.side() {
        Side::Plus => 1.0,
        Side::Minus => -1.0,
    };
    if (low.ln() - high.ln()).abs() <= 1e-12 {
        return Ok(sign * low.ln());
    }
    let sup = support_formula(cm)?;
    let run = sample_generic_orbit(cm, sup.midpoint(), 4096)?;
    let total: f64 = run
        .word
        .symbols()
        .iter()
        .map(|&sym| sys.map(sym).derivative().ln())
        .sum();
    Ok(total / run.len() as f64)
}
