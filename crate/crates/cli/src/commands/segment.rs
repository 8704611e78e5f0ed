//! `segment`: a grid of two-term mixture approximations, one CSV row per
//! `(s, n_total)` cell. Cell failures become rows with a status tag and a
//! warning in the report; the rest of the grid still runs.

use hetdim_core::{
    approximate_segment_point, build_core_map, chi_of_s, PartitionSpec, Side, SkewSystem,
};
use serde_json::{json, Value};

use crate::commands::{side_exponent, status_of};
use crate::report::{fmt_f64, Csv, Reporter};
use crate::tasks::{rng_for, run_tasks};
use crate::CliError;

pub struct Params {
    pub t_minus: f64,
    pub t_plus: f64,
    pub s_list: Vec<f64>,
    pub n_list: Vec<usize>,
    pub depth: usize,
    pub bin_width: f64,
    pub safety: f64,
}

/// Mixtures this close to exponent zero are tagged neutral; no transverse
/// periodic orbit can realize them.
const NEUTRAL_TOL: f64 = 1e-9;

pub fn run(rep: &mut Reporter, sys: &SkewSystem, seed: u64, p: &Params) -> Result<Value, CliError> {
    if p.s_list.is_empty() || p.n_list.is_empty() {
        return Err(CliError::Usage(
            "s-list and n-list must be non-empty".into(),
        ));
    }
    let minus = build_core_map(sys, Side::Minus, p.t_minus)?;
    let plus = build_core_map(sys, Side::Plus, p.t_plus)?;
    let part = PartitionSpec::new(p.depth, p.bin_width, sys.j())?;
    let chi_minus = side_exponent(sys, &minus)?;
    let chi_plus = side_exponent(sys, &plus)?;

    let cells: Vec<(f64, usize)> = p
        .s_list
        .iter()
        .flat_map(|&s| p.n_list.iter().map(move |&n| (s, n)))
        .collect();
    let results = run_tasks(cells.len(), |i| {
        let (s, n) = cells[i];
        let mut rng = rng_for(seed, i as u64);
        approximate_segment_point(sys, &minus, &plus, s, n, &part, p.safety, &mut rng)
    });

    let mut csv = Csv::new(
        "s,n_total,status,neutral,chi_s,distance,lambda,log_multiplier,mean_exponent,period,certified,reversed_time,below_schedule",
    );
    let mut built = 0usize;
    let mut failed = 0usize;
    for (&(s, n), outcome) in cells.iter().zip(&results) {
        let chi_s = chi_of_s(chi_minus, chi_plus, s).ok();
        let neutral = chi_s.map(|c| c.abs() <= NEUTRAL_TOL).unwrap_or(false);
        let chi_str = chi_s.map(fmt_f64).unwrap_or_default();
        match outcome {
            Ok(pt) => {
                built += 1;
                let period = pt.orbit.period();
                csv.row([
                    fmt_f64(s),
                    n.to_string(),
                    "ok".to_string(),
                    neutral.to_string(),
                    chi_str,
                    fmt_f64(pt.distance),
                    fmt_f64(pt.certificate.lambda),
                    fmt_f64(pt.orbit.log_multiplier()),
                    fmt_f64(pt.orbit.log_multiplier() / period as f64),
                    period.to_string(),
                    pt.certificate.passed.to_string(),
                    pt.reversed_time.to_string(),
                    pt.below_schedule.to_string(),
                ]);
            }
            Err(e) => {
                failed += 1;
                rep.warn(format!("segment cell s={s} n={n}: {e}"));
                csv.row([
                    fmt_f64(s),
                    n.to_string(),
                    status_of(e).to_string(),
                    neutral.to_string(),
                    chi_str,
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
            }
        }
    }
    rep.write_file("segment.csv", csv.as_bytes())?;

    println!(
        "segment: {built} of {} cells built ({failed} failed); χ⁻={chi_minus:.6}, χ⁺={chi_plus:.6}",
        cells.len()
    );
    Ok(json!({
        "cells": cells.len(),
        "built": built,
        "failed": failed,
        "chi_minus": chi_minus,
        "chi_plus": chi_plus,
    }))
}
