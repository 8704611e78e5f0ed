//! `hull`: periodic approximations of a weighted family of side measures,
//! one CSV row per word length, plus the pairwise decomposition and block
//! allocation behind each construction.

use std::path::PathBuf;

use hetdim_core::convex_decomp::WEIGHT_SUM_TOL;
use hetdim_core::{approximate_hull_point, build_core_map, CoreMap, PartitionSpec, SkewSystem};
use serde_json::{json, Value};

use crate::commands::status_of;
use crate::config::load_hull_terms;
use crate::report::{fmt_f64, Csv, Reporter};
use crate::tasks::{rng_for, run_tasks};
use crate::CliError;

pub struct Params {
    pub terms: PathBuf,
    pub n_list: Vec<usize>,
    pub depth: usize,
    pub bin_width: f64,
    pub safety: f64,
}

pub fn run(rep: &mut Reporter, sys: &SkewSystem, seed: u64, p: &Params) -> Result<Value, CliError> {
    if p.n_list.is_empty() {
        return Err(CliError::Usage("n-list must be non-empty".into()));
    }
    let file = load_hull_terms(&p.terms)?;
    if file.terms.is_empty() {
        return Err(CliError::Violation("terms file lists no terms".into()));
    }
    for (k, t) in file.terms.iter().enumerate() {
        if !t.weight.is_finite() || t.weight < 0.0 {
            return Err(CliError::Violation(format!(
                "term {k} weight must be finite and non-negative, got {}",
                t.weight
            )));
        }
    }
    let total: f64 = file.terms.iter().map(|t| t.weight).sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(CliError::Violation(format!(
            "term weights must sum to 1 within {WEIGHT_SUM_TOL:e}, got {total}"
        )));
    }

    let mut cores: Vec<(f64, CoreMap)> = Vec::with_capacity(file.terms.len());
    for t in &file.terms {
        cores.push((t.weight, build_core_map(sys, t.side()?, t.t_switch)?));
    }
    let term_refs: Vec<(f64, &CoreMap)> = cores.iter().map(|(w, cm)| (*w, cm)).collect();
    let part = PartitionSpec::new(p.depth, p.bin_width, sys.j())?;

    let results = run_tasks(p.n_list.len(), |i| {
        let mut rng = rng_for(seed, i as u64);
        approximate_hull_point(sys, &term_refs, p.n_list[i], &part, p.safety, &mut rng)
    });

    let mut csv = Csv::new(
        "n_total,status,distance,chi_total,log_multiplier,mean_exponent,period,certified,reversed_time,blocks",
    );
    let mut tables: Vec<Value> = Vec::with_capacity(p.n_list.len());
    let mut built = 0usize;
    let mut failed = 0usize;
    for (&n, outcome) in p.n_list.iter().zip(&results) {
        match outcome {
            Ok(pt) => {
                built += 1;
                let period = pt.orbit.period();
                csv.row([
                    n.to_string(),
                    "ok".to_string(),
                    fmt_f64(pt.distance),
                    fmt_f64(pt.chi_total),
                    fmt_f64(pt.orbit.log_multiplier()),
                    fmt_f64(pt.orbit.log_multiplier() / period as f64),
                    period.to_string(),
                    pt.certificate.passed.to_string(),
                    pt.reversed_time.to_string(),
                    pt.blocks.len().to_string(),
                ]);
                let blocks: Vec<Value> = pt
                    .blocks
                    .iter()
                    .map(|b| {
                        json!({
                            "minus_term": b.minus_term,
                            "plus_term": b.plus_term,
                            "n_minus": b.n_minus,
                            "n_plus": b.n_plus,
                        })
                    })
                    .collect();
                tables.push(json!({
                    "n_total": n,
                    "decomposition": &pt.decomposition,
                    "blocks": blocks,
                }));
            }
            Err(e) => {
                failed += 1;
                rep.warn(format!("hull cell n={n}: {e}"));
                csv.row([
                    n.to_string(),
                    status_of(e).to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
                tables.push(json!({ "n_total": n, "error": e.to_string() }));
            }
        }
    }
    rep.write_file("hull.csv", csv.as_bytes())?;
    rep.write_json("decompositions.json", &tables)?;

    println!(
        "hull: {built} of {} word lengths built ({failed} failed)",
        p.n_list.len()
    );
    Ok(json!({
        "terms": file.terms.len(),
        "cells": p.n_list.len(),
        "built": built,
        "failed": failed,
    }))
}
