//! `local`: the linear two-saddle model. The preserving twist runs an
//! escape sweep over random chart points away from the characterized set;
//! the reversing twist builds one certified periodic cycle per block size
//! and measures its distance to the balanced saddle mixture.

use hetdim_core::local_cycles::MEMBERSHIP_TOL;
use hetdim_core::{
    characterized_distance, classify_point, find_twisted_periodic, midpoint_distance, Chart,
    ChartPoint, CycleModel, Twist, Verdict,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::commands::status_of;
use crate::report::{fmt_f64, Csv, Reporter};
use crate::tasks::{rng_for, run_tasks};
use crate::CliError;

pub struct Params {
    pub twist: Twist,
    pub k_list: Option<Vec<usize>>,
    pub samples: usize,
    pub max_iter: usize,
    pub exclusion: f64,
    pub delta: f64,
    pub n_trans: usize,
    pub m_trans: usize,
}

/// The sweep is split into this many fixed chunks; each chunk draws from its
/// own RNG stream, so the worker count never changes which points are drawn.
const SWEEP_CHUNKS: usize = 64;

pub fn run(rep: &mut Reporter, seed: u64, p: &Params) -> Result<Value, CliError> {
    let model = CycleModel::new(p.twist, p.delta, p.n_trans, p.m_trans)?;
    match p.twist {
        Twist::Reversing => run_twisted(rep, &model, p),
        Twist::Preserving => run_sweep(rep, &model, seed, p),
    }
}

fn run_twisted(rep: &mut Reporter, model: &CycleModel, p: &Params) -> Result<Value, CliError> {
    let k_min = model.k_min();
    let ks: Vec<usize> = p
        .k_list
        .clone()
        .unwrap_or_else(|| (k_min..=8 * k_min).collect());
    if ks.is_empty() {
        return Err(CliError::Usage("k-list must be non-empty".into()));
    }

    let results = run_tasks(ks.len(), |i| {
        let orbit = find_twisted_periodic(model, ks[i])?;
        let distance = midpoint_distance(&orbit)?;
        let exponent = orbit.center_exponent();
        Ok::<_, hetdim_core::Error>((orbit, distance, exponent))
    });

    let mut csv = Csv::new("k,status,period,residual,midpoint_distance,exponent");
    let mut orbits: Vec<Value> = Vec::new();
    let mut built = 0usize;
    let mut failed = 0usize;
    for (&k, outcome) in ks.iter().zip(&results) {
        match outcome {
            Ok((orbit, distance, exponent)) => {
                built += 1;
                csv.row([
                    k.to_string(),
                    "ok".to_string(),
                    orbit.period().to_string(),
                    fmt_f64(orbit.closure_residual()),
                    fmt_f64(*distance),
                    fmt_f64(*exponent),
                ]);
                orbits.push(json!({
                    "k": k,
                    "midpoint_distance": distance,
                    "exponent": exponent,
                    "orbit": orbit,
                }));
            }
            Err(e) => {
                failed += 1;
                rep.warn(format!("twisted cycle k={k}: {e}"));
                csv.row([
                    k.to_string(),
                    status_of(e).to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
                orbits.push(json!({ "k": k, "error": e.to_string() }));
            }
        }
    }
    rep.write_file("twisted.csv", csv.as_bytes())?;
    rep.write_json("orbits.json", &orbits)?;

    println!(
        "local twisted: {built} of {} block sizes closed (k_min={k_min})",
        ks.len()
    );
    Ok(json!({ "k_min": k_min, "cells": ks.len(), "built": built, "failed": failed }))
}

struct SweepRow {
    sample: usize,
    chart: char,
    coords: [f64; 3],
    verdict: &'static str,
    exit_time: Option<usize>,
}

fn run_sweep(
    rep: &mut Reporter,
    model: &CycleModel,
    seed: u64,
    p: &Params,
) -> Result<Value, CliError> {
    if p.samples == 0 {
        return Err(CliError::Usage("sweep needs at least one sample".into()));
    }
    if p.exclusion.is_nan() || p.exclusion <= MEMBERSHIP_TOL {
        return Err(CliError::Violation(format!(
            "exclusion must exceed the membership tolerance {MEMBERSHIP_TOL:e}, got {}",
            p.exclusion
        )));
    }

    let chunks = SWEEP_CHUNKS.min(p.samples);
    let bounds: Vec<(usize, usize)> = (0..chunks)
        .map(|c| (c * p.samples / chunks, (c + 1) * p.samples / chunks))
        .collect();
    let rows_by_chunk: Vec<Vec<SweepRow>> = run_tasks(chunks, |c| {
        let (lo, hi) = bounds[c];
        let mut rng = rng_for(seed, c as u64);
        (lo..hi)
            .map(|sample| sweep_one(model, sample, p, &mut rng))
            .collect()
    });

    let mut csv = Csv::new("sample,chart,x,y,z,verdict,exit_time");
    let mut forward = 0usize;
    let mut backward = 0usize;
    let mut characterized = 0usize;
    let mut undecided = 0usize;
    let mut max_exit = 0usize;
    for row in rows_by_chunk.iter().flatten() {
        match row.verdict {
            "escapes-forward" => forward += 1,
            "escapes-backward" => backward += 1,
            "on-characterized-set" => characterized += 1,
            _ => undecided += 1,
        }
        if let Some(t) = row.exit_time {
            max_exit = max_exit.max(t);
        }
        csv.row([
            row.sample.to_string(),
            row.chart.to_string(),
            fmt_f64(row.coords[0]),
            fmt_f64(row.coords[1]),
            fmt_f64(row.coords[2]),
            row.verdict.to_string(),
            row.exit_time.map(|t| t.to_string()).unwrap_or_default(),
        ]);
    }
    rep.write_file("sweep.csv", csv.as_bytes())?;

    println!(
        "local sweep: {} samples — {forward} escape forward, {backward} backward, \
         {characterized} on the set, {undecided} undecided; longest exit {max_exit} steps",
        p.samples
    );
    Ok(json!({
        "samples": p.samples,
        "escapes_forward": forward,
        "escapes_backward": backward,
        "on_characterized_set": characterized,
        "undecided": undecided,
        "max_exit_time": max_exit,
    }))
}

/// Draws one point at least `exclusion` away from the characterized set
/// (alternating charts by global sample index) and classifies it.
fn sweep_one(model: &CycleModel, sample: usize, p: &Params, rng: &mut ChaCha8Rng) -> SweepRow {
    let b = model.box_halfwidth();
    let pt = loop {
        let coords = [
            rng.gen_range(-b..b),
            rng.gen_range(-b..b),
            rng.gen_range(-b..b),
        ];
        let candidate = if sample.is_multiple_of(2) {
            ChartPoint::p(coords[0], coords[1], coords[2])
        } else {
            ChartPoint::q(coords[0], coords[1], coords[2])
        };
        if characterized_distance(model, candidate) >= p.exclusion {
            break candidate;
        }
    };
    let verdict = classify_point(model, pt, p.max_iter)
        .expect("the preserving-twist model classifies every point");
    let (tag, exit_time) = match verdict {
        Verdict::EscapesForward(n) => ("escapes-forward", Some(n)),
        Verdict::EscapesBackward(n) => ("escapes-backward", Some(n)),
        Verdict::OnCharacterizedSet => ("on-characterized-set", None),
        Verdict::Undecided => ("undecided", None),
    };
    SweepRow {
        sample,
        chart: match pt.chart() {
            Chart::P => 'p',
            Chart::Q => 'q',
        },
        coords: pt.coords(),
        verdict: tag,
        exit_time,
    }
}
