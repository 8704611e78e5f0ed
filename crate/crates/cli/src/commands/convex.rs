//! `convex`: pairwise decomposition of one instance file, or a fuzz run
//! that generates many random mixed families and verifies every contract on
//! each. Fuzz instances use one RNG stream per instance index.

use std::path::Path;

use hetdim_core::{decompose, verify, DecompInput};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::load_convex_instance;
use crate::report::{fmt_f64, Csv, Reporter};
use crate::tasks::{rng_for, run_tasks};
use crate::CliError;

pub fn run(
    rep: &mut Reporter,
    seed: u64,
    instance: Option<&Path>,
    tol: f64,
    fuzz: Option<usize>,
) -> Result<Value, CliError> {
    match fuzz {
        Some(count) => run_fuzz(rep, seed, count, tol),
        None => {
            let path = instance.expect("clap requires --instance without --fuzz");
            run_instance(rep, path, tol)
        }
    }
}

fn run_instance(rep: &mut Reporter, path: &Path, tol: f64) -> Result<Value, CliError> {
    let raw = load_convex_instance(path)?;
    let input = DecompInput::new(
        raw.lambdas_minus,
        raw.lambdas_plus,
        raw.weights_minus,
        raw.weights_plus,
    )?;
    let decomp = decompose(&input)?;
    let report = verify(&input, &decomp, tol)?;

    rep.write_json(
        "decomposition.json",
        &json!({
            "input": {
                "lambdas_minus": input.lambdas_minus(),
                "lambdas_plus": input.lambdas_plus(),
                "weights_minus": input.weights_minus(),
                "weights_plus": input.weights_plus(),
            },
            "mixed_exponent": input.mixed_exponent(),
            "a": &decomp.a,
            "b": &decomp.b,
            "verify": &report,
        }),
    )?;

    println!(
        "convex: mixed exponent {:.6}, max violation {:.3e} at tol {tol:e}",
        input.mixed_exponent(),
        report.max_violation
    );
    if !report.passed {
        let worst = report
            .violations
            .first()
            .map(|v| v.condition.clone())
            .unwrap_or_else(|| "unknown".to_string());
        return Err(CliError::Violation(format!(
            "decomposition violates {worst} by {:.3e} (tol {tol:e})",
            report.max_violation
        )));
    }
    Ok(json!({
        "mixed_exponent": input.mixed_exponent(),
        "max_violation": report.max_violation,
        "passed": true,
    }))
}

fn run_fuzz(rep: &mut Reporter, seed: u64, count: usize, tol: f64) -> Result<Value, CliError> {
    if count == 0 {
        return Err(CliError::Usage("--fuzz needs at least one instance".into()));
    }
    let outcomes = run_tasks(count, |i| {
        let mut rng = rng_for(seed, i as u64);
        let input = random_instance(&mut rng);
        let decomp = decompose(&input)?;
        let report = verify(&input, &decomp, tol)?;
        Ok::<(bool, f64), hetdim_core::Error>((report.passed, report.max_violation))
    });

    let mut passed = 0usize;
    let mut failed = 0usize;
    let mut max_violation = 0.0f64;
    for (i, outcome) in outcomes.iter().enumerate() {
        match outcome {
            Ok((true, violation)) => {
                passed += 1;
                max_violation = max_violation.max(*violation);
            }
            Ok((false, violation)) => {
                failed += 1;
                max_violation = max_violation.max(*violation);
                rep.warn(format!(
                    "fuzz instance {i}: violation {violation:.3e} exceeds {tol:e}"
                ));
            }
            Err(e) => {
                failed += 1;
                rep.warn(format!("fuzz instance {i}: {e}"));
            }
        }
    }

    let mut csv = Csv::new("instances,passed,failed,max_violation,tol");
    csv.row([
        count.to_string(),
        passed.to_string(),
        failed.to_string(),
        fmt_f64(max_violation),
        fmt_f64(tol),
    ]);
    rep.write_file("fuzz.csv", csv.as_bytes())?;

    println!("convex fuzz: {passed}/{count} instances verified; max violation {max_violation:.3e}");
    if failed > 0 {
        return Err(CliError::Violation(format!(
            "{failed} of {count} random instances violated the decomposition contracts"
        )));
    }
    Ok(json!({ "instances": count, "passed": passed, "max_violation": max_violation }))
}

/// Random mixed family with 1–6 exponents per side, exponential-spacing
/// weights on the simplex, and a mixture safely below zero so the
/// decomposition hypothesis holds by construction.
fn random_instance(rng: &mut ChaCha8Rng) -> DecompInput {
    let m = rng.gen_range(1..=6);
    let n = rng.gen_range(1..=6);
    loop {
        let lm: Vec<f64> = (0..m).map(|_| rng.gen_range(-3.0..-0.05)).collect();
        let lp: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..3.0)).collect();
        let raw: Vec<f64> = (0..m + n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let total: f64 = raw.iter().sum();
        let wm: Vec<f64> = raw[..m].iter().map(|x| x / total).collect();
        let wp: Vec<f64> = raw[m..].iter().map(|x| x / total).collect();
        let mixture: f64 = lm.iter().zip(&wm).map(|(l, w)| l * w).sum::<f64>()
            + lp.iter().zip(&wp).map(|(l, w)| l * w).sum::<f64>();
        if mixture < -0.01 {
            return DecompInput::new(lm, lp, wm, wp)
                .expect("sampled instance satisfies the constructor hypotheses");
        }
    }
}
