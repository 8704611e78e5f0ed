//! `check`: the covering hypotheses on both sides, the admissible switch
//! regions, and the fixed-point chain ordering the blender's boundary
//! points.

use hetdim_core::{Side, SkewSystem, SuperpositionReport, Symbol};
use serde_json::{json, Value};

use crate::report::Reporter;
use crate::CliError;

pub fn run(rep: &mut Reporter, sys: &SkewSystem) -> Result<Value, CliError> {
    let cu = sys.check_superposition_cu();
    let cs = sys.check_superposition_cs();
    let region_minus = sys.superposition_region(Side::Minus).ok();
    let region_plus = sys.superposition_region(Side::Plus).ok();

    // With the covering in place the four boundary points interleave:
    // p⁺ < h₂⁻¹(p⁺) < h₁⁻¹(q⁺) < q⁺.
    let p_plus = sys.fixed_point(Symbol::D1);
    let q_plus = sys.fixed_point(Symbol::D2);
    let chain = [
        p_plus,
        sys.map(Symbol::D2).inverse_eval(p_plus),
        sys.map(Symbol::D1).inverse_eval(q_plus),
        q_plus,
    ];
    let chain_holds = chain.windows(2).all(|w| w[0] < w[1]);

    let as_pair = |iv: &Option<hetdim_core::Interval>| iv.map(|r| [r.lo(), r.hi()]);
    let detail = json!({
        "cu": report_json(&cu),
        "cs": report_json(&cs),
        "regions": { "minus": as_pair(&region_minus), "plus": as_pair(&region_plus) },
        "chain": { "values": chain, "holds": chain_holds },
    });
    rep.write_json("check.json", &detail)?;

    for (name, side_report) in [("cu", &cu), ("cs", &cs)] {
        println!(
            "{name} covering: {}",
            if side_report.holds { "holds" } else { "FAILS" }
        );
    }
    for (name, region) in [("minus", &region_minus), ("plus", &region_plus)] {
        match region {
            Some(r) => println!(
                "admissible switch region, {name} side: [{}, {}]",
                r.lo(),
                r.hi()
            ),
            None => println!("admissible switch region, {name} side: empty"),
        }
    }
    println!(
        "fixed-point chain p⁺ < h₂⁻¹(p⁺) < h₁⁻¹(q⁺) < q⁺: {} ({} < {} < {} < {})",
        if chain_holds { "holds" } else { "FAILS" },
        chain[0],
        chain[1],
        chain[2],
        chain[3]
    );

    for (name, side_report) in [("cu", &cu), ("cs", &cs)] {
        if !side_report.holds {
            let gap = side_report
                .witness_gap
                .map(|g| format!("[{}, {}]", g.lo(), g.hi()))
                .unwrap_or_else(|| "unknown".to_string());
            return Err(CliError::Violation(format!(
                "{name} covering fails; uncovered fiber interval {gap}"
            )));
        }
    }
    if !chain_holds {
        return Err(CliError::Violation(format!(
            "fixed-point chain out of order: {chain:?}"
        )));
    }

    Ok(json!({
        "cu": true,
        "cs": true,
        "chain": chain,
        "region_minus": as_pair(&region_minus),
        "region_plus": as_pair(&region_plus),
    }))
}

fn report_json(r: &SuperpositionReport) -> Value {
    json!({
        "holds": r.holds,
        "witness_gap": r.witness_gap.map(|g| [g.lo(), g.hi()]),
    })
}
