//! Input files: the system description plus the hull-term and
//! decomposition-instance schemas.
//!
//! Loader policy: unreadable files and JSON syntax errors are usage errors
//! (exit 1); content that parses but violates a model hypothesis surfaces as
//! a violation (exit 2) through the core constructors.

use std::fs;
use std::path::Path;

use hetdim_core::{FiberMap, Interval, Side, SkewSystem, Symbol};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A four-map system: two dilations (labels `1`, `2`) then two contractions
/// (labels `3`, `4`), the base fiber interval, and the expansion bound.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub maps: Vec<MapSpec>,
    pub j: [f64; 2],
    pub lambda_bound: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub slope: f64,
    pub intercept: f64,
}

/// Loads the literal `CANON` or a JSON file into a validated system.
pub fn load_system(spec: &str) -> Result<SkewSystem, CliError> {
    if spec == "CANON" {
        return Ok(SkewSystem::canon());
    }
    let text = fs::read_to_string(spec)
        .map_err(|e| CliError::Usage(format!("cannot read config {spec}: {e}")))?;
    let cfg: SystemConfig = serde_json::from_str(&text)?;
    if cfg.maps.len() != 4 {
        return Err(CliError::Violation(format!(
            "a system needs exactly 4 maps in label order 1..4, config lists {}",
            cfg.maps.len()
        )));
    }
    let labels = [Symbol::D1, Symbol::D2, Symbol::C3, Symbol::C4];
    let mut maps = Vec::with_capacity(4);
    for (label, m) in labels.into_iter().zip(&cfg.maps) {
        maps.push(FiberMap::new(label, m.slope, m.intercept)?);
    }
    let maps: [FiberMap; 4] = maps.try_into().expect("length checked above");
    let j = Interval::new(cfg.j[0], cfg.j[1])?;
    Ok(SkewSystem::new(maps, j, cfg.lambda_bound)?)
}

pub fn side_name(side: Side) -> &'static str {
    match side {
        Side::Minus => "minus",
        Side::Plus => "plus",
    }
}

pub fn parse_side(name: &str) -> Result<Side, CliError> {
    match name {
        "minus" => Ok(Side::Minus),
        "plus" => Ok(Side::Plus),
        other => Err(CliError::Violation(format!(
            "side must be \"minus\" or \"plus\", got {other:?}"
        ))),
    }
}

/// Weighted family of side measures for the `hull` command.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HullTermsFile {
    pub terms: Vec<HullTerm>,
}

/// One term `w·μ_side(T)` of a hull target.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HullTerm {
    pub weight: f64,
    pub side: String,
    pub t_switch: f64,
}

impl HullTerm {
    pub fn side(&self) -> Result<Side, CliError> {
        parse_side(&self.side)
    }
}

pub fn load_hull_terms(path: &Path) -> Result<HullTermsFile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read terms file {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Raw decomposition instance; sign and weight hypotheses are enforced by
/// the core constructor, not here.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvexInstance {
    pub lambdas_minus: Vec<f64>,
    pub lambdas_plus: Vec<f64>,
    pub weights_minus: Vec<f64>,
    pub weights_plus: Vec<f64>,
}

pub fn load_convex_instance(path: &Path) -> Result<ConvexInstance, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::Usage(format!("cannot read instance file {}: {e}", path.display()))
    })?;
    Ok(serde_json::from_str(&text)?)
}
