//! The one-step skew product: four affine fiber maps over the full 4-shift.
//!
//! Labels `1` and `2` are dilations whose fixed points `p⁺ < 0` and `q⁺ > 1`
//! straddle the unit interval; labels `3` and `4` are contractions with fixed
//! points `p⁻ < 0` and `q⁻ > 1`. The superposition checks ask whether, for
//! every `t ∈ [0,1]`, at least one of the two relevant images (or inverse
//! images) lands back in `(0,1)`; when they pass, greedy itineraries confine
//! fiber orbits to `[p, q]` forever, which is the blender mechanism used by
//! the rest of the crate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::measures::EmpiricalMeasure;
use crate::symbol::{Symbol, Word, ALL_SYMBOLS};

/// Which pair of maps a construction runs on.
///
/// `Plus` works with the dilations `1`, `2` (expanding fiber dynamics),
/// `Minus` with the contractions `3`, `4` (expanding only after inversion).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Plus => write!(f, "plus"),
            Side::Minus => write!(f, "minus"),
        }
    }
}

/// An increasing affine map `t ↦ slope·t + intercept` of the line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub slope: f64,
    pub intercept: f64,
}

impl Affine {
    pub fn new(slope: f64, intercept: f64) -> Result<Self> {
        if !(slope > 0.0) || !slope.is_finite() || !intercept.is_finite() {
            return Err(Error::invalid(format!(
                "affine map must have finite positive slope, got {slope}·t + {intercept}"
            )));
        }
        Ok(Affine { slope, intercept })
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.slope * t + self.intercept
    }

    pub fn inverse(&self) -> Affine {
        Affine {
            slope: 1.0 / self.slope,
            intercept: -self.intercept / self.slope,
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Affine) -> Affine {
        Affine {
            slope: self.slope * other.slope,
            intercept: self.slope * other.intercept + self.intercept,
        }
    }

    /// The unique fixed point `intercept / (1 − slope)`; slope must not be 1.
    pub fn fixed_point(&self) -> f64 {
        self.intercept / (1.0 - self.slope)
    }

    /// Image of an interval under this (increasing) map.
    pub fn image(&self, iv: &Interval) -> Interval {
        Interval::new(self.eval(iv.lo()), self.eval(iv.hi())).expect("increasing map")
    }
}

/// One labelled fiber map of the system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberMap {
    label: Symbol,
    map: Affine,
}

impl FiberMap {
    pub fn new(label: Symbol, slope: f64, intercept: f64) -> Result<Self> {
        Ok(FiberMap {
            label,
            map: Affine::new(slope, intercept)?,
        })
    }

    pub fn label(&self) -> Symbol {
        self.label
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.map.eval(t)
    }

    pub fn inverse_eval(&self, t: f64) -> f64 {
        self.map.inverse().eval(t)
    }

    /// Derivative, constant for affine maps.
    pub fn derivative(&self) -> f64 {
        self.map.slope
    }

    pub fn affine(&self) -> &Affine {
        &self.map
    }

    pub fn fixed_point(&self) -> f64 {
        self.map.fixed_point()
    }
}

#[derive(Serialize, Deserialize)]
struct AffineParams {
    slope: f64,
    intercept: f64,
}

/// On-disk shape of a system: `{maps:{"1":{slope,intercept},…}, J, lambda_bound}`.
#[derive(Serialize, Deserialize)]
struct SystemConfig {
    maps: BTreeMap<String, AffineParams>,
    #[serde(rename = "J")]
    j: Interval,
    lambda_bound: f64,
}

/// The full four-map system on a compact fiber interval `J`.
///
/// Construction validates every structural hypothesis and reports the first
/// violated one by name; a constructed system is immutable and shareable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemConfig", into = "SystemConfig")]
pub struct SkewSystem {
    maps: [FiberMap; 4],
    j: Interval,
    lambda_bound: f64,
}

impl TryFrom<SystemConfig> for SkewSystem {
    type Error = Error;

    fn try_from(cfg: SystemConfig) -> Result<Self> {
        let mut maps = Vec::with_capacity(4);
        for sym in ALL_SYMBOLS {
            let key = sym.as_char().to_string();
            let params = cfg
                .maps
                .get(&key)
                .ok_or_else(|| Error::invalid(format!("config is missing fiber map {key:?}")))?;
            maps.push(FiberMap::new(sym, params.slope, params.intercept)?);
        }
        if cfg.maps.len() != 4 {
            return Err(Error::invalid(format!(
                "config must define exactly the maps 1..4, got {} entries",
                cfg.maps.len()
            )));
        }
        SkewSystem::new(
            [maps[0], maps[1], maps[2], maps[3]],
            cfg.j,
            cfg.lambda_bound,
        )
    }
}

impl From<SkewSystem> for SystemConfig {
    fn from(sys: SkewSystem) -> SystemConfig {
        let maps = sys
            .maps
            .iter()
            .map(|m| {
                (
                    m.label.as_char().to_string(),
                    AffineParams {
                        slope: m.map.slope,
                        intercept: m.map.intercept,
                    },
                )
            })
            .collect();
        SystemConfig {
            maps,
            j: sys.j,
            lambda_bound: sys.lambda_bound,
        }
    }
}

impl SkewSystem {
    /// Builds a system, checking each hypothesis on the four maps.
    ///
    /// Required, in the order checked: `lambda_bound > 1`; labels 1 and 2
    /// are dilations (slope ≥ lambda_bound) with fixed points `p⁺ < 0` and
    /// `q⁺ > 1`; labels 3 and 4 are contractions (slope ≤ 1/lambda_bound)
    /// with fixed points `p⁻ < 0` and `q⁻ > 1`; and `J` contains all four
    /// fixed points in its interior. A contraction whose fixed point lies in
    /// `J` automatically maps `J` into itself, so no separate check is
    /// needed for invariance of the contracting pair.
    pub fn new(maps: [FiberMap; 4], j: Interval, lambda_bound: f64) -> Result<Self> {
        if !(lambda_bound > 1.0) || !lambda_bound.is_finite() {
            return Err(Error::hypothesis(format!(
                "lambda_bound must exceed 1, got {lambda_bound}"
            )));
        }
        for (i, sym) in ALL_SYMBOLS.iter().enumerate() {
            if maps[i].label != *sym {
                return Err(Error::invalid(format!(
                    "map in slot {i} must carry label {sym}, got {}",
                    maps[i].label
                )));
            }
        }
        for m in &maps[..2] {
            if m.derivative() < lambda_bound {
                return Err(Error::hypothesis(format!(
                    "label {} must be a dilation: slope {} < lambda_bound {}",
                    m.label,
                    m.derivative(),
                    lambda_bound
                )));
            }
        }
        for m in &maps[2..] {
            if m.derivative() > 1.0 / lambda_bound {
                return Err(Error::hypothesis(format!(
                    "label {} must be a contraction: slope {} > 1/lambda_bound {}",
                    m.label,
                    m.derivative(),
                    1.0 / lambda_bound
                )));
            }
        }
        for (m, bound, side_name) in [
            (&maps[0], 0.0, "below 0"),
            (&maps[2], 0.0, "below 0"),
            (&maps[1], 1.0, "above 1"),
            (&maps[3], 1.0, "above 1"),
        ] {
            let fp = m.fixed_point();
            let ok = if bound == 0.0 { fp < 0.0 } else { fp > 1.0 };
            if !ok {
                return Err(Error::hypothesis(format!(
                    "label {} must have its fixed point {side_name}, got {fp}",
                    m.label
                )));
            }
        }
        for m in &maps {
            let fp = m.fixed_point();
            if !j.contains_interior(fp) {
                return Err(Error::hypothesis(format!(
                    "fiber domain J = {j} must contain the fixed point {fp} of label {} in its interior",
                    m.label
                )));
            }
        }
        Ok(SkewSystem {
            maps,
            j,
            lambda_bound,
        })
    }

    /// The reference configuration used throughout tests and as the CLI
    /// default: slopes 1.25 and 0.8 with fixed points −1.2 and 1.12 on both
    /// sides, so that the inverse contractions coincide with the dilations.
    pub fn canon() -> SkewSystem {
        let maps = [
            FiberMap::new(Symbol::D1, 1.25, 0.3).unwrap(),
            FiberMap::new(Symbol::D2, 1.25, -0.28).unwrap(),
            FiberMap::new(Symbol::C3, 0.8, -0.24).unwrap(),
            FiberMap::new(Symbol::C4, 0.8, 0.224).unwrap(),
        ];
        SkewSystem::new(maps, Interval::new(-1.5, 1.5).unwrap(), 1.2)
            .expect("reference configuration satisfies every hypothesis")
    }

    pub fn map(&self, sym: Symbol) -> &FiberMap {
        &self.maps[sym.index()]
    }

    pub fn j(&self) -> Interval {
        self.j
    }

    pub fn lambda_bound(&self) -> f64 {
        self.lambda_bound
    }

    /// Fixed point of the labelled map (`p⁺`, `q⁺`, `p⁻`, `q⁻` in label order).
    pub fn fixed_point(&self, sym: Symbol) -> f64 {
        self.map(sym).fixed_point()
    }

    /// `[p⁺, q⁺]` or `[p⁻, q⁻]`: the invariant interval of a side's pair.
    pub fn domain(&self, side: Side) -> Interval {
        let (lo, hi) = match side {
            Side::Plus => (Symbol::D1, Symbol::D2),
            Side::Minus => (Symbol::C3, Symbol::C4),
        };
        Interval::new(self.fixed_point(lo), self.fixed_point(hi))
            .expect("fixed points are ordered by construction")
    }

    /// One fiber step `t ↦ h_symbol(t)`; the input must lie in `J`, the
    /// output is not clipped.
    pub fn step(&self, sym: Symbol, t: f64) -> Result<f64> {
        if !self.j.contains(t) {
            return Err(Error::invalid(format!(
                "fiber value {t} outside the domain J = {}",
                self.j
            )));
        }
        Ok(self.map(sym).eval(t))
    }

    /// Fiber orbit of a word: `values[0] = t0`, `values[k+1] = h_{word[k]}(values[k])`.
    ///
    /// Iteration stops as soon as a value leaves `J`; the escaping value is
    /// kept and its index reported, so escapes are explicit rather than
    /// silent.
    pub fn orbit(&self, word: &Word, t0: f64) -> Result<OrbitResult> {
        if !self.j.contains(t0) {
            return Err(Error::invalid(format!(
                "initial fiber value {t0} outside the domain J = {}",
                self.j
            )));
        }
        let mut values = Vec::with_capacity(word.len() + 1);
        values.push(t0);
        let mut escaped_at = None;
        for k in 0..word.len() {
            let next = self.map(word[k]).eval(values[k]);
            values.push(next);
            if !self.j.contains(next) {
                escaped_at = Some(k + 1);
                break;
            }
        }
        Ok(OrbitResult { values, escaped_at })
    }

    /// Covering check for the dilating pair: every `t ∈ [0,1]` must have
    /// `h₁(t) ∈ (0,1)` or `h₂(t) ∈ (0,1)`.
    ///
    /// For affine maps this is exact interval arithmetic: the condition
    /// holds iff the open preimages `h₁⁻¹((0,1))` and `h₂⁻¹((0,1))` cover
    /// `[0,1]`. On failure the report carries a maximal uncovered closed
    /// subinterval (possibly a single point).
    pub fn check_superposition_cu(&self) -> SuperpositionReport {
        let pre = |m: &FiberMap| {
            let inv = m.affine().inverse();
            (inv.eval(0.0), inv.eval(1.0))
        };
        superposition_report(&[pre(&self.maps[0]), pre(&self.maps[1])])
    }

    /// Covering check for the contracting pair: every `t ∈ [0,1]` must have
    /// `h₃⁻¹(t) ∈ (0,1)` or `h₄⁻¹(t) ∈ (0,1)`; equivalently the open images
    /// `h₃((0,1))` and `h₄((0,1))` must cover `[0,1]`.
    pub fn check_superposition_cs(&self) -> SuperpositionReport {
        let img = |m: &FiberMap| (m.eval(0.0), m.eval(1.0));
        superposition_report(&[img(&self.maps[2]), img(&self.maps[3])])
    }

    /// The open interval of switch points usable by the core dynamics.
    ///
    /// Side plus: `(h₂⁻¹(0), h₁⁻¹(1))`. Side minus: the same expression for
    /// the inverse contractions, which evaluates to `(h₄(0), h₃(1))`. The
    /// corresponding superposition check must pass.
    pub fn superposition_region(&self, side: Side) -> Result<Interval> {
        let report = match side {
            Side::Plus => self.check_superposition_cu(),
            Side::Minus => self.check_superposition_cs(),
        };
        if !report.holds {
            let gap = report
                .witness_gap
                .map(|g| g.to_string())
                .unwrap_or_else(|| "unknown".to_string());
            return Err(Error::hypothesis(format!(
                "superposition fails on side {side}: uncovered fiber set {gap}"
            )));
        }
        let (t0, t1) = match side {
            Side::Plus => (
                self.maps[1].affine().inverse().eval(0.0),
                self.maps[0].affine().inverse().eval(1.0),
            ),
            Side::Minus => (self.maps[3].eval(0.0), self.maps[2].eval(1.0)),
        };
        if t0 >= t1 {
            return Err(Error::hypothesis(format!(
                "superposition region on side {side} is empty: ({t0}, {t1})"
            )));
        }
        Interval::new(t0, t1)
    }

    /// Greedy blender itinerary keeping the fiber orbit inside `[p, q]`.
    ///
    /// At each of the `n` steps the rule prefers the lower label whenever
    /// its image lies in `(0,1)`, then the upper label; if neither image is
    /// in `(0,1)` but one stays inside `[p, q]` (boundary fixed points), that
    /// label is taken, lower label first. On side minus the same rule runs
    /// on the inverse contractions, producing a backward itinerary.
    pub fn blender_itinerary(&self, t: f64, n: usize, side: Side) -> Result<Word> {
        if n == 0 {
            return Err(Error::invalid(
                "blender itinerary must have at least one symbol",
            ));
        }
        let domain = self.domain(side);
        if !domain.contains(t) {
            return Err(Error::invalid(format!(
                "start value {t} outside the side-{side} domain {domain}"
            )));
        }
        let (la, lb) = match side {
            Side::Plus => (Symbol::D1, Symbol::D2),
            Side::Minus => (Symbol::C3, Symbol::C4),
        };
        let apply = |sym: Symbol, x: f64| match side {
            Side::Plus => self.map(sym).eval(x),
            Side::Minus => self.map(sym).inverse_eval(x),
        };
        let mut symbols = Vec::with_capacity(n);
        let mut cur = t;
        for _ in 0..n {
            let ya = apply(la, cur);
            let yb = apply(lb, cur);
            let unit = |y: f64| 0.0 < y && y < 1.0;
            let (sym, next) = if unit(ya) {
                (la, ya)
            } else if unit(yb) {
                (lb, yb)
            } else if domain.contains(ya) {
                (la, ya)
            } else if domain.contains(yb) {
                (lb, yb)
            } else {
                return Err(Error::hypothesis(format!(
                    "blender step from {cur} leaves both (0,1) and {domain} on side {side}"
                )));
            };
            symbols.push(sym);
            cur = next;
        }
        Word::new(symbols)
    }

    /// Time average of the fiber log-derivative along a consistent orbit.
    ///
    /// `fibers` must hold the orbit positions, either `|word|` entries (one
    /// per applied symbol) or `|word| + 1` including the final image;
    /// consistency `h_{word[k]}(fibers[k]) = fibers[k+1]` is enforced within
    /// `1e-9`.
    pub fn center_exponent(&self, word: &Word, fibers: &[f64]) -> Result<f64> {
        if fibers.len() != word.len() && fibers.len() != word.len() + 1 {
            return Err(Error::invalid(format!(
                "orbit length {} does not match word length {}",
                fibers.len(),
                word.len()
            )));
        }
        for k in 0..fibers.len().saturating_sub(1).min(word.len()) {
            let expected = self.map(word[k]).eval(fibers[k]);
            if (expected - fibers[k + 1]).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "orbit inconsistent with itinerary at step {k}: h_{}({}) = {expected} but orbit has {}",
                    word[k],
                    fibers[k],
                    fibers[k + 1]
                )));
            }
        }
        let sum: f64 = word
            .symbols()
            .iter()
            .map(|&s| self.map(s).derivative().ln())
            .sum();
        Ok(sum / word.len() as f64)
    }

    /// Center exponent of an empirical measure: the atom-weighted average of
    /// the log-derivative at each atom's central symbol.
    pub fn center_exponent_measure(&self, mu: &EmpiricalMeasure) -> Result<f64> {
        let mut total = 0.0;
        for atom in mu.atoms() {
            total += atom.weight * self.map(atom.center_symbol()?).derivative().ln();
        }
        Ok(total)
    }
}

/// Result of iterating a word on a fiber value.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitResult {
    /// `t0` followed by successive images; truncated right after the first
    /// value outside `J`, if any.
    pub values: Vec<f64>,
    /// Index into `values` of the first entry outside `J`.
    pub escaped_at: Option<usize>,
}

impl OrbitResult {
    pub fn completed(&self) -> bool {
        self.escaped_at.is_none()
    }
}

/// Outcome of a superposition covering check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuperpositionReport {
    pub holds: bool,
    /// A maximal uncovered closed subinterval of `[0,1]` when the check
    /// fails; may be a single point.
    pub witness_gap: Option<Interval>,
}

fn superposition_report(opens: &[(f64, f64)]) -> SuperpositionReport {
    let gaps = uncovered_unit_subintervals(opens);
    let witness = gaps
        .iter()
        .cloned()
        .max_by(|a, b| (a.1 - a.0).total_cmp(&(b.1 - b.0)))
        .map(|(lo, hi)| Interval::new(lo, hi).expect("gap endpoints ordered"));
    SuperpositionReport {
        holds: gaps.is_empty(),
        witness_gap: witness,
    }
}

/// Closed subintervals of `[0,1]` not covered by a union of open intervals.
///
/// Degenerate point gaps are reported: two open intervals that merely touch
/// leave their common endpoint uncovered, and an interval with endpoint
/// exactly 0 or 1 leaves that endpoint uncovered.
fn uncovered_unit_subintervals(opens: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut segments: Vec<(f64, f64)> = opens.iter().copied().filter(|(a, b)| a < b).collect();
    segments.sort_by(|x, y| x.0.total_cmp(&y.0));
    // Merge pairs that strictly overlap; touching intervals stay separate
    // because their shared endpoint is uncovered.
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for seg in segments {
        match merged.last_mut() {
            Some(last) if seg.0 < last.1 => last.1 = last.1.max(seg.1),
            _ => merged.push(seg),
        }
    }
    let mut gaps = Vec::new();
    let mut x = 0.0f64;
    let mut push_gap = |lo: f64, hi: f64| {
        let lo = lo.max(0.0);
        let hi = hi.min(1.0);
        if lo <= hi {
            gaps.push((lo, hi));
        }
    };
    for (a, b) in merged {
        if b <= x {
            continue;
        }
        if x > 1.0 {
            break;
        }
        if x <= a {
            push_gap(x, a);
        }
        x = x.max(b);
    }
    if x <= 1.0 {
        push_gap(x, 1.0);
    }
    gaps
}

/// The signed mixture `s·χ⁻ + (1−s)·χ⁺` of a contracting and an expanding
/// center exponent.
pub fn chi_of_s(chi_minus: f64, chi_plus: f64, s: f64) -> Result<f64> {
    if !(chi_minus < 0.0) || !(chi_plus > 0.0) {
        return Err(Error::invalid(format!(
            "need chi_minus < 0 < chi_plus, got ({chi_minus}, {chi_plus})"
        )));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::invalid(format!(
            "mixture parameter s must lie in [0,1], got {s}"
        )));
    }
    Ok(s * chi_minus + (1.0 - s) * chi_plus)
}
