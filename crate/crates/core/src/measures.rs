//! Empirical measures on window/fiber cylinders and a weak* distance proxy.
//!
//! A measure here is a finite atomic measure on pairs `(window, fiber)`: the
//! window is an odd-length string recording the symbols seen around an orbit
//! position, the fiber is the interval coordinate at that position. Birkhoff
//! averages of orbits produce such measures with uniform weights; convex
//! combination and coarse-graining stay inside the class.
//!
//! Weak* convergence is probed through a fixed finite partition: windows are
//! truncated to a smaller depth and fibers are binned, and the distance is
//! the total-variation distance of the two pushforwards. That quantity is a
//! pseudometric dominated by 1 and vanishes on pairs that agree on every
//! cell, which is exactly the resolution the partition can see.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::symbol::Symbol;

/// Tolerance on total weight for a normalized measure.
pub const WEIGHT_TOL: f64 = 1e-12;

/// Fibers closer than this after rounding are considered the same atom.
///
/// Rounding happens on a fixed grid of spacing `1e-14`, so two fibers merge
/// exactly when they round to the same grid point.
const FIBER_GRID: f64 = 1e14;

fn round_fiber(t: f64) -> f64 {
    let r = (t * FIBER_GRID).round() / FIBER_GRID;
    // Collapse -0.0 so bit-level equality agrees with numeric equality.
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Neumaier-compensated summation. Weight totals run over up to hundreds of
/// thousands of atoms; naive summation drifts past [`WEIGHT_TOL`] there,
/// while the compensated total stays exact to one final rounding.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// One atom of an empirical measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    /// Odd-length string over `1..4`; the middle character is the symbol
    /// applied at the atom's orbit position.
    pub window: String,
    /// Interval coordinate at the orbit position.
    pub fiber: f64,
    /// Strictly positive mass.
    pub weight: f64,
}

impl Atom {
    pub fn new(window: impl Into<String>, fiber: f64, weight: f64) -> Self {
        Atom {
            window: window.into(),
            fiber,
            weight,
        }
    }

    /// Symbol at the centre of the window.
    pub fn center_symbol(&self) -> Result<Symbol> {
        let chars: Vec<char> = self.window.chars().collect();
        if chars.len().is_multiple_of(2) || chars.is_empty() {
            return Err(Error::invalid(format!(
                "window {:?} has no centre",
                self.window
            )));
        }
        Symbol::from_char(chars[chars.len() / 2])
    }
}

#[derive(Deserialize)]
struct MeasureData {
    depth: usize,
    atoms: Vec<Atom>,
}

/// A normalized atomic measure on window/fiber pairs of a fixed depth.
///
/// Invariants maintained by every constructor and operation: windows have
/// length `2·depth + 1` over the symbol alphabet, fibers are finite and
/// rounded to the merge grid, weights are strictly positive and sum to 1
/// within [`WEIGHT_TOL`], and atoms are sorted by `(window, fiber)` with no
/// duplicate keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureData")]
pub struct EmpiricalMeasure {
    depth: usize,
    atoms: Vec<Atom>,
}

impl TryFrom<MeasureData> for EmpiricalMeasure {
    type Error = Error;

    fn try_from(data: MeasureData) -> Result<Self> {
        EmpiricalMeasure::new(data.depth, data.atoms)
    }
}

/// Validates, rounds, merges and sorts atoms; does not touch total mass.
fn canonicalize(depth: usize, atoms: Vec<Atom>) -> Result<Vec<Atom>> {
    let window_len = 2 * depth + 1;
    let mut rounded = Vec::with_capacity(atoms.len());
    for mut atom in atoms {
        if atom.window.chars().count() != window_len {
            return Err(Error::invalid(format!(
                "window {:?} must have length {} at depth {}",
                atom.window, window_len, depth
            )));
        }
        for c in atom.window.chars() {
            Symbol::from_char(c)?;
        }
        if !atom.fiber.is_finite() {
            return Err(Error::invalid(format!(
                "fiber must be finite, got {}",
                atom.fiber
            )));
        }
        if !(atom.weight > 0.0) || !atom.weight.is_finite() {
            return Err(Error::invalid(format!(
                "atom weight must be strictly positive and finite, got {}",
                atom.weight
            )));
        }
        atom.fiber = round_fiber(atom.fiber);
        rounded.push(atom);
    }
    rounded.sort_by(|a, b| {
        a.window
            .cmp(&b.window)
            .then_with(|| a.fiber.total_cmp(&b.fiber))
    });
    let mut merged: Vec<Atom> = Vec::with_capacity(rounded.len());
    for atom in rounded {
        match merged.last_mut() {
            Some(last)
                if last.window == atom.window && last.fiber.to_bits() == atom.fiber.to_bits() =>
            {
                last.weight += atom.weight;
            }
            _ => merged.push(atom),
        }
    }
    Ok(merged)
}

impl EmpiricalMeasure {
    /// Builds a measure from raw atoms, enforcing all invariants.
    pub fn new(depth: usize, atoms: Vec<Atom>) -> Result<Self> {
        let atoms = canonicalize(depth, atoms)?;
        let total = compensated_sum(atoms.iter().map(|a| a.weight));
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::invalid(format!(
                "atom weights must sum to 1 within {WEIGHT_TOL:e}, got {total}"
            )));
        }
        Ok(EmpiricalMeasure { depth, atoms })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn total_weight(&self) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.weight))
    }

    /// Reverses every window in place; weights and fibers are untouched.
    ///
    /// This is the symmetry that exchanges forward and backward averaging.
    pub fn reverse_windows(&self) -> EmpiricalMeasure {
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                Atom::new(
                    a.window.chars().rev().collect::<String>(),
                    a.fiber,
                    a.weight,
                )
            })
            .collect();
        // Reversal permutes windows bijectively, so re-canonicalizing cannot
        // change total mass and the unwrap is safe.
        EmpiricalMeasure {
            depth: self.depth,
            atoms: canonicalize(self.depth, atoms).expect("reversed atoms stay valid"),
        }
    }
}

/// Forward Birkhoff average: `n` atoms of weight `1/n` read from an orbit.
///
/// `itinerary[k]` is the symbol applied at fiber position `fibers[k]`. Atom
/// `k` (for `k = 0..n`) sits at centre index `m + k`: its fiber is
/// `fibers[m + k]` and its window collects the `2m + 1` symbols around that
/// index. Both slices must hold at least `n + 2m` entries so every window is
/// complete.
pub fn birkhoff_forward(
    itinerary: &[Symbol],
    fibers: &[f64],
    n: usize,
    m: usize,
) -> Result<EmpiricalMeasure> {
    birkhoff_at_centers(itinerary, fibers, n, m, m)
}

/// Backward Birkhoff average: same windows, but the `n` centres are the
/// trailing admissible indices instead of the leading ones.
///
/// This is the average over the most recent `n` positions of an orbit that
/// extends into the past; feeding it a reversed orbit and reversing the
/// windows of the result recovers the forward average.
pub fn birkhoff_backward(
    itinerary: &[Symbol],
    fibers: &[f64],
    n: usize,
    m: usize,
) -> Result<EmpiricalMeasure> {
    if itinerary.len() < n + 2 * m {
        return Err(Error::invalid(format!(
            "orbit of length {} too short for {} windows of depth {}",
            itinerary.len(),
            n,
            m
        )));
    }
    birkhoff_at_centers(itinerary, fibers, n, m, itinerary.len() - n - m)
}

fn birkhoff_at_centers(
    itinerary: &[Symbol],
    fibers: &[f64],
    n: usize,
    m: usize,
    first_center: usize,
) -> Result<EmpiricalMeasure> {
    if n == 0 {
        return Err(Error::invalid("need at least one window (n >= 1)"));
    }
    if itinerary.len() != fibers.len() {
        return Err(Error::invalid(format!(
            "itinerary length {} and fiber orbit length {} differ",
            itinerary.len(),
            fibers.len()
        )));
    }
    if itinerary.len() < n + 2 * m {
        return Err(Error::invalid(format!(
            "orbit of length {} too short for {} windows of depth {}",
            itinerary.len(),
            n,
            m
        )));
    }
    let weight = 1.0 / n as f64;
    let mut atoms = Vec::with_capacity(n);
    for c in first_center..first_center + n {
        let window: String = itinerary[c - m..=c + m]
            .iter()
            .map(|s| s.as_char())
            .collect();
        atoms.push(Atom::new(window, fibers[c], weight));
    }
    EmpiricalMeasure::new(m, atoms)
}

/// Convex combination of measures of equal depth.
///
/// Coefficients must be non-negative and sum to 1 within [`WEIGHT_TOL`]; the
/// result is renormalized so its mass is exactly the canonical sum of its
/// merged atom weights divided by the realized total.
pub fn convex_combine(terms: &[(f64, &EmpiricalMeasure)]) -> Result<EmpiricalMeasure> {
    if terms.is_empty() {
        return Err(Error::invalid("convex combination needs at least one term"));
    }
    let depth = terms[0].1.depth;
    let mut coeff_total = 0.0;
    for (c, mu) in terms {
        if !(*c >= 0.0) || !c.is_finite() {
            return Err(Error::invalid(format!(
                "combination coefficients must be non-negative, got {c}"
            )));
        }
        if mu.depth != depth {
            return Err(Error::invalid(format!(
                "measure depths differ: {} vs {}",
                mu.depth, depth
            )));
        }
        coeff_total += c;
    }
    if (coeff_total - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::invalid(format!(
            "combination coefficients must sum to 1 within {WEIGHT_TOL:e}, got {coeff_total}"
        )));
    }
    let mut atoms = Vec::new();
    for (c, mu) in terms {
        if *c == 0.0 {
            continue;
        }
        for atom in &mu.atoms {
            atoms.push(Atom::new(atom.window.clone(), atom.fiber, c * atom.weight));
        }
    }
    let mut atoms = canonicalize(depth, atoms)?;
    let total = compensated_sum(atoms.iter().map(|a| a.weight));
    for atom in &mut atoms {
        atom.weight /= total;
    }
    Ok(EmpiricalMeasure { depth, atoms })
}

#[derive(Deserialize)]
struct PartitionData {
    depth: usize,
    bin_width: f64,
    fiber_range: Interval,
}

/// The finite partition used as a weak* probe.
///
/// Cells are pairs of a window truncated to `depth` and a half-open fiber
/// bin `[a, a + bin_width)`; the final bin also includes the right endpoint
/// of the range. The bin width must tile the range length within `1e-12`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PartitionData")]
pub struct PartitionSpec {
    depth: usize,
    bin_width: f64,
    fiber_range: Interval,
    n_bins: usize,
}

impl TryFrom<PartitionData> for PartitionSpec {
    type Error = Error;

    fn try_from(d: PartitionData) -> Result<Self> {
        PartitionSpec::new(d.depth, d.bin_width, d.fiber_range)
    }
}

impl PartitionSpec {
    pub fn new(depth: usize, bin_width: f64, fiber_range: Interval) -> Result<Self> {
        if !(bin_width > 0.0) || !bin_width.is_finite() {
            return Err(Error::invalid(format!(
                "bin width must be positive, got {bin_width}"
            )));
        }
        let len = fiber_range.length();
        if len <= 0.0 {
            return Err(Error::invalid(format!(
                "fiber range {fiber_range} must have positive length"
            )));
        }
        let q = len / bin_width;
        let n_bins = q.round() as usize;
        if n_bins == 0 || (n_bins as f64 * bin_width - len).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "bin width {bin_width} does not tile fiber range {fiber_range}"
            )));
        }
        Ok(PartitionSpec {
            depth,
            bin_width,
            fiber_range,
            n_bins,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn fiber_range(&self) -> Interval {
        self.fiber_range
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Bin index of a fiber, or an error when it lies outside the range.
    pub fn bin_of(&self, fiber: f64) -> Result<usize> {
        bin_index(
            fiber,
            self.fiber_range.lo(),
            self.fiber_range.hi(),
            self.bin_width,
            self.n_bins,
        )
        .ok_or_else(|| {
            Error::invalid(format!(
                "fiber {fiber} outside partition range {}",
                self.fiber_range
            ))
        })
    }

    /// Central `2·depth + 1` characters of a window of a deeper measure.
    fn truncate_window(&self, window: &str, measure_depth: usize) -> String {
        let skip = measure_depth - self.depth;
        let keep = 2 * self.depth + 1;
        // Windows are ASCII digits, so byte slicing is safe.
        window[skip..skip + keep].to_string()
    }
}

fn bin_index(t: f64, lo: f64, hi: f64, width: f64, n_bins: usize) -> Option<usize> {
    if !(t >= lo && t <= hi) {
        return None;
    }
    let idx = ((t - lo) / width).floor() as usize;
    Some(idx.min(n_bins - 1))
}

/// Total-variation distance of the two pushforwards under a partition.
///
/// Both measures must be at least as deep as the partition, and every atom
/// fiber must lie inside the partition's fiber range. The result lies in
/// `[0, 1]` up to rounding.
pub fn dist(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, part: &PartitionSpec) -> Result<f64> {
    let mut cells: std::collections::BTreeMap<(String, usize), [f64; 2]> =
        std::collections::BTreeMap::new();
    for (slot, measure) in [(0usize, mu), (1usize, nu)] {
        if measure.depth < part.depth {
            return Err(Error::invalid(format!(
                "measure depth {} shallower than partition depth {}",
                measure.depth, part.depth
            )));
        }
        for atom in &measure.atoms {
            let window = part.truncate_window(&atom.window, measure.depth);
            let bin = part.bin_of(atom.fiber)?;
            cells.entry((window, bin)).or_default()[slot] += atom.weight;
        }
    }
    let tv: f64 = cells.values().map(|[a, b]| (a - b).abs()).sum::<f64>() / 2.0;
    Ok(tv)
}

/// Fiber histogram of a measure: window structure is discarded.
pub fn project_fiber(mu: &EmpiricalMeasure, part: &PartitionSpec) -> Result<Histogram> {
    let mut masses = vec![0.0; part.n_bins];
    for atom in &mu.atoms {
        masses[part.bin_of(atom.fiber)?] += atom.weight;
    }
    Ok(Histogram {
        lo: part.fiber_range.lo(),
        bin_width: part.bin_width,
        masses,
    })
}

/// Masses attached to a uniform grid of fiber bins.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    lo: f64,
    bin_width: f64,
    masses: Vec<f64>,
}

impl Histogram {
    pub fn new(lo: f64, bin_width: f64, masses: Vec<f64>) -> Result<Self> {
        if !(bin_width > 0.0) || !bin_width.is_finite() || !lo.is_finite() {
            return Err(Error::invalid(
                "histogram grid must be finite with positive width",
            ));
        }
        if masses.is_empty() {
            return Err(Error::invalid("histogram needs at least one bin"));
        }
        Ok(Histogram {
            lo,
            bin_width,
            masses,
        })
    }

    /// Uniform-weight histogram of raw values on an explicit grid.
    pub fn from_values(values: &[f64], lo: f64, bin_width: f64, n_bins: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("histogram of no values"));
        }
        let hi = lo + bin_width * n_bins as f64;
        let mut masses = vec![0.0; n_bins];
        let w = 1.0 / values.len() as f64;
        for &v in values {
            let bin = bin_index(v, lo, hi, bin_width, n_bins).ok_or_else(|| {
                Error::invalid(format!("value {v} outside histogram range [{lo}, {hi}]"))
            })?;
            masses[bin] += w;
        }
        Ok(Histogram {
            lo,
            bin_width,
            masses,
        })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn n_bins(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn bin_left(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.bin_width
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// L1 distance between histograms on the identical grid.
    pub fn l1(&self, other: &Histogram) -> Result<f64> {
        if self.lo != other.lo
            || self.bin_width != other.bin_width
            || self.masses.len() != other.masses.len()
        {
            return Err(Error::invalid("histograms live on different grids"));
        }
        Ok(self
            .masses
            .iter()
            .zip(&other.masses)
            .map(|(a, b)| (a - b).abs())
            .sum())
    }
}
