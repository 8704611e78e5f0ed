//! Expanding core dynamics on one side and its absolutely continuous
//! stationary measure.
//!
//! Fixing a switch value `T` in the superposition region turns one pair of
//! fiber maps into a piecewise-affine expanding map of `[p, q]`: the low
//! branch applies below and at `T`, the high branch strictly above. On the
//! plus side the branches are the dilations themselves; on the minus side
//! they are the inverted contractions, so the map describes the backward
//! dynamics of that pair. The stationary density of such a map is
//! approximated by the Ulam method: transition mass between bins of a
//! uniform partition, computed exactly for affine branches, followed by
//! power iteration. Generic orbits of the core map lift to empirical
//! measures of the full system, window structure included.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::measures::{birkhoff_forward, EmpiricalMeasure, Histogram};
use crate::skew_system::{Affine, Side, SkewSystem};
use crate::symbol::{Symbol, Word};

pub use crate::skew_system::Side as CoreSide;

/// Mass below which a bin is treated as numerically empty when estimating
/// the support of a density.
pub const SUPPORT_THRESHOLD: f64 = 1e-9;

/// A two-branch expanding map of `[p, q]` with switch point `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoreMap {
    side: Side,
    t_switch: f64,
    branch_low: Affine,
    branch_high: Affine,
    domain: Interval,
}

/// Builds the core map of a side, validating every hypothesis.
///
/// `T` must lie strictly inside the side's superposition region; both
/// branches must expand strictly faster than `lambda_bound`; and the domain
/// `[p, q]` must be forward-invariant, which for increasing branches reduces
/// to `branch_low(T) ≤ q` and `branch_high(T) ≥ p`.
pub fn build_core_map(sys: &SkewSystem, side: Side, t_switch: f64) -> Result<CoreMap> {
    let region = sys.superposition_region(side)?;
    if !region.contains_interior(t_switch) {
        return Err(Error::invalid(format!(
            "switch value {t_switch} outside the open superposition region ({}, {}) of side {side}",
            region.lo(),
            region.hi()
        )));
    }
    let (branch_low, branch_high) = match side {
        Side::Plus => (*sys.map(Symbol::D1).affine(), *sys.map(Symbol::D2).affine()),
        Side::Minus => (
            sys.map(Symbol::C3).affine().inverse(),
            sys.map(Symbol::C4).affine().inverse(),
        ),
    };
    for (name, branch) in [("low", &branch_low), ("high", &branch_high)] {
        if branch.slope <= sys.lambda_bound() {
            return Err(Error::hypothesis(format!(
                "{name} branch must expand faster than lambda_bound {}, got slope {}",
                sys.lambda_bound(),
                branch.slope
            )));
        }
    }
    let domain = sys.domain(side);
    let tol = 1e-12;
    if branch_low.eval(t_switch) > domain.hi() + tol
        || branch_high.eval(t_switch) < domain.lo() - tol
    {
        return Err(Error::hypothesis(format!(
            "core map does not keep {domain} invariant at switch value {t_switch}"
        )));
    }
    Ok(CoreMap {
        side,
        t_switch,
        branch_low,
        branch_high,
        domain,
    })
}

impl CoreMap {
    pub fn side(&self) -> Side {
        self.side
    }

    pub fn t_switch(&self) -> f64 {
        self.t_switch
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn branch_low(&self) -> &Affine {
        &self.branch_low
    }

    pub fn branch_high(&self) -> &Affine {
        &self.branch_high
    }

    /// True when `t` belongs to the low branch (`t ≤ T`; the switch point
    /// itself is served by the low branch).
    pub fn is_low(&self, t: f64) -> bool {
        t <= self.t_switch
    }

    /// One application of the core map.
    pub fn eval(&self, t: f64) -> f64 {
        if self.is_low(t) {
            self.branch_low.eval(t)
        } else {
            self.branch_high.eval(t)
        }
    }

    /// The system symbol recorded at a point: on the plus side the label of
    /// the dilation applied; on the minus side the label of the contraction
    /// whose inverse is applied.
    pub fn symbol_at(&self, t: f64) -> Symbol {
        match (self.side, self.is_low(t)) {
            (Side::Plus, true) => Symbol::D1,
            (Side::Plus, false) => Symbol::D2,
            (Side::Minus, true) => Symbol::C3,
            (Side::Minus, false) => Symbol::C4,
        }
    }

    /// Log-slope of the branch serving `t`.
    pub fn log_slope_at(&self, t: f64) -> f64 {
        if self.is_low(t) {
            self.branch_low.slope.ln()
        } else {
            self.branch_high.slope.ln()
        }
    }
}

/// The interval `[branch_high(T), branch_low(T)]` carrying the stationary
/// density, checked to be forward-invariant.
pub fn support_formula(cm: &CoreMap) -> Result<Interval> {
    let lo = cm.branch_high.eval(cm.t_switch);
    let hi = cm.branch_low.eval(cm.t_switch);
    if lo >= hi {
        return Err(Error::hypothesis(format!(
            "support formula degenerate: [{lo}, {hi}]"
        )));
    }
    let support = Interval::new(lo, hi)?;
    // Invariance: the low branch acts on [lo, T], the high branch on (T, hi];
    // both pieces must land inside the support again (up to rounding).
    let tol = 1e-12;
    let t = cm.t_switch;
    let low_ok = cm.branch_low.eval(lo) >= lo - tol && cm.branch_low.eval(t) <= hi + tol;
    let high_ok = cm.branch_high.eval(t) >= lo - tol && cm.branch_high.eval(hi) <= hi + tol;
    if !(support.contains_interior(t) && low_ok && high_ok) {
        return Err(Error::hypothesis(format!(
            "support candidate {support} is not invariant under the core map"
        )));
    }
    Ok(support)
}

/// Row-stochastic transition matrix between uniform bins of the domain.
///
/// Rows are stored sparsely; with affine branches each row has a handful of
/// entries. Constructed via [`ulam_matrix`] or, for synthetic operators in
/// tests, [`UlamOperator::from_rows`].
#[derive(Clone, Debug)]
pub struct UlamOperator {
    domain: Interval,
    bin_width: f64,
    rows: Vec<Vec<(usize, f64)>>,
}

/// Transition mass from each bin to each bin under one core-map step.
///
/// Entry `(i, j)` is `Leb(bin_i ∩ φ⁻¹(bin_j)) / Leb(bin_i)`. The
/// intersections are carried out in bin-index coordinates: a source bin is
/// `[i, i+1]`, its image spans `slope` index units, and interior target bins
/// receive exactly `1/slope`. The last entry of each branch piece closes the
/// piece total by subtraction, so a row sums to 1 up to a few units in the
/// last place independently of how small the bins are.
pub fn ulam_matrix(cm: &CoreMap, n_bins: usize) -> Result<UlamOperator> {
    if n_bins < 16 {
        return Err(Error::invalid(format!(
            "Ulam discretization needs at least 16 bins, got {n_bins}"
        )));
    }
    let lo = cm.domain.lo();
    let width = cm.domain.length() / n_bins as f64;
    let t_index = (cm.t_switch - lo) / width;
    let mut rows = Vec::with_capacity(n_bins);
    for i in 0..n_bins {
        // Split the bin at the branch boundary; the single point T itself
        // carries no Lebesgue mass, so closed/open bookkeeping is free.
        // Pieces are kept in bin-local coordinates `[u, v] ⊆ [0, 1]`.
        let t_local = t_index - i as f64;
        let mut pieces: Vec<(f64, f64, &Affine)> = Vec::with_capacity(2);
        if t_local >= 1.0 {
            pieces.push((0.0, 1.0, &cm.branch_low));
        } else if t_local <= 0.0 {
            pieces.push((0.0, 1.0, &cm.branch_high));
        } else {
            pieces.push((0.0, t_local, &cm.branch_low));
            pieces.push((t_local, 1.0, &cm.branch_high));
        }
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(4);
        for (u, v, branch) in pieces {
            if v <= u {
                continue;
            }
            // Image endpoints in global index coordinates.
            let gu = (branch.eval(lo + (i as f64 + u) * width) - lo) / width;
            let gv = (branch.eval(lo + (i as f64 + v) * width) - lo) / width;
            let j_first = (gu.floor() as isize).clamp(0, n_bins as isize - 1) as usize;
            let j_last = (gv.floor() as isize).clamp(0, n_bins as isize - 1) as usize;
            let mut entries: Vec<(usize, f64)> = Vec::with_capacity(3);
            for j in j_first..=j_last {
                let overlap = (gv.min((j + 1) as f64) - gu.max(j as f64)).max(0.0);
                if overlap > 0.0 {
                    entries.push((j, overlap / branch.slope));
                }
            }
            // Close the piece exactly: its total mass is its share of the
            // source bin, so the final entry absorbs all rounding. A sliver
            // entry whose true mass is below rounding noise would close to a
            // negative value; drop it and close the previous one instead.
            let total = v - u;
            while !entries.is_empty() {
                let partial: f64 = entries[..entries.len() - 1].iter().map(|(_, m)| m).sum();
                let residual = total - partial;
                if residual > 0.0 {
                    entries.last_mut().expect("nonempty").1 = residual;
                    break;
                }
                entries.pop();
            }
            for (j, mass) in entries {
                match row.iter_mut().find(|(col, _)| *col == j) {
                    Some((_, m)) => *m += mass,
                    None => row.push((j, mass)),
                }
            }
        }
        row.sort_by_key(|(j, _)| *j);
        rows.push(row);
    }
    UlamOperator::from_rows(cm.domain, rows)
}

impl UlamOperator {
    /// Wraps explicit sparse rows, enforcing row-stochasticity.
    pub fn from_rows(domain: Interval, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("operator needs at least one bin"));
        }
        for (i, row) in rows.iter().enumerate() {
            let mut sum = 0.0;
            for &(j, m) in row {
                if j >= n {
                    return Err(Error::invalid(format!(
                        "row {i} references column {j} of an {n}-bin operator"
                    )));
                }
                if !(m >= 0.0) {
                    return Err(Error::invalid(format!(
                        "row {i} has a negative entry {m} in column {j}"
                    )));
                }
                sum += m;
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!(
                    "row {i} sums to {sum}, not 1 within 1e-12"
                )));
            }
        }
        let bin_width = domain.length() / n as f64;
        Ok(UlamOperator {
            domain,
            bin_width,
            rows,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.rows.len()
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    /// Left action `ρ ↦ ρP` on bin mass vectors.
    pub fn apply_left(&self, rho: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows.len()];
        for (i, row) in self.rows.iter().enumerate() {
            let mass = rho[i];
            if mass == 0.0 {
                continue;
            }
            for &(j, p) in row {
                out[j] += mass * p;
            }
        }
        out
    }
}

/// A stationary bin-mass vector of an Ulam operator.
#[derive(Clone, Debug, Serialize)]
pub struct AcimDensity {
    lo: f64,
    bin_width: f64,
    masses: Vec<f64>,
    support_estimate: Interval,
    residual: f64,
    iterations: usize,
}

/// Power-iterates `ρ ↦ ρP` from the uniform start until the L1 step
/// residual drops below `tol`.
pub fn stationary_density(op: &UlamOperator, tol: f64, max_iter: usize) -> Result<AcimDensity> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let n = op.n_bins();
    let mut rho = vec![1.0 / n as f64; n];
    let mut residual = f64::INFINITY;
    for iter in 1..=max_iter {
        let mut next = op.apply_left(&rho);
        let total: f64 = next.iter().sum();
        for m in &mut next {
            *m /= total;
        }
        residual = rho.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        rho = next;
        if residual < tol {
            let support_estimate = support_of_masses(&rho, op.domain().lo(), op.bin_width())?;
            return Ok(AcimDensity {
                lo: op.domain().lo(),
                bin_width: op.bin_width(),
                masses: rho,
                support_estimate,
                residual,
                iterations: iter,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

fn support_of_masses(masses: &[f64], lo: f64, bin_width: f64) -> Result<Interval> {
    let first = masses.iter().position(|&m| m > SUPPORT_THRESHOLD);
    let last = masses.iter().rposition(|&m| m > SUPPORT_THRESHOLD);
    match (first, last) {
        (Some(a), Some(b)) => {
            Interval::new(lo + a as f64 * bin_width, lo + (b + 1) as f64 * bin_width)
        }
        _ => Err(Error::hypothesis(
            "density has no bin above the support threshold".to_string(),
        )),
    }
}

impl AcimDensity {
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn n_bins(&self) -> usize {
        self.masses.len()
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn support_estimate(&self) -> Interval {
        self.support_estimate
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// The density as a histogram on its own grid.
    pub fn to_histogram(&self) -> Histogram {
        Histogram::new(self.lo, self.bin_width, self.masses.clone()).expect("density grid is valid")
    }

    /// L1 distance to another density on the identical grid.
    pub fn l1(&self, other: &AcimDensity) -> Result<f64> {
        self.to_histogram().l1(&other.to_histogram())
    }
}

/// A sampled core-map orbit together with its branch itinerary.
///
/// `values[k]` is the orbit position before step `k`; `word[k]` is the
/// symbol recorded at that position, so both have the same length and the
/// final image is not stored.
#[derive(Clone, Debug, PartialEq)]
pub struct GenericRun {
    pub values: Vec<f64>,
    pub word: Word,
}

impl GenericRun {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The anchor `t0` the run was started from.
    pub fn anchor(&self) -> f64 {
        self.values[0]
    }
}

/// Iterates the core map `n` times from `t0`, recording the branch symbol at
/// each visited point.
pub fn sample_generic_orbit(cm: &CoreMap, t0: f64, n: usize) -> Result<GenericRun> {
    if n == 0 {
        return Err(Error::invalid("orbit sample needs at least one step"));
    }
    if !cm.domain.contains(t0) {
        return Err(Error::invalid(format!(
            "start value {t0} outside the core domain {}",
            cm.domain
        )));
    }
    let mut values = Vec::with_capacity(n);
    let mut symbols = Vec::with_capacity(n);
    let mut t = t0;
    for _ in 0..n {
        values.push(t);
        symbols.push(cm.symbol_at(t));
        t = cm.eval(t);
    }
    Ok(GenericRun {
        values,
        word: Word::new(symbols)?,
    })
}

/// Birkhoff lift of a generic core run to a window/fiber measure of depth `m`.
///
/// On the plus side the run is already a forward orbit of the full system:
/// symbol `word[k]` is applied at `values[k]`, and the lift is the forward
/// average over the `len − 2m` interior windows.
///
/// On the minus side the run follows the inverted contractions, i.e. the
/// backward dynamics. In forward time the contraction symbol applied between
/// consecutive positions is determined by the landing point, so reversing
/// the run couples `values[k+1]` with `word[k]`: the lift uses the reversed
/// fiber tail `values[1..]` against the reversed symbol prefix
/// `word[..len−1]`. Reversing both slices wholesale would shift that pairing
/// by one step and visibly distort window/fiber cells.
pub fn lift_measure(cm: &CoreMap, run: &GenericRun, m: usize) -> Result<EmpiricalMeasure> {
    let len = run.len();
    match cm.side {
        Side::Plus => {
            let n = len
                .checked_sub(2 * m)
                .filter(|n| *n >= 1)
                .ok_or_else(|| too_short(len, m))?;
            birkhoff_forward(run.word.symbols(), &run.values, n, m)
        }
        Side::Minus => {
            let usable = len - 1;
            let n = usable
                .checked_sub(2 * m)
                .filter(|n| *n >= 1)
                .ok_or_else(|| too_short(len, m))?;
            let fibers: Vec<f64> = run.values[1..].iter().rev().copied().collect();
            let symbols: Vec<Symbol> = run.word.symbols()[..usable].iter().rev().copied().collect();
            birkhoff_forward(&symbols, &fibers, n, m)
        }
    }
}

fn too_short(len: usize, m: usize) -> Error {
    Error::invalid(format!(
        "run of length {len} cannot supply full windows of depth {m}"
    ))
}
