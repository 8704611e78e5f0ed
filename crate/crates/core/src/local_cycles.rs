//! Linear model of a two-saddle cycle with an orientation twist.
//!
//! Two hyperbolic fixed points `p` and `q` sit in linearizing charts over
//! boxes of half-width `1 + δ`. Both charts share a strong stable
//! direction (`y`, rate 1/4) and a strong unstable direction (`z`, rate
//! 4), while the centre direction (`x`) doubles at `p` and halves at `q`:
//! the saddles disagree in index along the centre. Two connections close
//! the loop between them:
//!
//! * the **centre connection** glues the exit section `x ≈ 1` of `p` to
//!   the entry section `x ≈ −1` of `q` in `n_trans` steps, carrying the
//!   centre offset rigidly and trading the strong pair by `4^n`;
//! * the **strong connection** glues the strong-unstable exit `z ≈ −1` of
//!   `q` to the strong-stable entry `y ≈ −1` of `p` in `m_trans` steps,
//!   multiplying the centre coordinate by the twist sign.
//!
//! The twist decides everything. When it preserves the centre sign, a
//! point returning to the `p` chart lands on the side whose doublings run
//! away from the exit section: nothing closes, and the only orbits that
//! stay in the model for all time are the saddles and the two connecting
//! orbits. [`classify_point`] certifies escape for everything else, and
//! [`classify_sweep`] checks that verdict over random samples. When the
//! twist reverses the sign, the centre coordinate climbs back to the exit
//! section and [`find_twisted_periodic`] solves the closed orbit exactly:
//! it spends the same number `k` of steps near each saddle — the centre
//! coordinate moves by exact powers of two, so the blocks cannot
//! disbalance — which makes its centre exponent vanish identically while
//! its distribution approaches the balanced mixture of the two saddle
//! point masses at rate `1/k` ([`midpoint_distance`]). This is the
//! smallest mechanism by which closed orbits accumulate on a neutral
//! distribution that no single hyperbolic orbit can realize.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::measures::{dist, Atom, EmpiricalMeasure, PartitionSpec};

/// Coordinate tolerance for membership in the characterized invariant set.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Largest acceptable per-step defect of an assembled closed cycle.
pub const CLOSURE_TOL: f64 = 1e-10;

/// Cap on the per-saddle block length of a closed cycle; far below this the
/// solved offsets already underflow, so larger requests are mistakes.
const MAX_BLOCK: usize = 500;

fn pow2(e: i32) -> f64 {
    2f64.powi(e)
}

fn pow4(e: i32) -> f64 {
    2f64.powi(2 * e)
}

/// Sign carried by the strong connection from `q` back to `p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Twist {
    /// The return connection preserves the sign of the centre coordinate.
    Preserving,
    /// The return connection reverses it.
    Reversing,
}

impl Twist {
    /// The twist as a factor on the centre coordinate.
    pub fn sign(self) -> f64 {
        match self {
            Twist::Preserving => 1.0,
            Twist::Reversing => -1.0,
        }
    }

    /// Parses the conventional `±1` encoding.
    pub fn from_sign(sign: i64) -> Result<Twist> {
        match sign {
            1 => Ok(Twist::Preserving),
            -1 => Ok(Twist::Reversing),
            other => Err(Error::invalid(format!(
                "twist must be +1 or -1, got {other}"
            ))),
        }
    }
}

/// Which saddle's linearizing chart a point is expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Chart {
    /// Saddle `p`: the centre coordinate doubles per step.
    P,
    /// Saddle `q`: the centre coordinate halves per step.
    Q,
}

/// A model point: chart coordinates plus crossing bookkeeping.
///
/// While a point crosses between the charts its coordinates stay frozen at
/// the collar point that started the crossing and only the phase counter
/// advances: the connections are specified as composites of `n_trans`
/// (centre) or `m_trans` (strong) steps, with nothing to evaluate in
/// between.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChartPoint {
    chart: Chart,
    coords: [f64; 3],
    transit_phase: usize,
}

impl ChartPoint {
    /// Point in the chart at `p`.
    pub fn p(x: f64, y: f64, z: f64) -> ChartPoint {
        ChartPoint {
            chart: Chart::P,
            coords: [x, y, z],
            transit_phase: 0,
        }
    }

    /// Point in the chart at `q`.
    pub fn q(x: f64, y: f64, z: f64) -> ChartPoint {
        ChartPoint {
            chart: Chart::Q,
            coords: [x, y, z],
            transit_phase: 0,
        }
    }

    fn transit(from: Chart, coords: [f64; 3], phase: usize) -> ChartPoint {
        ChartPoint {
            chart: from,
            coords,
            transit_phase: phase,
        }
    }

    /// Chart the coordinates refer to; for a crossing point, the chart the
    /// crossing departed from.
    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn coords(&self) -> [f64; 3] {
        self.coords
    }

    /// Steps already taken along the current crossing; zero inside a chart.
    pub fn transit_phase(&self) -> usize {
        self.transit_phase
    }

    pub fn in_transit(&self) -> bool {
        self.transit_phase > 0
    }

    /// Sup norm of the chart coordinates.
    pub fn sup_norm(&self) -> f64 {
        self.coords.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// Measure label: `"1"` in the `p` chart, `"2"` in the `q` chart,
    /// `"3"` mid-crossing.
    fn window(&self) -> &'static str {
        if self.in_transit() {
            "3"
        } else {
            match self.chart {
                Chart::P => "1",
                Chart::Q => "2",
            }
        }
    }
}

/// Geometry of the cycle model: twist, collar half-width, and the lengths
/// of the two connections.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CycleModel {
    twist: Twist,
    delta: f64,
    n_trans: usize,
    m_trans: usize,
}

impl CycleModel {
    /// Collar half-width used throughout unless stated otherwise.
    pub const DEFAULT_DELTA: f64 = 0.05;

    /// Validates the geometry.
    ///
    /// The collar half-width must stay in `(0, 0.25]` so the collars clear
    /// the saddles and both connection images land inside the chart boxes
    /// (the strong connection stretches its `z` collar by 4).
    pub fn new(twist: Twist, delta: f64, n_trans: usize, m_trans: usize) -> Result<CycleModel> {
        if !(delta > 0.0 && delta <= 0.25) {
            return Err(Error::invalid(format!(
                "collar half-width must lie in (0, 0.25], got {delta}"
            )));
        }
        if n_trans == 0 || m_trans == 0 || n_trans > 32 || m_trans > 32 {
            return Err(Error::invalid(format!(
                "connection lengths must lie in 1..=32, got {n_trans} and {m_trans}"
            )));
        }
        Ok(CycleModel {
            twist,
            delta,
            n_trans,
            m_trans,
        })
    }

    /// Model with the default collar half-width and single-step connections.
    pub fn standard(twist: Twist) -> CycleModel {
        CycleModel::new(twist, Self::DEFAULT_DELTA, 1, 1).expect("default geometry is valid")
    }

    pub fn twist(&self) -> Twist {
        self.twist
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Length of the centre connection from `p` to `q`.
    pub fn n_trans(&self) -> usize {
        self.n_trans
    }

    /// Length of the strong connection from `q` to `p`.
    pub fn m_trans(&self) -> usize {
        self.m_trans
    }

    /// Half-width of the chart validity boxes.
    pub fn box_halfwidth(&self) -> f64 {
        1.0 + self.delta
    }

    /// Smallest per-saddle block length whose closed cycle stays inside the
    /// collars. The binding constraint at moderate widths is the centre
    /// exit `2^{−k} ≤ δ`; the strong offsets shrink like `4^{−k}` and
    /// follow along.
    pub fn k_min(&self) -> usize {
        (1..=MAX_BLOCK)
            .find(|&k| self.twisted_feasible(k))
            .expect("offsets shrink geometrically, so some block below the cap fits")
    }

    /// Solved strong offsets of the closed cycle with block length `k`:
    /// the `y` offset at the exit section of `p` and the `z` offset `ζ` at
    /// the strong departure section of `q`.
    fn twisted_offsets(&self, k: usize) -> (f64, f64) {
        let e = (self.n_trans + 2 * k + 1) as i32;
        let d = 1.0 - pow4(-e);
        (-pow4(-(k as i32)) / d, -pow4(-e) / d)
    }

    fn twisted_feasible(&self, k: usize) -> bool {
        let (y0, zeta) = self.twisted_offsets(k);
        let z0 = -pow4(-((self.n_trans + k) as i32))
            / (1.0 - pow4(-((self.n_trans + 2 * k + 1) as i32)));
        pow2(-(k as i32)) <= self.delta
            && y0.abs() <= self.delta
            && z0.abs() <= self.delta
            && zeta.abs() <= self.delta
    }

    fn in_box(&self, c: [f64; 3]) -> bool {
        let b = self.box_halfwidth();
        c.iter().all(|v| v.abs() <= b)
    }

    /// Exit collar of `p`, around `(1, 0, 0)`.
    fn in_p_collar(&self, c: [f64; 3]) -> bool {
        (c[0] - 1.0).abs() <= self.delta && c[1].abs() <= self.delta && c[2].abs() <= self.delta
    }

    /// Strong departure collar of `q`, around `(0, 0, −1)`.
    fn in_q_collar(&self, c: [f64; 3]) -> bool {
        c[0].abs() <= self.delta && c[1].abs() <= self.delta && (c[2] + 1.0).abs() <= self.delta
    }

    /// Image of the `p` exit collar in the `q` chart, around `(−1, 0, 0)`.
    fn in_centre_arrival(&self, c: [f64; 3]) -> bool {
        let s = pow4(self.n_trans as i32);
        (c[0] + 1.0).abs() <= self.delta
            && c[1].abs() <= self.delta / s
            && c[2].abs() <= self.delta * s
    }

    /// Image of the `q` departure collar in the `p` chart, around `(0, −1, 0)`.
    fn in_strong_arrival(&self, c: [f64; 3]) -> bool {
        c[0].abs() <= self.delta
            && (c[1] + 1.0).abs() <= self.delta / 4.0
            && c[2].abs() <= 4.0 * self.delta
    }

    fn start_crossing(&self, from: Chart, coords: [f64; 3]) -> ChartPoint {
        let steps = match from {
            Chart::P => self.n_trans,
            Chart::Q => self.m_trans,
        };
        if steps == 1 {
            self.complete_crossing(from, coords)
        } else {
            ChartPoint::transit(from, coords, 1)
        }
    }

    fn complete_crossing(&self, from: Chart, c: [f64; 3]) -> ChartPoint {
        match from {
            // The centre offset rides along unchanged: 1 + x̃ arrives at
            // −1 + x̃, while the strong pair trades a factor 4^n.
            Chart::P => {
                let s = pow4(self.n_trans as i32);
                ChartPoint::q(c[0] - 2.0, c[1] / s, c[2] * s)
            }
            // The strong exit offset 1 + z̃ arrives at the strong entry as
            // −1 + z̃·…; the centre coordinate picks up the twist sign.
            Chart::Q => ChartPoint::p(
                self.twist.sign() * c[0],
                -1.0 + c[1] / 4.0,
                4.0 * (c[2] + 1.0),
            ),
        }
    }

    fn invert_centre_crossing(&self, c: [f64; 3]) -> ChartPoint {
        let s = pow4(self.n_trans as i32);
        ChartPoint::p(c[0] + 2.0, c[1] * s, c[2] / s)
    }

    fn invert_strong_crossing(&self, c: [f64; 3]) -> ChartPoint {
        ChartPoint::q(
            self.twist.sign() * c[0],
            4.0 * (c[1] + 1.0),
            c[2] / 4.0 - 1.0,
        )
    }
}

/// Result of advancing a model point by one step in either direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum StepResult {
    /// The next point.
    Inside(ChartPoint),
    /// The point lies outside every chart box and crossing, where the
    /// model no longer prescribes a map.
    Escaped,
}

impl StepResult {
    /// The contained point, if any.
    pub fn point(self) -> Option<ChartPoint> {
        match self {
            StepResult::Inside(pt) => Some(pt),
            StepResult::Escaped => None,
        }
    }
}

/// One forward step of the model.
///
/// A point inside a collar starts the corresponding crossing, a point
/// elsewhere inside its chart box moves by the saddle map, and anything
/// else has left the region where the model is defined. Crossing points
/// advance their phase until the composite connection applies.
pub fn cycle_step(model: &CycleModel, pt: ChartPoint) -> StepResult {
    if pt.transit_phase > 0 {
        let steps = match pt.chart {
            Chart::P => model.n_trans,
            Chart::Q => model.m_trans,
        };
        return StepResult::Inside(if pt.transit_phase + 1 < steps {
            ChartPoint::transit(pt.chart, pt.coords, pt.transit_phase + 1)
        } else {
            model.complete_crossing(pt.chart, pt.coords)
        });
    }
    let c = pt.coords;
    match pt.chart {
        Chart::P => {
            if model.in_p_collar(c) {
                StepResult::Inside(model.start_crossing(Chart::P, c))
            } else if model.in_box(c) {
                StepResult::Inside(ChartPoint::p(2.0 * c[0], c[1] / 4.0, 4.0 * c[2]))
            } else {
                StepResult::Escaped
            }
        }
        Chart::Q => {
            if model.in_q_collar(c) {
                StepResult::Inside(model.start_crossing(Chart::Q, c))
            } else if model.in_box(c) {
                StepResult::Inside(ChartPoint::q(c[0] / 2.0, c[1] / 4.0, 4.0 * c[2]))
            } else {
                StepResult::Escaped
            }
        }
    }
}

/// One backward step of the model.
///
/// Undoes [`cycle_step`]: points in a connection's arrival set return
/// through the crossing, other chart points invert the saddle map. A point
/// whose only saddle preimage sits in a collar has no model history at all
/// — the collar's forward step is the crossing — and escapes backward.
pub fn cycle_step_back(model: &CycleModel, pt: ChartPoint) -> StepResult {
    if pt.transit_phase > 0 {
        return StepResult::Inside(if pt.transit_phase == 1 {
            ChartPoint {
                chart: pt.chart,
                coords: pt.coords,
                transit_phase: 0,
            }
        } else {
            ChartPoint::transit(pt.chart, pt.coords, pt.transit_phase - 1)
        });
    }
    let c = pt.coords;
    if !model.in_box(c) {
        return StepResult::Escaped;
    }
    match pt.chart {
        Chart::P => {
            if model.in_strong_arrival(c) {
                let entry = model.invert_strong_crossing(c);
                StepResult::Inside(if model.m_trans == 1 {
                    entry
                } else {
                    ChartPoint::transit(Chart::Q, entry.coords, model.m_trans - 1)
                })
            } else {
                let pre = [c[0] / 2.0, 4.0 * c[1], c[2] / 4.0];
                if model.in_p_collar(pre) {
                    StepResult::Escaped
                } else {
                    StepResult::Inside(ChartPoint::p(pre[0], pre[1], pre[2]))
                }
            }
        }
        Chart::Q => {
            if model.in_centre_arrival(c) {
                let entry = model.invert_centre_crossing(c);
                StepResult::Inside(if model.n_trans == 1 {
                    entry
                } else {
                    ChartPoint::transit(Chart::P, entry.coords, model.n_trans - 1)
                })
            } else {
                let pre = [2.0 * c[0], 4.0 * c[1], c[2] / 4.0];
                if model.in_q_collar(pre) {
                    StepResult::Escaped
                } else {
                    StepResult::Inside(ChartPoint::q(pre[0], pre[1], pre[2]))
                }
            }
        }
    }
}

/// Sup-norm distance from a point to the orbits that stay in the model for
/// all time: the saddles, the centre connection (non-negative centre axis
/// at `p`, non-positive centre axis at `q`), and the strong connection
/// (non-positive strong-unstable axis at `q`, non-positive strong-stable
/// axis at `p`).
pub fn characterized_distance(model: &CycleModel, pt: ChartPoint) -> f64 {
    let b = model.box_halfwidth();
    let c = pt.coords;
    match pt.chart {
        Chart::P => axis_distance(c, 0, 0.0, b).min(axis_distance(c, 1, -b, 0.0)),
        Chart::Q => axis_distance(c, 0, -b, 0.0).min(axis_distance(c, 2, -b, 0.0)),
    }
}

/// Sup-norm distance from `c` to the segment of the `axis` coordinate line
/// where the other coordinates vanish and the axis value lies in `[lo, hi]`.
fn axis_distance(c: [f64; 3], axis: usize, lo: f64, hi: f64) -> f64 {
    let mut d: f64 = (c[axis] - c[axis].clamp(lo, hi)).abs();
    for (i, v) in c.iter().enumerate() {
        if i != axis {
            d = d.max(v.abs());
        }
    }
    d
}

/// Relation of a point to the set of orbits that never leave the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    /// The forward orbit left the model after this many steps.
    EscapesForward(usize),
    /// The backward orbit left the model after this many steps.
    EscapesBackward(usize),
    /// Within [`MEMBERSHIP_TOL`] of the saddles or a connecting orbit.
    OnCharacterizedSet,
    /// No escape found within the step budget in either direction.
    Undecided,
}

/// Decides whether a point of the sign-preserving model escapes or lies on
/// the characterized invariant set, trying up to `max_iter` steps forward
/// and then backward. A point that does neither within the budget is
/// reported [`Verdict::Undecided`] rather than forced into a verdict.
///
/// # Errors
///
/// `InvalidInput` for the sign-reversing model, whose closed cycles make
/// the escape dichotomy false; see [`find_twisted_periodic`].
pub fn classify_point(model: &CycleModel, pt: ChartPoint, max_iter: usize) -> Result<Verdict> {
    if model.twist != Twist::Preserving {
        return Err(Error::invalid(
            "classification covers the preserving twist only: the reversing model keeps closed cycles, solved by find_twisted_periodic",
        ));
    }
    if characterized_distance(model, pt) <= MEMBERSHIP_TOL {
        return Ok(Verdict::OnCharacterizedSet);
    }
    let mut w = pt;
    for step in 1..=max_iter {
        match cycle_step(model, w) {
            StepResult::Escaped => return Ok(Verdict::EscapesForward(step)),
            StepResult::Inside(next) => w = next,
        }
    }
    let mut w = pt;
    for step in 1..=max_iter {
        match cycle_step_back(model, w) {
            StepResult::Escaped => return Ok(Verdict::EscapesBackward(step)),
            StepResult::Inside(next) => w = next,
        }
    }
    Ok(Verdict::Undecided)
}

/// Tally of [`classify_point`] verdicts over random samples.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct SweepReport {
    pub samples: usize,
    pub escapes_forward: usize,
    pub escapes_backward: usize,
    pub on_characterized_set: usize,
    pub undecided: usize,
    /// Largest escape time seen in either direction.
    pub max_escape_steps: usize,
}

impl SweepReport {
    /// True when every sample escaped in one direction or the other.
    pub fn all_escaped(&self) -> bool {
        self.escapes_forward + self.escapes_backward == self.samples
    }
}

/// Classifies `n_samples` points drawn uniformly from the two chart boxes,
/// resampling anything within `exclusion` of the characterized set.
///
/// For the sign-preserving model every accepted sample should escape; a
/// nonzero `undecided` count means the step budget was too small for some
/// point hugging the invariant set.
pub fn classify_sweep(
    model: &CycleModel,
    n_samples: usize,
    max_iter: usize,
    exclusion: f64,
    rng: &mut impl Rng,
) -> Result<SweepReport> {
    if n_samples == 0 {
        return Err(Error::invalid("sweep needs at least one sample"));
    }
    if !(exclusion.is_finite() && exclusion > MEMBERSHIP_TOL) {
        return Err(Error::invalid(format!(
            "exclusion radius must exceed the membership tolerance {MEMBERSHIP_TOL:e}, got {exclusion}"
        )));
    }
    let b = model.box_halfwidth();
    let mut report = SweepReport {
        samples: n_samples,
        ..SweepReport::default()
    };
    for i in 0..n_samples {
        let chart = if i % 2 == 0 { Chart::P } else { Chart::Q };
        let pt = loop {
            let coords = [
                rng.gen_range(-b..b),
                rng.gen_range(-b..b),
                rng.gen_range(-b..b),
            ];
            let cand = match chart {
                Chart::P => ChartPoint::p(coords[0], coords[1], coords[2]),
                Chart::Q => ChartPoint::q(coords[0], coords[1], coords[2]),
            };
            if characterized_distance(model, cand) >= exclusion {
                break cand;
            }
        };
        match classify_point(model, pt, max_iter)? {
            Verdict::EscapesForward(s) => {
                report.escapes_forward += 1;
                report.max_escape_steps = report.max_escape_steps.max(s);
            }
            Verdict::EscapesBackward(s) => {
                report.escapes_backward += 1;
                report.max_escape_steps = report.max_escape_steps.max(s);
            }
            Verdict::OnCharacterizedSet => report.on_characterized_set += 1,
            Verdict::Undecided => report.undecided += 1,
        }
    }
    Ok(report)
}

/// Exactly assembled closed orbit of the sign-reversing model.
///
/// The orbit spends `k` saddle steps near each of `p` and `q` per period
/// `2k + n_trans + m_trans`. Its centre exponent vanishes identically and
/// its distribution approaches the balanced saddle mixture at rate `1/k`.
#[derive(Clone, Debug, Serialize)]
pub struct LocalPeriodicOrbit {
    model: CycleModel,
    k: usize,
    points: Vec<ChartPoint>,
    measure: EmpiricalMeasure,
    residual: f64,
}

impl LocalPeriodicOrbit {
    /// Saddle steps spent near each fixed point per period.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn period(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[ChartPoint] {
        &self.points
    }

    /// Distribution of the orbit: one atom per point, labelled `"1"` /
    /// `"2"` / `"3"` for the `p` chart, the `q` chart and crossings,
    /// fibered over the sup norm of the coordinates.
    pub fn measure(&self) -> &EmpiricalMeasure {
        &self.measure
    }

    /// Worst sup-norm defect of consecutive assembled points under one
    /// model step, the closing step included.
    pub fn closure_residual(&self) -> f64 {
        self.residual
    }

    /// Saddle steps taken at `p` and at `q` per period, excluding the
    /// connection steps. The centre coordinate forces the two counts to
    /// agree.
    pub fn block_counts(&self) -> (usize, usize) {
        let mut at_p = 0;
        let mut at_q = 0;
        for pt in &self.points {
            if pt.in_transit() {
                continue;
            }
            match pt.chart {
                Chart::P if !self.model.in_p_collar(pt.coords) => at_p += 1,
                Chart::Q if !self.model.in_q_collar(pt.coords) => at_q += 1,
                _ => {}
            }
        }
        (at_p, at_q)
    }

    /// Average per-step growth rate of the centre coordinate.
    pub fn center_exponent(&self) -> f64 {
        center_exponent_local(&self.model, &self.points)
            .expect("a periodic orbit has at least one point")
    }
}

/// Builds the closed orbit of the sign-reversing model with `k` saddle
/// steps in each chart, solving the return map in closed form.
///
/// The centre coordinate forces perfectly balanced blocks: it leaves the
/// `q` collar at `−2^{−k}`, the twist flips it to `+2^{−k}`, and exactly
/// `k` doublings return it to the exit section at `1`. The strong offsets
/// at the exit section then solve two geometric series,
/// `y₀ = −4^{−k} / (1 − 4^{−(n+2k+1)})` and
/// `z₀ = −4^{−(n+k)} / (1 − 4^{−(n+2k+1)})`.
///
/// Points are assembled from these closed forms with exact power-of-two
/// scalings rather than by iterating [`cycle_step`]: the return map
/// expands the strong-unstable offset by `4^{n+2k+1}`, so forward
/// iteration cancels the collar offset `1 + z` below machine precision and
/// cannot re-close the cycle beyond small `k`. The expanding chain is
/// instead seeded analytically at the strong crossing, and the reported
/// residual — the worst sup-norm defect of the assembled sequence under
/// one model step — stays at the rounding level of the two non-dyadic
/// constants for every feasible `k`.
///
/// # Errors
///
/// `InvalidInput` when the twist preserves the centre sign (the returning
/// coordinate then doubles away from the exit section and no cycle
/// closes), and when `k` lies below [`CycleModel::k_min`] or above an
/// internal cap.
pub fn find_twisted_periodic(model: &CycleModel, k: usize) -> Result<LocalPeriodicOrbit> {
    if model.twist != Twist::Reversing {
        return Err(Error::invalid(
            "closed cycles need the reversing twist: a preserved centre sign re-enters the p chart on the side that doubles away from the exit section",
        ));
    }
    if k > MAX_BLOCK {
        return Err(Error::invalid(format!(
            "block length {k} exceeds the cap {MAX_BLOCK}; the solved offsets underflow long before"
        )));
    }
    let k_min = model.k_min();
    if k < k_min {
        return Err(Error::invalid(format!(
            "block length {k} infeasible: the cycle leaves the collars (smallest feasible block is {k_min} at collar half-width {})",
            model.delta
        )));
    }

    let n = model.n_trans;
    let m = model.m_trans;
    let (y0, zeta) = model.twisted_offsets(k);
    let z0 = -pow4(-((n + k) as i32)) / (1.0 - pow4(-((n + 2 * k + 1) as i32)));
    let period = 2 * k + n + m;
    let mut points = Vec::with_capacity(period);

    // Departure point on the exit section of p.
    let w0 = [1.0, y0, z0];
    points.push(ChartPoint::p(w0[0], w0[1], w0[2]));
    for phase in 1..n {
        points.push(ChartPoint::transit(Chart::P, w0, phase));
    }
    // k + 1 points descending through the q chart; the strong coordinates
    // scale by exact powers of four, so the collar arrival is the exact
    // orbit of the stored offsets.
    for j in 0..=k {
        points.push(ChartPoint::q(
            -pow2(-(j as i32)),
            y0 * pow4(-((n + j) as i32)),
            z0 * pow4((n + j) as i32),
        ));
    }
    let dq = *points.last().expect("q block is nonempty");
    for phase in 1..m {
        points.push(ChartPoint::transit(Chart::Q, dq.coords, phase));
    }
    // k points climbing back through the p chart. The y chain restarts at
    // the strong arrival near −1; the expanding z chain is seeded from the
    // solved departure offset ζ, which forward evaluation of 4·(z + 1)
    // would lose to cancellation.
    let y_entry = -1.0 + y0 * pow4(-((n + k + 1) as i32));
    for j in 0..k {
        points.push(ChartPoint::p(
            pow2(j as i32 - k as i32),
            y_entry * pow4(-(j as i32)),
            zeta * pow4(j as i32 + 1),
        ));
    }

    // Certify: every stored point steps onto the next stored point, and
    // the itinerary is the intended collar-to-collar loop.
    let mut residual = 0f64;
    for (i, &w) in points.iter().enumerate() {
        let next = points[(i + 1) % period];
        match cycle_step(model, w) {
            StepResult::Escaped => {
                return Err(Error::invalid(
                    "assembled cycle left the model region; solved offsets inconsistent",
                ));
            }
            StepResult::Inside(img) => {
                if img.chart != next.chart || img.transit_phase != next.transit_phase {
                    return Err(Error::invalid(
                        "assembled cycle broke its itinerary; solved offsets inconsistent",
                    ));
                }
                let defect = (0..3)
                    .map(|a| (img.coords[a] - next.coords[a]).abs())
                    .fold(0.0f64, f64::max);
                residual = residual.max(defect);
            }
        }
    }
    if residual > CLOSURE_TOL {
        return Err(Error::NoConvergence {
            iterations: period,
            residual,
        });
    }

    let weight = 1.0 / period as f64;
    let atoms = points
        .iter()
        .map(|pt| Atom::new(pt.window(), pt.sup_norm(), weight))
        .collect();
    let measure = EmpiricalMeasure::new(0, atoms)?;

    Ok(LocalPeriodicOrbit {
        model: *model,
        k,
        points,
        measure,
        residual,
    })
}

/// Average per-step growth rate of the centre coordinate along a cyclic
/// point sequence: `ln 2` per saddle step at `p`, `−ln 2` per saddle step
/// at `q`, and zero along both connections, which carry the centre
/// coordinate rigidly. Computed from the two step counts, so balanced
/// blocks give exactly zero.
pub fn center_exponent_local(model: &CycleModel, points: &[ChartPoint]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::invalid("centre exponent needs at least one point"));
    }
    let mut at_p: i64 = 0;
    let mut at_q: i64 = 0;
    for pt in points {
        if pt.in_transit() {
            continue;
        }
        match pt.chart {
            Chart::P if !model.in_p_collar(pt.coords) => at_p += 1,
            Chart::Q if !model.in_q_collar(pt.coords) => at_q += 1,
            _ => {}
        }
    }
    Ok((at_p - at_q) as f64 * std::f64::consts::LN_2 / points.len() as f64)
}

/// Bins used for distances between local-cycle distributions: chart label
/// crossed with sup-norm bins of width 0.25 spanning the chart boxes.
pub fn local_partition() -> PartitionSpec {
    PartitionSpec::new(
        0,
        0.25,
        Interval::new(0.0, 1.25).expect("static bounds are ordered"),
    )
    .expect("static partition is valid")
}

/// Mixture `t·δ_p + (1 − t)·δ_q` of the saddle point masses, in the same
/// labelling as [`LocalPeriodicOrbit::measure`].
pub fn saddle_mixture(t: f64) -> Result<EmpiricalMeasure> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!(
            "mixture weight must lie in [0, 1], got {t}"
        )));
    }
    let mut atoms = Vec::new();
    if t > 0.0 {
        atoms.push(Atom::new("1", 0.0, t));
    }
    if t < 1.0 {
        atoms.push(Atom::new("2", 0.0, 1.0 - t));
    }
    EmpiricalMeasure::new(0, atoms)
}

/// Distance from a closed cycle's distribution to the balanced saddle
/// mixture under [`local_partition`].
///
/// With single-step connections exactly five points per chart sit outside
/// the reference cell — the section points and their first neighbours —
/// so the distance comes out to `10 / period` and shrinks like `5/k`.
pub fn midpoint_distance(orbit: &LocalPeriodicOrbit) -> Result<f64> {
    dist(orbit.measure(), &saddle_mixture(0.5)?, &local_partition())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn preserving() -> CycleModel {
        CycleModel::standard(Twist::Preserving)
    }

    fn reversing() -> CycleModel {
        CycleModel::standard(Twist::Reversing)
    }

    fn step_ok(model: &CycleModel, pt: ChartPoint) -> ChartPoint {
        cycle_step(model, pt).point().expect("step stays inside")
    }

    #[test]
    fn model_rejects_bad_geometry() {
        assert!(CycleModel::new(Twist::Preserving, 0.0, 1, 1).is_err());
        assert!(CycleModel::new(Twist::Preserving, 0.3, 1, 1).is_err());
        assert!(CycleModel::new(Twist::Preserving, f64::NAN, 1, 1).is_err());
        assert!(CycleModel::new(Twist::Preserving, 0.05, 0, 1).is_err());
        assert!(CycleModel::new(Twist::Preserving, 0.05, 1, 0).is_err());
        assert!(CycleModel::new(Twist::Preserving, 0.05, 40, 1).is_err());
        assert!(Twist::from_sign(2).is_err());
        assert_eq!(Twist::from_sign(-1).unwrap(), Twist::Reversing);
        assert_eq!(Twist::from_sign(1).unwrap(), Twist::Preserving);
    }

    #[test]
    fn saddles_are_fixed_points() {
        let model = preserving();
        assert_eq!(
            step_ok(&model, ChartPoint::p(0.0, 0.0, 0.0)),
            ChartPoint::p(0.0, 0.0, 0.0)
        );
        assert_eq!(
            step_ok(&model, ChartPoint::q(0.0, 0.0, 0.0)),
            ChartPoint::q(0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn saddle_steps_scale_each_axis_exactly() {
        let model = preserving();
        assert_eq!(
            step_ok(&model, ChartPoint::p(0.01, 0.4, -0.002)),
            ChartPoint::p(0.02, 0.1, -0.008)
        );
        assert_eq!(
            step_ok(&model, ChartPoint::q(0.01, 0.4, -0.002)),
            ChartPoint::q(0.005, 0.1, -0.008)
        );
    }

    #[test]
    fn centre_crossing_carries_the_exit_collar_to_the_entry_section() {
        let model = preserving();
        assert_eq!(
            step_ok(&model, ChartPoint::p(1.02, 0.01, -0.003)),
            ChartPoint::q(1.02 - 2.0, 0.0025, -0.012)
        );

        // A two-step connection inserts one frozen crossing point and then
        // applies the composite with the 4^2 strong trade.
        let slow = CycleModel::new(Twist::Preserving, 0.05, 2, 1).unwrap();
        let mid = step_ok(&slow, ChartPoint::p(1.02, 0.01, -0.003));
        assert!(mid.in_transit());
        assert_eq!(mid.transit_phase(), 1);
        assert_eq!(mid.chart(), Chart::P);
        assert_eq!(mid.coords(), [1.02, 0.01, -0.003]);
        assert_eq!(
            step_ok(&slow, mid),
            ChartPoint::q(1.02 - 2.0, 0.01 / 16.0, -0.003 * 16.0)
        );
    }

    #[test]
    fn strong_crossing_maps_departure_to_arrival() {
        // The heteroclinic departure point (0, 0, −1) in the q chart lands
        // on (0, −1, 0) in the p chart for both twists.
        for model in [preserving(), reversing()] {
            assert_eq!(
                step_ok(&model, ChartPoint::q(0.0, 0.0, -1.0)),
                ChartPoint::p(0.0, -1.0, 0.0)
            );
        }

        // With a three-step connection the same arrival takes three steps.
        let slow = CycleModel::new(Twist::Preserving, 0.05, 1, 3).unwrap();
        let mut w = ChartPoint::q(0.0, 0.0, -1.0);
        for expected_phase in [1, 2] {
            w = step_ok(&slow, w);
            assert!(w.in_transit());
            assert_eq!(w.transit_phase(), expected_phase);
        }
        assert_eq!(step_ok(&slow, w), ChartPoint::p(0.0, -1.0, 0.0));
    }

    #[test]
    fn reversing_twist_flips_the_centre_sign_on_the_return() {
        let pt = ChartPoint::q(0.001, 0.0, -1.0);
        assert_eq!(step_ok(&preserving(), pt), ChartPoint::p(0.001, -1.0, 0.0));
        assert_eq!(step_ok(&reversing(), pt), ChartPoint::p(-0.001, -1.0, 0.0));
    }

    #[test]
    fn points_outside_the_boxes_escape() {
        let model = preserving();
        assert_eq!(
            cycle_step(&model, ChartPoint::p(1.2, 0.0, 0.0)),
            StepResult::Escaped
        );
        assert_eq!(
            cycle_step(&model, ChartPoint::q(0.0, 0.0, -1.2)),
            StepResult::Escaped
        );

        // A generic point rides the expansion out of the box in two steps.
        let mut w = ChartPoint::p(0.5, 0.3, 0.01);
        w = step_ok(&model, w);
        w = step_ok(&model, w);
        assert_eq!(cycle_step(&model, w), StepResult::Escaped);
    }

    #[test]
    fn backward_steps_invert_forward_steps() {
        for model in [
            preserving(),
            reversing(),
            CycleModel::new(Twist::Reversing, 0.05, 2, 3).unwrap(),
        ] {
            let starts = [
                ChartPoint::p(0.31, -0.22, 0.04),
                ChartPoint::p(1.01, 0.04, -0.02),
                ChartPoint::q(-0.9, 0.12, -0.007),
                ChartPoint::q(0.04, -0.03, -0.98),
                ChartPoint::q(0.0, 0.0, -1.0),
            ];
            for start in starts {
                let mut w = start;
                // Walk forward through any crossing, stopping once the raw
                // image leaves the boxes (it has no backward model history),
                // then invert the walk.
                let steps = 1 + model.n_trans().max(model.m_trans());
                let mut trail = vec![w];
                for _ in 0..steps {
                    let next = match cycle_step(&model, w) {
                        StepResult::Inside(next) => next,
                        StepResult::Escaped => break,
                    };
                    if !next.in_transit() && !model.in_box(next.coords()) {
                        break;
                    }
                    w = next;
                    trail.push(w);
                }
                assert!(trail.len() >= 2, "{model:?} {start:?}");
                for i in (1..trail.len()).rev() {
                    let back = cycle_step_back(&model, trail[i])
                        .point()
                        .expect("backward step stays inside");
                    assert_eq!(back.chart(), trail[i - 1].chart());
                    assert_eq!(back.transit_phase(), trail[i - 1].transit_phase());
                    for a in 0..3 {
                        assert!(
                            (back.coords()[a] - trail[i - 1].coords()[a]).abs() <= 1e-14,
                            "{model:?} {start:?} axis {a}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn backward_escapes_where_no_preimage_exists() {
        // The saddle image of a collar point is never realized: the collar's
        // forward step is the crossing instead.
        let model = preserving();
        let orphan = ChartPoint::p(1.96, 0.005, 0.04);
        assert_eq!(cycle_step_back(&model, orphan), StepResult::Escaped);
    }

    #[test]
    fn classification_requires_the_preserving_twist() {
        let err = classify_point(&reversing(), ChartPoint::p(0.3, 0.0, 0.0), 10).unwrap_err();
        assert!(err.to_string().contains("reversing"));
    }

    #[test]
    fn saddles_and_connections_are_characterized() {
        let model = preserving();
        let members = [
            ChartPoint::p(0.0, 0.0, 0.0),
            ChartPoint::q(0.0, 0.0, 0.0),
            ChartPoint::p(0.3, 0.0, 0.0),
            ChartPoint::p(1.04, 5e-10, -5e-10),
            ChartPoint::q(-0.7, 0.0, 0.0),
            ChartPoint::q(0.0, 0.0, -1.0),
            ChartPoint::p(0.0, -1.0, 0.0),
            ChartPoint::p(0.0, -0.37, 1e-10),
            ChartPoint::q(1e-10, -1e-10, -0.5),
        ];
        for pt in members {
            assert_eq!(
                classify_point(&model, pt, 500).unwrap(),
                Verdict::OnCharacterizedSet,
                "{pt:?}"
            );
        }
    }

    #[test]
    fn off_set_points_escape_in_some_direction() {
        let model = preserving();

        // Positive centre coordinate at q: bounded forward (it contracts
        // towards q), but the doubling history runs out of the box.
        assert!(matches!(
            classify_point(&model, ChartPoint::q(0.2, 0.0, 0.0), 500).unwrap(),
            Verdict::EscapesBackward(_)
        ));

        // Negative centre coordinate at p doubles out forward.
        assert!(matches!(
            classify_point(&model, ChartPoint::p(-0.3, 0.0, 0.0), 500).unwrap(),
            Verdict::EscapesForward(_)
        ));

        // Generic point: the strong expansion ejects it forward.
        assert!(matches!(
            classify_point(&model, ChartPoint::p(0.5, 0.3, 1e-4), 500).unwrap(),
            Verdict::EscapesForward(_)
        ));
    }

    #[test]
    fn tight_budgets_return_undecided() {
        let model = preserving();
        let slow = ChartPoint::p(0.5, 0.01, 1e-4);
        assert_eq!(classify_point(&model, slow, 2).unwrap(), Verdict::Undecided);
        assert_ne!(
            classify_point(&model, slow, 500).unwrap(),
            Verdict::Undecided
        );
    }

    #[test]
    fn sweep_reports_every_sample_escaping() {
        let model = preserving();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let report = classify_sweep(&model, 400, 500, 1e-3, &mut rng).unwrap();
        assert_eq!(report.samples, 400);
        assert!(report.all_escaped(), "{report:?}");
        assert_eq!(report.undecided, 0);
        assert_eq!(report.on_characterized_set, 0);
        assert!(report.max_escape_steps > 0 && report.max_escape_steps <= 500);
    }

    #[test]
    fn k_min_matches_the_collar_width() {
        assert_eq!(reversing().k_min(), 5);
        assert_eq!(
            CycleModel::new(Twist::Reversing, 0.1, 1, 1)
                .unwrap()
                .k_min(),
            4
        );
        assert_eq!(
            CycleModel::new(Twist::Reversing, 0.03, 1, 1)
                .unwrap()
                .k_min(),
            6
        );
        assert_eq!(
            CycleModel::new(Twist::Reversing, 0.25, 1, 1)
                .unwrap()
                .k_min(),
            2
        );
    }

    #[test]
    fn infeasible_blocks_and_wrong_twists_are_rejected() {
        let err = find_twisted_periodic(&reversing(), 4).unwrap_err();
        assert!(err.to_string().contains("smallest feasible block is 5"));
        let err = find_twisted_periodic(&preserving(), 8).unwrap_err();
        assert!(err.to_string().contains("reversing"));
    }

    #[test]
    fn twisted_cycle_closes_with_machine_precision() {
        let model = reversing();
        let orbit = find_twisted_periodic(&model, 5).unwrap();
        assert_eq!(orbit.period(), 12);
        assert_eq!(orbit.k(), 5);
        assert!(
            orbit.closure_residual() <= 1e-12,
            "{}",
            orbit.closure_residual()
        );
        assert_eq!(orbit.block_counts(), (5, 5));
        assert_eq!(orbit.center_exponent(), 0.0);

        // Departure point carries the solved offsets.
        let d = 1.0 - 0.25f64.powi(12);
        let w0 = orbit.points()[0];
        assert_eq!(w0.chart(), Chart::P);
        assert_eq!(w0.coords()[0], 1.0);
        assert_eq!(w0.coords()[1], -0.25f64.powi(5) / d);
        assert_eq!(w0.coords()[2], -0.25f64.powi(6) / d);

        // The centre coordinate walks exact powers of two down and back up.
        assert_eq!(orbit.points()[6].coords()[0], -0.03125);
        assert_eq!(orbit.points()[7].coords()[0], 0.03125);
        let charts: Vec<Chart> = orbit.points().iter().map(|p| p.chart()).collect();
        assert_eq!(charts[0], Chart::P);
        assert!(charts[1..=6].iter().all(|&c| c == Chart::Q));
        assert!(charts[7..].iter().all(|&c| c == Chart::P));
    }

    #[test]
    fn closure_residuals_stay_flat_across_blocks() {
        // The return map expands the strong offset by 4^(n+2k+1); the
        // closed-form assembly keeps the defect at rounding level anyway.
        let model = reversing();
        for k in [5, 9, 12, 20, 40, 100] {
            let orbit = find_twisted_periodic(&model, k).unwrap();
            assert!(
                orbit.closure_residual() <= 1e-12,
                "k = {k}: residual {}",
                orbit.closure_residual()
            );
        }
    }

    #[test]
    fn block_balance_bounds_the_residence_ratio() {
        let model = reversing();
        for k in 5..=40 {
            let orbit = find_twisted_periodic(&model, k).unwrap();
            let (at_p, at_q) = orbit.block_counts();
            assert_eq!(at_p, k);
            assert_eq!(at_q, k);
            let ratio = at_p as f64 / orbit.period() as f64;
            let slack = (model.n_trans() + model.m_trans()) as f64 / (2.0 * k as f64);
            assert!((ratio - 0.5).abs() <= slack, "k = {k}");
        }
    }

    #[test]
    fn distance_to_the_balanced_mixture_decreases_like_ten_over_period() {
        let model = reversing();
        let mut last = f64::INFINITY;
        for k in 5..=40 {
            let orbit = find_twisted_periodic(&model, k).unwrap();
            let d = midpoint_distance(&orbit).unwrap();
            let expected = 10.0 / orbit.period() as f64;
            assert!((d - expected).abs() <= 1e-12, "k = {k}: {d} vs {expected}");
            assert!(d < last, "k = {k}: {d} !< {last}");
            last = d;
        }
    }

    #[test]
    fn off_balance_mixtures_stay_separated() {
        let model = reversing();
        let skew = saddle_mixture(0.3).unwrap();
        let part = local_partition();
        for k in [5, 10, 20, 40] {
            let orbit = find_twisted_periodic(&model, k).unwrap();
            let d = dist(orbit.measure(), &skew, &part).unwrap();
            assert!(d >= 0.15, "k = {k}: {d}");
        }
    }

    #[test]
    fn synthetic_residencies_recover_the_saddle_rates() {
        let model = preserving();

        // Four saddle steps at p and nothing else: rate log 2, and the
        // distribution sits at distance 1/2 from the balanced mixture.
        let all_p: Vec<ChartPoint> = (0..4).map(|_| ChartPoint::p(0.3, 0.01, 0.0)).collect();
        assert_eq!(
            center_exponent_local(&model, &all_p).unwrap(),
            std::f64::consts::LN_2
        );
        let mu = EmpiricalMeasure::new(0, vec![Atom::new("1", 0.1, 1.0)]).unwrap();
        let d = dist(&mu, &saddle_mixture(0.5).unwrap(), &local_partition()).unwrap();
        assert!((d - 0.5).abs() <= 1e-15);

        // Balanced blocks cancel exactly, crossings contribute nothing.
        let balanced = vec![
            ChartPoint::p(0.3, 0.01, 0.0),
            ChartPoint::p(0.6, 0.01, 0.0),
            ChartPoint::transit(Chart::P, [1.0, 0.0, 0.0], 1),
            ChartPoint::q(-0.5, 0.01, -0.2),
            ChartPoint::q(-0.25, 0.01, -0.8),
        ];
        assert_eq!(center_exponent_local(&model, &balanced).unwrap(), 0.0);
        assert!(center_exponent_local(&model, &[]).is_err());
    }

    #[test]
    fn mixture_weights_are_validated() {
        assert!(saddle_mixture(1.2).is_err());
        assert!(saddle_mixture(-0.1).is_err());
        assert_eq!(saddle_mixture(0.0).unwrap().atoms().len(), 1);
        assert_eq!(saddle_mixture(1.0).unwrap().atoms().len(), 1);
        assert_eq!(saddle_mixture(0.5).unwrap().atoms().len(), 2);
    }
}
