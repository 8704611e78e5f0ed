//! Periodic orbits realizing prescribed mixtures of contracting and
//! expanding center behaviour.
//!
//! A segment point interpolates between one contracting and one expanding
//! reference measure: a word spends a fraction `s` of its period on
//! contraction labels and the rest on dilation labels. A hull point
//! generalizes this to any finite family of side measures by first
//! decomposing the target mixture into pairwise blocks (see
//! [`crate::convex_decomp`]) and realizing one block per pair.
//!
//! Assembly works in the word's net-contracting time direction and
//! interleaves anchored pairs: a contraction sub-run delivers the orbit onto
//! a known fiber value, and an expansion run is grown from exactly that
//! value. Expansion runs are kept short enough (about 110 symbols) that the
//! delivery precision of double arithmetic — roughly `1e-14` — still pins
//! the orbit through the whole run; a single uninterrupted dilation run of
//! length `n` would need its entry resolved to `0.8^n`, which no fixed-width
//! float can provide once `n` is large.
//!
//! Every constructed word is checked twice. [`solve_periodic`] finds the
//! fiber-periodic orbit, bounds how far the true orbit can sit from the
//! computed one by propagating the worst defect through the cycle's
//! expansion, and rejects the word when that bound leaves `J` or exceeds a
//! fixed budget. [`certify_quasi_hyperbolic`] then checks the three
//! prefix/suffix rate inequalities that make the orbit a quasi-hyperbolic
//! segment of rate `λ` inside a fixed strong-rate envelope.

use rand::Rng;

use crate::acim::{lift_measure, sample_generic_orbit, support_formula, CoreMap, GenericRun};
use crate::convex_decomp::{DecompInput, PairwiseDecomp, WEIGHT_SUM_TOL};
use crate::error::{Error, Result};
use crate::measures::{
    birkhoff_forward, compensated_sum, convex_combine, dist, EmpiricalMeasure, PartitionSpec,
};
use crate::skew_system::{chi_of_s, Affine, Side, SkewSystem};
use crate::symbol::{Symbol, Word};

/// Default strong-stable rate bound of the ambient cone field.
pub const DEFAULT_STRONG_STABLE: f64 = 0.2;
/// Default strong-unstable rate bound of the ambient cone field.
pub const DEFAULT_STRONG_UNSTABLE: f64 = 5.0;

/// Two multipliers agreeing with 1 within this margin leave no transverse
/// fixed fiber point worth solving for.
const NEUTRAL_TOL: f64 = 1e-9;
/// Per-step closure defect allowed on a solved periodic orbit, relative to
/// `1 + |t|`.
const DEFECT_TOL: f64 = 1e-12;
/// Largest admissible distance between the computed periodic orbit and the
/// exact one, after propagating defects through the cycle's expansion.
const SHADOW_TOL: f64 = 1e-2;
/// Longest expansion run a delivery point computed in double precision can
/// pin: the run entry is known to about `1e-14` and each step multiplies
/// that uncertainty by the expansion rate.
const EXP_RUN_MAX: usize = 110;
/// Extra samples kept in front of each contraction sub-run so its entry can
/// be matched against the previous expansion exit.
const ENTRY_SEARCH: usize = 192;

/// Rate data for a quasi-hyperbolicity check: the center rate `λ` and the
/// strong-rate envelope `(a_ss, a_uu)` the center directions must dominate.
#[derive(Clone, Copy, Debug)]
pub struct QuasiHypSpec {
    pub lambda: f64,
    pub strong_stable: f64,
    pub strong_unstable: f64,
}

impl QuasiHypSpec {
    /// Spec with the default strong-rate envelope.
    pub fn new(lambda: f64) -> Result<Self> {
        QuasiHypSpec::with_rates(lambda, DEFAULT_STRONG_STABLE, DEFAULT_STRONG_UNSTABLE)
    }

    pub fn with_rates(lambda: f64, strong_stable: f64, strong_unstable: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!(
                "rate λ must be positive, got {lambda}"
            )));
        }
        if !(strong_stable > 0.0 && strong_stable < 1.0) {
            return Err(Error::invalid(format!(
                "strong-stable rate must lie in (0,1), got {strong_stable}"
            )));
        }
        if !(strong_unstable > 1.0) || !strong_unstable.is_finite() {
            return Err(Error::invalid(format!(
                "strong-unstable rate must exceed 1, got {strong_unstable}"
            )));
        }
        Ok(QuasiHypSpec {
            lambda,
            strong_stable,
            strong_unstable,
        })
    }
}

/// Margins of the three quasi-hyperbolicity inequalities along one segment.
///
/// With `E_j = max(a_ss, slope_j)` the center-stable cone rate at step `j`
/// and `F_j = a_uu` the strong-unstable rate, the segment is λ-admissible
/// when every prefix contracts (`Σ_{j<k} ln E_j ≤ −kλ`), every suffix of the
/// strong-unstable cocycle expands (`Σ_{j≥k} ln F_j ≥ (n−k)λ`), and each
/// single step is dominated (`ln E_j − ln F_j ≤ −2λ`). Each stored margin is
/// the slack of the corresponding inequality; the segment passes when all
/// margins are non-negative.
#[derive(Clone, Debug)]
pub struct SegmentCertificate {
    pub lambda: f64,
    /// Slack of the prefix contraction inequality, indexed by `k − 1` for
    /// prefix length `k = 1..=n`.
    pub cond1_margins: Vec<f64>,
    /// Slack of the suffix expansion inequality, indexed by the suffix start
    /// `k = 0..n`.
    pub cond2_margins: Vec<f64>,
    /// Slack of the per-step domination inequality.
    pub cond3_margins: Vec<f64>,
    pub passed: bool,
}

impl SegmentCertificate {
    /// Least margin over all three conditions.
    pub fn worst_margin(&self) -> f64 {
        self.cond1_margins
            .iter()
            .chain(&self.cond2_margins)
            .chain(&self.cond3_margins)
            .fold(f64::INFINITY, |acc, &m| acc.min(m))
    }
}

/// Checks the three λ-rate inequalities along a sequence of center slopes.
///
/// `center_slopes` are the fiber derivatives in the time direction the
/// segment is traversed; a net-expanding word should be certified on its
/// reversed inverse slopes.
pub fn certify_quasi_hyperbolic(
    center_slopes: &[f64],
    spec: &QuasiHypSpec,
) -> Result<SegmentCertificate> {
    if center_slopes.is_empty() {
        return Err(Error::invalid(
            "certificate needs at least one center slope",
        ));
    }
    for (j, &sl) in center_slopes.iter().enumerate() {
        if !(sl > 0.0) || !sl.is_finite() {
            return Err(Error::invalid(format!(
                "center slope at step {j} must be positive and finite, got {sl}"
            )));
        }
    }
    let n = center_slopes.len();
    let lambda = spec.lambda;
    let ln_uu = spec.strong_unstable.ln();
    let log_e: Vec<f64> = center_slopes
        .iter()
        .map(|&sl| sl.max(spec.strong_stable).ln())
        .collect();

    let mut cond1_margins = Vec::with_capacity(n);
    let mut prefix = 0.0;
    for (k, &le) in log_e.iter().enumerate() {
        prefix += le;
        cond1_margins.push(-((k + 1) as f64) * lambda - prefix);
    }
    let cond2_margins: Vec<f64> = (0..n).map(|k| (n - k) as f64 * (ln_uu - lambda)).collect();
    let cond3_margins: Vec<f64> = log_e.iter().map(|&le| ln_uu - le - 2.0 * lambda).collect();

    let passed = cond1_margins
        .iter()
        .chain(&cond2_margins)
        .chain(&cond3_margins)
        .all(|&m| m >= 0.0);
    Ok(SegmentCertificate {
        lambda,
        cond1_margins,
        cond2_margins,
        cond3_margins,
        passed,
    })
}

/// Quantifier budget for approximating one mixture point at rate `λ`.
///
/// `epsilon_max` is the largest admissible closeness parameter and `n_min`
/// the shortest period for which the λ-rate construction is guaranteed to
/// go through; shorter words may still succeed and are merely flagged.
/// `ell` bounds the extra bridge symbols allowed between blocks.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct QuantifierSchedule {
    pub lambda: f64,
    pub epsilon_max: f64,
    pub n_min: usize,
    pub ell: usize,
}

/// Chooses `(λ, ε_max, N_min)` for the mixture `χ(s) = s·χ⁻ + (1−s)·χ⁺`.
///
/// The rate is `λ = safety·|χ(s)|`, capped below both side exponents and
/// below the domination budget `½(ln a_uu − max(χ⁺, |χ⁻|))` of the default
/// strong-rate envelope. The closeness budget keeps
/// `min(|χ⁻|, χ⁺) − 3ε − ε·max(|χ⁻|, χ⁺) > λ` with the same safety factor,
/// and `N_min = ⌈2/ε_max⌉`.
///
/// Only net-contracting mixtures are schedulable directly; for `χ(s) ≥ 0`
/// this returns an input error and the caller should schedule the
/// time-reversed data `(−χ⁺, −χ⁻, 1 − s)` instead.
pub fn schedule_quantifiers(
    chi_minus: f64,
    chi_plus: f64,
    s: f64,
    safety: f64,
) -> Result<QuantifierSchedule> {
    if !(safety > 0.0 && safety < 1.0) {
        return Err(Error::invalid(format!(
            "safety factor must lie in (0,1), got {safety}"
        )));
    }
    let chi = chi_of_s(chi_minus, chi_plus, s)?;
    if chi >= 0.0 {
        return Err(Error::invalid(format!(
            "mixture exponent χ({s}) = {chi} is not negative; schedule the reversed-time \
             data (−χ⁺, −χ⁻, 1−s) and build the word against the inverse maps"
        )));
    }
    let mag_max = chi_plus.max(-chi_minus);
    let mag_min = chi_plus.min(-chi_minus);
    let domination_cap = 0.5 * (DEFAULT_STRONG_UNSTABLE.ln() - mag_max);
    if domination_cap <= 0.0 {
        return Err(Error::hypothesis(format!(
            "side exponents up to {mag_max} violate domination by the strong-unstable \
             rate {DEFAULT_STRONG_UNSTABLE}"
        )));
    }
    let lambda = (safety * chi.abs())
        .min(safety * mag_min)
        .min(domination_cap);
    let epsilon_max = safety * (mag_min - lambda) / (3.0 + mag_max);
    let n_min = (2.0 / epsilon_max).ceil() as usize;
    Ok(QuantifierSchedule {
        lambda,
        epsilon_max,
        n_min,
        ell: 0,
    })
}

/// Lengths of the contraction and dilation blocks of a segment word:
/// `n⁻ = ⌊s·n⌋` clamped so both blocks are non-empty.
fn split_counts(s: f64, n_total: usize) -> Result<(usize, usize)> {
    if !s.is_finite() || !(s > 0.0 && s < 1.0) {
        return Err(Error::invalid(format!(
            "segment parameter s must lie strictly inside (0,1), got {s}"
        )));
    }
    if n_total < 2 {
        return Err(Error::invalid(format!(
            "segment word needs at least two symbols, got {n_total}"
        )));
    }
    let n_minus = ((s * n_total as f64).floor() as usize).clamp(1, n_total - 1);
    Ok((n_minus, n_total - n_minus))
}

/// Assembles a period-`n_total` segment word from two explicit side blocks.
///
/// The contraction part is the last `⌊s·n_total⌋` symbols of `minus_block`
/// (a forward-time word landing at its anchor) and the dilation part is the
/// first `n_total − ⌊s·n_total⌋` symbols of `plus_block`. If the plain
/// concatenation already carries a certified periodic orbit inside `J` it is
/// returned unchanged. Otherwise the landing point of the contraction part
/// is walked into `(0,1)` by at most `ell + ⌈ln |J| / ln λ_bound⌉` greedy
/// contraction steps and the dilation part is regrown from the actual
/// landing point, keeping the total length at `n_total`.
///
/// This single-pair layout is limited by double precision: the dilation
/// part must stay short enough (about [`EXP_RUN_MAX`] symbols) for the
/// orbit to remain certifiable, or [`solve_periodic`] rejects the result.
/// Longer mixtures should interleave anchored pairs as
/// [`approximate_segment_point`] does.
pub fn build_segment_word(
    sys: &SkewSystem,
    minus_block: &Word,
    plus_block: &Word,
    s: f64,
    n_total: usize,
    ell: usize,
) -> Result<Word> {
    let (n_minus, n_plus) = split_counts(s, n_total)?;
    if minus_block.len() < n_minus {
        return Err(Error::invalid(format!(
            "contraction itinerary has {} symbols but the split needs {n_minus}",
            minus_block.len()
        )));
    }
    if plus_block.len() < n_plus {
        return Err(Error::invalid(format!(
            "dilation itinerary has {} symbols but the split needs {n_plus}",
            plus_block.len()
        )));
    }
    let minus_part = &minus_block.symbols()[minus_block.len() - n_minus..];
    let plus_part = &plus_block.symbols()[..n_plus];
    if minus_part.iter().any(|sym| sym.is_dilation()) {
        return Err(Error::invalid(
            "contraction block must use labels 3 and 4 only",
        ));
    }
    if plus_part.iter().any(|sym| !sym.is_dilation()) {
        return Err(Error::invalid(
            "dilation block must use labels 1 and 2 only",
        ));
    }

    let direct = Word::concat(&[minus_part, plus_part])?;
    if solve_periodic(sys, &direct).is_ok() {
        return Ok(direct);
    }

    // The dilation block was anchored somewhere other than the contraction
    // block's landing point. Trace the actual landing point, bridge it into
    // (0,1) if needed, and regrow the dilation block from there.
    let mut t = sys.j().midpoint();
    for &sym in minus_part {
        t = sys.map(sym).eval(t);
    }
    let cap = ell
        + (sys.j().length().ln() / sys.lambda_bound().ln())
            .ceil()
            .max(0.0) as usize;
    let mut bridge = Vec::new();
    while !(0.0 < t && t < 1.0) {
        if bridge.len() >= cap {
            return Err(Error::hypothesis(format!(
                "bridge from fiber value {t} did not reach (0,1) within {cap} contraction steps"
            )));
        }
        let y3 = sys.map(Symbol::C3).eval(t);
        let y4 = sys.map(Symbol::C4).eval(t);
        let unit = |y: f64| 0.0 < y && y < 1.0;
        let (sym, y) = if unit(y3) {
            (Symbol::C3, y3)
        } else if unit(y4) || t < 0.0 {
            (Symbol::C4, y4)
        } else {
            (Symbol::C3, y3)
        };
        bridge.push(sym);
        t = y;
    }
    if n_plus <= bridge.len() {
        return Err(Error::invalid(format!(
            "dilation budget {n_plus} cannot absorb a bridge of {} symbols; increase n_total",
            bridge.len()
        )));
    }
    let regrown = sys.blender_itinerary(t, n_plus - bridge.len(), Side::Plus)?;
    let word = Word::concat(&[minus_part, &bridge, regrown.symbols()])?;
    solve_periodic(sys, &word)?;
    Ok(word)
}

/// A fiber-periodic orbit over a cyclic word, with its multiplier and the
/// certified bound on how far the exact orbit can sit from the computed one.
#[derive(Clone, Debug)]
pub struct PeriodicOrbit {
    word: Word,
    orbit: Vec<f64>,
    log_multiplier: f64,
    shadow_bound: f64,
}

impl PeriodicOrbit {
    pub fn word(&self) -> &Word {
        &self.word
    }

    pub fn period(&self) -> usize {
        self.word.len()
    }

    /// Fiber value at step 0.
    pub fn t_star(&self) -> f64 {
        self.orbit[0]
    }

    /// Fiber values at steps `0..period`; `h_{word[k]}(orbit[k])` equals
    /// `orbit[k+1 mod period]` within the solver defect.
    pub fn orbit(&self) -> &[f64] {
        &self.orbit
    }

    /// Derivative of the period-return map; may flush to 0 or ∞ for very
    /// long words, in which case `log_multiplier` stays informative.
    pub fn multiplier(&self) -> f64 {
        self.log_multiplier.exp()
    }

    pub fn log_multiplier(&self) -> f64 {
        self.log_multiplier
    }

    /// Per-step center exponent `log_multiplier / period`.
    pub fn mean_exponent(&self) -> f64 {
        self.log_multiplier / self.period() as f64
    }

    /// Certified distance bound between the stored orbit and the exact
    /// periodic orbit of the word.
    pub fn shadow_bound(&self) -> f64 {
        self.shadow_bound
    }

    /// The uniform window/fiber measure on the orbit, with depth-`m` windows
    /// read cyclically.
    pub fn measure(&self, depth: usize) -> Result<EmpiricalMeasure> {
        let p = self.period();
        let ext = p + 2 * depth;
        let mut symbols = Vec::with_capacity(ext);
        let mut fibers = Vec::with_capacity(ext);
        for j in 0..ext {
            let k = (j as isize - depth as isize).rem_euclid(p as isize) as usize;
            symbols.push(self.word[k]);
            fibers.push(self.orbit[k]);
        }
        birkhoff_forward(&symbols, &fibers, p, depth)
    }
}

/// Solves for the fiber-periodic orbit of a cyclic word and certifies it.
///
/// The word is oriented so the net fiber dynamics contract (net-expanding
/// words are solved on the reversed inverse maps and mapped back), then the
/// orbit is reconstructed run by run: the fiber value at the start of each
/// contracting run comes from a full-cycle probe image, contracting runs
/// fill forward, and expanding-run interiors fill backward through the
/// inverse maps.
///
/// Two conditions certify the result. Per-step defects must stay at
/// rounding level (within `1e-12` relatively). And the defects, propagated
/// through the worst expansion stretch of the cycle, must bound the distance
/// to the exact orbit by [`SHADOW_TOL`] without leaving `J`; a word whose
/// expansion runs outrun double precision is rejected here even though its
/// recomputed pseudo-orbit looks self-consistent.
pub fn solve_periodic(sys: &SkewSystem, word: &Word) -> Result<PeriodicOrbit> {
    let p = word.len();
    let log_multiplier =
        compensated_sum(word.symbols().iter().map(|&s| sys.map(s).derivative().ln()));
    if log_multiplier.exp_m1().abs() <= NEUTRAL_TOL {
        return Err(Error::hypothesis(format!(
            "word multiplier exp({log_multiplier}) is neutral within {NEUTRAL_TOL}; \
             no transverse periodic fiber point"
        )));
    }
    let reversed = log_multiplier > 0.0;
    let maps: Vec<Affine> = if reversed {
        word.symbols()
            .iter()
            .rev()
            .map(|&s| sys.map(s).affine().inverse())
            .collect()
    } else {
        word.symbols()
            .iter()
            .map(|&s| *sys.map(s).affine())
            .collect()
    };
    let slope_total = (-log_multiplier.abs()).exp();
    let contracted = cycle_values(&maps, slope_total)?;

    for (k, &t) in contracted.iter().enumerate() {
        if !t.is_finite() {
            return Err(Error::hypothesis(format!(
                "periodic fiber value at step {k} is not finite"
            )));
        }
    }
    // Worst absolute defect of the computed orbit, and the largest factor by
    // which a defect anywhere can be amplified on its way around the cycle:
    // amp_k = Σ_j Π_{i=j+1..k} slope_i via the recurrence amp ← s·(amp + 1),
    // run twice so wrapped contributions are included.
    let mut defect_abs = 0.0f64;
    for k in 0..p {
        let d = (maps[k].eval(contracted[k]) - contracted[(k + 1) % p]).abs();
        defect_abs = defect_abs.max(d);
    }
    let mut amp = 0.0f64;
    let mut acc = 0.0f64;
    for pass in 0..2 {
        for m in &maps {
            acc = m.slope * (acc + 1.0);
            if !acc.is_finite() {
                amp = f64::INFINITY;
                break;
            }
            if pass == 1 {
                amp = amp.max(acc);
            }
        }
        if amp.is_infinite() {
            break;
        }
    }
    let shadow = if defect_abs == 0.0 {
        0.0
    } else {
        defect_abs * (amp + 1.0) / (1.0 - slope_total)
    };
    if !(shadow <= SHADOW_TOL) {
        return Err(Error::hypothesis(format!(
            "orbit defects around {defect_abs:.2e} amplify to ±{shadow:.2e} along the \
             word's expansion runs; no certified periodic orbit at double precision \
             (split long dilation runs into anchored pairs)"
        )));
    }

    let orbit: Vec<f64> = if reversed {
        (0..p).map(|j| contracted[(p - j) % p]).collect()
    } else {
        contracted
    };
    for (k, &t) in orbit.iter().enumerate() {
        if !sys.j().contains(t) {
            return Err(Error::hypothesis(format!(
                "periodic orbit leaves J = {} at step {k}: t = {t}",
                sys.j()
            )));
        }
        if t - shadow < sys.j().lo() || t + shadow > sys.j().hi() {
            return Err(Error::hypothesis(format!(
                "periodic orbit at step {k} is within its shadow bound {shadow:.2e} of \
                 the boundary of J = {}; cannot certify containment",
                sys.j()
            )));
        }
    }
    let mut worst = 0.0f64;
    for k in 0..p {
        let next = orbit[(k + 1) % p];
        let defect = (sys.map(word[k]).eval(orbit[k]) - next).abs() / (1.0 + next.abs());
        worst = worst.max(defect);
    }
    if worst > DEFECT_TOL {
        return Err(Error::NoConvergence {
            iterations: p,
            residual: worst,
        });
    }
    Ok(PeriodicOrbit {
        word: word.clone(),
        orbit,
        log_multiplier,
        shadow_bound: shadow,
    })
}

/// Fiber values of the periodic point of a net-contracting cyclic sequence
/// of affine maps: `values[(k+1) % p] = maps[k](values[k])`.
fn cycle_values(maps: &[Affine], slope_total: f64) -> Result<Vec<f64>> {
    let p = maps.len();
    // Anchor every contracting run that follows an expanding run; a word
    // with no expanding run is anchored once at position 0.
    let mut anchors: Vec<usize> = (0..p)
        .filter(|&k| maps[k].slope < 1.0 && maps[(k + p - 1) % p].slope >= 1.0)
        .collect();
    if anchors.is_empty() {
        anchors.push(0);
    }
    let r = anchors.len();
    let mut values = vec![f64::NAN; p];
    for &a in &anchors {
        // Composite intercept via a probe image through the whole cycle; the
        // fixed value b/(1 − slope_total) then carries only rounding-level
        // absolute error because every expanding stretch of the probe path
        // is followed by a contracting run that scales its noise back down.
        let mut probe = 0.0;
        for j in 0..p {
            probe = maps[(a + j) % p].eval(probe);
            if !probe.is_finite() {
                return Err(Error::hypothesis(
                    "cycle composition overflows: an expanding run is too long to represent",
                ));
            }
        }
        values[a] = probe / (1.0 - slope_total);
    }
    for i in 0..r {
        let a = anchors[i];
        let a_next = anchors[(i + 1) % r];
        let seg_len = if r == 1 { p } else { (a_next + p - a) % p };
        let mut lc = 1;
        while lc < seg_len && maps[(a + lc) % p].slope < 1.0 {
            lc += 1;
        }
        // Forward through the contracting run, including the first expanding
        // position; within an all-contracting segment stop at the next anchor.
        let fwd = if lc < seg_len { lc } else { seg_len - 1 };
        for j in 0..fwd {
            let k = (a + j) % p;
            values[(k + 1) % p] = maps[k].eval(values[k]);
        }
        // Backward from the next anchor through the expanding interior.
        for j in (lc + 1..seg_len).rev() {
            let k = (a + j) % p;
            let next_val = if j == seg_len - 1 {
                values[a_next]
            } else {
                values[(k + 1) % p]
            };
            values[k] = maps[k].inverse().eval(next_val);
        }
    }
    Ok(values)
}

/// One assembled stretch of anchored contraction/expansion pairs, in the
/// solve (net-contracting) time direction, with the lifts of every consumed
/// run.
struct AnchoredSection {
    symbols: Vec<Symbol>,
    /// `(consumed symbol count, lift of the consumed run)` per run.
    lifts: Vec<(usize, EmpiricalMeasure)>,
    /// Fiber value after the section's final step, for entry matching of
    /// whatever follows.
    exit: f64,
}

/// Builds `n_cont` contraction and `n_exp` expansion symbols as interleaved
/// anchored pairs.
///
/// Each pair consumes a sub-run of a fresh `cont` sample: the sub-run's
/// landing value anchors an `exp` run grown from exactly that fiber value,
/// and its entry is chosen among [`ENTRY_SEARCH`] candidate offsets to sit
/// closest to the previous pair's exit, so the orbit re-merges with the
/// sampled trajectory almost immediately. Expansion runs are capped at
/// [`EXP_RUN_MAX`] symbols, the longest a double-precision delivery point
/// can pin.
fn build_anchored_section(
    cont: &CoreMap,
    exp: Option<&CoreMap>,
    n_cont: usize,
    n_exp: usize,
    m: usize,
    entry_target: Option<f64>,
    rng: &mut impl Rng,
) -> Result<AnchoredSection> {
    if n_cont == 0 {
        return Err(Error::invalid(
            "anchored section needs at least one contraction symbol to deliver on",
        ));
    }
    let n_pairs = if n_exp == 0 {
        1
    } else {
        n_exp.div_ceil(EXP_RUN_MAX)
    };
    let even = vec![1.0 / n_pairs as f64; n_pairs];
    let cont_lens = largest_remainder(&even, n_cont);
    let exp_lens = largest_remainder(&even, n_exp);
    for (&a, &l) in cont_lens.iter().zip(&exp_lens) {
        if a < 2 * m + 1 || (n_exp > 0 && l < 2 * m + 1) {
            return Err(Error::invalid(format!(
                "anchored pair of lengths ({a}, {l}) cannot carry depth-{m} windows; \
                 increase n_total"
            )));
        }
    }
    let support = support_formula(cont)?;
    let mut section = AnchoredSection {
        symbols: Vec::new(),
        lifts: Vec::new(),
        exit: 0.0,
    };
    let mut target = entry_target;
    for (&a, &l) in cont_lens.iter().zip(&exp_lens) {
        let start = rng.gen_range(support.lo()..support.hi());
        let run = sample_generic_orbit(cont, start, a + ENTRY_SEARCH + 1)?;
        let k = match target {
            None => 0,
            Some(t) => (0..=ENTRY_SEARCH)
                .min_by(|&k1, &k2| {
                    (run.values[k1 + a] - t)
                        .abs()
                        .total_cmp(&(run.values[k2 + a] - t).abs())
                })
                .unwrap(),
        };
        let sub = GenericRun {
            values: run.values[k..=k + a].to_vec(),
            word: Word::new(run.word.symbols()[k..=k + a].to_vec())?,
        };
        let anchor = sub.values[0];
        section.symbols.extend(sub.word.symbols()[..a].iter().rev());
        section.lifts.push((a, lift_measure(cont, &sub, m)?));
        section.exit = anchor;
        if l > 0 {
            let exp = exp.expect("expansion lengths are zero without an expansion core");
            let exp_run = sample_generic_orbit(exp, anchor, l)?;
            section.exit = exp.eval(exp_run.values[l - 1]);
            section.symbols.extend_from_slice(exp_run.word.symbols());
            section.lifts.push((l, lift_measure(exp, &exp_run, m)?));
        }
        target = Some(section.exit);
    }
    Ok(section)
}

/// One constructed approximation of a point on a two-measure segment.
#[derive(Clone, Debug)]
pub struct SegmentPoint {
    pub orbit: PeriodicOrbit,
    /// Uniform measure on the periodic orbit.
    pub measure: EmpiricalMeasure,
    /// Matched convex combination of the consumed run lifts.
    pub reference: EmpiricalMeasure,
    pub distance: f64,
    pub certificate: SegmentCertificate,
    pub schedule: QuantifierSchedule,
    /// Target mixture exponent `s·χ⁻ + (1−s)·χ⁺`.
    pub chi_s: f64,
    pub n_minus: usize,
    pub n_plus: usize,
    /// Whether the schedule and certificate run against the reversed-time
    /// dynamics (net-expanding mixture).
    pub reversed_time: bool,
    /// The word is shorter than the scheduled `n_min`.
    pub below_schedule: bool,
}

/// Builds a periodic approximation of `s·μ⁻ + (1−s)·μ⁺`.
///
/// The word carries `⌊s·n_total⌋` contraction and the remaining dilation
/// symbols, assembled as anchored pairs in the mixture's net-contracting
/// time direction, and the resulting orbit measure is compared against the
/// same convex combination of the lifts of exactly the consumed runs.
#[allow(clippy::too_many_arguments)]
pub fn approximate_segment_point(
    sys: &SkewSystem,
    minus: &CoreMap,
    plus: &CoreMap,
    s: f64,
    n_total: usize,
    part: &PartitionSpec,
    safety: f64,
    rng: &mut impl Rng,
) -> Result<SegmentPoint> {
    if minus.side() != Side::Minus || plus.side() != Side::Plus {
        return Err(Error::invalid(
            "segment construction takes the side-minus core first and the side-plus core second",
        ));
    }
    let m = part.depth();
    let (n_minus, n_plus) = split_counts(s, n_total)?;
    if n_minus < 2 * m + 2 || n_plus < 2 * m + 1 {
        return Err(Error::invalid(format!(
            "blocks of lengths ({n_minus}, {n_plus}) cannot carry depth-{m} windows; \
             increase n_total"
        )));
    }

    let chi_minus = term_exponent(sys, minus)?;
    let chi_plus = term_exponent(sys, plus)?;
    let chi_s = chi_of_s(chi_minus, chi_plus, s)?;
    let (schedule, reversed_time) = match schedule_quantifiers(chi_minus, chi_plus, s, safety) {
        Ok(sch) => (sch, false),
        Err(_) if chi_s > 0.0 => (
            schedule_quantifiers(-chi_plus, -chi_minus, 1.0 - s, safety)?,
            true,
        ),
        Err(e) => return Err(e),
    };

    let section = if reversed_time {
        build_anchored_section(plus, Some(minus), n_plus, n_minus, m, None, rng)?
    } else {
        build_anchored_section(minus, Some(plus), n_minus, n_plus, m, None, rng)?
    };
    let symbols: Vec<Symbol> = if reversed_time {
        section.symbols.iter().rev().copied().collect()
    } else {
        section.symbols.clone()
    };
    let word = Word::new(symbols)?;
    let orbit = solve_periodic(sys, &word)?;
    let measure = orbit.measure(m)?;

    let p_len = word.len() as f64;
    let weighted: Vec<(f64, &EmpiricalMeasure)> = section
        .lifts
        .iter()
        .map(|(n, mu)| (*n as f64 / p_len, mu))
        .collect();
    let reference = convex_combine(&weighted)?;
    let distance = dist(&measure, &reference, part)?;

    let slopes = oriented_slopes(sys, &word, reversed_time);
    let certificate = certify_quasi_hyperbolic(&slopes, &QuasiHypSpec::new(schedule.lambda)?)?;
    let below_schedule = n_total < schedule.n_min;
    Ok(SegmentPoint {
        orbit,
        measure,
        reference,
        distance,
        certificate,
        schedule,
        chi_s,
        n_minus,
        n_plus,
        reversed_time,
        below_schedule,
    })
}

/// Center slopes of a word in its net-contracting time direction.
fn oriented_slopes(sys: &SkewSystem, word: &Word, reversed: bool) -> Vec<f64> {
    if reversed {
        word.symbols()
            .iter()
            .rev()
            .map(|&sym| 1.0 / sys.map(sym).derivative())
            .collect()
    } else {
        word.symbols()
            .iter()
            .map(|&sym| sys.map(sym).derivative())
            .collect()
    }
}

/// One block of a hull word: an anchored contraction/dilation pair, or a
/// single-sided block for same-side hulls and fully peeled rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockPlan {
    /// Index into the caller's term list, when the block has a contraction
    /// part.
    pub minus_term: Option<usize>,
    /// Index into the caller's term list, when the block has a dilation part.
    pub plus_term: Option<usize>,
    pub n_minus: usize,
    pub n_plus: usize,
}

impl BlockPlan {
    pub fn len(&self) -> usize {
        self.n_minus + self.n_plus
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One constructed approximation of a point in the closed convex hull of a
/// finite family of side measures.
#[derive(Clone, Debug)]
pub struct HullPoint {
    pub orbit: PeriodicOrbit,
    pub measure: EmpiricalMeasure,
    /// Matched convex combination of the consumed run lifts.
    pub reference: EmpiricalMeasure,
    pub distance: f64,
    pub certificate: SegmentCertificate,
    /// Pairwise decomposition used for mixed-side targets, in the physical
    /// (minus-term × plus-term) orientation; `None` for same-side hulls.
    pub decomposition: Option<PairwiseDecomp>,
    pub blocks: Vec<BlockPlan>,
    /// Weighted mixture of the term exponents.
    pub chi_total: f64,
    pub reversed_time: bool,
}

/// Builds a periodic approximation of `Σ w_k μ_k` for side measures `μ_k`.
///
/// Same-side families concatenate one anchored block per term with lengths
/// proportional to the weights. Mixed families are first decomposed into
/// pairwise mixtures (see [`crate::convex_decomp::decompose`]); each pair
/// `(i, j)` with mass `b_ij` gets an anchored contraction/dilation block of
/// length `≈ b_ij·n_total` split by its pair parameter `a_ij`. Net-expanding
/// targets are decomposed, assembled and certified in reversed time with the
/// same physical block layout.
pub fn approximate_hull_point(
    sys: &SkewSystem,
    terms: &[(f64, &CoreMap)],
    n_total: usize,
    part: &PartitionSpec,
    safety: f64,
    rng: &mut impl Rng,
) -> Result<HullPoint> {
    if terms.is_empty() {
        return Err(Error::invalid("hull needs at least one weighted term"));
    }
    for (k, (w, _)) in terms.iter().enumerate() {
        if !w.is_finite() || *w < 0.0 {
            return Err(Error::invalid(format!(
                "hull weight {k} must be finite and non-negative, got {w}"
            )));
        }
    }
    let total_weight = compensated_sum(terms.iter().map(|(w, _)| *w));
    if (total_weight - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::invalid(format!(
            "hull weights must sum to 1, got {total_weight}"
        )));
    }

    let chis: Vec<f64> = terms
        .iter()
        .map(|(_, cm)| term_exponent(sys, cm))
        .collect::<Result<Vec<_>>>()?;
    let chi_total = compensated_sum(terms.iter().zip(&chis).map(|((w, _), &chi)| w * chi));
    let minus_idx: Vec<usize> = (0..terms.len())
        .filter(|&k| terms[k].1.side() == Side::Minus)
        .collect();
    let plus_idx: Vec<usize> = (0..terms.len())
        .filter(|&k| terms[k].1.side() == Side::Plus)
        .collect();
    let minus_mass = compensated_sum(minus_idx.iter().map(|&k| terms[k].0));
    let plus_mass = compensated_sum(plus_idx.iter().map(|&k| terms[k].0));

    // Plan the physical blocks. The decomposition always runs in the solve
    // orientation (contracting side as rows); net-expanding targets flip the
    // sides and sign of every exponent and transpose the result back.
    let (blocks, decomposition, reversed_time) = if plus_mass <= WEIGHT_SUM_TOL {
        (
            same_side_blocks(terms, &minus_idx, n_total, Side::Minus),
            None,
            false,
        )
    } else if minus_mass <= WEIGHT_SUM_TOL {
        (
            same_side_blocks(terms, &plus_idx, n_total, Side::Plus),
            None,
            true,
        )
    } else if chi_total < 0.0 {
        let input = DecompInput::new(
            minus_idx.iter().map(|&k| chis[k]).collect(),
            plus_idx.iter().map(|&k| chis[k]).collect(),
            minus_idx.iter().map(|&k| terms[k].0).collect(),
            plus_idx.iter().map(|&k| terms[k].0).collect(),
        )?;
        let decomp = crate::convex_decomp::decompose(&input)?;
        let blocks = pair_blocks(&minus_idx, &plus_idx, &decomp, n_total, false)?;
        (blocks, Some(decomp), false)
    } else if chi_total > 0.0 {
        let input = DecompInput::new(
            plus_idx.iter().map(|&k| -chis[k]).collect(),
            minus_idx.iter().map(|&k| -chis[k]).collect(),
            plus_idx.iter().map(|&k| terms[k].0).collect(),
            minus_idx.iter().map(|&k| terms[k].0).collect(),
        )?;
        let flipped = crate::convex_decomp::decompose(&input)?;
        let blocks = pair_blocks(&plus_idx, &minus_idx, &flipped, n_total, true)?;
        let physical = PairwiseDecomp {
            a: (0..minus_idx.len())
                .map(|i| (0..plus_idx.len()).map(|j| 1.0 - flipped.a[j][i]).collect())
                .collect(),
            b: (0..minus_idx.len())
                .map(|i| (0..plus_idx.len()).map(|j| flipped.b[j][i]).collect())
                .collect(),
        };
        (blocks, Some(physical), true)
    } else {
        return Err(Error::invalid(
            "hull mixture exponent is exactly neutral; no transverse periodic approximation",
        ));
    };

    // Assemble one anchored section per block in the solve orientation,
    // chaining each section's exit into the next section's entry matching.
    let m = part.depth();
    let mut solve_symbols: Vec<Symbol> = Vec::with_capacity(n_total);
    let mut lifts: Vec<(usize, EmpiricalMeasure)> = Vec::new();
    let mut target = None;
    for block in &blocks {
        let (cont_cm, exp_cm, n_cont, n_exp) = if reversed_time {
            let cont = block.plus_term.map(|j| terms[j].1);
            let exp = block.minus_term.map(|i| terms[i].1);
            (cont, exp, block.n_plus, block.n_minus)
        } else {
            let cont = block.minus_term.map(|i| terms[i].1);
            let exp = block.plus_term.map(|j| terms[j].1);
            (cont, exp, block.n_minus, block.n_plus)
        };
        let cont_cm = cont_cm.ok_or_else(|| {
            Error::invalid("hull block lacks a contracting part in its solve orientation")
        })?;
        let section = build_anchored_section(cont_cm, exp_cm, n_cont, n_exp, m, target, rng)?;
        target = Some(section.exit);
        solve_symbols.extend_from_slice(&section.symbols);
        lifts.extend(section.lifts);
    }
    let symbols: Vec<Symbol> = if reversed_time {
        solve_symbols.iter().rev().copied().collect()
    } else {
        solve_symbols
    };
    let word = Word::new(symbols)?;
    let orbit = solve_periodic(sys, &word)?;
    let measure = orbit.measure(m)?;

    let p_len = word.len() as f64;
    let weighted: Vec<(f64, &EmpiricalMeasure)> = lifts
        .iter()
        .map(|(n, mu)| (*n as f64 / p_len, mu))
        .collect();
    let reference = convex_combine(&weighted)?;
    let distance = dist(&measure, &reference, part)?;

    let lambda = safety * tightest_block_rate(&blocks, &chis);
    let slopes = oriented_slopes(sys, &word, reversed_time);
    let certificate = certify_quasi_hyperbolic(&slopes, &QuasiHypSpec::new(lambda)?)?;
    Ok(HullPoint {
        orbit,
        measure,
        reference,
        distance,
        certificate,
        decomposition,
        blocks,
        chi_total,
        reversed_time,
    })
}

/// Forward-time center exponent of one core map: exact when both branch
/// slopes agree, otherwise estimated from a pilot run at the support
/// midpoint.
fn term_exponent(sys: &SkewSystem, cm: &CoreMap) -> Result<f64> {
    let low = cm.branch_low().slope;
    let high = cm.branch_high().slope;
    let sign = match cm.side() {
        Side::Plus => 1.0,
        Side::Minus => -1.0,
    };
    if (low.ln() - high.ln()).abs() <= 1e-12 {
        return Ok(sign * low.ln());
    }
    let sup = support_formula(cm)?;
    let run = sample_generic_orbit(cm, sup.midpoint(), 4096)?;
    Ok(run
        .word
        .symbols()
        .iter()
        .map(|&sym| sys.map(sym).derivative().ln())
        .sum::<f64>()
        / run.len() as f64)
}

/// Least magnitude of a per-block mixture exponent; blocks are transverse
/// exactly when this is positive.
fn tightest_block_rate(blocks: &[BlockPlan], chis: &[f64]) -> f64 {
    blocks
        .iter()
        .map(|b| {
            let len = b.len() as f64;
            let mut log = 0.0;
            if let Some(i) = b.minus_term {
                log += b.n_minus as f64 * chis[i];
            }
            if let Some(j) = b.plus_term {
                log += b.n_plus as f64 * chis[j];
            }
            (log / len).abs()
        })
        .fold(f64::INFINITY, f64::min)
}

/// One single-sided block per term, with lengths proportional to weights.
fn same_side_blocks(
    terms: &[(f64, &CoreMap)],
    idx: &[usize],
    n_total: usize,
    side: Side,
) -> Vec<BlockPlan> {
    let weights: Vec<f64> = idx.iter().map(|&k| terms[k].0).collect();
    let lens = largest_remainder(&weights, n_total);
    idx.iter()
        .zip(&lens)
        .filter(|(_, &n)| n > 0)
        .map(|(&k, &n)| match side {
            Side::Minus => BlockPlan {
                minus_term: Some(k),
                plus_term: None,
                n_minus: n,
                n_plus: 0,
            },
            Side::Plus => BlockPlan {
                minus_term: None,
                plus_term: Some(k),
                n_minus: 0,
                n_plus: n,
            },
        })
        .collect()
}

/// Anchored pair blocks for a mixed-side decomposition, given in its solve
/// orientation (rows contract, columns expand): block `(r, c)` gets
/// `≈ b_rc·n_total` symbols, split by the expansion share `a_rc`; a row
/// whose shares all vanish is coalesced into one pure contraction block.
/// `flipped` maps the solve-orientation roles back onto physical sides.
fn pair_blocks(
    cont_idx: &[usize],
    exp_idx: &[usize],
    decomp: &PairwiseDecomp,
    n_total: usize,
    flipped: bool,
) -> Result<Vec<BlockPlan>> {
    let plan = |cont_term: Option<usize>, exp_term: Option<usize>, n_cont: usize, n_exp: usize| {
        if flipped {
            BlockPlan {
                minus_term: exp_term,
                plus_term: cont_term,
                n_minus: n_exp,
                n_plus: n_cont,
            }
        } else {
            BlockPlan {
                minus_term: cont_term,
                plus_term: exp_term,
                n_minus: n_cont,
                n_plus: n_exp,
            }
        }
    };
    let flat: Vec<f64> = decomp.b.iter().flatten().copied().collect();
    let lens = largest_remainder(&flat, n_total);
    let n_cols = exp_idx.len();
    let mut blocks = Vec::new();
    for (row, &i) in cont_idx.iter().enumerate() {
        let row_lens = &lens[row * n_cols..(row + 1) * n_cols];
        if decomp.a[row].iter().all(|&a| a == 0.0) {
            let n: usize = row_lens.iter().sum();
            if n > 0 {
                blocks.push(plan(Some(i), None, n, 0));
            }
            continue;
        }
        for (col, &j) in exp_idx.iter().enumerate() {
            let n = row_lens[col];
            if n == 0 {
                continue;
            }
            let a = decomp.a[row][col];
            if a == 0.0 {
                blocks.push(plan(Some(i), None, n, 0));
                continue;
            }
            if n < 2 {
                return Err(Error::invalid(format!(
                    "pair block ({i}, {j}) received only {n} symbols; increase n_total"
                )));
            }
            let n_exp = ((a * n as f64).round() as usize).clamp(1, n - 1);
            blocks.push(plan(Some(i), Some(j), n - n_exp, n_exp));
        }
    }
    Ok(blocks)
}

/// Integer allocation of `total` into parts proportional to `weights`
/// (largest-remainder rounding, ties to the earlier index).
fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let mut parts: Vec<usize> = Vec::with_capacity(weights.len());
    let mut fracs: Vec<(f64, usize)> = Vec::with_capacity(weights.len());
    for (k, &w) in weights.iter().enumerate() {
        let exact = w * total as f64;
        let base = exact.floor();
        parts.push(base as usize);
        fracs.push((exact - base, k));
    }
    let assigned: usize = parts.iter().sum();
    let mut short = total.saturating_sub(assigned);
    fracs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    for &(_, k) in &fracs {
        if short == 0 {
            break;
        }
        parts[k] += 1;
        short -= 1;
    }
    parts
}
