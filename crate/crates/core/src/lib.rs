//! Fiberwise dynamics of step skew products over four symbols.
//!
//! The objects here live on `Σ₄ × ℝ`: a full shift on four symbols drives an
//! interval coordinate through one of four affine fiber maps. Two of the maps
//! are dilations (labels `1`, `2`), two are contractions (labels `3`, `4`),
//! and their fixed points straddle `[0, 1]`. Under a superposition condition
//! on the images the dilations form a blender: every point of the relevant
//! interval admits a forward itinerary that never escapes. That mechanism
//! makes the convex hull of a contracting and an expanding ergodic measure
//! reachable by periodic orbits, which is what most of this crate computes.
//!
//! Module map:
//!
//! * [`measures`] — window/fiber empirical measures, Birkhoff averages, and a
//!   total-variation proxy for weak* distance on a finite partition.
//! * [`skew_system`] — the four-map systems, superposition checks, blender
//!   itineraries, and center (fiber) Lyapunov exponents.
//! * [`acim`] — the expanding core dynamics induced on one side, its Ulam
//!   transfer matrix, stationary densities, and lifts of generic core orbits
//!   back to window/fiber measures.
//! * [`convex_decomp`] — exact convex decomposition of a mixed family of
//!   exponents into pairwise combinations with negative exponents.
//! * [`cycle_builder`] — quasi-hyperbolicity certificates, quantifier
//!   schedules, segment/hull word construction, and exact periodic solving.
//! * [`local_cycles`] — three-dimensional local models of a cycle between two
//!   saddles of different index, with the return connection either preserving
//!   or reversing the centre orientation.

// Validation guards are written `!(x > 0.0)` on purpose: the negation
// rejects NaN together with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acim;
pub mod convex_decomp;
pub mod cycle_builder;
mod error;
mod interval;
pub mod local_cycles;
pub mod measures;
pub mod skew_system;
mod symbol;

/// Crate version, for embedding in run reports and artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use interval::Interval;
pub use symbol::{Symbol, Word};

pub use acim::{
    build_core_map, lift_measure, sample_generic_orbit, stationary_density, support_formula,
    ulam_matrix, AcimDensity, CoreMap, GenericRun, UlamOperator,
};
pub use convex_decomp::{decompose, verify, DecompInput, PairwiseDecomp, VerifyReport};
pub use cycle_builder::{
    approximate_hull_point, approximate_segment_point, build_segment_word,
    certify_quasi_hyperbolic, schedule_quantifiers, solve_periodic, BlockPlan, HullPoint,
    PeriodicOrbit, QuantifierSchedule, QuasiHypSpec, SegmentCertificate, SegmentPoint,
};
pub use local_cycles::{
    center_exponent_local, characterized_distance, classify_point, classify_sweep, cycle_step,
    cycle_step_back, find_twisted_periodic, local_partition, midpoint_distance, saddle_mixture,
    Chart, ChartPoint, CycleModel, LocalPeriodicOrbit, StepResult, SweepReport, Twist, Verdict,
};
pub use measures::{
    birkhoff_backward, birkhoff_forward, convex_combine, dist, Atom, EmpiricalMeasure, Histogram,
    PartitionSpec,
};
pub use skew_system::{
    chi_of_s, Affine, FiberMap, OrbitResult, Side, SkewSystem, SuperpositionReport,
};
