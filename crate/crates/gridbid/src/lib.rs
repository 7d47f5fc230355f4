//! Price-maker battery storage bidding in joint energy and ancillary
//! services markets.
//!
//! The crate models a battery storage operator that offers energy, spinning
//! reserve, and regulation (capacity + mileage) into an ISO's real-time
//! co-optimized clearing. The operator's offer problem sits on top of the
//! clearing problem; the two collapse into a single mixed-integer linear
//! program through the clearing problem's optimality conditions, so the
//! operator's bids anticipate how they move the clearing prices.
//!
//! Organization:
//! - [`lp`]: canonical sparse LP/MILP container with a documented dual sign
//!   convention, shared by every layer.
//! - [`solver`]: reference simplex + branch-and-bound, an MPS round-trip, and
//!   an external-solver runner for larger instances.
//! - [`degradation`]: cycle-aging cost curve, its per-segment linearization,
//!   and a rainflow-based audit oracle.
//! - [`agc`]: regulation signal preparation (zero-mean + exact mileage
//!   rescaling) and the mileage-multiplier bound.
//! - [`model`]: scenario data (network, fleet, battery, profiles), CSV I/O,
//!   validation, and synthetic-scenario generation.
//! - [`clearing`]: the ISO's joint dispatch LP and price extraction.
//! - [`bilevel`]: the operator-side constraints, optimality-condition
//!   embedding, big-M linearization, and solution verification.
//! - [`report`]: result tables and sweep summaries.

pub mod agc;
pub mod clearing;
pub mod degradation;
pub mod lp;
pub mod model;
pub mod report;
pub mod solver;

pub mod bilevel;
pub mod cli;
