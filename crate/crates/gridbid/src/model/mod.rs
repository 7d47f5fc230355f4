//! Domain types, validation, and scenario synthesis.
//!
//! A [`ScenarioCase`] bundles everything one study run consumes: the time
//! grid, the transmission network, the generator fleet with its four offer
//! curves (energy, spinning reserve, regulation capacity, regulation
//! mileage), the storage units, per-bus load and system requirement
//! profiles, and the prepared regulation signal. Cases are immutable after
//! validation and safe to share read-only across parallel runs.
//!
//! Units throughout: power MW, energy MWh, prices $/MWh, angles radians.
//! Quantity offers of storage units are magnitude bounds in [0, rate]; the
//! market chooses the charge/discharge sign within ±Q.

pub mod io;
pub mod synth;

use crate::agc::{self, AgcTrace};
use crate::degradation::{
    build_aging_function, segment_slopes, CycleAgingFunction, DegradationSegments,
};

pub use synth::{synthesize_offers, synthesize_ratios, synthesize_scenario, OfferRatios, SynthConfig};

/// Default cycle-life parameters applied when a battery is described only by
/// its replacement cost: 6000 cycles to end of life at 80% depth, aging
/// exponent 2.03.
pub const DEFAULT_LIFE_CYCLES: f64 = 6000.0;
pub const DEFAULT_REFERENCE_DEPTH: f64 = 0.8;
pub const DEFAULT_AGING_EXPONENT: f64 = 2.03;
/// Default number of linearization segments for the degradation cost.
pub const DEFAULT_SEGMENTS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    BadTimeGrid(String),
    BadBattery(String),
}

impl std::fmt::Display for ModelError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelError::BadTimeGrid(m) | ModelError::BadBattery(m) => write!(f, "{}", m),
        }
    }
}

impl std::error::Error for ModelError {}

/// Market-clearing horizon: `intervals` clearing intervals of
/// `interval_hours` each, subdivided into `subintervals` dispatch steps of
/// `sub_hours` each.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub intervals: usize,
    pub interval_hours: f64,
    pub sub_hours: f64,
    pub subintervals: usize,
}

/// Build a time grid, requiring the interval span to be an integer multiple
/// of the sub-interval span.
pub fn build_time_grid(
    interval_hours: f64,
    sub_hours: f64,
    intervals: usize,
) -> Result<TimeGrid, ModelError> {
    if !(interval_hours > 0.0) || !(sub_hours > 0.0) {
        return Err(ModelError::BadTimeGrid(format!(
            "spans must be positive, got interval {} h / sub-interval {} h",
            interval_hours, sub_hours
        )));
    }
    if intervals == 0 {
        return Err(ModelError::BadTimeGrid("horizon must have at least one interval".into()));
    }
    let ratio = interval_hours / sub_hours;
    if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
        return Err(ModelError::BadTimeGrid(format!(
            "interval span {} h is not an integer multiple of sub-interval span {} h",
            interval_hours, sub_hours
        )));
    }
    Ok(TimeGrid {
        intervals,
        interval_hours,
        sub_hours,
        subintervals: ratio.round() as usize,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: String,
}

/// Transmission corridor with DC susceptance (per-unit) and thermal limit.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub from: String,
    pub to: String,
    pub susceptance: f64,
    pub limit_mw: f64,
}

/// One generator's price offers for a single interval, $/MWh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfferQuad {
    pub energy: f64,
    pub reserve: f64,
    pub reg_capacity: f64,
    pub reg_mileage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub name: String,
    pub bus: String,
    pub pmin: f64,
    pub pmax: f64,
    /// Largest spinning-reserve award deliverable within the response window, MW.
    pub rs_ramp: f64,
    /// Largest regulation-capacity award trackable by the governor, MW.
    pub rg_ramp: f64,
    /// Per-interval offers, length = grid.intervals.
    pub offers: Vec<OfferQuad>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryUnit {
    pub name: String,
    pub bus: String,
    pub rate_mw: f64,
    pub capacity_mwh: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub soc_init: f64,
    /// One-way conversion efficiency per leg (charge and discharge each).
    pub eta: f64,
    pub aging: CycleAgingFunction,
    /// Depth segments used to linearize the aging cost.
    pub segments: usize,
}

impl BatteryUnit {
    /// Battery described by replacement cost only, with default cycle-life
    /// parameters.
    pub fn with_default_aging(
        name: &str,
        bus: &str,
        rate_mw: f64,
        capacity_mwh: f64,
        soc_min: f64,
        soc_max: f64,
        soc_init: f64,
        eta: f64,
        replacement_cost: f64,
    ) -> Result<BatteryUnit, ModelError> {
        let aging = build_aging_function(
            replacement_cost,
            DEFAULT_LIFE_CYCLES,
            DEFAULT_REFERENCE_DEPTH,
            DEFAULT_AGING_EXPONENT,
        )
        .map_err(|e| ModelError::BadBattery(format!("battery {}: {}", name, e)))?;
        Ok(BatteryUnit {
            name: name.to_string(),
            bus: bus.to_string(),
            rate_mw,
            capacity_mwh,
            soc_min,
            soc_max,
            soc_init,
            eta,
            aging,
            segments: DEFAULT_SEGMENTS,
        })
    }

    /// Per-segment capacities and marginal costs for this unit.
    pub fn degradation_segments(
        &self,
    ) -> Result<DegradationSegments, crate::degradation::DegradationError> {
        segment_slopes(&self.aging, self.segments, self.capacity_mwh)
    }
}

/// Per-bus load and system-wide ancillary requirements across the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemProfiles {
    /// `load_mw[n][t]`, aligned with `ScenarioCase::buses`.
    pub load_mw: Vec<Vec<f64>>,
    pub reserve_mw: Vec<f64>,
    pub reg_capacity_mw: Vec<f64>,
    /// Mileage requirement per interval; must equal the prepared signal's
    /// accumulated absolute movement.
    pub reg_mileage_mw: Vec<f64>,
}

/// Bounds on storage price offers, $/MWh. Finite bounds are required so the
/// strategic problem's big-M constants stay finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfferCaps {
    pub floor: f64,
    pub cap: f64,
}

impl Default for OfferCaps {
    fn default() -> Self {
        OfferCaps { floor: -250.0, cap: 1000.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioCase {
    pub grid: TimeGrid,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub batteries: Vec<BatteryUnit>,
    pub profiles: SystemProfiles,
    /// Prepared regulation signal (zero-mean per interval, mileage equal to
    /// the requirement).
    pub agc: AgcTrace,
    pub offer_caps: OfferCaps,
}

impl ScenarioCase {
    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn total_load(&self, t: usize) -> f64 {
        self.profiles.load_mw.iter().map(|l| l[t]).sum()
    }

    pub fn validate(&self) -> Vec<String> {
        validate_case(self)
    }
}

/// Check every structural invariant of a case and return the violations as
/// data (empty = valid). Side-effect free and idempotent.
pub fn validate_case(case: &ScenarioCase) -> Vec<String> {
    let mut v = Vec::new();
    let t_n = case.grid.intervals;

    // Grid shape vs profiles and signal.
    if case.grid.subintervals == 0 || t_n == 0 {
        v.push("time grid is empty".to_string());
        return v;
    }
    for (name, len) in [
        ("reserve requirement", case.profiles.reserve_mw.len()),
        ("regulation capacity requirement", case.profiles.reg_capacity_mw.len()),
        ("regulation mileage requirement", case.profiles.reg_mileage_mw.len()),
    ] {
        if len != t_n {
            v.push(format!("{} profile has {} intervals, grid has {}", name, len, t_n));
        }
    }
    if case.profiles.load_mw.len() != case.buses.len() {
        v.push(format!(
            "load profile covers {} buses, case has {}",
            case.profiles.load_mw.len(),
            case.buses.len()
        ));
    }
    for (n, load) in case.profiles.load_mw.iter().enumerate() {
        if load.len() != t_n {
            v.push(format!("load profile at bus index {} has {} intervals, grid has {}", n, load.len(), t_n));
        }
        if let Some(t) = load.iter().position(|&x| x < 0.0) {
            v.push(format!("negative load {} MW at bus index {}, interval {}", load[t], n, t + 1));
        }
    }
    for (name, prof) in [
        ("reserve", &case.profiles.reserve_mw),
        ("regulation capacity", &case.profiles.reg_capacity_mw),
        ("regulation mileage", &case.profiles.reg_mileage_mw),
    ] {
        if let Some(t) = prof.iter().position(|&x| x < 0.0) {
            v.push(format!("negative {} requirement at interval {}", name, t + 1));
        }
    }

    // Network.
    let mut seen = std::collections::HashSet::new();
    for b in &case.buses {
        if !seen.insert(b.id.as_str()) {
            v.push(format!("duplicate bus id {}", b.id));
        }
    }
    if case.buses.is_empty() {
        v.push("no buses".to_string());
    }
    for l in &case.lines {
        if case.bus_index(&l.from).is_none() || case.bus_index(&l.to).is_none() {
            v.push(format!("line {}-{} references an unknown bus", l.from, l.to));
        }
        if !(l.susceptance > 0.0) {
            v.push(format!("line {}-{} susceptance must be positive", l.from, l.to));
        }
        if !(l.limit_mw > 0.0) {
            v.push(format!("line {}-{} thermal limit must be positive", l.from, l.to));
        }
    }
    if !case.buses.is_empty() && !connected(case) {
        v.push("network is not connected".to_string());
    }

    // Generators.
    if case.generators.is_empty() {
        v.push("no generators".to_string());
    }
    for g in &case.generators {
        if case.bus_index(&g.bus).is_none() {
            v.push(format!("generator {} references unknown bus {}", g.name, g.bus));
        }
        if !(0.0 <= g.pmin && g.pmin <= g.pmax) {
            v.push(format!("generator {}: need 0 <= pmin <= pmax, got [{}, {}]", g.name, g.pmin, g.pmax));
        }
        if g.rs_ramp < 0.0 || g.rg_ramp < 0.0 {
            v.push(format!("generator {}: ramp limits must be non-negative", g.name));
        }
        if g.offers.len() != t_n {
            v.push(format!("generator {}: {} offer rows, grid has {} intervals", g.name, g.offers.len(), t_n));
        }
        for (t, o) in g.offers.iter().enumerate() {
            if o.energy < 0.0 || o.reserve < 0.0 || o.reg_capacity < 0.0 || o.reg_mileage < 0.0 {
                v.push(format!("generator {}: negative offer at interval {}", g.name, t + 1));
                break;
            }
        }
    }

    // Batteries.
    for b in &case.batteries {
        if case.bus_index(&b.bus).is_none() {
            v.push(format!("battery {} references unknown bus {}", b.name, b.bus));
        }
        if !(b.rate_mw > 0.0) {
            v.push(format!("battery {}: power rating must be positive", b.name));
        }
        if !(0.0 < b.eta && b.eta <= 1.0) {
            v.push(format!("battery {}: efficiency must be in (0, 1], got {}", b.name, b.eta));
        }
        if !(0.0 <= b.soc_min && b.soc_min <= b.soc_max && b.soc_max <= b.capacity_mwh) {
            v.push(format!(
                "battery {}: need 0 <= min <= max <= capacity, got [{}, {}] in {} MWh",
                b.name, b.soc_min, b.soc_max, b.capacity_mwh
            ));
        }
        if b.soc_init < b.soc_min || b.soc_init > b.soc_max {
            v.push(format!(
                "battery {}: initial state of charge {} outside [{}, {}]",
                b.name, b.soc_init, b.soc_min, b.soc_max
            ));
        }
        if b.segments == 0 {
            v.push(format!("battery {}: needs at least one degradation segment", b.name));
        }
    }

    // Offer price bounds.
    if !(case.offer_caps.floor < case.offer_caps.cap) {
        v.push(format!(
            "offer price floor {} must lie below cap {}",
            case.offer_caps.floor, case.offer_caps.cap
        ));
    }

    // System adequacy without storage: the market must clear on generators
    // alone, so capacity and ramp totals must cover the stiffest interval.
    let cap_total: f64 = case.generators.iter().map(|g| g.pmax).sum();
    let rs_ramp_total: f64 = case.generators.iter().map(|g| g.rs_ramp).sum();
    let rg_ramp_total: f64 = case.generators.iter().map(|g| g.rg_ramp).sum();
    for t in 0..t_n {
        let need = case.total_load(t)
            + case.profiles.reserve_mw.get(t).copied().unwrap_or(0.0)
            + case.profiles.reg_capacity_mw.get(t).copied().unwrap_or(0.0);
        if cap_total < need - 1e-9 {
            v.push(format!(
                "insufficient generation: {} MW of capacity against {} MW of load plus reserves at interval {}",
                cap_total,
                need,
                t + 1
            ));
            break;
        }
    }
    if let Some(t) = (0..t_n.min(case.profiles.reserve_mw.len()))
        .find(|&t| rs_ramp_total < case.profiles.reserve_mw[t] - 1e-9)
    {
        v.push(format!(
            "insufficient reserve ramp: {} MW deliverable against requirement {} MW at interval {}",
            rs_ramp_total, case.profiles.reserve_mw[t], t + 1
        ));
    }
    if let Some(t) = (0..t_n.min(case.profiles.reg_capacity_mw.len()))
        .find(|&t| rg_ramp_total < case.profiles.reg_capacity_mw[t] - 1e-9)
    {
        v.push(format!(
            "insufficient regulation ramp: {} MW trackable against requirement {} MW at interval {}",
            rg_ramp_total, case.profiles.reg_capacity_mw[t], t + 1
        ));
    }

    // Regulation signal: shape, zero mean, mileage = requirement, and a
    // mileage-to-capacity multiplier of at least one (the award envelope
    // capacity <= mileage <= m*capacity is empty otherwise).
    if case.agc.intervals() != t_n || case.agc.steps() != case.grid.subintervals {
        v.push(format!(
            "regulation signal is {}x{}, grid is {}x{}",
            case.agc.intervals(),
            case.agc.steps(),
            t_n,
            case.grid.subintervals
        ));
    } else {
        for t in 0..t_n {
            let peak = case.agc.interval(t).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let mean = case.agc.interval(t).iter().sum::<f64>() / case.grid.subintervals as f64;
            if mean.abs() > 1e-9 * peak.max(1.0) {
                v.push(format!("regulation signal interval {} is not zero-mean", t + 1));
            }
            let req = case.profiles.reg_mileage_mw.get(t).copied().unwrap_or(0.0);
            let mileage = agc::mileage_requirement(&case.agc, t);
            if req > 0.0 {
                if (mileage - req).abs() > 1e-6 * req {
                    v.push(format!(
                        "regulation signal mileage {} differs from requirement {} at interval {}",
                        mileage,
                        req,
                        t + 1
                    ));
                }
                match agc::multiplier_bound(&case.agc, t, 1e-3) {
                    Ok(m) if m >= 1.0 => {}
                    Ok(m) => v.push(format!(
                        "mileage-to-capacity multiplier {:.4} below one at interval {}",
                        m,
                        t + 1
                    )),
                    Err(e) => v.push(format!("interval {}: {}", t + 1, e)),
                }
            } else if peak > 0.0 {
                v.push(format!(
                    "regulation signal moves at interval {} but the mileage requirement is zero",
                    t + 1
                ));
            }
        }
    }

    v
}

fn connected(case: &ScenarioCase) -> bool {
    let n = case.buses.len();
    let mut adj = vec![Vec::new(); n];
    for l in &case.lines {
        if let (Some(a), Some(b)) = (case.bus_index(&l.from), case.bus_index(&l.to)) {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &w in &adj[u] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_quad(alpha: f64) -> OfferQuad {
        OfferQuad { energy: alpha, reserve: 0.15 * alpha, reg_capacity: 0.4 * alpha, reg_mileage: 0.07 * alpha }
    }

    /// Single-bus, one-generator, two-interval case that validates cleanly.
    fn tiny_case() -> ScenarioCase {
        let grid = build_time_grid(0.25, 0.125, 2).unwrap();
        let battery = BatteryUnit::with_default_aging("B1", "hub", 50.0, 200.0, 20.0, 180.0, 90.0, 0.95, 200_000.0)
            .unwrap();
        let raw = AgcTrace::new(vec![vec![1.0, -1.0], vec![-2.0, 2.0]]).unwrap();
        let agc = crate::agc::prepare_trace(&raw, &[12.0, 15.0]).unwrap();
        ScenarioCase {
            grid,
            buses: vec![Bus { id: "hub".into() }],
            lines: vec![],
            generators: vec![Generator {
                name: "G1".into(),
                bus: "hub".into(),
                pmin: 0.0,
                pmax: 200.0,
                rs_ramp: 40.0,
                rg_ramp: 30.0,
                offers: vec![flat_quad(20.0), flat_quad(25.0)],
            }],
            batteries: vec![battery],
            profiles: SystemProfiles {
                load_mw: vec![vec![100.0, 120.0]],
                reserve_mw: vec![10.0, 12.0],
                reg_capacity_mw: vec![8.0, 9.0],
                reg_mileage_mw: vec![12.0, 15.0],
            },
            agc,
            offer_caps: OfferCaps::default(),
        }
    }

    #[test]
    fn time_grid_published_shapes() {
        let g = build_time_grid(0.25, 20.0 / 3600.0, 96).unwrap();
        assert_eq!(g.subintervals, 45);
        assert_eq!(g.intervals, 96);
        let g = build_time_grid(0.25, 0.25, 4).unwrap();
        assert_eq!(g.subintervals, 1);
        assert!(build_time_grid(1.0, 7.0 / 60.0, 24).is_err());
        assert!(build_time_grid(0.0, 0.25, 4).is_err());
        assert!(build_time_grid(0.25, 0.125, 0).is_err());
    }

    #[test]
    fn valid_case_has_no_violations() {
        let case = tiny_case();
        let v = validate_case(&case);
        assert!(v.is_empty(), "unexpected violations: {:?}", v);
        // Idempotent.
        assert_eq!(validate_case(&case), validate_case(&case));
    }

    #[test]
    fn battery_soc_window_is_checked() {
        let mut case = tiny_case();
        case.batteries[0].soc_init = 190.0;
        let v = validate_case(&case);
        assert!(v.iter().any(|m| m.contains("initial state of charge")), "{:?}", v);
    }

    #[test]
    fn insufficient_generation_is_reported() {
        let mut case = tiny_case();
        case.generators[0].pmax = 100.0;
        case.profiles.load_mw[0] = vec![150.0, 150.0];
        let v = validate_case(&case);
        assert!(v.iter().any(|m| m.contains("insufficient generation")), "{:?}", v);
    }

    #[test]
    fn ramp_shortfalls_are_reported() {
        let mut case = tiny_case();
        case.profiles.reserve_mw = vec![50.0, 50.0];
        let v = validate_case(&case);
        assert!(v.iter().any(|m| m.contains("insufficient reserve ramp")), "{:?}", v);

        let mut case = tiny_case();
        case.profiles.reg_capacity_mw = vec![35.0, 35.0];
        let v = validate_case(&case);
        assert!(v.iter().any(|m| m.contains("insufficient regulation ramp")), "{:?}", v);
    }

    #[test]
    fn disconnected_network_is_reported() {
        let mut case = tiny_case();
        case.buses.push(Bus { id: "island".into() });
        case.profiles.load_mw.push(vec![0.0, 0.0]);
        let v = validate_case(&case);
        assert!(v.iter().any(|m| m.contains("not connected")), "{:?}", v);
    }

    #[test]
    fn signal_mismatches_are_reported() {
        // Mileage requirement not matching the prepared trace.
        let mut case = tiny_case();
        case.profiles.reg_mileage_mw = vec![13.0, 15.0];
        let v = validate_case(&case);
        assert!(v.iter().any(|m| m.contains("mileage")), "{:?}", v);

        // A signal whose mileage sits in a single jump has a multiplier
        // below one (it also fails the zero-mean check; both are reported).
        let mut case = tiny_case();
        case.agc = AgcTrace::new(vec![vec![0.0, 12.0], vec![-7.5, 7.5]]).unwrap();
        case.profiles.reg_mileage_mw = vec![12.0, 34.5];
        let v = validate_case(&case);
        assert!(v.iter().any(|m| m.contains("multiplier")), "{:?}", v);
        assert!(v.iter().any(|m| m.contains("zero-mean")), "{:?}", v);
    }

    #[test]
    fn zero_requirement_with_moving_signal_is_reported() {
        let mut case = tiny_case();
        case.profiles.reg_mileage_mw = vec![0.0, 15.0];
        let v = validate_case(&case);
        assert!(v.iter().any(|m| m.contains("mileage requirement is zero")), "{:?}", v);
    }

    #[test]
    fn negative_load_is_reported() {
        let mut case = tiny_case();
        case.profiles.load_mw[0][1] = -5.0;
        let v = validate_case(&case);
        assert!(v.iter().any(|m| m.contains("negative load")), "{:?}", v);
    }
}
