//! Battery cycle-aging economics.
//!
//! A cycle of depth `δ` (fraction of capacity swung) costs the battery
//! `E·C(δ)` dollars, with `C(δ) = a·δ^b` calibrated so that the replacement
//! cost is consumed after the rated number of cycles at the reference depth.
//! Because `C` is convex (`b > 1`), marginal aging grows with depth; the
//! offer model linearizes it into `K` equal-energy segments whose slopes are
//! the secants of `C` between consecutive depth knots, so draining segments
//! cheapest-first reproduces the piecewise-linear interpolant of `C` — an
//! over-approximation of the true curve.
//!
//! Two oracles audit that linearization: a standard rainflow counter over
//! SOC traces, and a greedy per-sub-interval segment allocator mirroring the
//! offer model's charge/discharge bookkeeping.

use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq)]
pub enum DegradationError {
    BadParameter(String),
    /// Discharge requested more energy than the segments hold.
    DrainFromEmpty { step: usize, deficit_mwh: f64 },
    /// Charge requested past the total segment capacity.
    Overfill { step: usize, excess_mwh: f64 },
    SimultaneousChargeDischarge { step: usize },
}

impl std::fmt::Display for DegradationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DegradationError::BadParameter(m) => write!(f, "{}", m),
            DegradationError::DrainFromEmpty { step, deficit_mwh } => write!(
                f,
                "sub-interval {}: discharge exceeds stored energy by {:.6} MWh",
                step, deficit_mwh
            ),
            DegradationError::Overfill { step, excess_mwh } => write!(
                f,
                "sub-interval {}: charge exceeds segment capacity by {:.6} MWh",
                step, excess_mwh
            ),
            DegradationError::SimultaneousChargeDischarge { step } => {
                write!(f, "sub-interval {}: charging and discharging at once", step)
            }
        }
    }
}

impl std::error::Error for DegradationError {}

/// Continuous aging cost `C(δ) = a·δ^b`, in $ per cycle per MWh of capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleAgingFunction {
    pub a: f64,
    pub b: f64,
    pub replacement_cost: f64,
    pub life_cycles: f64,
    pub reference_depth: f64,
}

impl CycleAgingFunction {
    /// `C(δ)` — cost per cycle per MWh of capacity.
    pub fn cost_per_capacity(&self, depth: f64) -> f64 {
        self.a * depth.powf(self.b)
    }

    /// Cost of one full cycle of the given depth on a battery of `capacity` MWh.
    pub fn cycle_cost(&self, capacity: f64, depth: f64) -> f64 {
        capacity * self.cost_per_capacity(depth)
    }
}

/// Calibrate the aging curve: replacement cost `R_c` ($/MWh) is used up after
/// `life_cycles` cycles at `reference_depth`, i.e. `a = R_c/(L·δ_ref^b)`.
pub fn build_aging_function(
    replacement_cost: f64,
    life_cycles: f64,
    reference_depth: f64,
    exponent: f64,
) -> Result<CycleAgingFunction, DegradationError> {
    if life_cycles <= 0.0 {
        return Err(DegradationError::BadParameter(format!(
            "cycle life must be positive, got {}",
            life_cycles
        )));
    }
    if !(reference_depth > 0.0 && reference_depth <= 1.0) {
        return Err(DegradationError::BadParameter(format!(
            "reference depth must be in (0, 1], got {}",
            reference_depth
        )));
    }
    if exponent <= 0.0 {
        return Err(DegradationError::BadParameter(format!(
            "aging exponent must be positive, got {}",
            exponent
        )));
    }
    if replacement_cost < 0.0 {
        return Err(DegradationError::BadParameter(format!(
            "replacement cost must be non-negative, got {}",
            replacement_cost
        )));
    }
    Ok(CycleAgingFunction {
        a: replacement_cost / (life_cycles * reference_depth.powf(exponent)),
        b: exponent,
        replacement_cost,
        life_cycles,
        reference_depth,
    })
}

/// Equal-energy piecewise linearization of the aging curve.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationSegments {
    /// Per-segment energy cap `e^Max_k` in MWh (uniform, `E/K`).
    pub e_max: Vec<f64>,
    /// Per-segment marginal cost in $/MWh discharged from segment `k`.
    pub slopes: Vec<f64>,
}

impl DegradationSegments {
    pub fn count(&self) -> usize {
        self.slopes.len()
    }

    pub fn capacity(&self) -> f64 {
        self.e_max.iter().sum()
    }
}

/// Split capacity `E` into `K` segments; segment `k` covers the depth band
/// `((k-1)/K, k/K]` at the secant slope `K·a·[(k/K)^b − ((k-1)/K)^b]` $/MWh,
/// independent of `E` and strictly increasing in `k` for `b > 1`.
pub fn segment_slopes(
    aging: &CycleAgingFunction,
    k_segments: usize,
    capacity: f64,
) -> Result<DegradationSegments, DegradationError> {
    if k_segments == 0 {
        return Err(DegradationError::BadParameter("segment count must be >= 1".into()));
    }
    if capacity <= 0.0 {
        return Err(DegradationError::BadParameter(format!(
            "capacity must be positive, got {}",
            capacity
        )));
    }
    let kf = k_segments as f64;
    let slopes = (1..=k_segments)
        .map(|k| {
            let hi = (k as f64 / kf).powf(aging.b);
            let lo = ((k - 1) as f64 / kf).powf(aging.b);
            kf * aging.a * (hi - lo)
        })
        .collect();
    Ok(DegradationSegments { e_max: vec![capacity / kf; k_segments], slopes })
}

/// Rainflow cycle extraction over an SOC trace: `(range_mwh, weight)` pairs,
/// weight 1.0 for matched (full) cycles and 0.5 for residual half cycles.
pub fn rainflow_cycles(profile: &[f64]) -> Vec<(f64, f64)> {
    let pts = turning_points(profile);
    let mut cycles = Vec::new();
    let mut s: VecDeque<f64> = VecDeque::new();
    for &p in &pts {
        s.push_back(p);
        while s.len() >= 3 {
            let n = s.len();
            let x = (s[n - 1] - s[n - 2]).abs();
            let y = (s[n - 2] - s[n - 3]).abs();
            if x < y {
                break;
            }
            if n == 3 {
                // The range under test touches the start of the unresolved
                // sequence: count half and advance the start.
                cycles.push((y, 0.5));
                s.pop_front();
            } else {
                cycles.push((y, 1.0));
                s.remove(n - 2);
                s.remove(n - 3);
            }
        }
    }
    // Whatever is left never closed: successive ranges count half each.
    for w in s.make_contiguous().windows(2) {
        let r = (w[1] - w[0]).abs();
        if r > 0.0 {
            cycles.push((r, 0.5));
        }
    }
    cycles
}

fn turning_points(profile: &[f64]) -> Vec<f64> {
    let mut pts: Vec<f64> = Vec::new();
    for &v in profile {
        if pts.last() == Some(&v) {
            continue;
        }
        while pts.len() >= 2 {
            let a = pts[pts.len() - 2];
            let b = pts[pts.len() - 1];
            // Drop b if it sits monotonically between a and v.
            if (b - a).signum() == (v - b).signum() {
                pts.pop();
            } else {
                break;
            }
        }
        pts.push(v);
    }
    pts
}

/// Audit cost of an SOC trace: rainflow cycles priced on the aging curve.
pub fn rainflow_cost(profile: &[f64], aging: &CycleAgingFunction, capacity: f64) -> f64 {
    rainflow_cycles(profile)
        .iter()
        .map(|&(range, weight)| weight * aging.cycle_cost(capacity, range / capacity))
        .sum()
}

/// Per-segment stored energy, MWh.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentState {
    pub energy: Vec<f64>,
}

impl SegmentState {
    pub fn empty(segments: &DegradationSegments) -> Self {
        SegmentState { energy: vec![0.0; segments.count()] }
    }

    /// Allocate an initial SOC cheapest-segment-first.
    pub fn fill_cheapest(
        segments: &DegradationSegments,
        total_mwh: f64,
    ) -> Result<Self, DegradationError> {
        let mut st = SegmentState::empty(segments);
        let mut left = total_mwh;
        for k in 0..segments.count() {
            let take = left.min(segments.e_max[k]);
            st.energy[k] = take;
            left -= take;
        }
        if left > 1e-9 {
            return Err(DegradationError::Overfill { step: 0, excess_mwh: left });
        }
        Ok(st)
    }

    pub fn soc(&self) -> f64 {
        self.energy.iter().sum()
    }
}

/// Step-by-step result of [`simulate_segment_allocation`].
#[derive(Debug, Clone)]
pub struct AllocationTrace {
    /// Degradation cost booked in each sub-interval, $.
    pub step_costs: Vec<f64>,
    /// Segment energies after each sub-interval.
    pub energies: Vec<Vec<f64>>,
    pub total_cost: f64,
}

impl AllocationTrace {
    /// SOC after each sub-interval (sum over segments).
    pub fn soc_trace(&self) -> Vec<f64> {
        self.energies.iter().map(|e| e.iter().sum()).collect()
    }
}

/// Replay a battery-terminal power series against the segment model.
///
/// `series` holds `(charge_mw, discharge_mw)` per sub-interval of length
/// `dz_hours`, measured at the battery terminals. Stored energy rises by
/// `η·charge` and falls by `discharge/η`; the fall is allocated to the
/// cheapest non-empty segments and priced at their slopes, the rise fills the
/// cheapest non-full segments for free. This is exactly the allocation a
/// cost-minimizing offer model picks, so it serves as the audit oracle for
/// the segment bookkeeping constraints.
pub fn simulate_segment_allocation(
    series: &[(f64, f64)],
    segments: &DegradationSegments,
    initial: &SegmentState,
    eta: f64,
    dz_hours: f64,
) -> Result<AllocationTrace, DegradationError> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(DegradationError::BadParameter(format!(
            "efficiency must be in (0, 1], got {}",
            eta
        )));
    }
    let mut energy = initial.energy.clone();
    if energy.len() != segments.count() {
        return Err(DegradationError::BadParameter(format!(
            "state has {} segments, model has {}",
            energy.len(),
            segments.count()
        )));
    }
    let mut step_costs = Vec::with_capacity(series.len());
    let mut energies = Vec::with_capacity(series.len());
    let mut total = 0.0;

    for (step, &(charge_mw, discharge_mw)) in series.iter().enumerate() {
        let (mut charge_mw, mut discharge_mw) = (charge_mw, discharge_mw);
        if charge_mw > 1e-6 && discharge_mw > 1e-6 {
            return Err(DegradationError::SimultaneousChargeDischarge { step });
        }
        // Tiny numerical overlap nets out.
        let net = charge_mw - discharge_mw;
        if net >= 0.0 {
            charge_mw = net;
            discharge_mw = 0.0;
        } else {
            charge_mw = 0.0;
            discharge_mw = -net;
        }

        let mut cost = 0.0;
        if discharge_mw > 0.0 {
            let mut drain = discharge_mw * dz_hours / eta;
            for k in 0..energy.len() {
                if drain <= 0.0 {
                    break;
                }
                let take = drain.min(energy[k]);
                energy[k] -= take;
                cost += take * segments.slopes[k];
                drain -= take;
            }
            if drain > 1e-9 {
                return Err(DegradationError::DrainFromEmpty { step, deficit_mwh: drain });
            }
        }
        if charge_mw > 0.0 {
            let mut fill = charge_mw * dz_hours * eta;
            for k in 0..energy.len() {
                if fill <= 0.0 {
                    break;
                }
                let take = fill.min(segments.e_max[k] - energy[k]);
                energy[k] += take;
                fill -= take;
            }
            if fill > 1e-9 {
                return Err(DegradationError::Overfill { step, excess_mwh: fill });
            }
        }
        total += cost;
        step_costs.push(cost);
        energies.push(energy.clone());
    }
    Ok(AllocationTrace { step_costs, energies, total_cost: total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn study_curve() -> CycleAgingFunction {
        build_aging_function(200_000.0, 6000.0, 0.8, 2.03).unwrap()
    }

    #[test]
    fn calibration_matches_published_coefficient() {
        let c = study_curve();
        let exact = 200_000.0 / (6000.0 * 0.8f64.powf(2.03));
        assert_eq!(c.a, exact);
        assert!((c.a - 52.4).abs() / 52.4 < 0.005, "a = {}", c.a);
        // Linear in replacement cost.
        let half = build_aging_function(100_000.0, 6000.0, 0.8, 2.03).unwrap();
        assert!((half.a - c.a / 2.0).abs() < 1e-12);
        assert!((half.a - 26.2).abs() / 26.2 < 0.005);
        // Free replacement ages for free.
        let free = build_aging_function(0.0, 6000.0, 0.8, 2.03).unwrap();
        assert_eq!(free.a, 0.0);
    }

    #[test]
    fn calibration_rejects_bad_parameters() {
        assert!(build_aging_function(1.0, 0.0, 0.8, 2.0).is_err());
        assert!(build_aging_function(1.0, -3.0, 0.8, 2.0).is_err());
        assert!(build_aging_function(1.0, 10.0, 0.0, 2.0).is_err());
        assert!(build_aging_function(1.0, 10.0, 1.5, 2.0).is_err());
        assert!(build_aging_function(1.0, 10.0, 0.8, -1.0).is_err());
        assert!(build_aging_function(-1.0, 10.0, 0.8, 2.0).is_err());
    }

    #[test]
    fn segment_slopes_bracket_published_values() {
        let seg = segment_slopes(&study_curve(), 16, 200.0).unwrap();
        assert_eq!(seg.count(), 16);
        assert!((seg.slopes[0] - 3.0).abs() / 3.0 < 0.01, "first slope {}", seg.slopes[0]);
        assert!((seg.slopes[15] - 103.0).abs() / 103.0 < 0.01, "last slope {}", seg.slopes[15]);
        // One segment collapses to the full-depth average.
        let one = segment_slopes(&study_curve(), 1, 200.0).unwrap();
        assert!((one.slopes[0] - study_curve().a).abs() < 1e-12);
    }

    #[test]
    fn slopes_increase_and_telescope() {
        let curve = study_curve();
        for k in [1usize, 4, 16, 64] {
            let seg = segment_slopes(&curve, k, 200.0).unwrap();
            for w in seg.slopes.windows(2) {
                assert!(w[0] < w[1], "slopes must increase for convex aging");
            }
            // Draining everything from empty-depth to full depth costs E·C(1).
            let full: f64 = seg.slopes.iter().zip(&seg.e_max).map(|(s, e)| s * e).sum();
            assert!((full - curve.cycle_cost(200.0, 1.0)).abs() < 1e-9 * full.abs());
        }
    }

    #[test]
    fn rainflow_counts_the_textbook_sequence() {
        // Classic peak-valley sequence: two matched cycles, one residual.
        let cycles = rainflow_cycles(&[0.0, 5.0, 1.0, 4.0, 2.0, 6.0, 0.0]);
        let mut full: Vec<f64> = cycles.iter().filter(|c| c.1 == 1.0).map(|c| c.0).collect();
        full.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(full, vec![2.0, 4.0]);
        // The outer 0→6→0 excursion brackets the start point, so it counts
        // as two half cycles (cost-equivalent to one full cycle).
        let halves: Vec<f64> = cycles.iter().filter(|c| c.1 == 0.5).map(|c| c.0).collect();
        assert_eq!(halves, vec![6.0, 6.0]);
    }

    #[test]
    fn rainflow_prices_a_simple_cycle() {
        let curve = study_curve();
        assert_eq!(rainflow_cost(&[120.0, 120.0, 120.0], &curve, 200.0), 0.0);
        // Down 40 and back: two half cycles of depth 0.2 = one full cycle.
        let got = rainflow_cost(&[90.0, 50.0, 90.0], &curve, 200.0);
        let want = curve.cycle_cost(200.0, 0.2);
        assert!((got - want).abs() < 1e-9, "{} vs {}", got, want);
        assert!((got - 399.4).abs() / 399.4 < 0.01, "cost {}", got);
    }

    #[test]
    fn rainflow_ignores_intermediate_monotone_samples() {
        let curve = study_curve();
        let coarse = rainflow_cost(&[90.0, 50.0, 90.0], &curve, 200.0);
        let fine = rainflow_cost(
            &[90.0, 80.0, 70.0, 60.0, 50.0, 60.0, 70.0, 80.0, 90.0],
            &curve,
            200.0,
        );
        assert!((coarse - fine).abs() < 1e-12);
    }

    #[test]
    fn nested_cycles_split_correctly() {
        // Big swing with a small bump inside: rainflow books the bump as its
        // own full cycle plus the outer range as halves.
        let profile = [160.0, 40.0, 70.0, 40.0, 160.0];
        let cycles = rainflow_cycles(&profile);
        let full: Vec<f64> = cycles.iter().filter(|c| c.1 == 1.0).map(|c| c.0).collect();
        assert_eq!(full, vec![30.0]);
        let mut halves: Vec<f64> = cycles.iter().filter(|c| c.1 == 0.5).map(|c| c.0).collect();
        halves.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(halves, vec![120.0, 120.0]);
    }

    #[test]
    fn greedy_allocation_books_published_example() {
        let seg = segment_slopes(&study_curve(), 16, 200.0).unwrap();
        let start = SegmentState::empty(&seg);
        // Charge 12.5 MWh then discharge it, lossless: only segment 1 cycles.
        let trace =
            simulate_segment_allocation(&[(12.5, 0.0), (0.0, 12.5)], &seg, &start, 1.0, 1.0)
                .unwrap();
        assert_eq!(trace.step_costs[0], 0.0);
        let want = 12.5 * seg.slopes[0];
        assert!((trace.total_cost - want).abs() < 1e-9);
        assert!((trace.total_cost - 37.8).abs() / 37.8 < 0.01, "cost {}", trace.total_cost);
        assert!(trace.soc_trace()[1].abs() < 1e-12);
    }

    #[test]
    fn efficiency_split_on_both_legs() {
        let seg = segment_slopes(&study_curve(), 16, 200.0).unwrap();
        let start = SegmentState::empty(&seg);
        // 10 MWh at the terminals stores 9.5; 9.025 out drains exactly 9.5.
        let trace = simulate_segment_allocation(
            &[(10.0, 0.0), (0.0, 9.025)],
            &seg,
            &start,
            0.95,
            1.0,
        )
        .unwrap();
        assert!((trace.soc_trace()[0] - 9.5).abs() < 1e-12);
        assert!(trace.soc_trace()[1].abs() < 1e-9);
        let want = 9.5 * seg.slopes[0];
        assert!((trace.total_cost - want).abs() < 1e-9);
    }

    #[test]
    fn allocation_rejects_impossible_series() {
        let seg = segment_slopes(&study_curve(), 4, 100.0).unwrap();
        let empty = SegmentState::empty(&seg);
        let err = simulate_segment_allocation(&[(0.0, 5.0)], &seg, &empty, 1.0, 1.0).unwrap_err();
        assert!(matches!(err, DegradationError::DrainFromEmpty { .. }));
        let full = SegmentState::fill_cheapest(&seg, 100.0).unwrap();
        let err = simulate_segment_allocation(&[(5.0, 0.0)], &seg, &full, 1.0, 1.0).unwrap_err();
        assert!(matches!(err, DegradationError::Overfill { .. }));
        let err =
            simulate_segment_allocation(&[(5.0, 5.0)], &seg, &empty, 1.0, 1.0).unwrap_err();
        assert!(matches!(err, DegradationError::SimultaneousChargeDischarge { .. }));
        // Zero series: free and stateless.
        let trace = simulate_segment_allocation(&[(0.0, 0.0)], &seg, &empty, 1.0, 1.0).unwrap();
        assert_eq!(trace.total_cost, 0.0);
        assert_eq!(trace.energies[0], empty.energy);
    }

    #[test]
    fn conservation_under_random_series() {
        let curve = study_curve();
        let seg = segment_slopes(&curve, 8, 50.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let start = SegmentState::fill_cheapest(&seg, 25.0).unwrap();
        let mut soc: f64 = 25.0;
        let mut series = Vec::new();
        for _ in 0..200 {
            let dz = 0.25;
            let headroom = (50.0 - soc) / dz;
            let stock = soc / dz;
            if rng.gen_bool(0.5) {
                let mw = rng.gen_range(0.0..headroom.min(20.0).max(1e-12));
                series.push((mw, 0.0));
                soc += mw * dz;
            } else {
                let mw = rng.gen_range(0.0..stock.min(20.0).max(1e-12));
                series.push((0.0, mw));
                soc -= mw * dz;
            }
        }
        let trace = simulate_segment_allocation(&series, &seg, &start, 1.0, 0.25).unwrap();
        // Sum over segments tracks the running SOC at every step.
        let mut expect = 25.0;
        for (step, &(c, d)) in series.iter().enumerate() {
            expect += (c - d) * 0.25;
            assert!(
                (trace.soc_trace()[step] - expect).abs() < 1e-9,
                "conservation broke at step {}",
                step
            );
        }
    }

    #[test]
    fn segment_cost_over_approximates_rainflow() {
        let curve = study_curve();
        let seg = segment_slopes(&curve, 16, 200.0).unwrap();
        let start = SegmentState::empty(&seg);
        // Charge to 40 then back to empty, from empty segments.
        let trace =
            simulate_segment_allocation(&[(40.0, 0.0), (0.0, 40.0)], &seg, &start, 1.0, 1.0)
                .unwrap();
        let rain = rainflow_cost(&[0.0, 40.0, 0.0], &curve, 200.0);
        assert!(trace.total_cost >= rain);
        assert!((trace.total_cost - 405.8).abs() / 405.8 < 0.01, "segment {}", trace.total_cost);
        assert!((rain - 399.4).abs() / 399.4 < 0.01, "rainflow {}", rain);
    }

    #[test]
    fn refinement_halves_the_linearization_gap() {
        let curve = study_curve();
        let depth = 0.7;
        let rain = curve.cycle_cost(200.0, depth);
        let mut last_gap = f64::INFINITY;
        for k in [4usize, 8, 16, 32, 64] {
            let seg = segment_slopes(&curve, k, 200.0).unwrap();
            let start = SegmentState::empty(&seg);
            let swing = depth * 200.0;
            let trace = simulate_segment_allocation(
                &[(swing, 0.0), (0.0, swing)],
                &seg,
                &start,
                1.0,
                1.0,
            )
            .unwrap();
            let gap = trace.total_cost - rain;
            assert!(gap >= -1e-9, "segment model must not undercount (K={})", k);
            assert!(gap < last_gap, "gap must shrink as K doubles (K={})", k);
            last_gap = gap;
            let rel = gap / rain;
            if k == 16 {
                assert!(rel < 0.02, "K=16 gap {}", rel);
            }
            if k == 64 {
                assert!(rel < 0.005, "K=64 gap {}", rel);
            }
        }
    }
}
