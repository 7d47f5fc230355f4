//! Calibrate the cycle-aging curve from a replacement cost, linearize it
//! into equal-energy segments, and check the segment model against rainflow
//! cycle counting on a round trip.
//!
//!     cargo run --example calibrate_degradation

use gridbid::degradation::{
    build_aging_function, rainflow_cost, segment_slopes, simulate_segment_allocation, SegmentState,
};

fn main() {
    // 200 k$/MWh replacement cost amortized over 6000 cycles at 80% depth
    // with a power-law exponent of 2.03.
    let aging = build_aging_function(200_000.0, 6_000.0, 0.8, 2.03).unwrap();
    println!("aging curve: C(depth) = {:.1} * depth^{}  $/MWh-capacity", aging.a, aging.b);
    println!("one full 80%-depth cycle on 200 MWh: {:.2} $", aging.cycle_cost(200.0, 0.8));

    let capacity = 200.0;
    for k in [4, 16, 64] {
        let segments = segment_slopes(&aging, k, capacity).unwrap();
        println!(
            "\nK = {:2}: segment energy {:.3} MWh, marginal cost {:.4} .. {:.4} $/MWh",
            k,
            segments.e_max[0],
            segments.slopes[0],
            segments.slopes[k - 1]
        );

        // One 60%-depth round trip from full: discharge 120 MWh, recharge it.
        let rate = 60.0;
        let steps = (capacity * 0.6 / rate) as usize * 2; // 1 h steps at 60 MW
        let mut series = vec![(0.0, rate); steps / 2];
        series.extend(vec![(rate, 0.0); steps / 2]);
        let initial = SegmentState::fill_cheapest(&segments, capacity).unwrap();
        let trace = simulate_segment_allocation(&series, &segments, &initial, 1.0, 1.0).unwrap();

        // Rainflow sees the same story on the SOC trace itself (MWh).
        let mut soc_profile = vec![initial.soc()];
        soc_profile.extend(trace.soc_trace());
        let rf = rainflow_cost(&soc_profile, &aging, capacity);
        println!(
            "   60% round trip: segment cost {:.4} $, rainflow cost {:.4} $ ({:+.2}%)",
            trace.total_cost,
            rf,
            100.0 * (trace.total_cost - rf) / rf
        );
    }
}
