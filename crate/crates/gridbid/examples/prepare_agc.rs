//! Normalize a raw regulation signal so every market interval is zero-mean
//! and its accumulated movement equals the mileage requirement, then split
//! the system signal across units by participation factor.
//!
//!     cargo run --example prepare_agc

use gridbid::agc::{
    dispatch_unit_signal, max_step, mileage_requirement, multiplier_bound, prepare_trace, AgcTrace,
};

fn main() {
    // A raw two-interval signal with drift and the wrong mileage.
    let raw = AgcTrace::new(vec![
        vec![3.0, 5.0, 2.0, 4.0, 1.0, 2.0],
        vec![-1.0, -4.0, -2.0, -5.0, -3.0, -1.0],
    ])
    .unwrap();
    let targets = [30.0, 24.0];
    let trace = prepare_trace(&raw, &targets).unwrap();

    for t in 0..trace.intervals() {
        let mean: f64 = trace.interval(t).iter().sum::<f64>() / trace.steps() as f64;
        println!(
            "interval {}: mean {:+.2e} MW, mileage {:.3} MW (target {}), max step {:.3} MW",
            t + 1,
            mean,
            mileage_requirement(&trace, t),
            targets[t],
            max_step(&trace, t)
        );
        // The mileage multiplier cap keeps awarded mileage dispatchable
        // within the awarded capacity band.
        println!("  mileage multiplier bound: {:.3}", multiplier_bound(&trace, t, 1e-3).unwrap());
    }

    // Two units follow the signal with 70/30 participation in interval 1
    // and 40/60 in interval 2.
    for (name, pf) in [("A", vec![0.7, 0.4]), ("B", vec![0.3, 0.6])] {
        let unit = dispatch_unit_signal(&pf, &trace);
        let peak = unit
            .iter()
            .flatten()
            .fold(0.0f64, |acc, &v| acc.max(v.abs()));
        println!("unit {}: peak dispatched magnitude {:.3} MW", name, peak);
    }
}
