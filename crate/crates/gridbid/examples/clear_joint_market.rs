//! Clear the joint energy / reserve / regulation market for a merit-order
//! fleet and read dispatch and prices off the LP duals.
//!
//!     cargo run --example clear_joint_market

use gridbid::agc::AgcTrace;
use gridbid::clearing::{baseline_without_bess, regulation_multipliers};
use gridbid::model::{
    build_time_grid, Bus, Generator, OfferCaps, OfferQuad, ScenarioCase, SystemProfiles,
};

fn quad(energy: f64) -> OfferQuad {
    OfferQuad { energy, reserve: 0.15 * energy, reg_capacity: 0.4 * energy, reg_mileage: 0.07 * energy }
}

fn main() {
    // One bus, two generators, one 15-minute interval: 150 MW of load, 20 MW
    // of spinning reserve, 10 MW of regulation capacity at 1.4x mileage.
    let grid = build_time_grid(0.25, 0.125, 1).unwrap();
    // Signal movement |a| + |-a - a| = 3a must equal the 14 MW mileage
    // requirement, and the two setpoints already average to zero.
    let a = 14.0 / 3.0;
    let agc = AgcTrace::new(vec![vec![a, -a]]).unwrap();
    let case = ScenarioCase {
        grid,
        buses: vec![Bus { id: "hub".into() }],
        lines: vec![],
        generators: vec![
            Generator {
                name: "cheap".into(),
                bus: "hub".into(),
                pmin: 0.0,
                pmax: 100.0,
                rs_ramp: 30.0,
                rg_ramp: 30.0,
                offers: vec![quad(10.0)],
            },
            Generator {
                name: "dear".into(),
                bus: "hub".into(),
                pmin: 0.0,
                pmax: 100.0,
                rs_ramp: 30.0,
                rg_ramp: 30.0,
                offers: vec![quad(20.0)],
            },
        ],
        batteries: vec![],
        profiles: SystemProfiles {
            load_mw: vec![vec![150.0]],
            reserve_mw: vec![20.0],
            reg_capacity_mw: vec![10.0],
            reg_mileage_mw: vec![14.0],
        },
        agc,
        offer_caps: OfferCaps::default(),
    };
    assert!(case.validate().is_empty());

    let m = regulation_multipliers(&case, 1e-3).unwrap();
    println!("mileage multiplier: {:.3}", m[0]);

    let outcome = baseline_without_bess(&case).unwrap();
    println!("clearing cost: {:.2} $\n", outcome.objective);
    println!("unit   energy  reserve  reg_cap  mileage");
    for (j, g) in case.generators.iter().enumerate() {
        println!(
            "{:6} {:6.1}  {:7.1}  {:7.1}  {:7.1}",
            g.name,
            outcome.gen_energy[j][0],
            outcome.gen_reserve[j][0],
            outcome.gen_regcap[j][0],
            outcome.gen_mileage[j][0]
        );
    }
    println!(
        "\nprices $/MWh: energy {:.2}, reserve {:.2}, reg capacity {:.2}, mileage {:.2}",
        outcome.lmp[0][0],
        outcome.reserve_price[0],
        outcome.regcap_price[0],
        outcome.mileage_price[0]
    );
    // The expensive unit is marginal for energy, so the LMP lands on its
    // 20 $/MWh offer while reserve clears at the cheap unit's reserve offer.
}
