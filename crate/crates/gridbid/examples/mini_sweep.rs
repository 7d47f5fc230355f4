//! Run a small capacity x replacement-cost sweep over the micro arbitrage
//! case and print the long-format table plus the qualitative report.
//!
//!     cargo run --example mini_sweep

use gridbid::agc::AgcTrace;
use gridbid::bilevel::BilevelConfig;
use gridbid::model::{
    build_time_grid, BatteryUnit, Bus, Generator, OfferCaps, OfferQuad, ScenarioCase,
    SystemProfiles,
};
use gridbid::report::{run_sweep, sweep_csv, sweep_report, SweepGrid};
use gridbid::solver::Engine;

fn quad(energy: f64) -> OfferQuad {
    OfferQuad { energy, reserve: 3.0, reg_capacity: 8.0, reg_mileage: 1.4 }
}

fn main() {
    let grid = build_time_grid(0.25, 0.125, 2).unwrap();
    let mut battery = BatteryUnit::with_default_aging(
        "bess", "hub", 50.0, 200.0, 20.0, 180.0, 90.0, 0.95, 100_000.0,
    )
    .unwrap();
    battery.segments = 2;
    let case = ScenarioCase {
        grid,
        buses: vec![Bus { id: "hub".into() }],
        lines: vec![],
        generators: vec![Generator {
            name: "gen".into(),
            bus: "hub".into(),
            pmin: 0.0,
            pmax: 600.0,
            rs_ramp: 50.0,
            rg_ramp: 50.0,
            offers: vec![quad(10.0), quad(20.0)],
        }],
        batteries: vec![battery],
        profiles: SystemProfiles {
            load_mw: vec![vec![100.0, 100.0]],
            reserve_mw: vec![0.0, 0.0],
            reg_capacity_mw: vec![0.0, 0.0],
            reg_mileage_mw: vec![0.0, 0.0],
        },
        agc: AgcTrace::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap(),
        offer_caps: OfferCaps::default(),
    };
    assert!(case.validate().is_empty());

    // 2 capacities x 2 replacement costs, power tied to 4-hour duration.
    let grid = SweepGrid {
        capacities_mwh: vec![200.0, 400.0],
        rates_mw: vec![50.0, 100.0],
        replacement_costs: vec![100_000.0, 1_000.0],
    };
    let cfg = BilevelConfig { rel_gap: 1e-6, ..BilevelConfig::default() };
    let engine = Engine::autodetect(None);
    let sweep = run_sweep(&case, &grid, &cfg, &engine, 2).unwrap();

    println!("{}", sweep_csv(&sweep.records));
    for f in &sweep.failures {
        println!("failed point {} MWh / {} $: {}", f.capacity_mwh, f.replacement_cost, f.error);
    }
    let report = sweep_report(&sweep.records, None);
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
}
