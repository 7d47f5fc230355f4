//! Solve the strategic bidding problem on a hand-checkable micro case: two
//! 15-minute intervals with an energy price spread, one generator, one
//! battery. The optimum charges 50 MW at 10 $/MWh and discharges 50 MW at
//! 20 $/MWh: profit 50 MW x 0.25 h x 10 $/MWh = 125 $.
//!
//!     cargo run --example optimize_micro_bids

use gridbid::agc::AgcTrace;
use gridbid::bilevel::{optimize_bids, BilevelConfig};
use gridbid::model::{
    build_time_grid, BatteryUnit, Bus, Generator, OfferCaps, OfferQuad, ScenarioCase,
    SystemProfiles,
};
use gridbid::solver::Engine;

fn quad(energy: f64) -> OfferQuad {
    OfferQuad { energy, reserve: 3.0, reg_capacity: 8.0, reg_mileage: 1.4 }
}

fn main() {
    let grid = build_time_grid(0.25, 0.125, 2).unwrap();
    let mut battery =
        BatteryUnit::with_default_aging("bess", "hub", 50.0, 200.0, 20.0, 180.0, 90.0, 1.0, 0.0)
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
            pmax: 200.0,
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

    let cfg = BilevelConfig { rel_gap: 1e-6, ..BilevelConfig::default() };
    let sol = optimize_bids(&case, &cfg, &Engine::autodetect(None)).unwrap();

    println!("profit: {:.4} $", sol.profit);
    for t in 0..2 {
        println!(
            "t{}: battery energy {:+.1} MW at LMP {:.2} $/MWh (offer q = {:.1} MW, beta = {:.2})",
            t + 1,
            sol.outcome.bat_energy[0][t],
            sol.outcome.lmp[0][t],
            sol.bids.q_energy[0][t],
            sol.bids.beta_energy[0][t],
        );
    }
    println!(
        "diagnostics: stationarity {:.2e}, complementarity {:.2e}, duality gap {:.2e}",
        sol.diagnostics.stationarity_inf,
        sol.diagnostics.complementarity_rel,
        sol.diagnostics.duality_gap_rel
    );
}
