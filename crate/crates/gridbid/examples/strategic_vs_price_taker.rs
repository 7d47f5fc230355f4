//! Three bidding postures for the same battery on a two-interval system.
//!
//! A cheap base generator (8 then 12 $/MWh) covers the off-peak hour, and a
//! 30 $/MWh peaker covers the last 35 MW of the evening peak. The battery
//! starts at its state-of-charge floor, so everything it sells must first be
//! bought.
//!
//! 1. The reckless price taker offers its full 50 MW at zero prices in every
//!    interval. The market — which takes quantity offers at face value —
//!    dispatches discharge in both intervals, a schedule the battery cannot
//!    physically run; the audit rejects it.
//! 2. The self-scheduler offers a feasible full cycle (buy the off-peak,
//!    sell the peak) with no price wisdom. Its own 50 MW discharge pushes
//!    the peaker out and crashes the peak price to 12 $/MWh: profit 50 $.
//! 3. The strategic optimizer withholds down to the peaker's 35 MW share,
//!    keeping it marginal and the peak price at 30 $/MWh: profit 192.50 $
//!    on a smaller cycle.
//!
//!     cargo run --example strategic_vs_price_taker

use gridbid::agc::AgcTrace;
use gridbid::bilevel::{evaluate_bids, optimize_bids, price_taker_bids, BilevelConfig};
use gridbid::clearing::BatteryBids;
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
        BatteryUnit::with_default_aging("bess", "hub", 50.0, 200.0, 20.0, 180.0, 20.0, 1.0, 0.0)
            .unwrap();
    battery.segments = 2;
    let case = ScenarioCase {
        grid,
        buses: vec![Bus { id: "hub".into() }],
        lines: vec![],
        generators: vec![
            Generator {
                name: "base".into(),
                bus: "hub".into(),
                pmin: 0.0,
                pmax: 150.0,
                rs_ramp: 50.0,
                rg_ramp: 50.0,
                offers: vec![quad(8.0), quad(12.0)],
            },
            Generator {
                name: "peaker".into(),
                bus: "hub".into(),
                pmin: 0.0,
                pmax: 100.0,
                rs_ramp: 50.0,
                rg_ramp: 50.0,
                offers: vec![quad(30.0), quad(30.0)],
            },
        ],
        batteries: vec![battery],
        profiles: SystemProfiles {
            // Off-peak 60 MW, peak 185 MW: the base unit alone leaves a
            // 35 MW gap at the peak for the peaker (or the battery) to fill.
            load_mw: vec![vec![60.0, 185.0]],
            reserve_mw: vec![0.0, 0.0],
            reg_capacity_mw: vec![0.0, 0.0],
            reg_mileage_mw: vec![0.0, 0.0],
        },
        agc: AgcTrace::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap(),
        offer_caps: OfferCaps::default(),
    };
    assert!(case.validate().is_empty());
    let cfg = BilevelConfig { rel_gap: 1e-6, ..BilevelConfig::default() };

    // Posture 1: full quantity at zero prices — physically undeliverable.
    let reckless = evaluate_bids(&case, &price_taker_bids(&case), &cfg).unwrap();
    let why = reckless.infeasible.as_deref().expect("free discharge must break the schedule");
    println!("reckless taker rejected: {}", why);

    // Posture 2: a feasible self-schedule — buy 50 MW off-peak (bidding just
    // above the going price so the offer clears), sell it all at the peak.
    let mut selfsched = BatteryBids::zero(1, 2);
    selfsched.q_energy[0] = vec![50.0, 50.0];
    selfsched.beta_energy[0] = vec![8.5, 0.0];
    let passive = evaluate_bids(&case, &selfsched, &cfg).unwrap();
    assert!(passive.infeasible.is_none(), "the sized cycle must clear cleanly");
    let lmp = &passive.outcome.as_ref().unwrap().lmp;
    println!(
        "self-scheduler: profit {:.4} $ (LMPs {:.0} and {:.0} $/MWh — its own discharge \
         undercuts the peaker)",
        passive.profit, lmp[0][0], lmp[0][1],
    );

    // Posture 3: co-optimized quantities and prices.
    let sol = optimize_bids(&case, &cfg, &Engine::autodetect(None)).unwrap();
    println!("strategic offers: profit {:.4} $", sol.profit);
    for t in 0..2 {
        println!(
            "t{}: energy {:+.2} MW of {:.2} MW offered at LMP {:.2} $/MWh",
            t + 1,
            sol.outcome.bat_energy[0][t],
            sol.bids.q_energy[0][t],
            sol.outcome.lmp[0][t],
        );
    }
    // Withholding to 35 MW keeps the peaker on the margin: the cycle earns
    // 35 MW x 0.25 h x (30 - 8) $/MWh = 192.50 $, nearly four times the
    // passive cycle's 50 $.
    assert!((passive.profit - 50.0).abs() < 1e-3, "passive profit {}", passive.profit);
    assert!(sol.profit >= passive.profit - 1e-6);
    assert!(sol.profit > 190.0, "strategic profit {}", sol.profit);
    println!("strategic beats the self-scheduler by {:.2} $", sol.profit - passive.profit);
}
