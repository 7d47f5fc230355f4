//! Synthetic scenario generation.
//!
//! Builds a self-contained three-bus study case: a diurnal load shape split
//! across buses, a four-unit merit-order fleet whose ancillary offers are
//! fixed multiples of the energy offers, reserve and regulation-capacity
//! requirements tracking the load, a mileage requirement drawn as a
//! per-interval multiple of the capacity requirement, and a random-walk
//! regulation signal prepared to meet that mileage exactly.

use anyhow::{Context, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agc::{prepare_trace, AgcTrace};
use crate::model::{
    build_time_grid, BatteryUnit, Bus, Generator, Line, OfferCaps, OfferQuad, ScenarioCase,
    SystemProfiles,
};

/// Ancillary price offers as multiples of the energy offer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfferRatios {
    pub reserve: f64,
    pub reg_capacity: f64,
    pub reg_mileage: f64,
}

impl Default for OfferRatios {
    fn default() -> Self {
        OfferRatios { reserve: 0.15, reg_capacity: 0.4, reg_mileage: 0.07 }
    }
}

/// Derive a generator's four offer curves from its energy offers.
pub fn synthesize_offers(energy: &[f64], ratios: &OfferRatios) -> Vec<OfferQuad> {
    energy
        .iter()
        .map(|&a| OfferQuad {
            energy: a,
            reserve: ratios.reserve * a,
            reg_capacity: ratios.reg_capacity * a,
            reg_mileage: ratios.reg_mileage * a,
        })
        .collect()
}

/// Per-interval mileage-to-capacity ratios: uniform draws over `range`,
/// recentred to a mean of exactly the range midpoint. The recentring scales
/// deviations just enough to keep every draw inside the range; `fixed`
/// short-circuits to a constant.
pub fn synthesize_ratios(
    rng: &mut impl Rng,
    count: usize,
    range: (f64, f64),
    fixed: Option<f64>,
) -> Vec<f64> {
    if let Some(f) = fixed {
        return vec![f; count];
    }
    let mid = 0.5 * (range.0 + range.1);
    let half = 0.5 * (range.1 - range.0);
    let draws: Vec<f64> = (0..count).map(|_| rng.gen_range(range.0..=range.1)).collect();
    let mean = draws.iter().sum::<f64>() / count.max(1) as f64;
    let spread = draws.iter().map(|d| (d - mean).abs()).fold(0.0f64, f64::max);
    let scale = if spread > half { half / spread } else { 1.0 };
    draws.iter().map(|d| mid + scale * (d - mean)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub intervals: usize,
    pub interval_hours: f64,
    pub subintervals: usize,
    pub seed: u64,
    pub ratios: OfferRatios,
    /// Range of the per-interval mileage/capacity requirement ratio.
    pub rho_range: (f64, f64),
    /// Pin every interval's ratio to this value instead of drawing.
    pub rho_fixed: Option<f64>,
    pub battery_rate_mw: f64,
    pub battery_capacity_mwh: f64,
    pub replacement_cost: f64,
    pub segments: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            intervals: 96,
            interval_hours: 0.25,
            subintervals: 45,
            seed: 0,
            ratios: OfferRatios::default(),
            rho_range: (1.35, 1.65),
            rho_fixed: None,
            battery_rate_mw: 50.0,
            battery_capacity_mwh: 200.0,
            replacement_cost: 200_000.0,
            segments: crate::model::DEFAULT_SEGMENTS,
        }
    }
}

impl SynthConfig {
    /// Reduced horizon (T=12, Z=9, K=8) sized for fast iteration and CI.
    pub fn desk_scale() -> Self {
        SynthConfig { intervals: 12, subintervals: 9, segments: 8, ..SynthConfig::default() }
    }
}

/// Build and validate the bundled synthetic scenario.
pub fn synthesize_scenario(cfg: &SynthConfig) -> Result<ScenarioCase> {
    let grid = build_time_grid(
        cfg.interval_hours,
        cfg.interval_hours / cfg.subintervals as f64,
        cfg.intervals,
    )?;
    let t_n = grid.intervals;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Smooth double-humped daily load, total MW, normalized shape in [-1, 1].
    let shape: Vec<f64> = (0..t_n)
        .map(|t| {
            let u = t as f64 / t_n as f64;
            let s = -0.75 * (2.0 * std::f64::consts::PI * u).cos()
                - 0.25 * (4.0 * std::f64::consts::PI * u + 0.9).cos();
            s
        })
        .collect();
    let total_load: Vec<f64> = shape.iter().map(|s| 330.0 + 80.0 * s).collect();

    let buses = vec![Bus { id: "b1".into() }, Bus { id: "b2".into() }, Bus { id: "b3".into() }];
    let lines = vec![
        Line { from: "b1".into(), to: "b2".into(), susceptance: 12.0, limit_mw: 160.0 },
        Line { from: "b2".into(), to: "b3".into(), susceptance: 12.0, limit_mw: 160.0 },
        Line { from: "b1".into(), to: "b3".into(), susceptance: 12.0, limit_mw: 160.0 },
    ];

    // Merit-order fleet: (bus, pmin, pmax, rs_ramp, rg_ramp, base price,
    // diurnal swing). Energy offers rise with load so peak intervals are
    // priced above valley intervals.
    let fleet = [
        ("b1", 50.0, 260.0, 40.0, 30.0, 17.0, 3.0),
        ("b1", 0.0, 160.0, 50.0, 35.0, 26.0, 5.0),
        ("b2", 0.0, 120.0, 45.0, 30.0, 34.0, 7.0),
        ("b3", 0.0, 90.0, 35.0, 25.0, 45.0, 10.0),
    ];
    let generators: Vec<Generator> = fleet
        .iter()
        .enumerate()
        .map(|(j, &(bus, pmin, pmax, rs, rg, base, swing))| {
            let energy: Vec<f64> = shape.iter().map(|s| base + swing * s).collect();
            Generator {
                name: format!("G{}", j + 1),
                bus: bus.into(),
                pmin,
                pmax,
                rs_ramp: rs,
                rg_ramp: rg,
                offers: synthesize_offers(&energy, &cfg.ratios),
            }
        })
        .collect();

    let load_split = [0.20, 0.55, 0.25];
    let load_mw: Vec<Vec<f64>> =
        load_split.iter().map(|f| total_load.iter().map(|l| f * l).collect()).collect();

    let reserve_mw: Vec<f64> = total_load.iter().map(|l| 0.08 * l).collect();
    let reg_capacity_mw: Vec<f64> = total_load.iter().map(|l| 0.05 * l).collect();
    let rho = synthesize_ratios(&mut rng, t_n, cfg.rho_range, cfg.rho_fixed);
    let reg_mileage_mw: Vec<f64> =
        reg_capacity_mw.iter().zip(&rho).map(|(c, r)| c * r).collect();

    // Random-walk regulation signal, then exact zero-mean/mileage scaling.
    let z_n = grid.subintervals;
    let raw: Vec<Vec<f64>> = (0..t_n)
        .map(|_| {
            let mut level = 0.0;
            (0..z_n)
                .map(|_| {
                    level += rng.gen_range(-1.0..1.0);
                    level
                })
                .collect()
        })
        .collect();
    let agc = prepare_trace(&AgcTrace::new(raw)?, &reg_mileage_mw)
        .context("preparing the synthetic regulation signal")?;

    let battery = BatteryUnit {
        segments: cfg.segments,
        ..BatteryUnit::with_default_aging(
            "B1",
            "b3",
            cfg.battery_rate_mw,
            cfg.battery_capacity_mwh,
            0.10 * cfg.battery_capacity_mwh,
            0.90 * cfg.battery_capacity_mwh,
            0.45 * cfg.battery_capacity_mwh,
            0.95,
            cfg.replacement_cost,
        )?
    };

    let case = ScenarioCase {
        grid,
        buses,
        lines,
        generators,
        batteries: vec![battery],
        profiles: SystemProfiles { load_mw, reserve_mw, reg_capacity_mw, reg_mileage_mw },
        agc,
        offer_caps: OfferCaps::default(),
    };
    let violations = case.validate();
    if !violations.is_empty() {
        anyhow::bail!("synthesized case fails validation: {}", violations.join("; "));
    }
    Ok(case)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offer_ratio_arithmetic() {
        let r = OfferRatios::default();
        let q = synthesize_offers(&[20.0], &r)[0];
        assert_eq!((q.reserve, q.reg_capacity), (3.0, 8.0));
        assert!((q.reg_mileage - 1.4).abs() < 1e-12);
        let q = synthesize_offers(&[0.0], &r)[0];
        assert_eq!((q.reserve, q.reg_capacity, q.reg_mileage), (0.0, 0.0, 0.0));
        let ident = OfferRatios { reserve: 1.0, reg_capacity: 1.0, reg_mileage: 1.0 };
        let q = synthesize_offers(&[12.5], &ident)[0];
        assert_eq!((q.reserve, q.reg_capacity, q.reg_mileage), (12.5, 12.5, 12.5));
    }

    #[test]
    fn ratios_stay_in_range_with_exact_mean() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = synthesize_ratios(&mut rng, 96, (1.35, 1.65), None);
            let mean = rho.iter().sum::<f64>() / rho.len() as f64;
            assert!((mean - 1.5).abs() <= 1e-12, "seed {}: mean {}", seed, mean);
            assert!(
                rho.iter().all(|&r| (1.35..=1.65).contains(&r)),
                "seed {}: out of range",
                seed
            );
        }
    }

    #[test]
    fn fixed_ratio_short_circuits() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = synthesize_ratios(&mut rng, 12, (1.35, 1.65), Some(1.5));
        assert!(rho.iter().all(|&r| r == 1.5));
    }

    #[test]
    fn synthesized_case_validates_and_is_deterministic() {
        let cfg = SynthConfig::desk_scale();
        let a = synthesize_scenario(&cfg).unwrap();
        let b = synthesize_scenario(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.validate().is_empty());
        assert_eq!(a.grid.intervals, 12);
        assert_eq!(a.grid.subintervals, 9);

        let other = synthesize_scenario(&SynthConfig { seed: 7, ..cfg }).unwrap();
        assert_ne!(a.profiles.reg_mileage_mw, other.profiles.reg_mileage_mw);
    }

    #[test]
    fn full_scale_case_validates() {
        let case = synthesize_scenario(&SynthConfig::default()).unwrap();
        assert!(case.validate().is_empty());
        assert_eq!(case.grid.intervals, 96);
        assert_eq!(case.grid.subintervals, 45);
        for t in 0..case.grid.intervals {
            let rho = case.profiles.reg_mileage_mw[t] / case.profiles.reg_capacity_mw[t];
            assert!((1.35..=1.65).contains(&rho), "interval {}: ratio {}", t, rho);
        }
    }

    #[test]
    fn ancillary_offer_columns_are_exact_multiples() {
        let case = synthesize_scenario(&SynthConfig::desk_scale()).unwrap();
        for g in &case.generators {
            for q in &g.offers {
                assert_eq!(q.reserve, 0.15 * q.energy);
                assert_eq!(q.reg_capacity, 0.4 * q.energy);
                assert_eq!(q.reg_mileage, 0.07 * q.energy);
            }
        }
    }
}
