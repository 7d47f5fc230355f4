//! Scenario file I/O.
//!
//! A scenario lives in a directory of CSV files bound together by a TOML
//! manifest mapping each role to a path (relative paths resolve against the
//! manifest's directory). Interval (`t`) and sub-interval (`z`) indices are
//! 1-based in the files; generator offers reference generators by 1-based
//! row index in `generators.csv`.
//!
//! The manifest also carries two scalars that no CSV houses: the clearing
//! interval span in hours (`interval_hours`, default 0.25) and the
//! degradation segment count (`segments`, default 16). Batteries persist
//! only their replacement cost; cycle-life defaults fill in the rest of the
//! aging model on load.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::agc::AgcTrace;
use crate::model::{
    build_time_grid, BatteryUnit, Bus, Generator, Line, OfferCaps, OfferQuad, ScenarioCase,
    SystemProfiles, DEFAULT_SEGMENTS,
};

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    buses: String,
    lines: String,
    generators: String,
    offers: String,
    loads: String,
    requirements: String,
    battery: String,
    agc: String,
    #[serde(default)]
    interval_hours: Option<f64>,
    #[serde(default)]
    segments: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BusRow {
    id: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct LineRow {
    from: String,
    to: String,
    susceptance: f64,
    limit_mw: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct GeneratorRow {
    bus: String,
    pmin: f64,
    pmax: f64,
    rs_ramp: f64,
    rg_ramp: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct OfferRow {
    gen: usize,
    t: usize,
    alpha_s: f64,
    alpha_rs: f64,
    alpha_rgc: f64,
    alpha_rgm: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct LoadRow {
    bus: String,
    t: usize,
    mw: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RequirementRow {
    t: usize,
    rs: f64,
    rgc: f64,
    rgm: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct BatteryRow {
    bus: String,
    rate: f64,
    capacity: f64,
    soc_min: f64,
    soc_max: f64,
    soc_init: f64,
    eta: f64,
    replacement_cost: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct AgcRow {
    t: usize,
    z: usize,
    mw: f64,
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, row) in rdr.deserialize().enumerate() {
        let row: T =
            row.with_context(|| format!("{} row {}", path.display(), i + 2))?;
        rows.push(row);
    }
    Ok(rows)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)
        .with_context(|| format!("writing {}", path.display()))?;
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Load, assemble, and validate a scenario from its manifest.
pub fn load_scenario(manifest_path: &Path) -> Result<ScenarioCase> {
    let text = std::fs::read_to_string(manifest_path)
        .with_context(|| format!("reading manifest {}", manifest_path.display()))?;
    let manifest: Manifest = toml::from_str(&text)
        .with_context(|| format!("parsing manifest {}", manifest_path.display()))?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &str| dir.join(p);

    let bus_rows: Vec<BusRow> = read_rows(&resolve(&manifest.buses))?;
    let line_rows: Vec<LineRow> = read_rows(&resolve(&manifest.lines))?;
    let gen_rows: Vec<GeneratorRow> = read_rows(&resolve(&manifest.generators))?;
    let offer_rows: Vec<OfferRow> = read_rows(&resolve(&manifest.offers))?;
    let load_rows: Vec<LoadRow> = read_rows(&resolve(&manifest.loads))?;
    let req_rows: Vec<RequirementRow> = read_rows(&resolve(&manifest.requirements))?;
    let battery_rows: Vec<BatteryRow> = read_rows(&resolve(&manifest.battery))?;
    let agc_rows: Vec<AgcRow> = read_rows(&resolve(&manifest.agc))?;

    if req_rows.is_empty() {
        bail!("requirements file has no rows; the horizon length comes from it");
    }
    let t_n = req_rows.iter().map(|r| r.t).max().unwrap();
    let mut reserve = vec![f64::NAN; t_n];
    let mut reg_cap = vec![f64::NAN; t_n];
    let mut reg_mil = vec![f64::NAN; t_n];
    for r in &req_rows {
        if r.t == 0 || r.t > t_n {
            bail!("requirements: interval {} out of range 1..={}", r.t, t_n);
        }
        if !reserve[r.t - 1].is_nan() {
            bail!("requirements: duplicate interval {}", r.t);
        }
        reserve[r.t - 1] = r.rs;
        reg_cap[r.t - 1] = r.rgc;
        reg_mil[r.t - 1] = r.rgm;
    }
    if let Some(t) = reserve.iter().position(|x| x.is_nan()) {
        bail!("requirements: interval {} missing", t + 1);
    }

    let z_n = agc_rows.iter().map(|r| r.z).max().unwrap_or(0);
    if z_n == 0 {
        bail!("regulation signal file has no rows");
    }
    let mut setpoints = vec![vec![f64::NAN; z_n]; t_n];
    for r in &agc_rows {
        if r.t == 0 || r.t > t_n || r.z == 0 || r.z > z_n {
            bail!("regulation signal: index (t={}, z={}) out of range", r.t, r.z);
        }
        if !setpoints[r.t - 1][r.z - 1].is_nan() {
            bail!("regulation signal: duplicate entry (t={}, z={})", r.t, r.z);
        }
        setpoints[r.t - 1][r.z - 1] = r.mw;
    }
    for (t, row) in setpoints.iter().enumerate() {
        if let Some(z) = row.iter().position(|x| x.is_nan()) {
            bail!("regulation signal: entry (t={}, z={}) missing", t + 1, z + 1);
        }
    }

    let interval_hours = manifest.interval_hours.unwrap_or(0.25);
    let grid = build_time_grid(interval_hours, interval_hours / z_n as f64, t_n)?;

    let buses: Vec<Bus> = bus_rows.into_iter().map(|r| Bus { id: r.id }).collect();
    let lines: Vec<Line> = line_rows
        .into_iter()
        .map(|r| Line { from: r.from, to: r.to, susceptance: r.susceptance, limit_mw: r.limit_mw })
        .collect();

    let mut generators: Vec<Generator> = gen_rows
        .into_iter()
        .enumerate()
        .map(|(j, r)| Generator {
            name: format!("G{}", j + 1),
            bus: r.bus,
            pmin: r.pmin,
            pmax: r.pmax,
            rs_ramp: r.rs_ramp,
            rg_ramp: r.rg_ramp,
            offers: vec![
                OfferQuad { energy: f64::NAN, reserve: 0.0, reg_capacity: 0.0, reg_mileage: 0.0 };
                t_n
            ],
        })
        .collect();
    for r in &offer_rows {
        if r.gen == 0 || r.gen > generators.len() {
            bail!("offers: generator index {} out of range 1..={}", r.gen, generators.len());
        }
        if r.t == 0 || r.t > t_n {
            bail!("offers: interval {} out of range 1..={}", r.t, t_n);
        }
        let slot = &mut generators[r.gen - 1].offers[r.t - 1];
        if !slot.energy.is_nan() {
            bail!("offers: duplicate entry for generator {} interval {}", r.gen, r.t);
        }
        *slot = OfferQuad {
            energy: r.alpha_s,
            reserve: r.alpha_rs,
            reg_capacity: r.alpha_rgc,
            reg_mileage: r.alpha_rgm,
        };
    }
    for g in &generators {
        if let Some(t) = g.offers.iter().position(|o| o.energy.is_nan()) {
            bail!("offers: generator {} has no offer for interval {}", g.name, t + 1);
        }
    }

    let mut load_mw = vec![vec![0.0f64; t_n]; buses.len()];
    let mut seen_loads: HashMap<(usize, usize), ()> = HashMap::new();
    for r in &load_rows {
        let n = buses
            .iter()
            .position(|b| b.id == r.bus)
            .with_context(|| format!("loads: unknown bus {}", r.bus))?;
        if r.t == 0 || r.t > t_n {
            bail!("loads: interval {} out of range 1..={}", r.t, t_n);
        }
        if seen_loads.insert((n, r.t - 1), ()).is_some() {
            bail!("loads: duplicate entry for bus {} interval {}", r.bus, r.t);
        }
        load_mw[n][r.t - 1] = r.mw;
    }

    let segments = manifest.segments.unwrap_or(DEFAULT_SEGMENTS);
    let batteries: Vec<BatteryUnit> = battery_rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(BatteryUnit {
                segments,
                ..BatteryUnit::with_default_aging(
                    &format!("B{}", i + 1),
                    &r.bus,
                    r.rate,
                    r.capacity,
                    r.soc_min,
                    r.soc_max,
                    r.soc_init,
                    r.eta,
                    r.replacement_cost,
                )?
            })
        })
        .collect::<Result<_>>()?;

    let case = ScenarioCase {
        grid,
        buses,
        lines,
        generators,
        batteries,
        profiles: SystemProfiles {
            load_mw,
            reserve_mw: reserve,
            reg_capacity_mw: reg_cap,
            reg_mileage_mw: reg_mil,
        },
        agc: AgcTrace::new(setpoints)?,
        offer_caps: OfferCaps::default(),
    };
    let violations = case.validate();
    if !violations.is_empty() {
        bail!("scenario fails validation: {}", violations.join("; "));
    }
    Ok(case)
}

/// Write a scenario into `dir` as CSV files plus `manifest.toml`; returns the
/// manifest path. Loading the result reproduces the case bit-for-bit
/// (assuming default cycle-life parameters).
pub fn save_scenario(case: &ScenarioCase, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))?;
    let t_n = case.grid.intervals;

    write_rows(
        &dir.join("buses.csv"),
        &case.buses.iter().map(|b| BusRow { id: b.id.clone() }).collect::<Vec<_>>(),
    )?;
    write_rows(
        &dir.join("lines.csv"),
        &case
            .lines
            .iter()
            .map(|l| LineRow {
                from: l.from.clone(),
                to: l.to.clone(),
                susceptance: l.susceptance,
                limit_mw: l.limit_mw,
            })
            .collect::<Vec<_>>(),
    )?;
    write_rows(
        &dir.join("generators.csv"),
        &case
            .generators
            .iter()
            .map(|g| GeneratorRow {
                bus: g.bus.clone(),
                pmin: g.pmin,
                pmax: g.pmax,
                rs_ramp: g.rs_ramp,
                rg_ramp: g.rg_ramp,
            })
            .collect::<Vec<_>>(),
    )?;
    let mut offers = Vec::new();
    for (j, g) in case.generators.iter().enumerate() {
        for (t, o) in g.offers.iter().enumerate() {
            offers.push(OfferRow {
                gen: j + 1,
                t: t + 1,
                alpha_s: o.energy,
                alpha_rs: o.reserve,
                alpha_rgc: o.reg_capacity,
                alpha_rgm: o.reg_mileage,
            });
        }
    }
    write_rows(&dir.join("offers.csv"), &offers)?;
    let mut loads = Vec::new();
    for (n, bus) in case.buses.iter().enumerate() {
        for t in 0..t_n {
            let mw = case.profiles.load_mw[n][t];
            if mw != 0.0 {
                loads.push(LoadRow { bus: bus.id.clone(), t: t + 1, mw });
            }
        }
    }
    write_rows(&dir.join("loads.csv"), &loads)?;
    write_rows(
        &dir.join("requirements.csv"),
        &(0..t_n)
            .map(|t| RequirementRow {
                t: t + 1,
                rs: case.profiles.reserve_mw[t],
                rgc: case.profiles.reg_capacity_mw[t],
                rgm: case.profiles.reg_mileage_mw[t],
            })
            .collect::<Vec<_>>(),
    )?;
    write_rows(
        &dir.join("battery.csv"),
        &case
            .batteries
            .iter()
            .map(|b| BatteryRow {
                bus: b.bus.clone(),
                rate: b.rate_mw,
                capacity: b.capacity_mwh,
                soc_min: b.soc_min,
                soc_max: b.soc_max,
                soc_init: b.soc_init,
                eta: b.eta,
                replacement_cost: b.aging.replacement_cost,
            })
            .collect::<Vec<_>>(),
    )?;
    let mut agc = Vec::new();
    for t in 0..case.agc.intervals() {
        for z in 0..case.agc.steps() {
            agc.push(AgcRow { t: t + 1, z: z + 1, mw: case.agc.setpoint(t, z) });
        }
    }
    write_rows(&dir.join("agc.csv"), &agc)?;

    let manifest = Manifest {
        buses: "buses.csv".into(),
        lines: "lines.csv".into(),
        generators: "generators.csv".into(),
        offers: "offers.csv".into(),
        loads: "loads.csv".into(),
        requirements: "requirements.csv".into(),
        battery: "battery.csv".into(),
        agc: "agc.csv".into(),
        interval_hours: Some(case.grid.interval_hours),
        segments: case.batteries.first().map(|b| b.segments),
    };
    let manifest_path = dir.join("manifest.toml");
    std::fs::write(&manifest_path, toml::to_string_pretty(&manifest)?)
        .with_context(|| format!("writing {}", manifest_path.display()))?;
    Ok(manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::synth::{synthesize_scenario, SynthConfig};

    #[test]
    fn scenario_round_trips_bit_identically() {
        let case = synthesize_scenario(&SynthConfig::desk_scale()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = save_scenario(&case, dir.path()).unwrap();
        let back = load_scenario(&manifest).unwrap();
        assert_eq!(case, back);
    }

    #[test]
    fn missing_file_error_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let case = synthesize_scenario(&SynthConfig::desk_scale()).unwrap();
        let manifest = save_scenario(&case, dir.path()).unwrap();
        std::fs::remove_file(dir.path().join("lines.csv")).unwrap();
        let err = format!("{:#}", load_scenario(&manifest).unwrap_err());
        assert!(err.contains("lines.csv"), "{}", err);
    }

    #[test]
    fn empty_generator_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let case = synthesize_scenario(&SynthConfig::desk_scale()).unwrap();
        let manifest = save_scenario(&case, dir.path()).unwrap();
        std::fs::write(dir.path().join("generators.csv"), "bus,pmin,pmax,rs_ramp,rg_ramp\n")
            .unwrap();
        std::fs::write(dir.path().join("offers.csv"), "gen,t,alpha_s,alpha_rs,alpha_rgc,alpha_rgm\n")
            .unwrap();
        let err = format!("{:#}", load_scenario(&manifest).unwrap_err());
        assert!(err.contains("no generators"), "{}", err);
    }

    #[test]
    fn negative_demand_fails_validation() {
        let dir = tempfile::tempdir().unwrap();
        let mut case = synthesize_scenario(&SynthConfig::desk_scale()).unwrap();
        case.profiles.load_mw[1][3] = -10.0;
        let manifest = save_scenario(&case, dir.path()).unwrap();
        let err = format!("{:#}", load_scenario(&manifest).unwrap_err());
        assert!(err.contains("negative load"), "{}", err);
    }

    #[test]
    fn out_of_range_offer_reference_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let case = synthesize_scenario(&SynthConfig::desk_scale()).unwrap();
        let manifest = save_scenario(&case, dir.path()).unwrap();
        let offers = dir.path().join("offers.csv");
        let mut text = std::fs::read_to_string(&offers).unwrap();
        text.push_str("9,1,10.0,1.5,4.0,0.7\n");
        std::fs::write(&offers, text).unwrap();
        let err = format!("{:#}", load_scenario(&manifest).unwrap_err());
        assert!(err.contains("generator index 9"), "{}", err);
    }

    #[test]
    fn one_based_indices_land_in_the_right_slots() {
        let dir = tempfile::tempdir().unwrap();
        let case = synthesize_scenario(&SynthConfig::desk_scale()).unwrap();
        let manifest = save_scenario(&case, dir.path()).unwrap();
        let back = load_scenario(&manifest).unwrap();
        // Spot-check a handful of coordinates against the in-memory case.
        assert_eq!(back.generators[2].offers[5], case.generators[2].offers[5]);
        assert_eq!(back.agc.setpoint(4, 7), case.agc.setpoint(4, 7));
        assert_eq!(back.profiles.load_mw[1][9], case.profiles.load_mw[1][9]);
    }
}
