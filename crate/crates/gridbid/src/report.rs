//! Figure-ready result emission and the bi-parametric study driver.
//!
//! Everything here turns solved studies into flat artifacts: the five-row
//! revenue table, battery schedule and state-of-charge traces, the
//! baseline-versus-strategic system-cost comparison, and the capacity ×
//! replacement-cost sweep with its long-format CSV and qualitative report.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, bail, Context, Result};

use crate::bilevel::{optimize_bids, BilevelConfig, BilevelSolution, RevenueSummary};
use crate::clearing::{BatteryBids, MarketOutcome};
use crate::degradation::build_aging_function;
use crate::model::ScenarioCase;
use crate::solver::Engine;

/// Market labels used across the revenue table and the sweep CSV. The last
/// entry is a cost: profit = energy + reserve + reg_capacity + reg_mileage
/// − degradation_cost.
pub const MARKET_LABELS: [&str; 5] =
    ["energy", "reserve", "reg_capacity", "reg_mileage", "degradation_cost"];

/// The five (market, value) pairs behind the revenue table.
pub fn revenue_rows(r: &RevenueSummary) -> [(&'static str, f64); 5] {
    [
        ("energy", r.energy),
        ("reserve", r.reserve),
        ("reg_capacity", r.reg_capacity),
        ("reg_mileage", r.reg_mileage),
        ("degradation_cost", r.degradation_cost),
    ]
}

/// Five-row revenue/cost table: `market,value_usd`.
pub fn revenue_csv(r: &RevenueSummary) -> String {
    let mut out = String::from("market,value_usd\n");
    for (label, v) in revenue_rows(r) {
        out.push_str(&format!("{},{}\n", label, v));
    }
    out
}

/// Battery awards and the prices they clear at, one row per unit-interval:
/// `unit,t,energy_mw,reserve_mw,reg_capacity_mw,reg_mileage_mw,lmp,
/// reserve_price,reg_capacity_price,reg_mileage_price`.
pub fn battery_schedule_csv(case: &ScenarioCase, sol: &BilevelSolution) -> String {
    let o = &sol.outcome;
    let mut out = String::from(
        "unit,t,energy_mw,reserve_mw,reg_capacity_mw,reg_mileage_mw,\
         lmp_usd_per_mwh,reserve_price,reg_capacity_price,reg_mileage_price\n",
    );
    for t in 0..case.grid.intervals {
        for (i, bat) in case.batteries.iter().enumerate() {
            let n = case.bus_index(&bat.bus).expect("battery bus exists");
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                bat.name,
                t + 1,
                o.bat_energy[i][t],
                o.bat_reserve[i][t],
                o.bat_regcap[i][t],
                o.bat_mileage[i][t],
                o.lmp[n][t],
                o.reserve_price[t],
                o.regcap_price[t],
                o.mileage_price[t],
            ));
        }
    }
    out
}

/// Sub-interval state-of-charge trace: `unit,t,z,soc_mwh`.
pub fn soc_csv(case: &ScenarioCase, sol: &BilevelSolution) -> String {
    let mut out = String::from("unit,t,z,soc_mwh\n");
    for (i, bat) in case.batteries.iter().enumerate() {
        for t in 0..case.grid.intervals {
            for z in 0..case.grid.subintervals {
                out.push_str(&format!("{},{},{},{}\n", bat.name, t + 1, z + 1, sol.soc[i][t][z]));
            }
        }
    }
    out
}

/// As-offered procurement cost of a cleared outcome, split by market:
/// `[energy, reserve, reg_capacity, reg_mileage]` in $. Battery bid costs
/// are included when `bids` is given; the four parts then sum to the
/// clearing objective.
pub fn market_costs(
    case: &ScenarioCase,
    outcome: &MarketOutcome,
    bids: Option<&BatteryBids>,
) -> [f64; 4] {
    let dt = case.grid.interval_hours;
    let mut c = [0.0f64; 4];
    for t in 0..case.grid.intervals {
        for (j, g) in case.generators.iter().enumerate() {
            let o = &g.offers[t];
            c[0] += o.energy * outcome.gen_energy[j][t] * dt;
            c[1] += o.reserve * outcome.gen_reserve[j][t] * dt;
            c[2] += o.reg_capacity * outcome.gen_regcap[j][t] * dt;
            c[3] += o.reg_mileage * outcome.gen_mileage[j][t] * dt;
        }
        if let Some(b) = bids {
            for i in 0..case.batteries.len() {
                c[0] += b.beta_energy[i][t] * outcome.bat_energy[i][t] * dt;
                c[1] += b.beta_reserve[i][t] * outcome.bat_reserve[i][t] * dt;
                c[2] += b.beta_regcap[i][t] * outcome.bat_regcap[i][t] * dt;
                c[3] += b.beta_mileage[i][t] * outcome.bat_mileage[i][t] * dt;
            }
        }
    }
    c
}

/// Per-market system-cost comparison between the storage-free baseline and
/// the strategic outcome: `market,baseline_cost_usd,strategic_cost_usd`.
pub fn system_cost_csv(
    case: &ScenarioCase,
    baseline: &MarketOutcome,
    strategic: &MarketOutcome,
    bids: &BatteryBids,
) -> String {
    let base = market_costs(case, baseline, None);
    let with = market_costs(case, strategic, Some(bids));
    let mut out = String::from("market,baseline_cost_usd,strategic_cost_usd\n");
    for (k, label) in ["energy", "reserve", "reg_capacity", "reg_mileage"].iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", label, base[k], with[k]));
    }
    out.push_str(&format!(
        "total,{},{}\n",
        base.iter().sum::<f64>(),
        with.iter().sum::<f64>()
    ));
    out
}

/// The capacity × replacement-cost study grid. Rates ride along with
/// capacities (one rate per capacity, the 4-hour-duration tie in the
/// default grid).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub capacities_mwh: Vec<f64>,
    pub rates_mw: Vec<f64>,
    pub replacement_costs: Vec<f64>,
}

/// One scenario point of the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub capacity_mwh: f64,
    pub rate_mw: f64,
    pub replacement_cost: f64,
}

impl SweepGrid {
    /// The study default: 100–2000 MWh in 100 MWh steps at 4-hour duration
    /// (25–500 MW), crossed with six replacement-cost levels.
    pub fn default_grid() -> SweepGrid {
        let capacities_mwh: Vec<f64> = (1..=20).map(|k| 100.0 * k as f64).collect();
        let rates_mw = capacities_mwh.iter().map(|c| c / 4.0).collect();
        SweepGrid {
            capacities_mwh,
            rates_mw,
            replacement_costs: vec![200_000.0, 150_000.0, 100_000.0, 50_000.0, 25_000.0, 1_000.0],
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.capacities_mwh.len() != self.rates_mw.len() {
            return Err(format!(
                "need one rate per capacity, got {} capacities and {} rates",
                self.capacities_mwh.len(),
                self.rates_mw.len()
            ));
        }
        if self.capacities_mwh.is_empty() || self.replacement_costs.is_empty() {
            return Err("grid has no points".into());
        }
        let all = self
            .capacities_mwh
            .iter()
            .chain(&self.rates_mw)
            .chain(&self.replacement_costs);
        for v in all {
            if !(v.is_finite() && *v > 0.0) {
                return Err(format!("grid values must be positive and finite, got {}", v));
            }
        }
        Ok(())
    }

    /// Cross product, capacities outer, cost levels inner.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::with_capacity(self.capacities_mwh.len() * self.replacement_costs.len());
        for (c, r) in self.capacities_mwh.iter().zip(&self.rates_mw) {
            for cost in &self.replacement_costs {
                out.push(SweepPoint {
                    capacity_mwh: *c,
                    rate_mw: *r,
                    replacement_cost: *cost,
                });
            }
        }
        out
    }
}

/// Rebuild the scenario's single battery at a sweep point: power and energy
/// ratings from the point, state-of-charge window and initial level scaled
/// proportionally, the aging curve recalibrated to the point's replacement
/// cost, and the segment count rescaled so each segment keeps the base
/// design's energy quantum (`K = max(1, round(E / quantum))`).
pub fn scale_battery(base: &ScenarioCase, point: &SweepPoint) -> Result<ScenarioCase> {
    if base.batteries.len() != 1 {
        bail!("sweep expects exactly one battery, scenario has {}", base.batteries.len());
    }
    let mut case = base.clone();
    let b = &mut case.batteries[0];
    if !(b.capacity_mwh > 0.0) || b.segments == 0 {
        bail!("base battery needs positive capacity and at least one segment");
    }
    let quantum = b.capacity_mwh / b.segments as f64;
    let ratio = point.capacity_mwh / b.capacity_mwh;
    b.rate_mw = point.rate_mw;
    b.capacity_mwh = point.capacity_mwh;
    b.soc_min *= ratio;
    b.soc_max *= ratio;
    b.soc_init *= ratio;
    b.segments = ((point.capacity_mwh / quantum).round() as usize).max(1);
    b.aging = build_aging_function(
        point.replacement_cost,
        b.aging.life_cycles,
        b.aging.reference_depth,
        b.aging.b,
    )
    .map_err(|e| anyhow!("aging curve at {} $/MWh: {}", point.replacement_cost, e))?;
    Ok(case)
}

/// One completed sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub capacity_mwh: f64,
    pub rate_mw: f64,
    pub replacement_cost: f64,
    pub revenue: RevenueSummary,
}

/// One failed sweep point, with the error it died on.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepFailure {
    pub capacity_mwh: f64,
    pub replacement_cost: f64,
    pub error: String,
}

/// Outcome of a sweep: completed records in grid order plus any failures.
#[derive(Debug, Clone, Default)]
pub struct SweepRun {
    pub records: Vec<SweepRecord>,
    pub failures: Vec<SweepFailure>,
}

fn solve_point(
    base: &ScenarioCase,
    point: &SweepPoint,
    cfg: &BilevelConfig,
    engine: &Engine,
) -> Result<RevenueSummary, String> {
    let case = scale_battery(base, point).map_err(|e| e.to_string())?;
    let sol = optimize_bids(&case, cfg, engine).map_err(|e| e.to_string())?;
    Ok(sol.revenue)
}

/// Solve every grid point against the base scenario on a bounded worker
/// pool. Failures are recorded and the sweep continues; records come back
/// in grid order regardless of which worker finished first.
pub fn run_sweep(
    base: &ScenarioCase,
    grid: &SweepGrid,
    cfg: &BilevelConfig,
    engine: &Engine,
    jobs: usize,
) -> Result<SweepRun> {
    grid.validate().map_err(|e| anyhow!("bad sweep grid: {}", e))?;
    let points = grid.points();
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<RevenueSummary, String>>>> =
        Mutex::new(vec![None; points.len()]);
    std::thread::scope(|s| {
        for _ in 0..jobs.max(1).min(points.len()) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= points.len() {
                    break;
                }
                let r = solve_point(base, &points[k], cfg, engine);
                slots.lock().expect("sweep results lock")[k] = Some(r);
            });
        }
    });
    let slots = slots.into_inner().expect("sweep results lock");
    let mut run = SweepRun::default();
    for (point, slot) in points.iter().zip(slots) {
        match slot.expect("every point visited") {
            Ok(revenue) => run.records.push(SweepRecord {
                capacity_mwh: point.capacity_mwh,
                rate_mw: point.rate_mw,
                replacement_cost: point.replacement_cost,
                revenue,
            }),
            Err(error) => run.failures.push(SweepFailure {
                capacity_mwh: point.capacity_mwh,
                replacement_cost: point.replacement_cost,
                error,
            }),
        }
    }
    Ok(run)
}

/// Long-format sweep table, five market rows per point:
/// `capacity_mwh,rate_mw,replacement_cost_usd_per_mwh,market,revenue_usd`.
pub fn sweep_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from("capacity_mwh,rate_mw,replacement_cost_usd_per_mwh,market,revenue_usd\n");
    for r in records {
        for (label, v) in revenue_rows(&r.revenue) {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.capacity_mwh, r.rate_mw, r.replacement_cost, label, v
            ));
        }
    }
    out
}

/// `capacity_mwh,replacement_cost_usd_per_mwh,error` for failed points.
pub fn sweep_failures_csv(failures: &[SweepFailure]) -> String {
    let mut out = String::from("capacity_mwh,replacement_cost_usd_per_mwh,error\n");
    for f in failures {
        out.push_str(&format!(
            "{},{},{:?}\n",
            f.capacity_mwh, f.replacement_cost, f.error
        ));
    }
    out
}

/// Read a long-format sweep table back into records (inverse of
/// [`sweep_csv`] for complete points).
pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRecord>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut records: Vec<SweepRecord> = Vec::new();
    for row in rdr.records() {
        let row = row.context("reading sweep CSV")?;
        if row.len() != 5 {
            bail!("sweep CSV rows need 5 fields, got {}", row.len());
        }
        let num = |k: usize| -> Result<f64> {
            row[k].parse::<f64>().with_context(|| format!("bad number {:?}", &row[k]))
        };
        let (cap, rate, cost) = (num(0)?, num(1)?, num(2)?);
        let market = &row[3];
        let value = num(4)?;
        let rec = match records
            .iter_mut()
            .find(|r| r.capacity_mwh == cap && r.replacement_cost == cost)
        {
            Some(r) => r,
            None => {
                records.push(SweepRecord {
                    capacity_mwh: cap,
                    rate_mw: rate,
                    replacement_cost: cost,
                    revenue: RevenueSummary::default(),
                });
                records.last_mut().expect("just pushed")
            }
        };
        match market {
            "energy" => rec.revenue.energy = value,
            "reserve" => rec.revenue.reserve = value,
            "reg_capacity" => rec.revenue.reg_capacity = value,
            "reg_mileage" => rec.revenue.reg_mileage = value,
            "degradation_cost" => rec.revenue.degradation_cost = value,
            other => bail!("unknown market {:?}", other),
        }
        rec.revenue.profit = rec.revenue.energy + rec.revenue.reserve + rec.revenue.reg_capacity
            + rec.revenue.reg_mileage
            - rec.revenue.degradation_cost;
    }
    Ok(records)
}

/// Wide per-market table for plotting: capacity rows, one column per
/// replacement-cost level (highest cost first).
pub fn market_table_csv(records: &[SweepRecord], market: &str) -> Result<String> {
    if !MARKET_LABELS.contains(&market) {
        bail!("unknown market {:?}", market);
    }
    let mut caps: Vec<f64> = Vec::new();
    let mut costs: Vec<f64> = Vec::new();
    for r in records {
        if !caps.contains(&r.capacity_mwh) {
            caps.push(r.capacity_mwh);
        }
        if !costs.contains(&r.replacement_cost) {
            costs.push(r.replacement_cost);
        }
    }
    caps.sort_by(|a, b| a.partial_cmp(b).expect("finite capacities"));
    costs.sort_by(|a, b| b.partial_cmp(a).expect("finite costs"));
    let pick = |cap: f64, cost: f64| -> Option<f64> {
        let r = records
            .iter()
            .find(|r| r.capacity_mwh == cap && r.replacement_cost == cost)?;
        Some(match market {
            "energy" => r.revenue.energy,
            "reserve" => r.revenue.reserve,
            "reg_capacity" => r.revenue.reg_capacity,
            "reg_mileage" => r.revenue.reg_mileage,
            _ => r.revenue.degradation_cost,
        })
    };
    let mut out = String::from("capacity_mwh");
    for c in &costs {
        out.push_str(&format!(",repl_{}", c));
    }
    out.push('\n');
    for cap in &caps {
        out.push_str(&format!("{}", cap));
        for cost in &costs {
            match pick(*cap, *cost) {
                Some(v) => out.push_str(&format!(",{}", v)),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    Ok(out)
}

fn monotone_nondecreasing(series: &[f64]) -> bool {
    series
        .windows(2)
        .all(|w| w[1] >= w[0] - 1e-6 * (1.0 + w[0].abs()))
}

/// Qualitative read of a sweep: per cost level, whether reserve revenue is
/// non-decreasing in capacity and whether regulation revenue flattens once
/// the power rating covers the peak regulation-capacity requirement.
/// Observations only — nothing here is a hard invariant.
pub fn sweep_report(records: &[SweepRecord], max_regcap_mw: Option<f64>) -> serde_json::Value {
    let mut costs: Vec<f64> = Vec::new();
    for r in records {
        if !costs.contains(&r.replacement_cost) {
            costs.push(r.replacement_cost);
        }
    }
    costs.sort_by(|a, b| b.partial_cmp(a).expect("finite costs"));
    let mut per_cost = Vec::new();
    for cost in &costs {
        let mut rows: Vec<&SweepRecord> =
            records.iter().filter(|r| r.replacement_cost == *cost).collect();
        rows.sort_by(|a, b| a.capacity_mwh.partial_cmp(&b.capacity_mwh).expect("finite"));
        let reserve: Vec<f64> = rows.iter().map(|r| r.revenue.reserve).collect();
        let regulation: Vec<f64> =
            rows.iter().map(|r| r.revenue.reg_capacity + r.revenue.reg_mileage).collect();
        let flattening = max_regcap_mw.map(|rmax| {
            // Split the capacity axis where the power rating first covers
            // the peak regulation-capacity requirement, then compare mean
            // per-step growth of regulation revenue on the two sides.
            let split = rows.iter().position(|r| r.rate_mw >= rmax);
            let growth = |lo: usize, hi: usize| -> Option<f64> {
                if hi - lo < 2 {
                    return None;
                }
                Some((regulation[hi - 1] - regulation[lo]) / (hi - 1 - lo) as f64)
            };
            match split {
                Some(s) => {
                    let below = growth(0, s.max(1));
                    let above = growth(s, rows.len());
                    let flattens = match (below, above) {
                        (Some(b), Some(a)) => a.abs() <= 0.1 * b.abs().max(1e-9),
                        _ => false,
                    };
                    serde_json::json!({
                        "rate_threshold_mw": rmax,
                        "first_covered_capacity_mwh": rows[s].capacity_mwh,
                        "mean_growth_below_usd_per_step": below,
                        "mean_growth_above_usd_per_step": above,
                        "flattens": flattens,
                    })
                }
                None => serde_json::json!({
                    "rate_threshold_mw": rmax,
                    "note": "no grid point reaches the requirement",
                }),
            }
        });
        per_cost.push(serde_json::json!({
            "replacement_cost_usd_per_mwh": cost,
            "points": rows.len(),
            "reserve_monotone_in_capacity": monotone_nondecreasing(&reserve),
            "regulation_flattening": flattening,
        }));
    }
    let profits: Vec<f64> = records.iter().map(|r| r.revenue.profit).collect();
    serde_json::json!({
        "points": records.len(),
        "markets": MARKET_LABELS,
        "profit_min_usd": profits.iter().cloned().fold(f64::INFINITY, f64::min),
        "profit_max_usd": profits.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        "per_cost_level": per_cost,
    })
}
