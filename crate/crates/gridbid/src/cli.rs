//! Command-line driver for offline studies.
//!
//! Subcommands: `validate`, `synth`, `clear`, `run`, `sweep`, `report`.
//! Exit codes: 0 success, 1 invalid input (validation, parsing, I/O),
//! 2 solver failure, 3 partial sweep.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use crate::bilevel::{optimize_bids, BilevelConfig, BilevelError};
use crate::clearing::baseline_without_bess;
use crate::model::io::{load_scenario, save_scenario};
use crate::model::synth::{synthesize_scenario, SynthConfig};
use crate::model::{validate_case, ScenarioCase};
use crate::report::{
    battery_schedule_csv, market_table_csv, parse_sweep_csv, revenue_csv, run_sweep, soc_csv,
    sweep_csv, sweep_failures_csv, sweep_report, system_cost_csv, SweepGrid, SweepRecord,
    MARKET_LABELS,
};
use crate::solver::Engine;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "gridbid",
    version,
    about = "Strategic storage bidding studies: scenario synthesis, joint market \
             clearing, single-level MILP bid optimization, and parameter sweeps."
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load a scenario and report every modeling violation.
    Validate {
        /// Scenario manifest (TOML binding the CSV tables).
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Generate the bundled synthetic scenario into a directory.
    Synth {
        /// Output directory for the scenario files.
        #[arg(long)]
        out: PathBuf,
        /// Seed for the randomized profile draws.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Full study scale (96 × 45 intervals, 16 segments) instead of the
        /// desk-scale default (12 × 9, 8 segments).
        #[arg(long)]
        full: bool,
        /// Pin every interval's mileage/capacity ratio to this value
        /// instead of drawing from [1.35, 1.65].
        #[arg(long)]
        rho_fixed: Option<f64>,
    },
    /// Clear the market with all storage offers withheld (baseline study).
    Clear {
        #[arg(long)]
        scenario: PathBuf,
        /// Directory for baseline_market.csv; omit to only print the summary.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Solver command template with {model} {solution} {gap}
        /// {time_limit} placeholders; overrides BESS_SOLVER_CMD.
        #[arg(long)]
        solver_cmd: Option<String>,
    },
    /// Optimize storage offers and write the full result bundle.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Relative MILP optimality gap.
        #[arg(long, default_value_t = 1e-3)]
        gap: f64,
        /// Wall-clock solve limit in seconds.
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long)]
        solver_cmd: Option<String>,
    },
    /// Bi-parametric capacity × replacement-cost sweep.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        gap: f64,
        /// Wall-clock limit per sweep point, in seconds.
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long)]
        solver_cmd: Option<String>,
        /// Worker threads; defaults to the machine's available parallelism.
        #[arg(long)]
        jobs: Option<usize>,
        /// Comma-separated capacities in MWh (each point's power rating is
        /// capacity/4, the 4-hour-duration tie). Default: 100–2000 step 100.
        #[arg(long)]
        capacities: Option<String>,
        /// Comma-separated replacement costs in $/MWh.
        /// Default: 200000,150000,100000,50000,25000,1000.
        #[arg(long)]
        costs: Option<String>,
    },
    /// Summarize a finished sweep into figure-ready tables.
    Report {
        /// Directory holding sweep.csv; tables are written next to it.
        #[arg(long)]
        out: PathBuf,
        /// Scenario manifest, used for the regulation-requirement threshold
        /// in the qualitative report.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

/// Parse and dispatch; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let to_stderr = e.use_stderr();
            let _ = e.print();
            return if to_stderr { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::Synth { out, seed, full, rho_fixed } => cmd_synth(&out, seed, full, rho_fixed),
        Command::Clear { scenario, out, solver_cmd } => {
            cmd_clear(&scenario, out.as_deref(), solver_cmd.as_deref())
        }
        Command::Run { scenario, out, gap, time_limit, solver_cmd } => {
            cmd_run(&scenario, &out, gap, time_limit, solver_cmd.as_deref())
        }
        Command::Sweep {
            scenario,
            out,
            gap,
            time_limit,
            solver_cmd,
            jobs,
            capacities,
            costs,
        } => cmd_sweep(
            &scenario,
            &out,
            gap,
            time_limit,
            solver_cmd.as_deref(),
            jobs,
            capacities.as_deref(),
            costs.as_deref(),
        ),
        Command::Report { out, scenario } => cmd_report(&out, scenario.as_deref()),
    }
}

/// Entry point for the binary.
pub fn main() -> i32 {
    run(std::env::args_os())
}

fn load_validated(path: &Path) -> Result<ScenarioCase, i32> {
    let case = match load_scenario(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {:#}", e);
            return Err(EXIT_INVALID);
        }
    };
    let violations = validate_case(&case);
    if !violations.is_empty() {
        eprintln!("scenario fails validation ({} problems):", violations.len());
        for v in &violations {
            eprintln!("  - {}", v);
        }
        return Err(EXIT_INVALID);
    }
    Ok(case)
}

fn bilevel_exit(e: &BilevelError) -> i32 {
    match e {
        BilevelError::Shape(_) => EXIT_INVALID,
        _ => EXIT_SOLVER,
    }
}

fn solve_config(gap: f64, time_limit: Option<f64>) -> BilevelConfig {
    BilevelConfig {
        rel_gap: gap,
        time_limit: time_limit.map(Duration::from_secs_f64),
        ..BilevelConfig::default()
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn cmd_validate(scenario: &Path) -> i32 {
    let case = match load_scenario(scenario) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {:#}", e);
            return EXIT_INVALID;
        }
    };
    let violations = validate_case(&case);
    if violations.is_empty() {
        println!(
            "ok: {} buses, {} lines, {} generators, {} batteries, {} intervals x {} sub-intervals",
            case.buses.len(),
            case.lines.len(),
            case.generators.len(),
            case.batteries.len(),
            case.grid.intervals,
            case.grid.subintervals
        );
        EXIT_OK
    } else {
        println!("{} violations:", violations.len());
        for v in &violations {
            println!("  - {}", v);
        }
        EXIT_INVALID
    }
}

fn cmd_synth(out: &Path, seed: u64, full: bool, rho_fixed: Option<f64>) -> i32 {
    let mut cfg = if full { SynthConfig::default() } else { SynthConfig::desk_scale() };
    cfg.seed = seed;
    cfg.rho_fixed = rho_fixed;
    let case = match synthesize_scenario(&cfg) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {:#}", e);
            return EXIT_INVALID;
        }
    };
    let manifest = match save_scenario(&case, out) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {:#}", e);
            return EXIT_INVALID;
        }
    };
    let ratios: Vec<f64> = (0..case.grid.intervals)
        .filter(|&t| case.profiles.reg_capacity_mw[t] > 0.0)
        .map(|t| case.profiles.reg_mileage_mw[t] / case.profiles.reg_capacity_mw[t])
        .collect();
    println!("wrote {}", manifest.display());
    if !ratios.is_empty() {
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!("mileage/capacity ratio: min {:.4} mean {:.4} max {:.4}", min, mean, max);
    }
    EXIT_OK
}

fn cmd_clear(scenario: &Path, out: Option<&Path>, _solver_cmd: Option<&str>) -> i32 {
    let case = match load_validated(scenario) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let outcome = match baseline_without_bess(&case) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("clearing failed: {}", e);
            return EXIT_SOLVER;
        }
    };
    let costs = crate::report::market_costs(&case, &outcome, None);
    println!("baseline clearing objective: {} $", outcome.objective);
    for (label, c) in ["energy", "reserve", "reg_capacity", "reg_mileage"].iter().zip(costs) {
        println!("  {} procurement: {} $", label, c);
    }
    if let Some(dir) = out {
        if let Err(e) = fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .and_then(|_| write_file(&dir.join("baseline_market.csv"), &outcome.to_csv(&case)))
        {
            eprintln!("error: {:#}", e);
            return EXIT_INVALID;
        }
        println!("wrote {}", dir.join("baseline_market.csv").display());
    }
    EXIT_OK
}

fn cmd_run(
    scenario: &Path,
    out: &Path,
    gap: f64,
    time_limit: Option<f64>,
    solver_cmd: Option<&str>,
) -> i32 {
    let case = match load_validated(scenario) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let engine = Engine::autodetect(solver_cmd);
    let cfg = solve_config(gap, time_limit);
    let sol = match optimize_bids(&case, &cfg, &engine) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("bid optimization failed: {}", e);
            return bilevel_exit(&e);
        }
    };
    let baseline = match baseline_without_bess(&case) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("baseline clearing failed: {}", e);
            return EXIT_SOLVER;
        }
    };
    let emit = || -> Result<()> {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let json = serde_json::to_string_pretty(&sol).context("serializing solution")?;
        write_file(&out.join("solution.json"), &(json + "\n"))?;
        write_file(&out.join("market.csv"), &sol.outcome.to_csv(&case))?;
        write_file(&out.join("battery_schedule.csv"), &battery_schedule_csv(&case, &sol))?;
        write_file(&out.join("soc.csv"), &soc_csv(&case, &sol))?;
        write_file(&out.join("revenue.csv"), &revenue_csv(&sol.revenue))?;
        write_file(
            &out.join("system_costs.csv"),
            &system_cost_csv(&case, &baseline, &sol.outcome, &sol.bids),
        )?;
        Ok(())
    };
    if let Err(e) = emit() {
        eprintln!("error: {:#}", e);
        return EXIT_INVALID;
    }
    println!("profit: {} $", sol.profit);
    for (label, v) in crate::report::revenue_rows(&sol.revenue) {
        println!("  {}: {} $", label, v);
    }
    if let Some(g) = sol.mip_gap {
        println!("mip gap: {}", g);
    }
    for w in &sol.diagnostics.warnings {
        println!("warning: {}", w);
    }
    println!("wrote result bundle to {}", out.display());
    EXIT_OK
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| p.trim())
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<f64>().map_err(|_| format!("bad {} value {:?}", what, p)))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    scenario: &Path,
    out: &Path,
    gap: f64,
    time_limit: Option<f64>,
    solver_cmd: Option<&str>,
    jobs: Option<usize>,
    capacities: Option<&str>,
    costs: Option<&str>,
) -> i32 {
    let case = match load_validated(scenario) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let mut grid = SweepGrid::default_grid();
    if let Some(list) = capacities {
        match parse_list(list, "capacity") {
            Ok(caps) => {
                grid.rates_mw = caps.iter().map(|c| c / 4.0).collect();
                grid.capacities_mwh = caps;
            }
            Err(e) => {
                eprintln!("error: {}", e);
                return EXIT_INVALID;
            }
        }
    }
    if let Some(list) = costs {
        match parse_list(list, "cost") {
            Ok(cs) => grid.replacement_costs = cs,
            Err(e) => {
                eprintln!("error: {}", e);
                return EXIT_INVALID;
            }
        }
    }
    let engine = Engine::autodetect(solver_cmd);
    let cfg = solve_config(gap, time_limit);
    let jobs = jobs.unwrap_or_else(|| {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    });
    let sweep = match run_sweep(&case, &grid, &cfg, &engine, jobs) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {:#}", e);
            return EXIT_INVALID;
        }
    };
    let rmax = case.profiles.reg_capacity_mw.iter().cloned().fold(0.0f64, f64::max);
    let emit = || -> Result<()> {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        write_file(&out.join("sweep.csv"), &sweep_csv(&sweep.records))?;
        if !sweep.failures.is_empty() {
            write_file(&out.join("sweep_failures.csv"), &sweep_failures_csv(&sweep.failures))?;
        }
        emit_report_files(&sweep.records, Some(rmax), out)?;
        Ok(())
    };
    if let Err(e) = emit() {
        eprintln!("error: {:#}", e);
        return EXIT_INVALID;
    }
    println!(
        "sweep: {} points solved, {} failed; wrote {}",
        sweep.records.len(),
        sweep.failures.len(),
        out.join("sweep.csv").display()
    );
    for f in &sweep.failures {
        eprintln!(
            "  failed: capacity {} MWh, cost {} $/MWh: {}",
            f.capacity_mwh, f.replacement_cost, f.error
        );
    }
    if sweep.records.is_empty() {
        EXIT_SOLVER
    } else if !sweep.failures.is_empty() {
        EXIT_PARTIAL
    } else {
        EXIT_OK
    }
}

fn emit_report_files(
    records: &[SweepRecord],
    rmax: Option<f64>,
    out: &Path,
) -> Result<serde_json::Value> {
    let report = sweep_report(records, rmax);
    let json = serde_json::to_string_pretty(&report).context("serializing report")?;
    write_file(&out.join("report.json"), &(json + "\n"))?;
    for market in MARKET_LABELS {
        let table = market_table_csv(records, market)?;
        write_file(&out.join(format!("report_{}.csv", market)), &table)?;
    }
    Ok(report)
}

fn print_report_summary(report: &serde_json::Value) {
    if let Some(levels) = report["per_cost_level"].as_array() {
        for level in levels {
            let cost = &level["replacement_cost_usd_per_mwh"];
            let monotone = &level["reserve_monotone_in_capacity"];
            print!("repl {} $/MWh: reserve revenue monotone in capacity = {}", cost, monotone);
            let fl = &level["regulation_flattening"];
            if fl.is_object() {
                if let Some(f) = fl["flattens"].as_bool() {
                    print!(
                        ", regulation revenue flattens past {} MWh = {}",
                        fl["first_covered_capacity_mwh"], f
                    );
                }
            }
            println!();
        }
    }
}

fn cmd_report(out: &Path, scenario: Option<&Path>) -> i32 {
    let sweep_path = out.join("sweep.csv");
    let text = match fs::read_to_string(&sweep_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: reading {}: {}", sweep_path.display(), e);
            return EXIT_INVALID;
        }
    };
    let records = match parse_sweep_csv(&text) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {:#}", e);
            return EXIT_INVALID;
        }
    };
    let rmax = match scenario {
        Some(path) => match load_validated(path) {
            Ok(case) => {
                Some(case.profiles.reg_capacity_mw.iter().cloned().fold(0.0f64, f64::max))
            }
            Err(code) => return code,
        },
        None => None,
    };
    match emit_report_files(&records, rmax, out) {
        Ok(report) => {
            println!("{} sweep points summarized into {}", records.len(), out.display());
            print_report_summary(&report);
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {:#}", e);
            EXIT_INVALID
        }
    }
}
