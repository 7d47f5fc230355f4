//! Strategic storage bidding as a single-level MILP.
//!
//! A price-making storage operator chooses quantity and price offers for
//! energy, spinning reserve, and regulation capacity (plus a mileage price)
//! in every interval, anticipating how the ISO's co-optimized clearing
//! responds. The clearing problem is an LP, so the operator's problem is
//! restated in one level by embedding the clearing LP's optimality
//! conditions — primal feasibility, dual feasibility, stationarity, and
//! big-M complementarity — next to the operator's own physical constraints
//! (power split with mutual exclusion, per-segment energy bookkeeping with
//! conversion losses, deliverable-reserve windows, terminal state of
//! charge) and a profit objective made linear through strong duality.
//!
//! [`build_strategic_milp`] assembles the MILP, [`optimize_bids`] runs the
//! whole pipeline (build, warm start, solve, audit, extract), and
//! [`audit::evaluate_bids`] independently prices any fixed bid vector by
//! actually clearing the market with it — the oracle the optimizer is
//! tested against.

pub mod audit;
pub mod build;

pub use audit::{audit_solution, evaluate_bids, price_taker_bids, BidEvaluation};
pub use build::{
    build_strategic_milp, derive_big_m, reference_warm_start, RowBigM, StrategicMilp, VarMap,
};

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::agc::AgcError;
use crate::clearing::{build_llp, outcome_from_solution, BatteryBids, ClearingError, Llp,
    MarketOutcome};
use crate::degradation::DegradationError;
use crate::lp::{Solution, Status};
use crate::model::ScenarioCase;
use crate::solver::{solve, Engine, SolveOptions};

#[derive(Debug)]
pub enum BilevelError {
    Clearing(ClearingError),
    Agc(AgcError),
    Degradation(DegradationError),
    /// The case is malformed (validation failures, dimension mismatches).
    Shape(String),
    /// A clearing row or column the linear profit expression must keep
    /// turned out to depend on the offers, which would leave a product of
    /// decision variables in the objective.
    BilinearTerm(String),
    Solver(anyhow::Error),
    /// No offer satisfies the operator's own constraints (the idle point is
    /// always feasible for a valid case, so this signals a broken case).
    Infeasible,
    /// The returned solution failed verification against the independent
    /// re-clearing / replay checks.
    Verification(String),
}

impl std::fmt::Display for BilevelError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BilevelError::Clearing(e) => write!(f, "clearing: {}", e),
            BilevelError::Agc(e) => write!(f, "regulation signal: {}", e),
            BilevelError::Degradation(e) => write!(f, "degradation model: {}", e),
            BilevelError::Shape(m) => write!(f, "case shape: {}", m),
            BilevelError::BilinearTerm(m) => write!(f, "bilinear objective term: {}", m),
            BilevelError::Solver(e) => write!(f, "solver: {}", e),
            BilevelError::Infeasible => write!(f, "strategic problem is infeasible"),
            BilevelError::Verification(m) => write!(f, "solution verification: {}", m),
        }
    }
}

impl std::error::Error for BilevelError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            BilevelError::Clearing(e) => Some(e),
            BilevelError::Agc(e) => Some(e),
            BilevelError::Degradation(e) => Some(e),
            BilevelError::Solver(e) => Some(e.as_ref()),
            _ => None,
        }
    }
}

/// Knobs for the single-level reformulation and its solve.
#[derive(Debug, Clone)]
pub struct BilevelConfig {
    /// Relative MIP gap handed to the solver.
    pub rel_gap: f64,
    pub time_limit: Option<Duration>,
    /// Node cap for the built-in branch-and-bound.
    pub node_limit: usize,
    /// Integer-column cap for the built-in branch-and-bound.
    pub max_integers: usize,
    /// Safety margin in the mileage-to-capacity multiplier.
    pub multiplier_epsilon: f64,
    /// Dual big-M = dual_scale × largest per-MWh price × interval span.
    pub dual_scale: f64,
    /// How many times a solve may be repeated with the dual bound raised
    /// tenfold after a dual lands within 1% of its bound.
    pub big_m_retries: usize,
    /// Back offered reserve by a full interval of stored energy instead of
    /// one sub-interval.
    pub reserve_window_full_interval: bool,
    /// Optional tiny penalty on offer-price magnitudes to break price ties.
    pub beta_regularization: f64,
}

impl Default for BilevelConfig {
    fn default() -> Self {
        BilevelConfig {
            rel_gap: 1e-3,
            time_limit: None,
            node_limit: 200_000,
            max_integers: 64,
            multiplier_epsilon: 1e-3,
            dual_scale: 10.0,
            big_m_retries: 1,
            reserve_window_full_interval: false,
            beta_regularization: 0.0,
        }
    }
}

/// Dollar totals per revenue stream; `profit` nets degradation off.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RevenueSummary {
    pub energy: f64,
    pub reserve: f64,
    pub reg_capacity: f64,
    pub reg_mileage: f64,
    pub degradation_cost: f64,
    pub profit: f64,
}

impl RevenueSummary {
    pub fn revenue_total(&self) -> f64 {
        self.energy + self.reserve + self.reg_capacity + self.reg_mileage
    }

    fn accumulate(&mut self, other: &RevenueSummary) {
        self.energy += other.energy;
        self.reserve += other.reserve;
        self.reg_capacity += other.reg_capacity;
        self.reg_mileage += other.reg_mileage;
        self.degradation_cost += other.degradation_cost;
        self.profit += other.profit;
    }
}

/// Numerical quality of a returned solution. `hard` lists failures that
/// invalidate the solution outright; the rest are measurements and
/// warnings.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// ∞-norm of the stationarity residuals.
    pub stationarity_inf: f64,
    /// Worst min(slack, |dual|) across clearing inequalities, relative to
    /// the row's big-M.
    pub complementarity_rel: f64,
    /// |primal − dual| of the embedded clearing LP, relative.
    pub duality_gap_rel: f64,
    /// Linear revenue expression vs. price × award, relative.
    pub surrogate_gap_rel: f64,
    /// Embedded clearing objective vs. an independent re-clear, relative.
    pub reclear_gap_rel: f64,
    /// Largest award difference between the embedded schedule and the
    /// re-cleared one (degenerate alternate optima show up here).
    pub schedule_divergence: f64,
    pub degenerate_reclear: bool,
    /// |final state of charge − initial|, MWh, worst unit.
    pub terminal_soc_error: f64,
    /// Worst simultaneous charge/discharge overlap, MW.
    pub mutual_exclusion_mw: f64,
    /// Model's degradation cost vs. the greedy replay's, $.
    pub allocation_cost_gap: f64,
    /// Duals or slacks that landed within 1% of their big-M bound.
    pub big_m_flags: Vec<String>,
    pub warnings: Vec<String>,
    pub hard: Vec<String>,
}

/// Result of a strategic solve: the offers, the market's response to them,
/// revenue accounting, the operating schedule, and audit diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BilevelSolution {
    pub bids: BatteryBids,
    pub outcome: MarketOutcome,
    pub revenue: RevenueSummary,
    pub revenue_by_unit: Vec<RevenueSummary>,
    /// AGC participation factor per unit and interval.
    pub participation: Vec<Vec<f64>>,
    /// State of charge per unit, interval, sub-interval (MWh).
    pub soc: Vec<Vec<Vec<f64>>>,
    /// Terminal charge / discharge power per unit, interval, sub-interval (MW).
    pub terminal_charge: Vec<Vec<Vec<f64>>>,
    pub terminal_discharge: Vec<Vec<Vec<f64>>>,
    pub profit: f64,
    pub mip_gap: Option<f64>,
    pub timed_out: bool,
    pub diagnostics: Diagnostics,
}

/// A solved MILP point unpacked back into clearing-LP terms: the extracted
/// bids, the clearing LP rebuilt with them, and the embedded primal/dual
/// values. Shared by auditing and extraction.
pub(crate) struct SolutionView<'a> {
    pub milp: &'a StrategicMilp,
    pub x: Vec<f64>,
    pub bids: BatteryBids,
    pub llp_b: Llp,
    pub x_llp: Vec<f64>,
    pub y: Vec<f64>,
}

impl<'a> SolutionView<'a> {
    pub(crate) fn new(
        case: &ScenarioCase,
        milp: &'a StrategicMilp,
        sol: &Solution,
    ) -> Result<Self, BilevelError> {
        if sol.x.len() != milp.model.num_cols() {
            return Err(BilevelError::Shape(format!(
                "solution has {} values for {} columns",
                sol.x.len(),
                milp.model.num_cols()
            )));
        }
        let x = sol.x.clone();
        let map = &milp.map;
        let grab = |cols: &Vec<Vec<crate::lp::Col>>| -> Vec<Vec<f64>> {
            cols.iter().map(|row| row.iter().map(|c| x[c.0]).collect()).collect()
        };
        let bids = BatteryBids {
            q_energy: grab(&map.q_energy),
            q_reserve: grab(&map.q_reserve),
            q_regcap: grab(&map.q_regcap),
            beta_energy: grab(&map.beta_energy),
            beta_reserve: grab(&map.beta_reserve),
            beta_regcap: grab(&map.beta_regcap),
            beta_mileage: grab(&map.beta_mileage),
        };
        let llp_b =
            build_llp(case, &bids, &milp.multipliers).map_err(BilevelError::Clearing)?;
        if llp_b.model.num_cols() != milp.llp.model.num_cols()
            || llp_b.model.num_rows() != milp.llp.model.num_rows()
        {
            return Err(BilevelError::Shape(
                "re-built clearing LP changed shape".into(),
            ));
        }
        let x_llp: Vec<f64> = map.llp_col.iter().map(|c| x[c.0]).collect();
        let y: Vec<f64> = map.dual.iter().map(|c| x[c.0]).collect();
        Ok(SolutionView { milp, x, bids, llp_b, x_llp, y })
    }

    /// The embedded clearing point dressed up as a clearing-LP solution.
    pub(crate) fn clearing_solution(&self) -> Solution {
        Solution {
            status: Status::Optimal,
            objective: self.llp_b.model.objective_value(&self.x_llp),
            x: self.x_llp.clone(),
            duals: self.y.clone(),
            reduced_costs: vec![0.0; self.llp_b.model.num_cols()],
            mip_gap: None,
        }
    }

    pub(crate) fn outcome(&self, case: &ScenarioCase) -> MarketOutcome {
        outcome_from_solution(&self.llp_b, case, &self.clearing_solution())
    }
}

/// Revenue of one unit under an outcome's prices and awards, degradation
/// cost supplied by the caller.
fn unit_revenue(
    case: &ScenarioCase,
    outcome: &MarketOutcome,
    i: usize,
    degradation_cost: f64,
) -> RevenueSummary {
    let dt = case.grid.interval_hours;
    let n = case
        .bus_index(&case.batteries[i].bus)
        .expect("validated case has known buses");
    let mut s = RevenueSummary::default();
    for t in 0..case.grid.intervals {
        s.energy += outcome.lmp[n][t] * outcome.bat_energy[i][t] * dt;
        s.reserve += outcome.reserve_price[t] * outcome.bat_reserve[i][t] * dt;
        s.reg_capacity += outcome.regcap_price[t] * outcome.bat_regcap[i][t] * dt;
        s.reg_mileage += outcome.mileage_price[t] * outcome.bat_mileage[i][t] * dt;
    }
    s.degradation_cost = degradation_cost;
    s.profit = s.revenue_total() - degradation_cost;
    s
}

fn extract_solution(
    case: &ScenarioCase,
    view: &SolutionView<'_>,
    sol: &Solution,
    diagnostics: Diagnostics,
) -> BilevelSolution {
    let milp = view.milp;
    let map = &milp.map;
    let x = &view.x;
    let dz = case.grid.sub_hours;
    let outcome = view.outcome(case);

    let mut revenue_by_unit = Vec::with_capacity(case.batteries.len());
    let mut totals = RevenueSummary::default();
    for i in 0..case.batteries.len() {
        let mut deg = 0.0;
        for t in 0..case.grid.intervals {
            for z in 0..case.grid.subintervals {
                for (k, &slope) in milp.segments[i].slopes.iter().enumerate() {
                    deg += slope * dz * x[map.seg_dis[i][t][z][k].0];
                }
            }
        }
        let s = unit_revenue(case, &outcome, i, deg);
        totals.accumulate(&s);
        revenue_by_unit.push(s);
    }

    let per_tz = |cols: &Vec<Vec<Vec<crate::lp::Col>>>, i: usize| -> Vec<Vec<f64>> {
        cols[i]
            .iter()
            .map(|zs| zs.iter().map(|c| x[c.0]).collect())
            .collect()
    };
    let participation: Vec<Vec<f64>> = map
        .pf
        .iter()
        .map(|row| row.iter().map(|c| x[c.0]).collect())
        .collect();
    let soc: Vec<Vec<Vec<f64>>> =
        (0..case.batteries.len()).map(|i| per_tz(&map.soc, i)).collect();
    let terminal_charge: Vec<Vec<Vec<f64>>> =
        (0..case.batteries.len()).map(|i| per_tz(&map.term_ch, i)).collect();
    let terminal_discharge: Vec<Vec<Vec<f64>>> =
        (0..case.batteries.len()).map(|i| per_tz(&map.term_dis, i)).collect();

    BilevelSolution {
        bids: view.bids.clone(),
        outcome,
        profit: totals.profit,
        revenue: totals,
        revenue_by_unit,
        participation,
        soc,
        terminal_charge,
        terminal_discharge,
        mip_gap: sol.mip_gap,
        timed_out: sol.status == Status::Limit,
        diagnostics,
    }
}

/// Build, solve, audit, and unpack the strategic problem.
///
/// The built-in branch-and-bound starts from the idle warm point (zero
/// offers, baseline clearing duals). After the solve, the solution is
/// audited: hard failures abort; duals parked at their big-M bound raise
/// the bound tenfold and re-solve, up to `big_m_retries` times.
pub fn optimize_bids(
    case: &ScenarioCase,
    cfg: &BilevelConfig,
    engine: &Engine,
) -> Result<BilevelSolution, BilevelError> {
    let mut cfg_eff = cfg.clone();
    let mut attempt = 0usize;
    loop {
        let milp = build_strategic_milp(case, &cfg_eff)?;
        let opts = SolveOptions {
            rel_gap: cfg_eff.rel_gap,
            time_limit: cfg_eff.time_limit,
            node_limit: cfg_eff.node_limit,
            max_integers: cfg_eff.max_integers,
            warm_start: reference_warm_start(&milp),
        };
        let sol = solve(&milp.model, engine, &opts).map_err(BilevelError::Solver)?;
        match sol.status {
            Status::Optimal | Status::Limit => {}
            Status::Infeasible => return Err(BilevelError::Infeasible),
            Status::Unbounded => {
                return Err(BilevelError::Verification(
                    "solver reports the strategic MILP unbounded; the big-M bounds should prevent this".into(),
                ))
            }
        }
        let view = SolutionView::new(case, &milp, &sol)?;
        let diag = audit::audit_view(case, &view);
        let retry = !diag.big_m_flags.is_empty() && attempt < cfg.big_m_retries;
        if !retry {
            if !diag.hard.is_empty() {
                return Err(BilevelError::Verification(diag.hard.join("; ")));
            }
            return Ok(extract_solution(case, &view, &sol, diag));
        }
        attempt += 1;
        cfg_eff.dual_scale *= 10.0;
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::{arbitrage_case, regulation_case, scipy_engine};
    use super::*;
    use crate::solver::Engine;

    fn tight_cfg() -> BilevelConfig {
        BilevelConfig { rel_gap: 1e-7, ..BilevelConfig::default() }
    }

    /// charge 50 MW at the cheap interval, discharge it at the dear one:
    /// 50·0.25·(20−10) = 125 $ with free cycling and perfect efficiency.
    #[test]
    fn arbitrage_micro_reaches_the_hand_computed_optimum() {
        let case = arbitrage_case(10.0, 20.0, 0.0, 1.0);
        let sol = optimize_bids(&case, &tight_cfg(), &Engine::Reference).unwrap();
        assert!(
            (sol.profit - 125.0).abs() <= 1e-4,
            "profit {} gap {:?}",
            sol.profit,
            sol.mip_gap
        );
        assert!(sol.diagnostics.hard.is_empty());
        assert!(sol.diagnostics.stationarity_inf <= 1e-6);
        assert!(sol.diagnostics.surrogate_gap_rel <= 1e-6);
        assert!(sol.diagnostics.duality_gap_rel <= 1e-7);
        // The schedule really is charge-then-discharge at full power.
        assert!((sol.outcome.bat_energy[0][0] + 50.0).abs() <= 1e-5);
        assert!((sol.outcome.bat_energy[0][1] - 50.0).abs() <= 1e-5);
        // SOC: 90 -> 102.5 -> 90.
        assert!((sol.soc[0][0][1] - 102.5).abs() <= 1e-5);
        assert!((sol.soc[0][1][1] - 90.0).abs() <= 1e-5);
        assert_eq!(sol.timed_out, false);
    }

    /// The optimizer's profit is certified against a brute-force sweep of a
    /// bid grid, each point priced by independently clearing the market.
    #[test]
    fn no_grid_bid_beats_the_milp_on_the_arbitrage_micro() {
        let case = arbitrage_case(10.0, 20.0, 0.0, 1.0);
        let cfg = tight_cfg();
        let sol = optimize_bids(&case, &cfg, &Engine::Reference).unwrap();
        let mut best = f64::NEG_INFINITY;
        let mut best_desc = String::new();
        for &q1 in &[0.0, 25.0, 50.0] {
            for &b1 in &[5.0, 15.0, 25.0] {
                for &q2 in &[0.0, 25.0, 50.0] {
                    for &b2 in &[5.0, 15.0, 25.0] {
                        let mut bids = BatteryBids::zero(1, 2);
                        bids.q_energy = vec![vec![q1, q2]];
                        bids.beta_energy = vec![vec![b1, b2]];
                        let ev = evaluate_bids(&case, &bids, &cfg).unwrap();
                        if ev.profit > best {
                            best = ev.profit;
                            best_desc = format!("q=({q1},{q2}) beta=({b1},{b2})");
                        }
                    }
                }
            }
        }
        // The grid contains the optimum (q=50 with prices straddling the
        // generator offers), so equality should hold to tolerance.
        assert!(
            best <= sol.profit + 1e-3 * sol.profit.abs().max(1.0),
            "grid point {} earns {} > milp {}",
            best_desc,
            best,
            sol.profit
        );
        assert!((best - 125.0).abs() <= 1e-6, "grid best {}", best);
    }

    /// A zero-price full-quantity posture is feasible here, so the strategic
    /// optimum must weakly dominate it.
    #[test]
    fn strategic_dominates_the_price_taker_when_it_is_feasible() {
        // A generator minimum above the first-interval load forces 50 MW of
        // surplus into the battery, and the 140 MW peak pulls the same energy
        // back out: the zero-price full-quantity schedule balances its state
        // of charge without any price incentive.
        let mut case = arbitrage_case(10.0, 20.0, 0.0, 1.0);
        case.generators[0].pmin = 90.0;
        case.profiles.load_mw = vec![vec![40.0, 140.0]];
        let cfg = tight_cfg();
        let taker = price_taker_bids(&case);
        let ev = evaluate_bids(&case, &taker, &cfg).unwrap();
        assert!(ev.infeasible.is_none(), "price taker infeasible: {:?}", ev.infeasible);
        assert!(ev.profit.is_finite() && ev.profit >= 0.0, "taker profit {}", ev.profit);
        let sol = optimize_bids(&case, &cfg, &Engine::Reference).unwrap();
        assert!(
            sol.profit >= ev.profit - 1e-3 * ev.profit.abs().max(1.0),
            "strategic {} < taker {}",
            sol.profit,
            ev.profit
        );

        // On the plain arbitrage micro the same posture over-discharges and
        // breaks the terminal balance, so the oracle prices it out entirely.
        let plain = arbitrage_case(10.0, 20.0, 0.0, 1.0);
        let ev = evaluate_bids(&plain, &price_taker_bids(&plain), &cfg).unwrap();
        assert!(ev.infeasible.is_some());
        assert_eq!(ev.profit, f64::NEG_INFINITY);
    }

    /// With a ruinous replacement cost the optimizer should keep the unit
    /// idle: any cycling costs more than the 10 $/MWh spread can pay.
    #[test]
    fn ruinous_degradation_keeps_the_unit_idle() {
        let case = arbitrage_case(10.0, 20.0, 1e7, 1.0);
        let sol = optimize_bids(&case, &tight_cfg(), &Engine::Reference).unwrap();
        assert!(sol.profit.abs() <= 1e-5, "profit {}", sol.profit);
        for t in 0..2 {
            assert!(sol.outcome.bat_energy[0][t].abs() <= 1e-5);
        }
    }

    /// A flat price leaves no arbitrage value; profit collapses to zero
    /// (cycling would only pay degradation).
    #[test]
    fn constant_price_earns_nothing() {
        let case = arbitrage_case(15.0, 15.0, 200_000.0, 0.95);
        let sol = optimize_bids(&case, &tight_cfg(), &Engine::Reference).unwrap();
        assert!(sol.profit.abs() <= 1e-5, "profit {}", sol.profit);
    }

    /// Corrupting a complementarity binary to a fractional value must be
    /// caught by the audit.
    #[test]
    fn audit_rejects_fractional_binaries() {
        let case = arbitrage_case(10.0, 20.0, 0.0, 1.0);
        let cfg = tight_cfg();
        let milp = build_strategic_milp(&case, &cfg).unwrap();
        let opts = crate::solver::SolveOptions {
            rel_gap: cfg.rel_gap,
            warm_start: reference_warm_start(&milp),
            ..Default::default()
        };
        let mut sol = crate::solver::solve(&milp.model, &Engine::Reference, &opts).unwrap();
        let u = milp
            .map
            .comp
            .iter()
            .flatten()
            .next()
            .copied()
            .expect("at least one complementarity binary");
        sol.x[u.0] = 0.5;
        let err = audit_solution(&case, &milp, &sol).unwrap_err();
        assert!(
            err.to_string().contains("binary"),
            "unexpected audit error: {}",
            err
        );
    }

    /// The regulation micro case must produce a numerically certified KKT
    /// point and a profit that clears the idle floor.
    #[test]
    fn regulation_micro_passes_the_kkt_audit() {
        let case = regulation_case(200_000.0);
        let cfg = BilevelConfig { rel_gap: 1e-6, ..BilevelConfig::default() };
        let sol = optimize_bids(&case, &cfg, &Engine::Reference).unwrap();
        let d = &sol.diagnostics;
        assert!(d.hard.is_empty(), "{:?}", d.hard);
        assert!(d.stationarity_inf <= 1e-6, "stationarity {}", d.stationarity_inf);
        assert!(d.complementarity_rel <= 1e-6, "complementarity {}", d.complementarity_rel);
        assert!(d.duality_gap_rel <= 1e-7, "duality gap {}", d.duality_gap_rel);
        assert!(d.surrogate_gap_rel <= 1e-6, "surrogate gap {}", d.surrogate_gap_rel);
        assert!(d.reclear_gap_rel <= 1e-5, "reclear gap {}", d.reclear_gap_rel);
        // Idle is always available, so the optimum cannot be negative.
        assert!(sol.profit >= -1e-6, "profit {}", sol.profit);
        // Ancillary requirements are live; the battery should be earning
        // from at least one of them rather than sitting out.
        assert!(sol.profit > 1.0, "profit {}", sol.profit);
    }

    /// Reference branch-and-bound and the external scipy runner must agree
    /// on the micro MILP's objective to solver precision.
    #[test]
    fn reference_and_external_engines_agree_on_the_micro() {
        let Some(ext) = scipy_engine() else {
            eprintln!("skipping: python3/scipy unavailable");
            return;
        };
        let case = arbitrage_case(10.0, 20.0, 0.0, 1.0);
        let cfg = tight_cfg();
        let a = optimize_bids(&case, &cfg, &Engine::Reference).unwrap();
        let b = optimize_bids(&case, &cfg, &ext).unwrap();
        assert!(
            (a.profit - b.profit).abs() <= 1e-6 * a.profit.abs().max(1.0),
            "reference {} vs external {}",
            a.profit,
            b.profit
        );
    }

    /// The idle warm start must be accepted by the built-in solver as an
    /// incumbent (exercised implicitly above) and the solution JSON must
    /// round-trip.
    #[test]
    fn solution_serializes_and_round_trips() {
        let case = arbitrage_case(10.0, 20.0, 0.0, 1.0);
        let sol = optimize_bids(&case, &tight_cfg(), &Engine::Reference).unwrap();
        let text = serde_json::to_string_pretty(&sol).unwrap();
        let back: BilevelSolution = serde_json::from_str(&text).unwrap();
        assert_eq!(back.bids, sol.bids);
        assert!((back.profit - sol.profit).abs() <= 1e-12);
    }
}
