//! Independent verification of strategic solutions.
//!
//! Two tools, sharing no code path with the MILP assembly's intent:
//!
//! - [`audit_view`] / [`audit_solution`] measure the numerical quality of a
//!   solved MILP point (KKT residuals, duality gap, the linear revenue
//!   expression against price × award) and re-derive everything the model
//!   claims: the extracted offers are handed to the actual clearing solver
//!   and must reproduce the embedded objective, and the operating schedule
//!   is replayed through the greedy segment allocator and must stay
//!   feasible all the way to the terminal state of charge.
//! - [`evaluate_bids`] prices an arbitrary fixed bid vector by clearing the
//!   market with it and replaying the implied schedule. The optimizer never
//!   touches this path, which is what makes brute-force optimality checks
//!   against it meaningful.

use crate::clearing::{build_llp, clear_market, regulation_multipliers, BatteryBids,
    ClearingError, MarketOutcome};
use crate::degradation::{simulate_segment_allocation, SegmentState};
use crate::lp::{Sense, Solution};
use crate::model::{validate_case, ScenarioCase};

use super::build::StrategicMilp;
use super::{unit_revenue, BilevelConfig, BilevelError, Diagnostics, RevenueSummary, SolutionView};

/// Relative feasibility tolerance for solver output (external solvers
/// default to 1e-6-ish primal tolerances).
const FEAS_REL: f64 = 1e-6;

/// Measure a solved point. Failures that invalidate the solution land in
/// `Diagnostics::hard`; numerical quality lands in the other fields.
pub(crate) fn audit_view(case: &ScenarioCase, view: &SolutionView<'_>) -> Diagnostics {
    let milp = view.milp;
    let m = &milp.model;
    let x = &view.x;
    let mut d = Diagnostics::default();

    // Integer columns must be integral: a fractional activity or mode
    // binary means the solver's answer is not a solution of this model.
    for c in m.cols() {
        if m.is_integer(c) {
            let v = x[c.0];
            if (v - v.round()).abs() > 1e-5 {
                d.hard.push(format!("binary column {} = {} is fractional", m.col_name(c), v));
            }
        }
    }

    // Every model row and bound, violation scaled by the row's own terms.
    let mut worst = (0.0f64, String::new());
    for r in m.rows() {
        let act = m.row_activity(r, x);
        let rhs = m.row_rhs(r);
        let viol = match m.row_sense(r) {
            Sense::Le => act - rhs,
            Sense::Ge => rhs - act,
            Sense::Eq => (act - rhs).abs(),
        };
        let scale = 1.0
            + rhs.abs()
            + m.row_coeffs(r).iter().map(|&(j, a)| (a * x[j]).abs()).sum::<f64>();
        if viol / scale > worst.0 {
            worst = (viol / scale, m.row_name(r).to_string());
        }
    }
    if worst.0 > FEAS_REL {
        d.hard.push(format!(
            "row {} violated by {:.3e} (relative)",
            worst.1, worst.0
        ));
    }
    for c in m.cols() {
        let (lo, up) = m.col_bounds(c);
        let v = x[c.0];
        let scale = 1.0 + v.abs();
        if (lo - v).max(v - up) > FEAS_REL * scale {
            d.hard.push(format!(
                "column {} = {} outside [{}, {}]",
                m.col_name(c),
                v,
                lo,
                up
            ));
        }
    }

    // Stationarity residuals, absolute ∞-norm.
    for &r in &milp.map.stationarity {
        let res = (m.row_activity(r, x) - m.row_rhs(r)).abs();
        d.stationarity_inf = d.stationarity_inf.max(res);
    }

    // Complementarity min(slack, |dual|) per clearing inequality, relative
    // to the row's big-M; plus proximity flags for the escalation loop.
    for r in 0..milp.llp.model.num_rows() {
        let sense = milp.llp.model.row_sense(crate::lp::Row(r));
        let y = view.y[r];
        let bm = milp.big_m[r];
        if y.abs() >= 0.99 * bm.dual {
            d.big_m_flags.push(format!(
                "dual of {} at {:.4} vs bound {:.4}",
                milp.llp.model.row_name(crate::lp::Row(r)),
                y,
                bm.dual
            ));
        }
        if sense == Sense::Eq {
            continue;
        }
        let pr = milp.map.primal_row[r];
        let act = m.row_activity(pr, x);
        let rhs = m.row_rhs(pr);
        let slack = match sense {
            Sense::Ge => act - rhs,
            Sense::Le => rhs - act,
            Sense::Eq => 0.0,
        }
        .max(0.0);
        let big = bm.slack.max(bm.dual).max(1.0);
        d.complementarity_rel = d.complementarity_rel.max(slack.min(y.abs()) / big);
        // No slack-side proximity flag: slack caps are exact structural
        // widths (box spans, requirement surpluses), so a slack sitting on
        // its cap is a legitimate point, not a sign the cap binds the
        // optimum. Only the heuristic dual caps drive escalation.
    }

    // Strong duality of the embedded clearing point.
    let clearing_sol = view.clearing_solution();
    let p_obj = clearing_sol.objective;
    let d_obj = clearing_sol.dual_objective(&view.llp_b.model);
    d.duality_gap_rel = (p_obj - d_obj).abs() / (1.0 + p_obj.abs());

    // The linear revenue expression against price × award.
    let outcome = view.outcome(case);
    let direct: f64 = (0..case.batteries.len())
        .map(|i| unit_revenue(case, &outcome, i, 0.0).revenue_total())
        .sum();
    let mut surrogate = 0.0;
    for r in 0..milp.llp.model.num_rows() {
        if !milp.llp.row_kinds[r].is_storage_private() {
            surrogate += milp.llp.model.row_rhs(crate::lp::Row(r)) * view.y[r];
        }
    }
    for j in 0..milp.llp.model.num_cols() {
        if !milp.llp.col_kinds[j].is_storage() {
            surrogate -= milp.llp.model.col_obj(crate::lp::Col(j)) * view.x_llp[j];
        }
    }
    d.surrogate_gap_rel = (direct - surrogate).abs() / (1.0 + direct.abs());

    // Re-clear the market with the extracted offers: the embedded point
    // must be optimal for the real clearing LP, to solver precision. Award
    // ties may break differently; that is degeneracy, not error.
    match clear_market(&view.llp_b, case, &view.bids) {
        Ok(out2) => {
            d.reclear_gap_rel = (out2.objective - p_obj).abs() / (1.0 + p_obj.abs());
            if d.reclear_gap_rel > 1e-5 {
                d.hard.push(format!(
                    "embedded clearing objective {} differs from re-cleared {}",
                    p_obj, out2.objective
                ));
            }
            let mut div = 0.0f64;
            for i in 0..case.batteries.len() {
                for t in 0..case.grid.intervals {
                    for (a, b) in [
                        (&outcome.bat_energy, &out2.bat_energy),
                        (&outcome.bat_reserve, &out2.bat_reserve),
                        (&outcome.bat_regcap, &out2.bat_regcap),
                        (&outcome.bat_mileage, &out2.bat_mileage),
                    ] {
                        div = div.max((a[i][t] - b[i][t]).abs());
                    }
                }
            }
            d.schedule_divergence = div;
            let max_rate = case
                .batteries
                .iter()
                .map(|b| b.rate_mw)
                .fold(0.0f64, f64::max);
            d.degenerate_reclear = div > 1e-4 * (1.0 + max_rate);
            if d.degenerate_reclear {
                d.warnings.push(format!(
                    "clearing has alternate optima; awards moved by up to {} MW on re-clear",
                    div
                ));
            }
        }
        Err(e) => d.hard.push(format!("re-clearing the extracted offers failed: {}", e)),
    }

    // Replay the operating schedule through the greedy allocator.
    let z_n = case.grid.subintervals;
    let dz = case.grid.sub_hours;
    for (i, bat) in case.batteries.iter().enumerate() {
        let mut series = Vec::with_capacity(case.grid.intervals * z_n);
        for t in 0..case.grid.intervals {
            for z in 0..z_n {
                let ch = x[milp.map.term_ch[i][t][z].0];
                let dis = x[milp.map.term_dis[i][t][z].0];
                d.mutual_exclusion_mw = d.mutual_exclusion_mw.max(ch.min(dis));
                series.push((ch, dis));
            }
        }
        if d.mutual_exclusion_mw > 1e-6 * (1.0 + bat.rate_mw) {
            d.hard.push(format!(
                "unit {} charges and discharges simultaneously ({} MW overlap)",
                bat.name, d.mutual_exclusion_mw
            ));
        }
        let init = SegmentState { energy: milp.initial_segments[i].clone() };
        match simulate_segment_allocation(&series, &milp.segments[i], &init, bat.eta, dz) {
            Ok(trace) => {
                let mut milp_deg = 0.0;
                for t in 0..case.grid.intervals {
                    for z in 0..z_n {
                        for (k, &slope) in milp.segments[i].slopes.iter().enumerate() {
                            milp_deg += slope * dz * x[milp.map.seg_dis[i][t][z][k].0];
                        }
                    }
                }
                let gap = (trace.total_cost - milp_deg).abs();
                d.allocation_cost_gap = d.allocation_cost_gap.max(gap);
                if gap > 1e-6 * (1.0 + trace.total_cost.abs()) {
                    d.warnings.push(format!(
                        "unit {} books {} $ of degradation; the greedy replay books {}",
                        bat.name, milp_deg, trace.total_cost
                    ));
                }
                // The model's SOC trajectory must match the replay's.
                let soc = trace.soc_trace();
                let mut step = 0usize;
                let mut soc_div = 0.0f64;
                for t in 0..case.grid.intervals {
                    for z in 0..z_n {
                        soc_div =
                            soc_div.max((soc[step] - x[milp.map.soc[i][t][z].0]).abs());
                        step += 1;
                    }
                }
                if soc_div > 1e-6 * (1.0 + bat.capacity_mwh) {
                    d.hard.push(format!(
                        "unit {} state of charge diverges from the replay by {} MWh",
                        bat.name, soc_div
                    ));
                }
            }
            Err(e) => d.hard.push(format!("replaying unit {} failed: {}", bat.name, e)),
        }
        let soc_end = x[milp.map.soc[i][case.grid.intervals - 1][z_n - 1].0];
        let term_err = (soc_end - bat.soc_init).abs();
        d.terminal_soc_error = d.terminal_soc_error.max(term_err);
        if term_err > 1e-6 {
            d.hard.push(format!(
                "unit {} ends at {} MWh instead of its initial {} MWh",
                bat.name, soc_end, bat.soc_init
            ));
        }
    }

    d
}

/// Public audit entry point: unpack a solved point and fail on any hard
/// finding.
pub fn audit_solution(
    case: &ScenarioCase,
    milp: &StrategicMilp,
    sol: &Solution,
) -> Result<Diagnostics, BilevelError> {
    let view = SolutionView::new(case, milp, sol)?;
    let d = audit_view(case, &view);
    if d.hard.is_empty() {
        Ok(d)
    } else {
        Err(BilevelError::Verification(d.hard.join("; ")))
    }
}

/// Outcome of pricing one fixed bid vector. `infeasible` carries the first
/// reason the offers cannot be honored (profit is then −∞, which makes
/// grid-search comparisons direct).
#[derive(Debug, Clone)]
pub struct BidEvaluation {
    pub profit: f64,
    pub revenue: RevenueSummary,
    pub outcome: Option<MarketOutcome>,
    pub infeasible: Option<String>,
}

impl BidEvaluation {
    fn rejected(reason: String) -> Self {
        BidEvaluation {
            profit: f64::NEG_INFINITY,
            revenue: RevenueSummary::default(),
            outcome: None,
            infeasible: Some(reason),
        }
    }
}

/// Full quantities at zero prices: the posture of an operator that takes
/// whatever the market pays. Not always operable — delivering every award
/// may breach the SOC windows — which [`evaluate_bids`] will report.
pub fn price_taker_bids(case: &ScenarioCase) -> BatteryBids {
    let mut bids = BatteryBids::zero(case.batteries.len(), case.grid.intervals);
    for (i, bat) in case.batteries.iter().enumerate() {
        for t in 0..case.grid.intervals {
            bids.q_energy[i][t] = bat.rate_mw;
            bids.q_reserve[i][t] = bat.rate_mw;
            bids.q_regcap[i][t] = bat.rate_mw;
        }
    }
    bids
}

/// Clear the market with fixed offers and price the result, replaying the
/// implied schedule to confirm the operator could actually honor it.
///
/// The awards fully determine operations: the participation factor is the
/// awarded mileage share, each sub-interval's net power is award plus AGC
/// share, and the charge/discharge split is the minimal one (mutual
/// exclusion leaves no choice). The greedy allocator then books the
/// cheapest feasible degradation cost, so the returned profit is *the*
/// profit of these offers — which makes this function a true oracle for
/// optimality checks.
pub fn evaluate_bids(
    case: &ScenarioCase,
    bids: &BatteryBids,
    cfg: &BilevelConfig,
) -> Result<BidEvaluation, BilevelError> {
    let violations = validate_case(case);
    if !violations.is_empty() {
        return Err(BilevelError::Shape(violations.join("; ")));
    }
    let m = regulation_multipliers(case, cfg.multiplier_epsilon).map_err(BilevelError::Agc)?;
    let llp = build_llp(case, bids, &m).map_err(BilevelError::Clearing)?;
    let outcome = match clear_market(&llp, case, bids) {
        Ok(o) => o,
        Err(ClearingError::Infeasible { hint }) => {
            return Ok(BidEvaluation::rejected(format!("market cannot clear: {}", hint)))
        }
        Err(e) => return Err(BilevelError::Clearing(e)),
    };

    let t_n = case.grid.intervals;
    let z_n = case.grid.subintervals;
    let dt = case.grid.interval_hours;
    let dz = case.grid.sub_hours;
    let w_res = if cfg.reserve_window_full_interval { dt } else { dz };

    // Participation factors, then the shared-signal budget.
    let mut pf = vec![vec![0.0; t_n]; case.batteries.len()];
    for i in 0..case.batteries.len() {
        for t in 0..t_n {
            let r = case.profiles.reg_mileage_mw[t];
            if r > 0.0 {
                pf[i][t] = outcome.bat_mileage[i][t] / r;
            }
        }
    }
    for t in 0..t_n {
        let total: f64 = (0..case.batteries.len()).map(|i| pf[i][t]).sum();
        if total > 1.0 + 1e-9 {
            return Ok(BidEvaluation::rejected(format!(
                "awarded mileage assigns {:.6} of the regulation signal at interval {}",
                total,
                t + 1
            )));
        }
    }

    let mut revenue = RevenueSummary::default();
    let mut by_unit = Vec::with_capacity(case.batteries.len());
    for (i, bat) in case.batteries.iter().enumerate() {
        let rate = bat.rate_mw;
        let tol_p = 1e-6 * (1.0 + rate);
        // Awards plus the regulation band must fit the rating.
        for t in 0..t_n {
            let e = outcome.bat_energy[i][t];
            let rs = outcome.bat_reserve[i][t];
            let rgc = outcome.bat_regcap[i][t];
            if e - rgc < -rate - tol_p || e + rgc + rs > rate + tol_p {
                return Ok(BidEvaluation::rejected(format!(
                    "unit {} awards exceed its rating at interval {}",
                    bat.name,
                    t + 1
                )));
            }
        }
        // Net dispatch per sub-interval, split minimally.
        let mut series = Vec::with_capacity(t_n * z_n);
        for t in 0..t_n {
            for z in 0..z_n {
                let net = outcome.bat_energy[i][t] + pf[i][t] * case.agc.setpoint(t, z);
                if net.abs() > rate + tol_p {
                    return Ok(BidEvaluation::rejected(format!(
                        "unit {} dispatch {} MW exceeds its rating at interval {}",
                        bat.name,
                        net,
                        t + 1
                    )));
                }
                series.push(((-net).max(0.0), net.max(0.0)));
            }
        }
        let segments = bat.degradation_segments().map_err(BilevelError::Degradation)?;
        let init = match SegmentState::fill_cheapest(&segments, bat.soc_init) {
            Ok(s) => s,
            Err(e) => return Err(BilevelError::Degradation(e)),
        };
        let trace = match simulate_segment_allocation(&series, &segments, &init, bat.eta, dz) {
            Ok(t) => t,
            Err(e) => {
                return Ok(BidEvaluation::rejected(format!(
                    "unit {} cannot run the implied schedule: {}",
                    bat.name, e
                )))
            }
        };
        // SOC windows, reserve backing, and the terminal condition.
        let soc = trace.soc_trace();
        let tol_e = 1e-6 * (1.0 + bat.capacity_mwh);
        let mut held = 0.0; // reserve-duration energy committed so far
        let mut step = 0usize;
        for t in 0..t_n {
            let rs = outcome.bat_reserve[i][t];
            for z in 0..z_n {
                let s = soc[step];
                step += 1;
                if s < bat.soc_min - tol_e || s > bat.soc_max + tol_e {
                    return Ok(BidEvaluation::rejected(format!(
                        "unit {} leaves its SOC window ({} MWh) at interval {}",
                        bat.name,
                        s,
                        t + 1
                    )));
                }
                if s - w_res * rs < bat.soc_min - tol_e {
                    return Ok(BidEvaluation::rejected(format!(
                        "unit {} cannot back its reserve award at interval {}",
                        bat.name,
                        t + 1
                    )));
                }
                let window = held + ((z + 1) as f64) * dz * rs;
                if s - window < bat.soc_min - tol_e {
                    return Ok(BidEvaluation::rejected(format!(
                        "unit {} cannot back its accumulated reserve at interval {}",
                        bat.name,
                        t + 1
                    )));
                }
            }
            held += dt * rs;
        }
        let end = soc.last().copied().unwrap_or(bat.soc_init);
        if (end - bat.soc_init).abs() > 1e-6 {
            return Ok(BidEvaluation::rejected(format!(
                "unit {} ends at {} MWh instead of {} MWh",
                bat.name, end, bat.soc_init
            )));
        }
        let s = unit_revenue(case, &outcome, i, trace.total_cost);
        revenue.accumulate(&s);
        by_unit.push(s);
    }

    Ok(BidEvaluation {
        profit: revenue.profit,
        revenue,
        outcome: Some(outcome),
        infeasible: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bilevel::fixtures::{arbitrage_case, regulation_case};
    use crate::bilevel::BilevelConfig;

    #[test]
    fn zero_bids_price_to_zero_profit() {
        let case = regulation_case(200_000.0);
        let bids = BatteryBids::zero(1, 2);
        let ev = evaluate_bids(&case, &bids, &BilevelConfig::default()).unwrap();
        assert!(ev.infeasible.is_none());
        assert!(ev.profit.abs() < 1e-9, "profit {}", ev.profit);
    }

    #[test]
    fn hand_checked_arbitrage_offer_prices_to_125() {
        let case = arbitrage_case(10.0, 20.0, 0.0, 1.0);
        let mut bids = BatteryBids::zero(1, 2);
        bids.q_energy = vec![vec![50.0, 50.0]];
        // Prices straddling the generator offers force charge then discharge.
        bids.beta_energy = vec![vec![15.0, 15.0]];
        let ev = evaluate_bids(&case, &bids, &BilevelConfig::default()).unwrap();
        assert!(ev.infeasible.is_none(), "{:?}", ev.infeasible);
        assert!((ev.profit - 125.0).abs() <= 1e-9, "profit {}", ev.profit);
        let o = ev.outcome.unwrap();
        assert!((o.bat_energy[0][0] + 50.0).abs() <= 1e-9);
        assert!((o.bat_energy[0][1] - 50.0).abs() <= 1e-9);
    }

    #[test]
    fn terminal_imbalance_is_rejected() {
        let case = arbitrage_case(10.0, 20.0, 0.0, 1.0);
        let mut bids = BatteryBids::zero(1, 2);
        bids.q_energy = vec![vec![50.0, 50.0]];
        // Discharging in both intervals cannot return to the initial SOC.
        bids.beta_energy = vec![vec![5.0, 5.0]];
        let ev = evaluate_bids(&case, &bids, &BilevelConfig::default()).unwrap();
        let reason = ev.infeasible.expect("must be rejected");
        assert!(reason.contains("ends at"), "{}", reason);
        assert_eq!(ev.profit, f64::NEG_INFINITY);
    }

    #[test]
    fn price_taker_quantities_cover_all_products() {
        let case = regulation_case(200_000.0);
        let bids = price_taker_bids(&case);
        assert_eq!(bids.q_energy[0], vec![50.0, 50.0]);
        assert_eq!(bids.q_reserve[0], vec![50.0, 50.0]);
        assert_eq!(bids.q_regcap[0], vec![50.0, 50.0]);
        assert_eq!(bids.beta_energy[0], vec![0.0, 0.0]);
    }
}
