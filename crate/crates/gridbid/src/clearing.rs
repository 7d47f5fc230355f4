//! Joint market clearing: the system operator's real-time energy,
//! spinning-reserve, and regulation dispatch LP.
//!
//! The LP minimizes offered cost over generator schedules, storage
//! schedules, and bus angles. Every physical restriction is written as an
//! explicit *row* over free columns — including simple bounds — so each one
//! carries a dual variable. The strategic reformulation needs those duals
//! individually (one complementarity pair per row), and the clearing prices
//! are duals too: locational marginal prices from the nodal balance rows and
//! market clearing prices from the three requirement rows.
//!
//! Row roles are tagged with [`RowKind`] and columns with [`ColKind`]; the
//! tags are the contract between this module and the reformulation: rows
//! bounding storage quantities are recognized by role, never by inspecting
//! coefficients.
//!
//! Requirement rows are emitted only for intervals with a positive
//! requirement; a zero requirement clears trivially at price zero and would
//! otherwise add a degenerate complementarity pair downstream.

use std::collections::HashMap;

use crate::agc;
use crate::lp::{Col, Model, Row, Sense, Solution, Status};
use crate::model::ScenarioCase;
use crate::solver::simplex::{solve_lp, SimplexError};

#[derive(Debug, Clone, PartialEq)]
pub enum ClearingError {
    Dimensions(String),
    Infeasible { hint: String },
    Unbounded,
    Solver(String),
    /// Optimality certificates failed to check out (solver defect).
    BadCertificate(String),
}

impl std::fmt::Display for ClearingError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ClearingError::Dimensions(m) => write!(f, "{}", m),
            ClearingError::Infeasible { hint } => write!(f, "market is infeasible: {}", hint),
            ClearingError::Unbounded => write!(f, "market LP is unbounded"),
            ClearingError::Solver(m) => write!(f, "LP solver failed: {}", m),
            ClearingError::BadCertificate(m) => write!(f, "optimality check failed: {}", m),
        }
    }
}

impl std::error::Error for ClearingError {}

impl From<SimplexError> for ClearingError {
    fn from(e: SimplexError) -> Self {
        ClearingError::Solver(e.to_string())
    }
}

/// Which side of a two-sided restriction a row encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Lower,
    Upper,
}

/// Role of a clearing-LP row. `j` indexes generators, `i` storage units,
/// `n` buses, `line` lines, `t` intervals — all zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowKind {
    /// Generator dispatch window: min + regulation headroom below, max less
    /// reserve and regulation headroom above.
    GenBox { j: usize, t: usize, side: Side },
    /// Reserve award within the reserve ramp capability.
    GenReserveCap { j: usize, t: usize, side: Side },
    /// Regulation-capacity award within the regulation ramp capability.
    GenRegCap { j: usize, t: usize, side: Side },
    /// Mileage award envelope: capacity award up to multiplier times it.
    GenMileageEnv { j: usize, t: usize, side: Side },
    /// Storage energy schedule within ±quantity offer.
    BatEnergyBox { i: usize, t: usize, side: Side },
    /// Storage reserve award within its quantity offer.
    BatReserveCap { i: usize, t: usize, side: Side },
    /// Storage regulation-capacity award within its quantity offer.
    BatRegCapBox { i: usize, t: usize, side: Side },
    /// Storage mileage award envelope.
    BatMileageEnv { i: usize, t: usize, side: Side },
    ReserveReq { t: usize },
    RegCapReq { t: usize },
    MileageReq { t: usize },
    /// Nodal power balance; its dual is the locational marginal price.
    Balance { n: usize, t: usize },
    FlowLimit { line: usize, t: usize, side: Side },
    /// Reference-bus angle pinned to zero.
    RefBus { t: usize },
}

impl RowKind {
    /// Rows that bound storage schedules by the strategic player's own
    /// quantity offers. These are excluded when the dual objective is used
    /// as a revenue expression, because their right-hand sides are the
    /// player's decisions rather than market data.
    pub fn is_storage_private(&self) -> bool {
        matches!(
            self,
            RowKind::BatEnergyBox { .. }
                | RowKind::BatReserveCap { .. }
                | RowKind::BatRegCapBox { .. }
                | RowKind::BatMileageEnv { .. }
        )
    }
}

/// Role of a clearing-LP column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColKind {
    GenEnergy { j: usize, t: usize },
    GenReserve { j: usize, t: usize },
    GenRegCap { j: usize, t: usize },
    GenMileage { j: usize, t: usize },
    BatEnergy { i: usize, t: usize },
    BatReserve { i: usize, t: usize },
    BatRegCap { i: usize, t: usize },
    BatMileage { i: usize, t: usize },
    Angle { n: usize, t: usize },
}

impl ColKind {
    pub fn is_storage(&self) -> bool {
        matches!(
            self,
            ColKind::BatEnergy { .. }
                | ColKind::BatReserve { .. }
                | ColKind::BatRegCap { .. }
                | ColKind::BatMileage { .. }
        )
    }
}

/// Storage quantity and price offers submitted to the market, `[i][t]`.
/// Quantities are magnitude bounds (the market picks the energy sign);
/// mileage carries a price offer only — the awarded mileage is set by the
/// operator through the envelope rows.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BatteryBids {
    pub q_energy: Vec<Vec<f64>>,
    pub q_reserve: Vec<Vec<f64>>,
    pub q_regcap: Vec<Vec<f64>>,
    pub beta_energy: Vec<Vec<f64>>,
    pub beta_reserve: Vec<Vec<f64>>,
    pub beta_regcap: Vec<Vec<f64>>,
    pub beta_mileage: Vec<Vec<f64>>,
}

impl BatteryBids {
    pub fn zero(units: usize, intervals: usize) -> Self {
        let z = vec![vec![0.0; intervals]; units];
        BatteryBids {
            q_energy: z.clone(),
            q_reserve: z.clone(),
            q_regcap: z.clone(),
            beta_energy: z.clone(),
            beta_reserve: z.clone(),
            beta_regcap: z.clone(),
            beta_mileage: z,
        }
    }

    fn check_dims(&self, units: usize, intervals: usize) -> Result<(), ClearingError> {
        let fields: [(&str, &Vec<Vec<f64>>); 7] = [
            ("q_energy", &self.q_energy),
            ("q_reserve", &self.q_reserve),
            ("q_regcap", &self.q_regcap),
            ("beta_energy", &self.beta_energy),
            ("beta_reserve", &self.beta_reserve),
            ("beta_regcap", &self.beta_regcap),
            ("beta_mileage", &self.beta_mileage),
        ];
        for (name, f) in fields {
            if f.len() != units || f.iter().any(|r| r.len() != intervals) {
                return Err(ClearingError::Dimensions(format!(
                    "bid field {} is not {} units x {} intervals",
                    name, units, intervals
                )));
            }
        }
        Ok(())
    }
}

/// The assembled clearing LP plus the role of every row and column.
#[derive(Debug, Clone)]
pub struct Llp {
    pub model: Model,
    pub row_kinds: Vec<RowKind>,
    pub col_kinds: Vec<ColKind>,
    pub delta_t: f64,
    row_of: HashMap<RowKind, usize>,
    col_of: HashMap<ColKind, usize>,
}

impl Llp {
    pub fn row(&self, kind: RowKind) -> Option<Row> {
        self.row_of.get(&kind).map(|&r| Row(r))
    }

    pub fn col(&self, kind: ColKind) -> Option<Col> {
        self.col_of.get(&kind).map(|&c| Col(c))
    }
}

/// Mileage-to-capacity multipliers `m_t` for the case's prepared signal,
/// shared by every regulating unit. Intervals without a mileage requirement
/// get the neutral value 1 (their envelope never binds a requirement row).
pub fn regulation_multipliers(
    case: &ScenarioCase,
    epsilon: f64,
) -> Result<Vec<f64>, agc::AgcError> {
    (0..case.grid.intervals)
        .map(|t| {
            if case.profiles.reg_mileage_mw[t] > 0.0 {
                agc::multiplier_bound(&case.agc, t, epsilon)
            } else {
                Ok(1.0)
            }
        })
        .collect()
}

struct Builder {
    model: Model,
    row_kinds: Vec<RowKind>,
    col_kinds: Vec<ColKind>,
}

impl Builder {
    fn add_col(&mut self, name: String, kind: ColKind, obj: f64) -> Col {
        let c = self.model.add_free_col(name, obj);
        self.col_kinds.push(kind);
        c
    }

    fn add_row(
        &mut self,
        name: String,
        kind: RowKind,
        sense: Sense,
        rhs: f64,
        coeffs: &[(Col, f64)],
    ) -> Row {
        let r = self.model.add_row(name, sense, rhs, coeffs);
        self.row_kinds.push(kind);
        r
    }
}

/// Assemble the clearing LP for one case and one set of storage bids.
/// `m` holds the per-interval mileage multipliers. The case is assumed
/// validated; bid arrays must be `[units][intervals]`.
pub fn build_llp(
    case: &ScenarioCase,
    bids: &BatteryBids,
    m: &[f64],
) -> Result<Llp, ClearingError> {
    let t_n = case.grid.intervals;
    let dt = case.grid.interval_hours;
    bids.check_dims(case.batteries.len(), t_n)?;
    if m.len() != t_n {
        return Err(ClearingError::Dimensions(format!(
            "{} mileage multipliers for {} intervals",
            m.len(),
            t_n
        )));
    }

    let mut b = Builder {
        model: Model::new("clearing"),
        row_kinds: Vec::new(),
        col_kinds: Vec::new(),
    };

    for t in 0..t_n {
        let tt = t + 1;
        // Columns: generator awards, storage awards, bus angles.
        let gen_cols: Vec<[Col; 4]> = case
            .generators
            .iter()
            .enumerate()
            .map(|(j, g)| {
                let o = &g.offers[t];
                [
                    b.add_col(format!("gS_{}_t{}", j + 1, tt), ColKind::GenEnergy { j, t }, o.energy * dt),
                    b.add_col(format!("gRs_{}_t{}", j + 1, tt), ColKind::GenReserve { j, t }, o.reserve * dt),
                    b.add_col(format!("gRgC_{}_t{}", j + 1, tt), ColKind::GenRegCap { j, t }, o.reg_capacity * dt),
                    b.add_col(format!("gRgM_{}_t{}", j + 1, tt), ColKind::GenMileage { j, t }, o.reg_mileage * dt),
                ]
            })
            .collect();
        let bat_cols: Vec<[Col; 4]> = (0..case.batteries.len())
            .map(|i| {
                [
                    b.add_col(format!("bE_{}_t{}", i + 1, tt), ColKind::BatEnergy { i, t }, bids.beta_energy[i][t] * dt),
                    b.add_col(format!("bRs_{}_t{}", i + 1, tt), ColKind::BatReserve { i, t }, bids.beta_reserve[i][t] * dt),
                    b.add_col(format!("bRgC_{}_t{}", i + 1, tt), ColKind::BatRegCap { i, t }, bids.beta_regcap[i][t] * dt),
                    b.add_col(format!("bRgM_{}_t{}", i + 1, tt), ColKind::BatMileage { i, t }, bids.beta_mileage[i][t] * dt),
                ]
            })
            .collect();
        let angle_cols: Vec<Col> = (0..case.buses.len())
            .map(|n| b.add_col(format!("th_{}_t{}", n + 1, tt), ColKind::Angle { n, t }, 0.0))
            .collect();

        // Generator rows: dispatch window, award caps, mileage envelope.
        for (j, g) in case.generators.iter().enumerate() {
            let [s, rs, rgc, rgm] = gen_cols[j];
            b.add_row(
                format!("gbox_lo_{}_t{}", j + 1, tt),
                RowKind::GenBox { j, t, side: Side::Lower },
                Sense::Ge,
                g.pmin,
                &[(s, 1.0), (rgc, -1.0)],
            );
            b.add_row(
                format!("gbox_up_{}_t{}", j + 1, tt),
                RowKind::GenBox { j, t, side: Side::Upper },
                Sense::Le,
                g.pmax,
                &[(s, 1.0), (rs, 1.0), (rgc, 1.0)],
            );
            b.add_row(
                format!("grs_lo_{}_t{}", j + 1, tt),
                RowKind::GenReserveCap { j, t, side: Side::Lower },
                Sense::Ge,
                0.0,
                &[(rs, 1.0)],
            );
            b.add_row(
                format!("grs_up_{}_t{}", j + 1, tt),
                RowKind::GenReserveCap { j, t, side: Side::Upper },
                Sense::Le,
                g.rs_ramp,
                &[(rs, 1.0)],
            );
            b.add_row(
                format!("grgc_lo_{}_t{}", j + 1, tt),
                RowKind::GenRegCap { j, t, side: Side::Lower },
                Sense::Ge,
                0.0,
                &[(rgc, 1.0)],
            );
            b.add_row(
                format!("grgc_up_{}_t{}", j + 1, tt),
                RowKind::GenRegCap { j, t, side: Side::Upper },
                Sense::Le,
                g.rg_ramp,
                &[(rgc, 1.0)],
            );
            b.add_row(
                format!("grgm_lo_{}_t{}", j + 1, tt),
                RowKind::GenMileageEnv { j, t, side: Side::Lower },
                Sense::Ge,
                0.0,
                &[(rgm, 1.0), (rgc, -1.0)],
            );
            b.add_row(
                format!("grgm_up_{}_t{}", j + 1, tt),
                RowKind::GenMileageEnv { j, t, side: Side::Upper },
                Sense::Le,
                0.0,
                &[(rgm, 1.0), (rgc, -m[t])],
            );
        }

        // Storage rows: offer boxes and mileage envelope.
        for i in 0..case.batteries.len() {
            let [e, rs, rgc, rgm] = bat_cols[i];
            b.add_row(
                format!("bE_lo_{}_t{}", i + 1, tt),
                RowKind::BatEnergyBox { i, t, side: Side::Lower },
                Sense::Ge,
                -bids.q_energy[i][t],
                &[(e, 1.0)],
            );
            b.add_row(
                format!("bE_up_{}_t{}", i + 1, tt),
                RowKind::BatEnergyBox { i, t, side: Side::Upper },
                Sense::Le,
                bids.q_energy[i][t],
                &[(e, 1.0)],
            );
            b.add_row(
                format!("bRs_lo_{}_t{}", i + 1, tt),
                RowKind::BatReserveCap { i, t, side: Side::Lower },
                Sense::Ge,
                0.0,
                &[(rs, 1.0)],
            );
            b.add_row(
                format!("bRs_up_{}_t{}", i + 1, tt),
                RowKind::BatReserveCap { i, t, side: Side::Upper },
                Sense::Le,
                bids.q_reserve[i][t],
                &[(rs, 1.0)],
            );
            b.add_row(
                format!("bRgC_lo_{}_t{}", i + 1, tt),
                RowKind::BatRegCapBox { i, t, side: Side::Lower },
                Sense::Ge,
                0.0,
                &[(rgc, 1.0)],
            );
            b.add_row(
                format!("bRgC_up_{}_t{}", i + 1, tt),
                RowKind::BatRegCapBox { i, t, side: Side::Upper },
                Sense::Le,
                bids.q_regcap[i][t],
                &[(rgc, 1.0)],
            );
            b.add_row(
                format!("bRgM_lo_{}_t{}", i + 1, tt),
                RowKind::BatMileageEnv { i, t, side: Side::Lower },
                Sense::Ge,
                0.0,
                &[(rgm, 1.0), (rgc, -1.0)],
            );
            b.add_row(
                format!("bRgM_up_{}_t{}", i + 1, tt),
                RowKind::BatMileageEnv { i, t, side: Side::Upper },
                Sense::Le,
                0.0,
                &[(rgm, 1.0), (rgc, -m[t])],
            );
        }

        // Requirement rows, only where a requirement exists.
        if case.profiles.reserve_mw[t] > 0.0 {
            let coeffs: Vec<(Col, f64)> = gen_cols
                .iter()
                .map(|c| (c[1], 1.0))
                .chain(bat_cols.iter().map(|c| (c[1], 1.0)))
                .collect();
            b.add_row(
                format!("req_rs_t{}", tt),
                RowKind::ReserveReq { t },
                Sense::Ge,
                case.profiles.reserve_mw[t],
                &coeffs,
            );
        }
        if case.profiles.reg_capacity_mw[t] > 0.0 {
            let coeffs: Vec<(Col, f64)> = gen_cols
                .iter()
                .map(|c| (c[2], 1.0))
                .chain(bat_cols.iter().map(|c| (c[2], 1.0)))
                .collect();
            b.add_row(
                format!("req_rgc_t{}", tt),
                RowKind::RegCapReq { t },
                Sense::Ge,
                case.profiles.reg_capacity_mw[t],
                &coeffs,
            );
        }
        if case.profiles.reg_mileage_mw[t] > 0.0 {
            let coeffs: Vec<(Col, f64)> = gen_cols
                .iter()
                .map(|c| (c[3], 1.0))
                .chain(bat_cols.iter().map(|c| (c[3], 1.0)))
                .collect();
            b.add_row(
                format!("req_rgm_t{}", tt),
                RowKind::MileageReq { t },
                Sense::Ge,
                case.profiles.reg_mileage_mw[t],
                &coeffs,
            );
        }

        // Nodal balance: injections minus line outflows equal load.
        let mut balance: Vec<Vec<(Col, f64)>> = vec![Vec::new(); case.buses.len()];
        for (j, g) in case.generators.iter().enumerate() {
            let n = case.bus_index(&g.bus).expect("validated bus");
            balance[n].push((gen_cols[j][0], 1.0));
        }
        for (i, bat) in case.batteries.iter().enumerate() {
            let n = case.bus_index(&bat.bus).expect("validated bus");
            balance[n].push((bat_cols[i][0], 1.0));
        }
        for l in &case.lines {
            let a = case.bus_index(&l.from).expect("validated bus");
            let w = case.bus_index(&l.to).expect("validated bus");
            balance[a].push((angle_cols[a], -l.susceptance));
            balance[a].push((angle_cols[w], l.susceptance));
            balance[w].push((angle_cols[w], -l.susceptance));
            balance[w].push((angle_cols[a], l.susceptance));
        }
        for (n, coeffs) in balance.into_iter().enumerate() {
            b.add_row(
                format!("bal_{}_t{}", n + 1, tt),
                RowKind::Balance { n, t },
                Sense::Eq,
                case.profiles.load_mw[n][t],
                &coeffs,
            );
        }

        // Line thermal limits, both directions.
        for (l_idx, l) in case.lines.iter().enumerate() {
            let a = case.bus_index(&l.from).expect("validated bus");
            let w = case.bus_index(&l.to).expect("validated bus");
            b.add_row(
                format!("flow_lo_{}_t{}", l_idx + 1, tt),
                RowKind::FlowLimit { line: l_idx, t, side: Side::Lower },
                Sense::Ge,
                -l.limit_mw,
                &[(angle_cols[a], l.susceptance), (angle_cols[w], -l.susceptance)],
            );
            b.add_row(
                format!("flow_up_{}_t{}", l_idx + 1, tt),
                RowKind::FlowLimit { line: l_idx, t, side: Side::Upper },
                Sense::Le,
                l.limit_mw,
                &[(angle_cols[a], l.susceptance), (angle_cols[w], -l.susceptance)],
            );
        }

        // Pin the first bus's angle.
        b.add_row(
            format!("ref_t{}", tt),
            RowKind::RefBus { t },
            Sense::Eq,
            0.0,
            &[(angle_cols[0], 1.0)],
        );
    }

    let row_of: HashMap<RowKind, usize> =
        b.row_kinds.iter().enumerate().map(|(r, &k)| (k, r)).collect();
    let col_of: HashMap<ColKind, usize> =
        b.col_kinds.iter().enumerate().map(|(c, &k)| (k, c)).collect();
    debug_assert_eq!(row_of.len(), b.row_kinds.len());
    debug_assert_eq!(col_of.len(), b.col_kinds.len());
    Ok(Llp {
        model: b.model,
        row_kinds: b.row_kinds,
        col_kinds: b.col_kinds,
        delta_t: dt,
        row_of,
        col_of,
    })
}

/// Cleared schedules and prices. Schedules are MW by `[entity][interval]`;
/// prices are $/MWh (interval duals divided by the interval span).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MarketOutcome {
    pub objective: f64,
    pub gen_energy: Vec<Vec<f64>>,
    pub gen_reserve: Vec<Vec<f64>>,
    pub gen_regcap: Vec<Vec<f64>>,
    pub gen_mileage: Vec<Vec<f64>>,
    pub bat_energy: Vec<Vec<f64>>,
    pub bat_reserve: Vec<Vec<f64>>,
    pub bat_regcap: Vec<Vec<f64>>,
    pub bat_mileage: Vec<Vec<f64>>,
    pub angle: Vec<Vec<f64>>,
    pub lmp: Vec<Vec<f64>>,
    pub reserve_price: Vec<f64>,
    pub regcap_price: Vec<f64>,
    pub mileage_price: Vec<f64>,
}

impl MarketOutcome {
    /// Long-format CSV: entity, product, interval (1-based), MW, clearing
    /// price at the entity's bus.
    pub fn to_csv(&self, case: &ScenarioCase) -> String {
        let mut out = String::from("entity,product,t,mw,price\n");
        let mut push = |name: &str, product: &str, t: usize, mw: f64, price: f64| {
            out.push_str(&format!("{},{},{},{},{}\n", name, product, t + 1, mw, price));
        };
        for t in 0..case.grid.intervals {
            for (j, g) in case.generators.iter().enumerate() {
                let n = case.bus_index(&g.bus).unwrap();
                push(&g.name, "energy", t, self.gen_energy[j][t], self.lmp[n][t]);
                push(&g.name, "reserve", t, self.gen_reserve[j][t], self.reserve_price[t]);
                push(&g.name, "reg_capacity", t, self.gen_regcap[j][t], self.regcap_price[t]);
                push(&g.name, "reg_mileage", t, self.gen_mileage[j][t], self.mileage_price[t]);
            }
            for (i, bat) in case.batteries.iter().enumerate() {
                let n = case.bus_index(&bat.bus).unwrap();
                push(&bat.name, "energy", t, self.bat_energy[i][t], self.lmp[n][t]);
                push(&bat.name, "reserve", t, self.bat_reserve[i][t], self.reserve_price[t]);
                push(&bat.name, "reg_capacity", t, self.bat_regcap[i][t], self.regcap_price[t]);
                push(&bat.name, "reg_mileage", t, self.bat_mileage[i][t], self.mileage_price[t]);
            }
        }
        out
    }
}

/// Extract schedules and prices from a solved clearing LP.
pub fn outcome_from_solution(
    llp: &Llp,
    case: &ScenarioCase,
    sol: &Solution,
) -> MarketOutcome {
    let t_n = case.grid.intervals;
    let dt = llp.delta_t;
    let grid2 = |rows: usize| vec![vec![0.0; t_n]; rows];
    let mut o = MarketOutcome {
        objective: sol.objective,
        gen_energy: grid2(case.generators.len()),
        gen_reserve: grid2(case.generators.len()),
        gen_regcap: grid2(case.generators.len()),
        gen_mileage: grid2(case.generators.len()),
        bat_energy: grid2(case.batteries.len()),
        bat_reserve: grid2(case.batteries.len()),
        bat_regcap: grid2(case.batteries.len()),
        bat_mileage: grid2(case.batteries.len()),
        angle: grid2(case.buses.len()),
        lmp: grid2(case.buses.len()),
        reserve_price: vec![0.0; t_n],
        regcap_price: vec![0.0; t_n],
        mileage_price: vec![0.0; t_n],
    };
    for (c, kind) in llp.col_kinds.iter().enumerate() {
        let x = sol.x[c];
        match *kind {
            ColKind::GenEnergy { j, t } => o.gen_energy[j][t] = x,
            ColKind::GenReserve { j, t } => o.gen_reserve[j][t] = x,
            ColKind::GenRegCap { j, t } => o.gen_regcap[j][t] = x,
            ColKind::GenMileage { j, t } => o.gen_mileage[j][t] = x,
            ColKind::BatEnergy { i, t } => o.bat_energy[i][t] = x,
            ColKind::BatReserve { i, t } => o.bat_reserve[i][t] = x,
            ColKind::BatRegCap { i, t } => o.bat_regcap[i][t] = x,
            ColKind::BatMileage { i, t } => o.bat_mileage[i][t] = x,
            ColKind::Angle { n, t } => o.angle[n][t] = x,
        }
    }
    for (r, kind) in llp.row_kinds.iter().enumerate() {
        let y = sol.duals[r];
        match *kind {
            RowKind::Balance { n, t } => o.lmp[n][t] = y / dt,
            RowKind::ReserveReq { t } => o.reserve_price[t] = y / dt,
            RowKind::RegCapReq { t } => o.regcap_price[t] = y / dt,
            RowKind::MileageReq { t } => o.mileage_price[t] = y / dt,
            _ => {}
        }
    }
    o
}

fn infeasibility_hint(case: &ScenarioCase, bids: &BatteryBids) -> String {
    let q_rs_total =
        |t: usize| -> f64 { bids.q_reserve.iter().map(|r| r[t]).sum::<f64>() };
    let q_rgc_total =
        |t: usize| -> f64 { bids.q_regcap.iter().map(|r| r[t]).sum::<f64>() };
    let rs_ramp: f64 = case.generators.iter().map(|g| g.rs_ramp).sum();
    let rg_ramp: f64 = case.generators.iter().map(|g| g.rg_ramp).sum();
    let cap: f64 = case.generators.iter().map(|g| g.pmax).sum();
    for t in 0..case.grid.intervals {
        if rs_ramp + q_rs_total(t) < case.profiles.reserve_mw[t] {
            return format!(
                "reserve requirement {} MW at interval {} exceeds deliverable reserve {}",
                case.profiles.reserve_mw[t],
                t + 1,
                rs_ramp + q_rs_total(t)
            );
        }
        if rg_ramp + q_rgc_total(t) < case.profiles.reg_capacity_mw[t] {
            return format!(
                "regulation capacity requirement {} MW at interval {} exceeds trackable capacity {}",
                case.profiles.reg_capacity_mw[t],
                t + 1,
                rg_ramp + q_rgc_total(t)
            );
        }
        let q_e: f64 = bids.q_energy.iter().map(|r| r[t]).sum();
        if cap + q_e < case.total_load(t) + case.profiles.reserve_mw[t] + case.profiles.reg_capacity_mw[t]
        {
            return format!(
                "load plus reserves at interval {} exceeds total generation capability",
                t + 1
            );
        }
    }
    "likely a binding line limit isolating load from generation".to_string()
}

/// Solve a clearing LP with the built-in solver and verify its optimality
/// certificates: primal feasibility, complementary slackness, and strong
/// duality.
pub fn clear_market(
    llp: &Llp,
    case: &ScenarioCase,
    bids: &BatteryBids,
) -> Result<MarketOutcome, ClearingError> {
    let sol = solve_lp(&llp.model)?;
    match sol.status {
        Status::Optimal => {}
        Status::Infeasible => {
            return Err(ClearingError::Infeasible { hint: infeasibility_hint(case, bids) })
        }
        Status::Unbounded => return Err(ClearingError::Unbounded),
        Status::Limit => return Err(ClearingError::Solver("iteration limit".into())),
    }
    check_certificates(llp, &sol)?;
    Ok(outcome_from_solution(llp, case, &sol))
}

/// Optimality certificate checks shared by the built-in and external paths.
pub fn check_certificates(llp: &Llp, sol: &Solution) -> Result<(), ClearingError> {
    let m = &llp.model;
    let viol = m.max_violation(&sol.x);
    if viol > 1e-7 {
        return Err(ClearingError::BadCertificate(format!(
            "primal violation {:.3e}",
            viol
        )));
    }
    for r in m.rows() {
        if m.row_sense(r) == Sense::Eq {
            continue;
        }
        let slack = m.row_activity(r, &sol.x) - m.row_rhs(r);
        let dual = sol.dual(r);
        let scale = 1.0f64.max(m.row_rhs(r).abs()).max(dual.abs());
        if (slack * dual).abs() > 1e-8 * scale * 1.0f64.max(slack.abs()) {
            return Err(ClearingError::BadCertificate(format!(
                "complementary slackness fails on row {} (slack {:.3e}, dual {:.3e})",
                m.row_name(r),
                slack,
                dual
            )));
        }
    }
    let dual_obj = sol.dual_objective(m);
    let gap = (sol.objective - dual_obj).abs();
    if gap > 1e-7 * 1.0f64.max(sol.objective.abs()) {
        return Err(ClearingError::BadCertificate(format!(
            "duality gap {:.3e} (primal {:.6}, dual {:.6})",
            gap, sol.objective, dual_obj
        )));
    }
    Ok(())
}

/// Clear the market with every storage offer at zero: the system cost
/// baseline the strategic storage case is compared against.
pub fn baseline_without_bess(case: &ScenarioCase) -> Result<MarketOutcome, ClearingError> {
    let bids = BatteryBids::zero(case.batteries.len(), case.grid.intervals);
    let m = regulation_multipliers(case, 1e-3)
        .map_err(|e| ClearingError::Dimensions(e.to_string()))?;
    let llp = build_llp(case, &bids, &m)?;
    clear_market(&llp, case, &bids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agc::AgcTrace;
    use crate::model::{
        build_time_grid, BatteryUnit, Bus, Generator, Line, OfferCaps, OfferQuad, SystemProfiles,
    };

    fn quad(energy: f64, reserve: f64, reg_capacity: f64, reg_mileage: f64) -> OfferQuad {
        OfferQuad { energy, reserve, reg_capacity, reg_mileage }
    }

    /// Single-bus case, one interval of one hour, no requirements unless
    /// overridden; callers tweak fields. The regulation trace is a
    /// placeholder: these fixtures pass multipliers explicitly.
    fn single_bus_case(generators: Vec<Generator>, load: f64) -> ScenarioCase {
        ScenarioCase {
            grid: build_time_grid(1.0, 1.0, 1).unwrap(),
            buses: vec![Bus { id: "hub".into() }],
            lines: vec![],
            generators,
            batteries: vec![],
            profiles: SystemProfiles {
                load_mw: vec![vec![load]],
                reserve_mw: vec![0.0],
                reg_capacity_mw: vec![0.0],
                reg_mileage_mw: vec![0.0],
            },
            agc: AgcTrace::new(vec![vec![0.0]]).unwrap(),
            offer_caps: OfferCaps::default(),
        }
    }

    fn gen(name: &str, bus: &str, pmax: f64, offers: Vec<OfferQuad>) -> Generator {
        Generator {
            name: name.into(),
            bus: bus.into(),
            pmin: 0.0,
            pmax,
            rs_ramp: 0.0,
            rg_ramp: 0.0,
            offers,
        }
    }

    fn clear(case: &ScenarioCase) -> MarketOutcome {
        let bids = BatteryBids::zero(case.batteries.len(), case.grid.intervals);
        let m = vec![1.0; case.grid.intervals];
        let llp = build_llp(case, &bids, &m).unwrap();
        clear_market(&llp, case, &bids).unwrap()
    }

    #[test]
    fn merit_order_sets_the_marginal_price() {
        let case = single_bus_case(
            vec![
                gen("G1", "hub", 100.0, vec![quad(10.0, 0.0, 0.0, 0.0)]),
                gen("G2", "hub", 100.0, vec![quad(20.0, 0.0, 0.0, 0.0)]),
            ],
            150.0,
        );
        let o = clear(&case);
        assert!((o.gen_energy[0][0] - 100.0).abs() < 1e-8);
        assert!((o.gen_energy[1][0] - 50.0).abs() < 1e-8);
        assert!((o.lmp[0][0] - 20.0).abs() < 1e-8);
        assert!((o.objective - 2000.0).abs() < 1e-7);
    }

    #[test]
    fn single_provider_sets_the_reserve_price() {
        let mut case = single_bus_case(
            vec![
                gen("G1", "hub", 100.0, vec![quad(10.0, 5.0, 0.0, 0.0)]),
                gen("G2", "hub", 100.0, vec![quad(20.0, 3.0, 0.0, 0.0)]),
            ],
            150.0,
        );
        case.generators[1].rs_ramp = 50.0; // only G2 can offer reserve
        case.profiles.reserve_mw = vec![10.0];
        let o = clear(&case);
        assert!((o.gen_reserve[1][0] - 10.0).abs() < 1e-8);
        assert!((o.reserve_price[0] - 3.0).abs() < 1e-8);
        // Energy dispatch unchanged: G2 has headroom for both.
        assert!((o.lmp[0][0] - 20.0).abs() < 1e-8);
    }

    #[test]
    fn congestion_splits_marginal_prices() {
        let mut case = single_bus_case(vec![], 0.0);
        case.buses = vec![Bus { id: "cheap".into() }, Bus { id: "load".into() }];
        case.lines =
            vec![Line { from: "cheap".into(), to: "load".into(), susceptance: 10.0, limit_mw: 10.0 }];
        case.generators = vec![
            gen("G1", "cheap", 100.0, vec![quad(10.0, 0.0, 0.0, 0.0)]),
            gen("G2", "load", 100.0, vec![quad(30.0, 0.0, 0.0, 0.0)]),
        ];
        case.profiles.load_mw = vec![vec![0.0], vec![50.0]];
        let o = clear(&case);
        assert!((o.gen_energy[0][0] - 10.0).abs() < 1e-8);
        assert!((o.gen_energy[1][0] - 40.0).abs() < 1e-8);
        assert!((o.lmp[0][0] - 10.0).abs() < 1e-8);
        assert!((o.lmp[1][0] - 30.0).abs() < 1e-8);
        assert!((o.objective - 1300.0).abs() < 1e-7);

        // Widen the line: prices converge to the cheap offer.
        case.lines[0].limit_mw = 500.0;
        let o = clear(&case);
        assert!((o.lmp[0][0] - o.lmp[1][0]).abs() < 1e-8);
        assert!((o.lmp[0][0] - 10.0).abs() < 1e-8);
    }

    #[test]
    fn mileage_envelope_prices_both_regimes() {
        // One generator covers a 5 MW regulation-capacity requirement and an
        // 8 MW mileage requirement. With multiplier 2 the mileage fits the
        // envelope at capacity 5, so each service prices at its own offer.
        let mut case = single_bus_case(
            vec![gen("G1", "hub", 100.0, vec![quad(20.0, 3.0, 8.0, 1.4)])],
            50.0,
        );
        case.generators[0].rg_ramp = 30.0;
        case.profiles.reg_capacity_mw = vec![5.0];
        case.profiles.reg_mileage_mw = vec![8.0];
        let bids = BatteryBids::zero(0, 1);
        let llp = build_llp(&case, &bids, &[2.0]).unwrap();
        let o = clear_market(&llp, &case, &bids).unwrap();
        assert!((o.gen_regcap[0][0] - 5.0).abs() < 1e-8);
        assert!((o.gen_mileage[0][0] - 8.0).abs() < 1e-8);
        assert!((o.regcap_price[0] - 8.0).abs() < 1e-8);
        assert!((o.mileage_price[0] - 1.4).abs() < 1e-8);

        // Multiplier 1.5: mileage 8 forces capacity up to 16/3, the
        // capacity row goes slack (price 0) and the mileage price absorbs
        // the capacity offer through the envelope: 1.4 + 8/1.5.
        let llp = build_llp(&case, &bids, &[1.5]).unwrap();
        let o = clear_market(&llp, &case, &bids).unwrap();
        assert!((o.gen_regcap[0][0] - 16.0 / 3.0).abs() < 1e-8);
        assert!((o.regcap_price[0] - 0.0).abs() < 1e-8);
        assert!((o.mileage_price[0] - (1.4 + 8.0 / 1.5)).abs() < 1e-8);
    }

    #[test]
    fn row_and_column_tally_on_a_micro_case() {
        // 3 buses, 3 lines, 2 generators, 1 battery, T=2, all requirements
        // positive. Per interval: columns 4*2 + 4*1 + 3 = 15; rows
        // 8*2 (generators) + 8*1 (storage) + 3 (requirements) + 3 (balance)
        // + 2*3 (flows) + 1 (reference) = 37.
        let mut case = single_bus_case(vec![], 0.0);
        case.grid = build_time_grid(0.25, 0.25, 2).unwrap();
        case.buses =
            vec![Bus { id: "b1".into() }, Bus { id: "b2".into() }, Bus { id: "b3".into() }];
        case.lines = vec![
            Line { from: "b1".into(), to: "b2".into(), susceptance: 10.0, limit_mw: 100.0 },
            Line { from: "b2".into(), to: "b3".into(), susceptance: 10.0, limit_mw: 100.0 },
            Line { from: "b1".into(), to: "b3".into(), susceptance: 10.0, limit_mw: 100.0 },
        ];
        let offers = vec![quad(20.0, 3.0, 8.0, 1.4); 2];
        case.generators = vec![
            Generator { name: "G1".into(), bus: "b1".into(), pmin: 0.0, pmax: 200.0, rs_ramp: 40.0, rg_ramp: 30.0, offers: offers.clone() },
            Generator { name: "G2".into(), bus: "b2".into(), pmin: 0.0, pmax: 100.0, rs_ramp: 30.0, rg_ramp: 20.0, offers },
        ];
        case.batteries = vec![BatteryUnit::with_default_aging(
            "B1", "b3", 50.0, 200.0, 20.0, 180.0, 90.0, 0.95, 200_000.0,
        )
        .unwrap()];
        case.profiles = SystemProfiles {
            load_mw: vec![vec![30.0, 40.0], vec![80.0, 90.0], vec![40.0, 40.0]],
            reserve_mw: vec![10.0, 10.0],
            reg_capacity_mw: vec![8.0, 8.0],
            reg_mileage_mw: vec![12.0, 12.0],
        };
        let bids = BatteryBids::zero(1, 2);
        let llp = build_llp(&case, &bids, &[1.6, 1.6]).unwrap();
        assert_eq!(llp.model.num_cols(), 2 * 15);
        assert_eq!(llp.model.num_rows(), 2 * 37);
        assert_eq!(llp.row_kinds.len(), llp.model.num_rows());
        assert_eq!(llp.col_kinds.len(), llp.model.num_cols());

        // Zero quantity offers pin every storage schedule to zero.
        let o = clear_market(&llp, &case, &bids).unwrap();
        for series in [&o.bat_energy, &o.bat_reserve, &o.bat_regcap, &o.bat_mileage] {
            assert!(series[0].iter().all(|&x| x.abs() < 1e-9));
        }
    }

    #[test]
    fn skipped_requirement_rows_clear_at_price_zero() {
        let case = single_bus_case(
            vec![gen("G1", "hub", 100.0, vec![quad(10.0, 2.0, 3.0, 0.5)])],
            40.0,
        );
        let bids = BatteryBids::zero(0, 1);
        let llp = build_llp(&case, &bids, &[1.0]).unwrap();
        // No requirement rows were emitted at all.
        assert!(llp
            .row_kinds
            .iter()
            .all(|k| !matches!(k, RowKind::ReserveReq { .. } | RowKind::RegCapReq { .. } | RowKind::MileageReq { .. })));
        let o = clear_market(&llp, &case, &bids).unwrap();
        assert_eq!(o.reserve_price[0], 0.0);
        assert_eq!(o.regcap_price[0], 0.0);
        assert_eq!(o.mileage_price[0], 0.0);
        assert!((o.objective - 400.0).abs() < 1e-8);
    }

    #[test]
    fn free_storage_energy_cannot_raise_cost() {
        let case = single_bus_case(
            vec![
                gen("G1", "hub", 100.0, vec![quad(10.0, 0.0, 0.0, 0.0)]),
                gen("G2", "hub", 100.0, vec![quad(20.0, 0.0, 0.0, 0.0)]),
            ],
            150.0,
        );
        let mut with_bat = case.clone();
        with_bat.batteries = vec![BatteryUnit::with_default_aging(
            "B1", "hub", 50.0, 200.0, 20.0, 180.0, 90.0, 0.95, 200_000.0,
        )
        .unwrap()];
        let baseline = baseline_without_bess(&with_bat).unwrap();
        assert!((baseline.objective - 2000.0).abs() < 1e-7);
        assert!(baseline.bat_energy[0].iter().all(|&x| x.abs() < 1e-9));

        let mut bids = BatteryBids::zero(1, 1);
        bids.q_energy[0][0] = 50.0; // discharge up to 50 MW at price 0
        let llp = build_llp(&with_bat, &bids, &[1.0]).unwrap();
        let o = clear_market(&llp, &with_bat, &bids).unwrap();
        assert!(o.objective <= baseline.objective + 1e-9);
        // The free energy displaces the marginal unit entirely.
        assert!((o.bat_energy[0][0] - 50.0).abs() < 1e-8);
        assert!((o.objective - 1000.0).abs() < 1e-7);
    }

    #[test]
    fn widening_a_floor_priced_offer_weakly_lowers_cost() {
        let case = single_bus_case(
            vec![
                gen("G1", "hub", 100.0, vec![quad(10.0, 0.0, 0.0, 0.0)]),
                gen("G2", "hub", 100.0, vec![quad(20.0, 0.0, 0.0, 0.0)]),
            ],
            150.0,
        );
        let mut with_bat = case;
        with_bat.batteries = vec![BatteryUnit::with_default_aging(
            "B1", "hub", 60.0, 240.0, 24.0, 216.0, 120.0, 0.95, 200_000.0,
        )
        .unwrap()];
        let mut prev = f64::INFINITY;
        for q in [0.0, 20.0, 40.0, 60.0] {
            let mut bids = BatteryBids::zero(1, 1);
            bids.q_energy[0][0] = q;
            bids.beta_energy[0][0] = with_bat.offer_caps.floor;
            let llp = build_llp(&with_bat, &bids, &[1.0]).unwrap();
            let o = clear_market(&llp, &with_bat, &bids).unwrap();
            assert!(o.objective <= prev + 1e-9, "cost rose when q went to {}", q);
            prev = o.objective;
        }
    }

    #[test]
    fn infeasible_requirement_reports_a_hint() {
        let mut case = single_bus_case(
            vec![gen("G1", "hub", 100.0, vec![quad(10.0, 2.0, 0.0, 0.0)])],
            50.0,
        );
        case.generators[0].rs_ramp = 5.0;
        case.profiles.reserve_mw = vec![40.0];
        let bids = BatteryBids::zero(0, 1);
        let llp = build_llp(&case, &bids, &[1.0]).unwrap();
        let err = clear_market(&llp, &case, &bids).unwrap_err();
        match err {
            ClearingError::Infeasible { hint } => {
                assert!(hint.contains("reserve requirement"), "{}", hint)
            }
            other => panic!("expected infeasible, got {:?}", other),
        }
    }

    #[test]
    fn synthetic_baseline_passes_all_certificates() {
        let case = crate::model::synthesize_scenario(&crate::model::SynthConfig::desk_scale())
            .unwrap();
        let o = baseline_without_bess(&case).unwrap();
        // Prices behave: non-negative ancillary prices, equal LMPs while
        // uncongested (generous limits in the bundled scenario).
        for t in 0..case.grid.intervals {
            assert!(o.reserve_price[t] >= -1e-9);
            assert!(o.regcap_price[t] >= -1e-9);
            assert!(o.mileage_price[t] >= -1e-9);
        }
        // Storage cleared nothing in the baseline.
        assert!(o.bat_energy[0].iter().all(|&x| x.abs() < 1e-9));
        // Energy price should at least cover the cheapest unit's offer.
        assert!(o.lmp[0][0] >= 17.0 - 3.0 - 1e-6);
    }

    #[test]
    fn outcome_exports_long_format_csv() {
        let case = single_bus_case(
            vec![gen("G1", "hub", 100.0, vec![quad(10.0, 0.0, 0.0, 0.0)])],
            40.0,
        );
        let o = clear(&case);
        let csv = o.to_csv(&case);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "entity,product,t,mw,price");
        assert_eq!(lines.next().unwrap(), "G1,energy,1,40,10");
        assert_eq!(csv.lines().count(), 1 + 4);
    }
}
