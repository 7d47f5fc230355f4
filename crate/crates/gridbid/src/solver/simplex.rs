//! Two-phase revised simplex over bounded variables, with row duals.
//!
//! Desk-scale reference solver: dense basis inverse, Dantzig pricing with a
//! Bland fallback after a degenerate streak. Every structural inequality gets
//! a slack column; rows that start infeasible get an artificial column that
//! phase 1 drives to zero. Intended as the oracle the rest of the crate
//! cross-checks against, not as a production LP code.

use crate::lp::{Col, Model, Sense, Solution, Status};

/// Hard guard: the reference solver refuses models larger than this.
pub const MAX_COLS: usize = 4000;

const EPS: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-8;
const REFACTOR_EVERY: usize = 120;
const DEGENERATE_STREAK: usize = 60;

#[derive(Debug)]
pub enum SimplexError {
    TooLarge { cols: usize },
    IterationLimit,
    SingularBasis,
}

impl std::fmt::Display for SimplexError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimplexError::TooLarge { cols } => {
                write!(f, "model has {} columns, reference simplex caps at {}", cols, MAX_COLS)
            }
            SimplexError::IterationLimit => write!(f, "simplex iteration limit reached"),
            SimplexError::SingularBasis => write!(f, "basis became singular"),
        }
    }
}

impl std::error::Error for SimplexError {}

#[derive(Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Free column sitting at zero.
    FreeZero,
}

struct Tableau {
    /// Column-major structural + slack + artificial matrix.
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Phase-2 costs.
    cost: Vec<f64>,
    m: usize,
    n_total: usize,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    x: Vec<f64>,
    binv: Vec<Vec<f64>>,
}

impl Tableau {
    fn value_at_state(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::Basic(i) => self.x_basic(i),
            VarState::AtLower => self.lower[j],
            VarState::AtUpper => self.upper[j],
            VarState::FreeZero => 0.0,
        }
    }

    fn x_basic(&self, i: usize) -> f64 {
        self.x[self.basis[i]]
    }

    /// y = c_B' * Binv for the given cost vector.
    fn btran(&self, cost: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.m];
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb == 0.0 {
                continue;
            }
            for (k, yk) in y.iter_mut().enumerate() {
                *yk += cb * self.binv[i][k];
            }
        }
        y
    }

    /// w = Binv * A_j.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.m];
        for &(r, v) in &self.cols[j] {
            if v == 0.0 {
                continue;
            }
            for (i, wi) in w.iter_mut().enumerate() {
                *wi += self.binv[i][r] * v;
            }
        }
        w
    }

    fn reduced_cost(&self, cost: &[f64], y: &[f64], j: usize) -> f64 {
        let mut d = cost[j];
        for &(r, v) in &self.cols[j] {
            d -= y[r] * v;
        }
        d
    }

    /// Rebuild the basis inverse from scratch (Gauss-Jordan, partial pivoting)
    /// and recompute basic values from the nonbasic point.
    fn refactorize(&mut self) -> Result<(), SimplexError> {
        let m = self.m;
        let mut aug: Vec<Vec<f64>> = vec![vec![0.0; 2 * m]; m];
        for (i, &b) in self.basis.iter().enumerate() {
            for &(r, v) in &self.cols[b] {
                aug[r][i] = v;
            }
        }
        for (i, row) in aug.iter_mut().enumerate() {
            row[m + i] = 1.0;
        }
        for c in 0..m {
            let piv = (c..m)
                .max_by(|&a, &b| aug[a][c].abs().partial_cmp(&aug[b][c].abs()).unwrap())
                .unwrap();
            if aug[piv][c].abs() < 1e-12 {
                return Err(SimplexError::SingularBasis);
            }
            aug.swap(c, piv);
            let p = aug[c][c];
            for v in aug[c].iter_mut() {
                *v /= p;
            }
            for r in 0..m {
                if r != c {
                    let f = aug[r][c];
                    if f != 0.0 {
                        for k in 0..2 * m {
                            aug[r][k] -= f * aug[c][k];
                        }
                    }
                }
            }
        }
        for i in 0..m {
            for k in 0..m {
                self.binv[i][k] = aug[i][m + k];
            }
        }
        self.recompute_basics();
        Ok(())
    }

    /// xB = Binv * (b - A_N x_N).
    fn recompute_basics(&mut self) {
        let mut resid = self.rhs.clone();
        for j in 0..self.n_total {
            if matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            let v = self.value_at_state(j);
            if v != 0.0 {
                for &(r, a) in &self.cols[j] {
                    resid[r] -= a * v;
                }
            }
            self.x[j] = v;
        }
        for i in 0..self.m {
            let mut xb = 0.0;
            for (k, &rk) in resid.iter().enumerate() {
                if rk != 0.0 {
                    xb += self.binv[i][k] * rk;
                }
            }
            self.x[self.basis[i]] = xb;
        }
    }

    /// Product-form update of Binv after `entering` replaces basis position `row`.
    fn update_binv(&mut self, row: usize, w: &[f64]) {
        let piv = w[row];
        let m = self.m;
        for k in 0..m {
            self.binv[row][k] /= piv;
        }
        for i in 0..m {
            if i != row {
                let f = w[i];
                if f.abs() > 1e-14 {
                    for k in 0..m {
                        self.binv[i][k] -= f * self.binv[row][k];
                    }
                }
            }
        }
    }
}

/// Solve the LP relaxation of `model` (integrality markers ignored).
pub fn solve_lp(model: &Model) -> Result<Solution, SimplexError> {
    if model.num_cols() > MAX_COLS {
        return Err(SimplexError::TooLarge { cols: model.num_cols() });
    }
    // Crossed bounds (possible after branch-and-bound tightening) mean the
    // model is infeasible before any row is looked at.
    for j in model.cols() {
        let (lo, up) = model.col_bounds(j);
        if lo > up {
            return Ok(infeasible_solution());
        }
    }
    if model.num_rows() == 0 {
        return Ok(solve_unconstrained(model));
    }

    let m = model.num_rows();
    let n_struct = model.num_cols();

    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_struct];
    for r in model.rows() {
        for &(j, v) in model.row_coeffs(r) {
            cols[j].push((r.0, v));
        }
    }
    let mut lower: Vec<f64> = (0..n_struct).map(|j| model.col_bounds(Col(j)).0).collect();
    let mut upper: Vec<f64> = (0..n_struct).map(|j| model.col_bounds(Col(j)).1).collect();
    let mut cost: Vec<f64> = (0..n_struct).map(|j| model.col_obj(Col(j))).collect();
    let rhs: Vec<f64> = model.rows().map(|r| model.row_rhs(r)).collect();

    // Slack columns; remember which column serves which row.
    let mut slack_of_row: Vec<Option<(usize, f64)>> = vec![None; m];
    for r in model.rows() {
        let sigma = match model.row_sense(r) {
            Sense::Le => 1.0,
            Sense::Ge => -1.0,
            Sense::Eq => continue,
        };
        cols.push(vec![(r.0, sigma)]);
        lower.push(0.0);
        upper.push(f64::INFINITY);
        cost.push(0.0);
        slack_of_row[r.0] = Some((cols.len() - 1, sigma));
    }

    // Initial nonbasic point: bound nearest zero, or zero for free columns.
    let mut state: Vec<VarState> = Vec::with_capacity(cols.len());
    for j in 0..cols.len() {
        state.push(initial_state(lower[j], upper[j]));
    }

    // Row residuals at the initial point decide slack-vs-artificial basis.
    let mut resid = rhs.clone();
    for (j, col) in cols.iter().enumerate() {
        let v = match state[j] {
            VarState::AtLower => lower[j],
            VarState::AtUpper => upper[j],
            _ => 0.0,
        };
        if v != 0.0 {
            for &(r, a) in col {
                resid[r] -= a * v;
            }
        }
    }

    let mut basis: Vec<usize> = Vec::with_capacity(m);
    let mut phase1_cost: Vec<f64> = vec![0.0; cols.len()];
    let mut n_artificial = 0usize;
    for i in 0..m {
        let r = resid[i];
        let usable_slack = match slack_of_row[i] {
            Some((sj, sigma)) => {
                let sval = sigma * r;
                if sval >= 0.0 {
                    Some((sj, sval))
                } else {
                    None
                }
            }
            None => None,
        };
        match usable_slack {
            Some((sj, _)) => {
                state[sj] = VarState::Basic(i);
                basis.push(sj);
            }
            None => {
                let sign = if r >= 0.0 { 1.0 } else { -1.0 };
                cols.push(vec![(i, sign)]);
                lower.push(0.0);
                upper.push(f64::INFINITY);
                cost.push(0.0);
                phase1_cost.push(1.0);
                state.push(VarState::Basic(i));
                basis.push(cols.len() - 1);
                n_artificial += 1;
            }
        }
    }
    while phase1_cost.len() < cols.len() {
        phase1_cost.push(0.0);
    }

    let n_total = cols.len();
    let mut t = Tableau {
        cols,
        lower,
        upper,
        cost,
        m,
        n_total,
        rhs,
        basis,
        state,
        x: vec![0.0; n_total],
        binv: (0..m).map(|i| {
            let mut row = vec![0.0; m];
            row[i] = 1.0;
            row
        }).collect(),
    };
    // The starting basis is diagonal +-1; invert the signs directly.
    for i in 0..m {
        let b = t.basis[i];
        let sign = t.cols[b][0].1;
        t.binv[i][i] = 1.0 / sign;
    }
    t.recompute_basics();

    let iter_limit = 200 * (m + n_total) + 20_000;

    if n_artificial > 0 {
        let p1 = t.basis.iter().map(|&b| phase1_cost[b] * t.x[b].abs()).sum::<f64>();
        if p1 > EPS {
            let status = run_phase(&mut t, &phase1_cost, iter_limit, true)?;
            if status != Status::Optimal {
                return Err(SimplexError::IterationLimit);
            }
            let p1_obj: f64 = (n_struct..n_total)
                .filter(|&j| phase1_cost[j] > 0.0)
                .map(|j| t.x[j].max(0.0))
                .sum();
            let scale = 1.0 + t.rhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
            if p1_obj > 1e-7 * scale {
                return Ok(infeasible_solution());
            }
        }
    }
    // Pin artificials to zero for phase 2.
    for j in 0..t.n_total {
        if phase1_cost[j] > 0.0 {
            t.lower[j] = 0.0;
            t.upper[j] = 0.0;
        }
    }

    let phase2_cost = t.cost.clone();
    let status = run_phase(&mut t, &phase2_cost, iter_limit, false)?;
    if status == Status::Unbounded {
        return Ok(Solution {
            status: Status::Unbounded,
            objective: f64::NEG_INFINITY,
            x: Vec::new(),
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            mip_gap: None,
        });
    }

    // Clean refactorization before extracting the point and its duals.
    t.refactorize()?;
    let y = t.btran(&phase2_cost);
    let x: Vec<f64> = (0..n_struct).map(|j| t.x[j]).collect();
    let reduced: Vec<f64> = (0..n_struct)
        .map(|j| match t.state[j] {
            VarState::Basic(_) => 0.0,
            _ => t.reduced_cost(&phase2_cost, &y, j),
        })
        .collect();
    let objective = model.objective_value(&x);
    Ok(Solution {
        status: Status::Optimal,
        objective,
        x,
        duals: y,
        reduced_costs: reduced,
        mip_gap: None,
    })
}

fn initial_state(lo: f64, up: f64) -> VarState {
    if lo.is_finite() && up.is_finite() {
        if lo.abs() <= up.abs() {
            VarState::AtLower
        } else {
            VarState::AtUpper
        }
    } else if lo.is_finite() {
        VarState::AtLower
    } else if up.is_finite() {
        VarState::AtUpper
    } else {
        VarState::FreeZero
    }
}

fn infeasible_solution() -> Solution {
    Solution {
        status: Status::Infeasible,
        objective: f64::INFINITY,
        x: Vec::new(),
        duals: Vec::new(),
        reduced_costs: Vec::new(),
        mip_gap: None,
    }
}

fn solve_unconstrained(model: &Model) -> Solution {
    let n = model.num_cols();
    let mut x = vec![0.0; n];
    let mut reduced = vec![0.0; n];
    for j in 0..n {
        let c = model.col_obj(Col(j));
        let (lo, up) = model.col_bounds(Col(j));
        if c > 0.0 {
            if !lo.is_finite() {
                return Solution {
                    status: Status::Unbounded,
                    objective: f64::NEG_INFINITY,
                    x: Vec::new(),
                    duals: Vec::new(),
                    reduced_costs: Vec::new(),
                    mip_gap: None,
                };
            }
            x[j] = lo;
            reduced[j] = c;
        } else if c < 0.0 {
            if !up.is_finite() {
                return Solution {
                    status: Status::Unbounded,
                    objective: f64::NEG_INFINITY,
                    x: Vec::new(),
                    duals: Vec::new(),
                    reduced_costs: Vec::new(),
                    mip_gap: None,
                };
            }
            x[j] = up;
            reduced[j] = c;
        } else {
            x[j] = if lo.is_finite() {
                lo
            } else if up.is_finite() {
                up
            } else {
                0.0
            };
        }
    }
    Solution {
        status: Status::Optimal,
        objective: model.objective_value(&x),
        x,
        duals: Vec::new(),
        reduced_costs: reduced,
        mip_gap: None,
    }
}

/// Run simplex iterations with the given cost vector until optimal,
/// unbounded, or the iteration limit. `phase1` enables leaving-variable
/// preference for artificials.
fn run_phase(
    t: &mut Tableau,
    cost: &[f64],
    iter_limit: usize,
    phase1: bool,
) -> Result<Status, SimplexError> {
    let mut degenerate_streak = 0usize;
    let mut since_refactor = 0usize;
    for _iter in 0..iter_limit {
        let y = t.btran(cost);
        let bland = degenerate_streak > DEGENERATE_STREAK;

        // Pricing: candidate direction per nonbasic column.
        let mut entering: Option<(usize, f64, f64)> = None; // (col, dir, score)
        for j in 0..t.n_total {
            if matches!(t.state[j], VarState::Basic(_)) {
                continue;
            }
            if t.lower[j] == t.upper[j] && t.lower[j].is_finite() {
                continue; // fixed (artificials after phase 1)
            }
            let d = t.reduced_cost(cost, &y, j);
            let dir = match t.state[j] {
                VarState::AtLower if d < -EPS => 1.0,
                VarState::AtUpper if d > EPS => -1.0,
                VarState::FreeZero if d < -EPS => 1.0,
                VarState::FreeZero if d > EPS => -1.0,
                _ => continue,
            };
            let score = d.abs();
            if bland {
                entering = Some((j, dir, score));
                break;
            }
            match entering {
                Some((_, _, best)) if best >= score => {}
                _ => entering = Some((j, dir, score)),
            }
        }
        let Some((j_in, dir, _)) = entering else {
            return Ok(Status::Optimal);
        };

        let w = t.ftran(j_in);

        // Ratio test. t_max starts at the entering column's own range so a
        // cheaper bound flip wins ties against a degenerate pivot.
        let own_range = t.upper[j_in] - t.lower[j_in]; // inf for free/one-sided
        let mut t_max = if own_range.is_finite() { own_range } else { f64::INFINITY };
        let mut leaving: Option<(usize, bool)> = None; // (basis row, hits_upper)
        for i in 0..t.m {
            let g = dir * w[i];
            if g.abs() <= PIVOT_TOL {
                continue;
            }
            let b = t.basis[i];
            let xb = t.x[b];
            let (limit, hits_upper) = if g > 0.0 {
                if !t.lower[b].is_finite() {
                    continue;
                }
                ((xb - t.lower[b]) / g, false)
            } else {
                if !t.upper[b].is_finite() {
                    continue;
                }
                ((t.upper[b] - xb) / (-g), true)
            };
            let limit = limit.max(0.0);
            let take = if limit < t_max - EPS {
                true
            } else if limit <= t_max + EPS {
                // Tie: larger pivot magnitude for stability, or smallest
                // column index under Bland's rule.
                match leaving {
                    None => false, // keep the bound flip
                    Some((cur, _)) => {
                        if bland {
                            t.basis[i] < t.basis[cur]
                        } else {
                            w[i].abs() > w[cur].abs()
                        }
                    }
                }
            } else {
                false
            };
            if take {
                t_max = t_max.min(limit);
                leaving = Some((i, hits_upper));
            }
        }

        if !t_max.is_finite() {
            return if phase1 { Err(SimplexError::SingularBasis) } else { Ok(Status::Unbounded) };
        }

        degenerate_streak = if t_max <= EPS { degenerate_streak + 1 } else { 0 };

        match leaving {
            None => {
                // Bound flip: entering moves across its own range.
                let step = dir * t_max;
                for i in 0..t.m {
                    if w[i] != 0.0 {
                        let b = t.basis[i];
                        t.x[b] -= step * w[i];
                    }
                }
                t.x[j_in] = t.value_at_state(j_in) + step;
                t.state[j_in] = match t.state[j_in] {
                    VarState::AtLower => VarState::AtUpper,
                    VarState::AtUpper => VarState::AtLower,
                    s => s,
                };
            }
            Some((row, hits_upper)) => {
                let step = dir * t_max;
                for i in 0..t.m {
                    if w[i] != 0.0 {
                        let b = t.basis[i];
                        t.x[b] -= step * w[i];
                    }
                }
                let leaving_col = t.basis[row];
                t.x[j_in] = t.value_at_state(j_in) + step;
                t.x[leaving_col] = if hits_upper { t.upper[leaving_col] } else { t.lower[leaving_col] };
                t.state[leaving_col] = if hits_upper { VarState::AtUpper } else { VarState::AtLower };
                if !t.lower[leaving_col].is_finite() && !t.upper[leaving_col].is_finite() {
                    t.state[leaving_col] = VarState::FreeZero;
                    t.x[leaving_col] = 0.0;
                }
                t.state[j_in] = VarState::Basic(row);
                t.basis[row] = j_in;
                t.update_binv(row, &w);
                since_refactor += 1;
                if since_refactor >= REFACTOR_EVERY {
                    t.refactorize()?;
                    since_refactor = 0;
                }
            }
        }
    }
    Err(SimplexError::IterationLimit)
}
