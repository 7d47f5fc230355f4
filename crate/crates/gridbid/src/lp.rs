//! Sparse linear/mixed-integer model representation shared by the clearing,
//! bilevel and solver modules.
//!
//! A [`Model`] is a minimization problem over named columns with bounds and
//! named rows `a'x {<=,=,>=} b`. Builders that need a dual for every
//! constraint (the market clearing LP) put all structural constraints in as
//! rows and leave the columns free; builders that only need primal values
//! (the single-level MILP) use column bounds freely.
//!
//! Dual sign convention, for `min c'x`: a row dual `y_r` satisfies
//! `c_j = sum_r a_rj y_r + rc_j` with `y_r >= 0` on `>=` rows, `y_r <= 0` on
//! `<=` rows, free on `=` rows; `rc_j` is the reduced cost of the column's
//! active bound (`>= 0` at lower, `<= 0` at upper). The dual objective is
//! `sum_r b_r y_r + sum_j rc_j x_j` at the bound values.

use std::fmt;

/// Column handle into a [`Model`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Col(pub usize);

/// Row handle into a [`Model`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Row(pub usize);

/// Constraint sense of a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sense::Le => write!(f, "<="),
            Sense::Eq => write!(f, "="),
            Sense::Ge => write!(f, ">="),
        }
    }
}

/// Sparse minimization model.
#[derive(Debug, Clone, Default)]
pub struct Model {
    pub name: String,
    col_names: Vec<String>,
    col_lower: Vec<f64>,
    col_upper: Vec<f64>,
    col_obj: Vec<f64>,
    col_integer: Vec<bool>,
    row_names: Vec<String>,
    row_sense: Vec<Sense>,
    row_rhs: Vec<f64>,
    row_coeffs: Vec<Vec<(usize, f64)>>,
    /// Constant added to the objective value (bid-independent terms).
    pub obj_offset: f64,
}

impl Model {
    pub fn new(name: impl Into<String>) -> Self {
        Model {
            name: name.into(),
            ..Model::default()
        }
    }

    pub fn num_cols(&self) -> usize {
        self.col_names.len()
    }

    pub fn num_rows(&self) -> usize {
        self.row_names.len()
    }

    pub fn num_integer(&self) -> usize {
        self.col_integer.iter().filter(|b| **b).count()
    }

    /// Add a continuous column with bounds and objective coefficient.
    pub fn add_col(&mut self, name: impl Into<String>, lower: f64, upper: f64, obj: f64) -> Col {
        debug_assert!(lower <= upper, "column bounds crossed");
        self.col_names.push(name.into());
        self.col_lower.push(lower);
        self.col_upper.push(upper);
        self.col_obj.push(obj);
        self.col_integer.push(false);
        Col(self.col_names.len() - 1)
    }

    /// Add a free continuous column.
    pub fn add_free_col(&mut self, name: impl Into<String>, obj: f64) -> Col {
        self.add_col(name, f64::NEG_INFINITY, f64::INFINITY, obj)
    }

    /// Add a binary column.
    pub fn add_binary(&mut self, name: impl Into<String>) -> Col {
        let c = self.add_col(name, 0.0, 1.0, 0.0);
        self.col_integer[c.0] = true;
        c
    }

    /// Add a row `sum coeffs {sense} rhs`. Duplicate column entries are summed.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        sense: Sense,
        rhs: f64,
        coeffs: &[(Col, f64)],
    ) -> Row {
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
        for &(c, v) in coeffs {
            debug_assert!(c.0 < self.num_cols(), "row references unknown column");
            if v == 0.0 {
                continue;
            }
            match entries.iter_mut().find(|(j, _)| *j == c.0) {
                Some((_, acc)) => *acc += v,
                None => entries.push((c.0, v)),
            }
        }
        self.row_names.push(name.into());
        self.row_sense.push(sense);
        self.row_rhs.push(rhs);
        self.row_coeffs.push(entries);
        Row(self.row_names.len() - 1)
    }

    pub fn set_obj(&mut self, col: Col, obj: f64) {
        self.col_obj[col.0] = obj;
    }

    pub fn add_obj(&mut self, col: Col, obj: f64) {
        self.col_obj[col.0] += obj;
    }

    pub fn set_bounds(&mut self, col: Col, lower: f64, upper: f64) {
        self.col_lower[col.0] = lower;
        self.col_upper[col.0] = upper;
    }

    pub fn set_integer(&mut self, col: Col, integer: bool) {
        self.col_integer[col.0] = integer;
    }

    pub fn col_name(&self, col: Col) -> &str {
        &self.col_names[col.0]
    }

    pub fn row_name(&self, row: Row) -> &str {
        &self.row_names[row.0]
    }

    pub fn col_bounds(&self, col: Col) -> (f64, f64) {
        (self.col_lower[col.0], self.col_upper[col.0])
    }

    pub fn col_obj(&self, col: Col) -> f64 {
        self.col_obj[col.0]
    }

    pub fn is_integer(&self, col: Col) -> bool {
        self.col_integer[col.0]
    }

    pub fn row_sense(&self, row: Row) -> Sense {
        self.row_sense[row.0]
    }

    pub fn row_rhs(&self, row: Row) -> f64 {
        self.row_rhs[row.0]
    }

    pub fn row_coeffs(&self, row: Row) -> &[(usize, f64)] {
        &self.row_coeffs[row.0]
    }

    pub fn cols(&self) -> impl Iterator<Item = Col> {
        (0..self.num_cols()).map(Col)
    }

    pub fn rows(&self) -> impl Iterator<Item = Row> {
        (0..self.num_rows()).map(Row)
    }

    /// Look up a column by name. Linear scan, intended for tests and parsers.
    pub fn col_by_name(&self, name: &str) -> Option<Col> {
        self.col_names.iter().position(|n| n == name).map(Col)
    }

    /// Look up a row by name. Linear scan, intended for tests and parsers.
    pub fn row_by_name(&self, name: &str) -> Option<Row> {
        self.row_names.iter().position(|n| n == name).map(Row)
    }

    /// Evaluate `a_r'x` for a row at the given point.
    pub fn row_activity(&self, row: Row, x: &[f64]) -> f64 {
        self.row_coeffs[row.0]
            .iter()
            .map(|&(j, v)| v * x[j])
            .sum()
    }

    /// Evaluate `c'x` plus the objective offset.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.obj_offset
            + self
                .col_obj
                .iter()
                .zip(x)
                .map(|(c, xj)| c * xj)
                .sum::<f64>()
    }

    /// Signed constraint violation of a point: positive means infeasible.
    /// Returns the worst violation over all rows and bounds.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for r in self.rows() {
            let act = self.row_activity(r, x);
            let rhs = self.row_rhs[r.0];
            let v = match self.row_sense[r.0] {
                Sense::Le => act - rhs,
                Sense::Ge => rhs - act,
                Sense::Eq => (act - rhs).abs(),
            };
            worst = worst.max(v);
        }
        for j in 0..self.num_cols() {
            worst = worst.max(self.col_lower[j] - x[j]);
            worst = worst.max(x[j] - self.col_upper[j]);
        }
        worst
    }
}

/// Solver termination status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration or time limit hit; primal values are the incumbent if any.
    Limit,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Optimal => write!(f, "optimal"),
            Status::Infeasible => write!(f, "infeasible"),
            Status::Unbounded => write!(f, "unbounded"),
            Status::Limit => write!(f, "limit"),
        }
    }
}

/// Solution of a [`Model`].
#[derive(Debug, Clone)]
pub struct Solution {
    pub status: Status,
    pub objective: f64,
    /// Primal value per column; empty unless status is Optimal or Limit.
    pub x: Vec<f64>,
    /// Signed row duals (see module docs); empty for MILP solves.
    pub duals: Vec<f64>,
    /// Reduced costs per column; empty for MILP solves.
    pub reduced_costs: Vec<f64>,
    /// Relative MIP gap of the incumbent, when applicable.
    pub mip_gap: Option<f64>,
}

impl Solution {
    pub fn value(&self, col: Col) -> f64 {
        self.x[col.0]
    }

    pub fn dual(&self, row: Row) -> f64 {
        self.duals[row.0]
    }

    /// Dual objective `b'y + sum_j rc_j * bound_j` (for strong-duality checks).
    pub fn dual_objective(&self, model: &Model) -> f64 {
        let mut v = model.obj_offset;
        for r in model.rows() {
            v += model.row_rhs(r) * self.duals[r.0];
        }
        for j in 0..model.num_cols() {
            let rc = self.reduced_costs[j];
            if rc == 0.0 {
                continue;
            }
            let (lo, up) = model.col_bounds(Col(j));
            // rc > 0 pairs with the lower bound, rc < 0 with the upper.
            let b = if rc > 0.0 { lo } else { up };
            if b.is_finite() {
                v += rc * b;
            }
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dedups_row_coefficients() {
        let mut m = Model::new("t");
        let x = m.add_col("x", 0.0, 1.0, 1.0);
        let r = m.add_row("r", Sense::Le, 1.0, &[(x, 1.0), (x, 2.0)]);
        assert_eq!(m.row_coeffs(r), &[(0, 3.0)]);
    }

    #[test]
    fn violation_measures_rows_and_bounds() {
        let mut m = Model::new("t");
        let x = m.add_col("x", 0.0, 1.0, 0.0);
        m.add_row("r", Sense::Ge, 2.0, &[(x, 1.0)]);
        assert_eq!(m.max_violation(&[0.5]), 1.5);
        assert_eq!(m.max_violation(&[1.5]), 0.5);
    }
}
