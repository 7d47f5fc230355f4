//! Hand a model to an external MILP/LP solver through the filesystem.
//!
//! The bridge writes the model as free MPS, runs a user-supplied command
//! template, and parses the solution file the command leaves behind. The
//! template is split on whitespace (no shell involved) and these placeholders
//! are substituted per token:
//!
//! - `{model}`: path of the MPS file the bridge wrote
//! - `{solution}`: path the command must write its solution to
//! - `{gap}`: relative MIP gap, e.g. `0.001`
//! - `{time_limit}`: wall-clock limit in seconds (blank-capped at 1e7)
//!
//! Example: `BESS_SOLVER_CMD="python3 tools/mps_solve.py {model} {solution}
//! --gap {gap}"`.
//!
//! Two solution formats are understood, auto-detected by the first line:
//! the HiGHS solution-file layout (starts with `Model status`; carries row
//! duals for LPs), and a generic `name value` listing where any line whose
//! first token names a model column assigns that column.

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};

use crate::lp::{Model, Solution, Status};
use crate::solver::mps;

/// Environment variable consulted for the default command template.
pub const SOLVER_CMD_ENV: &str = "BESS_SOLVER_CMD";

#[derive(Clone, Debug)]
pub struct ExternalSolver {
    template: String,
}

impl ExternalSolver {
    pub fn new(template: impl Into<String>) -> Self {
        ExternalSolver { template: template.into() }
    }

    /// Build from `BESS_SOLVER_CMD` if it is set and non-empty.
    pub fn from_env() -> Option<Self> {
        match std::env::var(SOLVER_CMD_ENV) {
            Ok(v) if !v.trim().is_empty() => Some(ExternalSolver::new(v)),
            _ => None,
        }
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    /// Solve `model`, keeping scratch files in a fresh temp directory.
    pub fn solve(
        &self,
        model: &Model,
        rel_gap: f64,
        time_limit: Option<Duration>,
    ) -> Result<Solution> {
        let dir = tempfile::tempdir().context("creating scratch directory")?;
        let model_path = dir.path().join("model.mps");
        let solution_path = dir.path().join("model.sol");
        let text = mps::write_mps(model).map_err(|e| anyhow!("{}", e))?;
        std::fs::write(&model_path, text)
            .with_context(|| format!("writing {}", model_path.display()))?;
        self.run(&model_path, &solution_path, rel_gap, time_limit)?;
        let sol_text = std::fs::read_to_string(&solution_path).with_context(|| {
            format!("solver command produced no solution file at {}", solution_path.display())
        })?;
        parse_solution(model, &sol_text)
    }

    fn run(
        &self,
        model_path: &Path,
        solution_path: &Path,
        rel_gap: f64,
        time_limit: Option<Duration>,
    ) -> Result<()> {
        let secs = time_limit.map_or(1e7, |d| d.as_secs_f64());
        let tokens: Vec<String> = self
            .template
            .split_whitespace()
            .map(|tok| {
                tok.replace("{model}", &model_path.display().to_string())
                    .replace("{solution}", &solution_path.display().to_string())
                    .replace("{gap}", &format!("{}", rel_gap))
                    .replace("{time_limit}", &format!("{}", secs))
            })
            .collect();
        let Some((program, args)) = tokens.split_first() else {
            bail!("solver command template is empty");
        };
        let output = Command::new(program)
            .args(args)
            .output()
            .with_context(|| format!("running solver command {:?}", program))?;
        if !output.status.success() {
            bail!(
                "solver command exited with {}: {}",
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            );
        }
        Ok(())
    }
}

/// Parse a solution file against `model`, auto-detecting the format.
pub fn parse_solution(model: &Model, text: &str) -> Result<Solution> {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.trim().starts_with("Model status") {
        parse_highs_solution(model, text)
    } else {
        parse_generic_solution(model, text)
    }
}

fn name_maps(model: &Model) -> (HashMap<&str, usize>, HashMap<&str, usize>) {
    let cols: HashMap<&str, usize> = model.cols().map(|j| (model.col_name(j), j.0)).collect();
    let rows: HashMap<&str, usize> = model.rows().map(|r| (model.row_name(r), r.0)).collect();
    (cols, rows)
}

fn parse_highs_solution(model: &Model, text: &str) -> Result<Solution> {
    let (col_ix, row_ix) = name_maps(model);
    let mut lines = text.lines().peekable();

    let mut status_text = String::new();
    let mut x = vec![0.0; model.num_cols()];
    let mut seen_cols = 0usize;
    let mut duals = vec![0.0; model.num_rows()];
    let mut reduced = vec![0.0; model.num_cols()];
    let mut have_duals = false;
    let mut primal_feasible = false;

    #[derive(PartialEq, Clone, Copy)]
    enum Block {
        None,
        Primal,
        Dual,
    }
    #[derive(PartialEq, Clone, Copy)]
    enum Sub {
        None,
        Columns,
        Rows,
    }
    let mut block = Block::None;
    let mut sub = Sub::None;

    while let Some(raw) = lines.next() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with("Model status") {
            status_text = lines
                .by_ref()
                .map(str::trim)
                .find(|l| !l.is_empty())
                .unwrap_or("")
                .to_string();
            continue;
        }
        if line.starts_with("# Primal solution values") {
            block = Block::Primal;
            sub = Sub::None;
            continue;
        }
        if line.starts_with("# Dual solution values") {
            block = Block::Dual;
            sub = Sub::None;
            continue;
        }
        if line.starts_with("# Basis") {
            break;
        }
        if line.starts_with("# Columns") {
            sub = Sub::Columns;
            continue;
        }
        if line.starts_with("# Rows") {
            sub = Sub::Rows;
            continue;
        }
        if line.starts_with('#') || line.starts_with("Objective") {
            continue;
        }
        if line == "Feasible" {
            match block {
                Block::Primal => primal_feasible = true,
                Block::Dual => have_duals = true,
                Block::None => {}
            }
            continue;
        }
        if line == "None" {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(name), Some(val), None) = (it.next(), it.next(), it.next()) else {
            continue;
        };
        match (block, sub) {
            (Block::Primal, Sub::Columns) => {
                if let Some(&j) = col_ix.get(name) {
                    x[j] = parse_value(val)?;
                    seen_cols += 1;
                }
            }
            (Block::Primal, Sub::Rows) => {} // activities are recomputable
            (Block::Dual, Sub::Columns) => {
                if let Some(&j) = col_ix.get(name) {
                    reduced[j] = parse_value(val)?;
                }
            }
            (Block::Dual, Sub::Rows) => {
                if let Some(&r) = row_ix.get(name) {
                    duals[r] = parse_value(val)?;
                }
            }
            _ => {}
        }
    }

    let status = map_status(&status_text, primal_feasible);
    if status == Status::Optimal && seen_cols < model.num_cols() {
        bail!(
            "solution file assigns {} of {} columns; column names likely diverge from the model",
            seen_cols,
            model.num_cols()
        );
    }
    if matches!(status, Status::Infeasible | Status::Unbounded) {
        return Ok(Solution {
            status,
            objective: if status == Status::Infeasible { f64::INFINITY } else { f64::NEG_INFINITY },
            x: Vec::new(),
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            mip_gap: None,
        });
    }
    Ok(Solution {
        status,
        objective: model.objective_value(&x),
        x,
        duals: if have_duals { duals } else { Vec::new() },
        reduced_costs: if have_duals { reduced } else { Vec::new() },
        mip_gap: None,
    })
}

fn parse_generic_solution(model: &Model, text: &str) -> Result<Solution> {
    let (col_ix, _) = name_maps(model);
    let mut x = vec![0.0; model.num_cols()];
    let mut seen = 0usize;
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('*') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(name), Some(val)) = (it.next(), it.next()) else {
            continue;
        };
        if let Some(&j) = col_ix.get(name) {
            x[j] = parse_value(val)?;
            seen += 1;
        }
    }
    if seen == 0 {
        bail!("solution file assigns none of the model's columns");
    }
    Ok(Solution {
        status: Status::Optimal,
        objective: model.objective_value(&x),
        x,
        duals: Vec::new(),
        reduced_costs: Vec::new(),
        mip_gap: None,
    })
}

fn parse_value(tok: &str) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| anyhow!("bad number {:?} in solution file", tok))
}

fn map_status(text: &str, primal_feasible: bool) -> Status {
    let lower = text.to_ascii_lowercase();
    if lower.contains("optimal") {
        Status::Optimal
    } else if lower.contains("infeasible") {
        Status::Infeasible
    } else if lower.contains("unbounded") {
        Status::Unbounded
    } else if primal_feasible {
        Status::Limit
    } else {
        Status::Infeasible
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{Model, Sense};

    fn two_var_model() -> Model {
        let mut m = Model::new("t");
        let x = m.add_col("x", 0.0, 10.0, 1.0);
        let y = m.add_col("y", 0.0, 10.0, 2.0);
        m.add_row("r1", Sense::Ge, 3.0, &[(x, 1.0), (y, 1.0)]);
        m
    }

    #[test]
    fn parses_highs_layout_with_duals() {
        let m = two_var_model();
        let text = "\
Model status
Optimal

# Primal solution values
Feasible
Objective 3
# Columns 2
x 3
y 0
# Rows 1
r1 3

# Dual solution values
Feasible
# Columns 2
x 0
y 1
# Rows 1
r1 1
";
        let s = parse_solution(&m, text).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert_eq!(s.x, vec![3.0, 0.0]);
        assert_eq!(s.objective, 3.0);
        assert_eq!(s.duals, vec![1.0]);
        assert_eq!(s.reduced_costs, vec![0.0, 1.0]);
    }

    #[test]
    fn parses_highs_infeasible() {
        let m = two_var_model();
        let text = "Model status\nInfeasible\n";
        let s = parse_solution(&m, text).unwrap();
        assert_eq!(s.status, Status::Infeasible);
    }

    #[test]
    fn parses_generic_name_value() {
        let m = two_var_model();
        let text = "# comment\nx 1.5\ny 1.5\nsomething_else 99\n";
        let s = parse_solution(&m, text).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert_eq!(s.x, vec![1.5, 1.5]);
        assert_eq!(s.objective, 4.5);
        assert!(s.duals.is_empty());
    }

    #[test]
    fn generic_with_no_known_columns_errors() {
        let m = two_var_model();
        assert!(parse_solution(&m, "a 1\nb 2\n").is_err());
    }

    #[test]
    fn milp_solution_without_duals() {
        let m = two_var_model();
        let text = "\
Model status
Optimal

# Primal solution values
Feasible
Objective 3
# Columns 2
x 3
y 0
# Rows 1
r1 3

# Dual solution values
None
";
        let s = parse_solution(&m, text).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!(s.duals.is_empty());
    }

    #[test]
    fn runs_a_real_command_template() {
        // `cp` as the solver: precompute the answer, let the template copy it.
        let dir = tempfile::tempdir().unwrap();
        let canned = dir.path().join("canned.sol");
        std::fs::write(&canned, "x 2\ny 1\n").unwrap();
        let m = two_var_model();
        let solver = ExternalSolver::new(format!("cp {} {{solution}}", canned.display()));
        let s = solver.solve(&m, 1e-4, None).unwrap();
        assert_eq!(s.x, vec![2.0, 1.0]);
        assert_eq!(s.objective, 4.0);
    }

    #[test]
    fn failing_command_is_reported() {
        let m = two_var_model();
        let solver = ExternalSolver::new("false {model} {solution}");
        let err = solver.solve(&m, 1e-4, None).unwrap_err();
        assert!(err.to_string().contains("exited"));
    }
}
