//! LP/MILP solving: reference implementations and an external-solver bridge.
//!
//! [`simplex`] and [`bnb`] are the built-in engines, sized for desk-scale
//! models; [`external`] shells out to any solver that reads MPS and writes a
//! solution file. [`solve`] picks between them.

pub mod bnb;
pub mod external;
pub mod mps;
pub mod simplex;

use std::time::Duration;

use anyhow::{anyhow, Result};

use crate::lp::{Model, Solution};
pub use external::{ExternalSolver, SOLVER_CMD_ENV};

/// Which solver a model is handed to.
#[derive(Clone, Debug)]
pub enum Engine {
    /// Built-in simplex / branch-and-bound.
    Reference,
    /// Command-template bridge (see [`external`]).
    External(ExternalSolver),
}

impl Engine {
    /// The external solver named by `BESS_SOLVER_CMD` when set, otherwise
    /// the built-in engines.
    pub fn from_env() -> Engine {
        match ExternalSolver::from_env() {
            Some(s) => Engine::External(s),
            None => Engine::Reference,
        }
    }

    /// Override order: explicit command template, then the environment.
    pub fn from_option_or_env(cmd: Option<&str>) -> Engine {
        match cmd {
            Some(c) if !c.trim().is_empty() => Engine::External(ExternalSolver::new(c)),
            _ => Engine::from_env(),
        }
    }

    /// Override order: explicit command template, then `BESS_SOLVER_CMD`,
    /// then the bundled Python bridge when SciPy is importable, and finally
    /// the built-in engines. Large mixed-integer models exceed the built-in
    /// branch-and-bound's integer cap, so anything beyond micro studies
    /// wants one of the external paths.
    pub fn autodetect(cmd: Option<&str>) -> Engine {
        match cmd {
            Some(c) if !c.trim().is_empty() => Engine::External(ExternalSolver::new(c)),
            _ => match ExternalSolver::from_env() {
                Some(s) => Engine::External(s),
                None => match bundled_python_solver() {
                    Some(s) => Engine::External(s),
                    None => Engine::Reference,
                },
            },
        }
    }
}

/// The Python solver bridge shipped inside the binary (a SciPy `linprog` /
/// `milp` wrapper speaking MPS). Materialized under the temp directory on
/// each call; returns `None` when `python3` or SciPy is unavailable.
pub fn bundled_python_solver() -> Option<ExternalSolver> {
    let probe = std::process::Command::new("python3")
        .args(["-c", "import scipy.optimize"])
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .status();
    if !matches!(probe, Ok(s) if s.success()) {
        return None;
    }
    let script = std::env::temp_dir().join("gridbid_mps_solve.py");
    std::fs::write(&script, include_str!("../../../../tools/mps_solve.py")).ok()?;
    Some(ExternalSolver::new(format!(
        "python3 {} {{model}} {{solution}} --gap {{gap}} --time-limit {{time_limit}}",
        script.display()
    )))
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub rel_gap: f64,
    pub time_limit: Option<Duration>,
    pub node_limit: usize,
    /// Integer-column cap for the built-in branch-and-bound.
    pub max_integers: usize,
    /// Feasible point handed to the built-in branch-and-bound as its first
    /// incumbent. The external bridge ignores it.
    pub warm_start: Option<(Vec<f64>, f64)>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            rel_gap: 1e-3,
            time_limit: None,
            node_limit: 200_000,
            max_integers: 64,
            warm_start: None,
        }
    }
}

/// Solve `model` with the chosen engine.
pub fn solve(model: &Model, engine: &Engine, opts: &SolveOptions) -> Result<Solution> {
    match engine {
        Engine::Reference => {
            if model.num_integer() == 0 {
                simplex::solve_lp(model).map_err(|e| anyhow!("{}", e))
            } else {
                let bopts = bnb::BnbOptions {
                    rel_gap: opts.rel_gap,
                    max_integers: opts.max_integers,
                    node_limit: opts.node_limit,
                    time_limit: opts.time_limit,
                    initial_incumbent: opts.warm_start.clone(),
                };
                bnb::solve_milp(model, &bopts).map_err(|e| anyhow!("{}", e))
            }
        }
        Engine::External(ext) => ext.solve(model, opts.rel_gap, opts.time_limit),
    }
}
