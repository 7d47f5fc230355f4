//! Depth-first branch-and-bound over LP relaxations.
//!
//! Reference mixed-integer solver for micro instances (tens of binaries):
//! each node re-solves the LP relaxation with the reference simplex, branches
//! on the most fractional integer column, and explores the
//! round-to-nearest child first. Bounds are tightened in place on a working
//! copy of the model and undone on backtrack.

use std::time::{Duration, Instant};

use crate::lp::{Col, Model, Solution, Status};
use crate::solver::simplex::{self, SimplexError};

const INT_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct BnbOptions {
    /// Relative optimality gap at which nodes are pruned; the returned
    /// incumbent is within this of the true optimum.
    pub rel_gap: f64,
    /// Refuse models with more integer columns than this.
    pub max_integers: usize,
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
    /// Known feasible point to prune against from the start.
    pub initial_incumbent: Option<(Vec<f64>, f64)>,
}

impl Default for BnbOptions {
    fn default() -> Self {
        BnbOptions {
            rel_gap: 1e-3,
            max_integers: 64,
            node_limit: 200_000,
            time_limit: None,
            initial_incumbent: None,
        }
    }
}

#[derive(Debug)]
pub enum BnbError {
    TooManyIntegers { have: usize, cap: usize },
    Simplex(SimplexError),
}

impl std::fmt::Display for BnbError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BnbError::TooManyIntegers { have, cap } => write!(
                f,
                "model has {} integer columns, reference branch-and-bound caps at {}",
                have, cap
            ),
            BnbError::Simplex(e) => write!(f, "LP relaxation failed: {}", e),
        }
    }
}

impl std::error::Error for BnbError {}

impl From<SimplexError> for BnbError {
    fn from(e: SimplexError) -> Self {
        BnbError::Simplex(e)
    }
}

struct Search {
    work: Model,
    int_cols: Vec<Col>,
    incumbent: Option<(Vec<f64>, f64)>,
    rel_gap: f64,
    nodes: usize,
    node_limit: usize,
    deadline: Option<Instant>,
    hit_limit: bool,
    /// Weakest lower bound discarded by a gap-based prune; bounds the
    /// reported optimality gap from below.
    weakest_pruned: f64,
}

impl Search {
    fn gap_abs(&self) -> f64 {
        match &self.incumbent {
            Some((_, obj)) => self.rel_gap * obj.abs().max(1.0),
            None => 0.0,
        }
    }

    fn out_of_budget(&self) -> bool {
        self.nodes >= self.node_limit
            || self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    fn dive(&mut self) -> Result<(), BnbError> {
        if self.out_of_budget() {
            self.hit_limit = true;
            return Ok(());
        }
        self.nodes += 1;

        let relax = simplex::solve_lp(&self.work)?;
        match relax.status {
            Status::Infeasible => return Ok(()),
            Status::Unbounded => {
                // A restriction of a bounded problem cannot be unbounded, so
                // this can only surface at the root; the caller maps it.
                self.incumbent = None;
                self.hit_limit = false;
                return Err(BnbError::Simplex(SimplexError::SingularBasis));
            }
            _ => {}
        }
        if let Some((_, inc_obj)) = &self.incumbent {
            if relax.objective >= inc_obj - self.gap_abs() {
                self.weakest_pruned = self.weakest_pruned.min(relax.objective);
                return Ok(());
            }
        }

        // Most fractional integer column.
        let mut branch: Option<(Col, f64, f64)> = None; // (col, value, fractionality)
        for &j in &self.int_cols {
            let v = relax.x[j.0];
            let frac = (v - v.round()).abs();
            if frac > INT_TOL {
                let dist_half = (frac - 0.5).abs();
                match branch {
                    Some((_, _, best)) if best <= dist_half => {}
                    _ => branch = Some((j, v, dist_half)),
                }
            }
        }
        let Some((j, v, _)) = branch else {
            // Integer feasible; keep if strictly better.
            let better = match &self.incumbent {
                Some((_, inc)) => relax.objective < *inc - 1e-12 * (1.0 + inc.abs()),
                None => true,
            };
            if better {
                self.incumbent = Some((relax.x, relax.objective));
            }
            return Ok(());
        };

        let (lo, up) = self.work.col_bounds(j);
        let floor = v.floor();
        // Round-to-nearest child first.
        let down_first = v - floor <= 0.5;
        for pass in 0..2 {
            let go_down = (pass == 0) == down_first;
            if go_down {
                self.work.set_bounds(j, lo, floor);
            } else {
                self.work.set_bounds(j, floor + 1.0, up);
            }
            self.dive()?;
            self.work.set_bounds(j, lo, up);
            if self.hit_limit {
                return Ok(());
            }
        }
        Ok(())
    }
}

/// Solve the MILP by depth-first branch-and-bound on the reference simplex.
///
/// Returns `Status::Optimal` with the achieved `mip_gap` when the tree is
/// exhausted, `Status::Limit` with the best incumbent (if any) when the node
/// or time budget runs out, and `Status::Infeasible` when no integer point
/// exists.
pub fn solve_milp(model: &Model, opts: &BnbOptions) -> Result<Solution, BnbError> {
    let n_int = model.num_integer();
    if n_int > opts.max_integers {
        return Err(BnbError::TooManyIntegers { have: n_int, cap: opts.max_integers });
    }
    if n_int == 0 {
        return Ok(simplex::solve_lp(model)?);
    }

    let int_cols: Vec<Col> = model.cols().filter(|&j| model.is_integer(j)).collect();
    let mut search = Search {
        work: model.clone(),
        int_cols,
        incumbent: opts.initial_incumbent.clone(),
        rel_gap: opts.rel_gap,
        nodes: 0,
        node_limit: opts.node_limit,
        deadline: opts.time_limit.map(|d| Instant::now() + d),
        hit_limit: false,
        weakest_pruned: f64::INFINITY,
    };

    match search.dive() {
        Ok(()) => {}
        Err(BnbError::Simplex(SimplexError::SingularBasis)) if search.incumbent.is_none() => {
            return Ok(Solution {
                status: Status::Unbounded,
                objective: f64::NEG_INFINITY,
                x: Vec::new(),
                duals: Vec::new(),
                reduced_costs: Vec::new(),
                mip_gap: None,
            });
        }
        Err(e) => return Err(e),
    }

    match search.incumbent {
        Some((x, obj)) => {
            let lower = obj.min(search.weakest_pruned);
            let gap = if lower.is_finite() { (obj - lower) / obj.abs().max(1.0) } else { 0.0 };
            Ok(Solution {
                status: if search.hit_limit { Status::Limit } else { Status::Optimal },
                objective: obj,
                x,
                duals: Vec::new(),
                reduced_costs: Vec::new(),
                mip_gap: Some(gap.max(0.0)),
            })
        }
        None => Ok(Solution {
            status: if search.hit_limit { Status::Limit } else { Status::Infeasible },
            objective: f64::INFINITY,
            x: Vec::new(),
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            mip_gap: None,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{Model, Sense};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn knapsack_small() {
        // max 8a + 11b + 6c + 4d s.t. 5a + 7b + 4c + 3d <= 14, binary.
        let mut m = Model::new("knap");
        let vals = [8.0, 11.0, 6.0, 4.0];
        let wts = [5.0, 7.0, 4.0, 3.0];
        let cols: Vec<_> = (0..4).map(|i| m.add_binary(format!("u{}", i))).collect();
        for (j, &v) in cols.iter().zip(&vals) {
            m.set_obj(*j, -v);
        }
        let coeffs: Vec<_> = cols.iter().zip(&wts).map(|(&j, &w)| (j, w)).collect();
        m.add_row("cap", Sense::Le, 14.0, &coeffs);
        let s = solve_milp(&m, &BnbOptions { rel_gap: 0.0, ..Default::default() }).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective - (-21.0)).abs() < 1e-7, "objective {}", s.objective);
        // b + c + d = 21 at weight 14.
        assert!(s.x[1] > 0.5 && s.x[2] > 0.5 && s.x[3] > 0.5 && s.x[0] < 0.5);
    }

    #[test]
    fn infeasible_integer_model() {
        // 2u1 + 2u2 = 3 has no binary solution.
        let mut m = Model::new("inf");
        let a = m.add_binary("a");
        let b = m.add_binary("b");
        m.add_row("r", Sense::Eq, 3.0, &[(a, 2.0), (b, 2.0)]);
        let s = solve_milp(&m, &BnbOptions::default()).unwrap();
        assert_eq!(s.status, Status::Infeasible);
    }

    #[test]
    fn general_integer_column() {
        // min -x, x integer in [0, 7.3] -> 7.
        let mut m = Model::new("gi");
        let x = m.add_col("x", 0.0, 7.3, -1.0);
        m.set_integer(x, true);
        let s = solve_milp(&m, &BnbOptions { rel_gap: 0.0, ..Default::default() }).unwrap();
        assert!((s.x[0] - 7.0).abs() < 1e-6);
    }

    #[test]
    fn size_guard_refuses_big_models() {
        let mut m = Model::new("big");
        for i in 0..100 {
            m.add_binary(format!("u{}", i));
        }
        let err = solve_milp(&m, &BnbOptions::default()).unwrap_err();
        assert!(matches!(err, BnbError::TooManyIntegers { .. }));
    }

    #[test]
    fn node_limit_reports_limit_status() {
        let mut m = Model::new("lim");
        let cols: Vec<_> = (0..12).map(|i| m.add_binary(format!("u{}", i))).collect();
        for (i, &j) in cols.iter().enumerate() {
            m.set_obj(j, -((i % 5) as f64 + 0.37));
        }
        let coeffs: Vec<_> = cols.iter().enumerate().map(|(i, &j)| (j, (i % 3) as f64 + 1.0)).collect();
        m.add_row("cap", Sense::Le, 7.5, &coeffs);
        let s = solve_milp(
            &m,
            &BnbOptions { node_limit: 3, rel_gap: 0.0, ..Default::default() },
        )
        .unwrap();
        assert_eq!(s.status, Status::Limit);
    }

    /// Exhaustive check: on random small binary MILPs, branch-and-bound at
    /// zero gap matches enumeration of every binary assignment.
    #[test]
    fn matches_enumeration_on_random_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..25 {
            let nb = rng.gen_range(1..=6);
            let nc = rng.gen_range(0..=2);
            let mut m = Model::new(format!("r{}", case));
            let bins: Vec<_> = (0..nb).map(|i| m.add_binary(format!("u{}", i))).collect();
            let conts: Vec<_> = (0..nc)
                .map(|i| {
                    m.add_col(format!("x{}", i), 0.0, rng.gen_range(0.5..3.0), rng.gen_range(-2.0..2.0))
                })
                .collect();
            for &j in &bins {
                m.set_obj(j, rng.gen_range(-3.0..3.0));
            }
            let nrows = rng.gen_range(1..=3);
            for r in 0..nrows {
                let mut coeffs = Vec::new();
                for &j in bins.iter().chain(&conts) {
                    if rng.gen_bool(0.7) {
                        coeffs.push((j, rng.gen_range(-2.0..2.0f64)));
                    }
                }
                if coeffs.is_empty() {
                    continue;
                }
                let sense = [Sense::Le, Sense::Ge][rng.gen_range(0..2)];
                let rhs = rng.gen_range(-1.5..2.5);
                m.add_row(format!("r{}", r), sense, rhs, &coeffs);
            }

            let got = solve_milp(&m, &BnbOptions { rel_gap: 0.0, ..Default::default() }).unwrap();

            // Enumerate all binary assignments, solving the continuous rest.
            let mut best: Option<f64> = None;
            for mask in 0..(1u32 << nb) {
                let mut fixed = m.clone();
                for (i, &j) in bins.iter().enumerate() {
                    let v = ((mask >> i) & 1) as f64;
                    fixed.set_bounds(j, v, v);
                }
                let sol = crate::solver::simplex::solve_lp(&fixed).unwrap();
                if sol.status == Status::Optimal {
                    best = Some(best.map_or(sol.objective, |b: f64| b.min(sol.objective)));
                }
            }

            match best {
                Some(b) => {
                    assert_eq!(got.status, Status::Optimal, "case {}", case);
                    assert!(
                        (got.objective - b).abs() <= 1e-6 * (1.0 + b.abs()),
                        "case {}: bnb {} vs enumeration {}",
                        case,
                        got.objective,
                        b
                    );
                }
                None => assert_eq!(got.status, Status::Infeasible, "case {}", case),
            }
        }
    }

    #[test]
    fn initial_incumbent_only_improves() {
        let mut m = Model::new("warm");
        let a = m.add_binary("a");
        let b = m.add_binary("b");
        m.set_obj(a, -2.0);
        m.set_obj(b, -3.0);
        m.add_row("cap", Sense::Le, 1.0, &[(a, 1.0), (b, 1.0)]);
        // Feasible warm start: a=1, b=0 at objective -2.
        let warm = (vec![1.0, 0.0], -2.0);
        let s = solve_milp(
            &m,
            &BnbOptions { rel_gap: 0.0, initial_incumbent: Some(warm), ..Default::default() },
        )
        .unwrap();
        assert!((s.objective - (-3.0)).abs() < 1e-9);
        assert!(s.x[1] > 0.5);
    }
}
