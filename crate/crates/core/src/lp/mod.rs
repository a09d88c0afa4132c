//! Linear-programming data model and the bundled simplex solver.
//!
//! Programs are minimizations over bounded variables with `<=`, `=` and `>=`
//! rows. Rows are stored sparsely; a row is a list of `(variable, coefficient)`
//! pairs and any variable not listed has coefficient zero.
//!
//! Row duals follow the convention that the Lagrangian is
//! `objective + sum_i dual_i * (rhs_i - row_i(x))`, so a dual is the rate of
//! change of the optimal objective with respect to that row's right-hand side.

mod simplex;

use crate::error::{Error, Result};

pub use simplex::SolverOptions;

/// Primal feasibility tolerance.
pub const TOL_FEAS: f64 = 1e-8;
/// Reduced-cost optimality tolerance.
pub const TOL_OPT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub label: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    /// Row activity `a . x`.
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    var_labels: Vec<String>,
    rows: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable with bounds `[lower, upper]` (infinities allowed) and
    /// objective coefficient `cost`. Returns its column index.
    pub fn add_var(&mut self, label: impl Into<String>, lower: f64, upper: f64, cost: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.var_labels.push(label.into());
        self.objective.len() - 1
    }

    /// Adds a sparse row. Returns its row index.
    pub fn add_constraint(
        &mut self,
        label: impl Into<String>,
        coeffs: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        self.rows.push(Constraint { label: label.into(), coeffs, sense, rhs });
        self.rows.len() - 1
    }

    /// Adds a row given as a dense coefficient vector of length `num_vars`.
    pub fn add_dense_constraint(
        &mut self,
        label: impl Into<String>,
        coeffs: &[f64],
        sense: Sense,
        rhs: f64,
    ) -> Result<usize> {
        if coeffs.len() != self.num_vars() {
            return Err(Error::MalformedProgram(format!(
                "dense row has {} coefficients, program has {} variables",
                coeffs.len(),
                self.num_vars()
            )));
        }
        let sparse = coeffs.iter().enumerate().filter(|(_, a)| **a != 0.0).map(|(j, &a)| (j, a)).collect();
        Ok(self.add_constraint(label, sparse, sense, rhs))
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.objective[var] = cost;
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn rows(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn var_labels(&self) -> &[String] {
        &self.var_labels
    }

    pub fn var_index(&self, tag: &str) -> Option<usize> {
        self.var_labels.iter().position(|l| l == tag)
    }

    pub fn row_index(&self, tag: &str) -> Option<usize> {
        self.rows.iter().position(|r| r.label == tag)
    }

    /// Checks the structural invariants: finite data, consistent bounds and
    /// in-range column indices.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::MalformedProgram(msg));
        for j in 0..self.num_vars() {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return bad(format!("variable {j} has bounds [{lo}, {hi}]"));
            }
            if lo > hi {
                return bad(format!("variable {j} has lower bound {lo} above upper bound {hi}"));
            }
            if !self.objective[j].is_finite() {
                return bad(format!("variable {j} has non-finite cost"));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return bad(format!("row {i} has non-finite rhs"));
            }
            for &(j, a) in &row.coeffs {
                if j >= self.num_vars() {
                    return bad(format!("row {i} references variable {j} of {}", self.num_vars()));
                }
                if !a.is_finite() {
                    return bad(format!("row {i} has a non-finite coefficient"));
                }
            }
        }
        Ok(())
    }

    pub fn value_of(&self, sol: &LpSolution, tag: &str) -> Result<f64> {
        sol.require_optimal()?;
        let j = self.var_index(tag).ok_or_else(|| Error::UnknownTag(tag.to_string()))?;
        Ok(sol.primal[j])
    }

    pub fn dual_of(&self, sol: &LpSolution, tag: &str) -> Result<f64> {
        sol.require_optimal()?;
        let i = self.row_index(tag).ok_or_else(|| Error::UnknownTag(tag.to_string()))?;
        Ok(sol.duals[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: Status,
    pub objective: f64,
    pub primal: Vec<f64>,
    /// One entry per row; meaningful only when optimal.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn require_optimal(&self) -> Result<()> {
        match self.status {
            Status::Optimal => Ok(()),
            s => Err(Error::NotOptimal(s)),
        }
    }
}

/// Solves `lp` with the bundled bounded-variable revised simplex.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    solve_with(lp, &SolverOptions::default())
}

pub fn solve_with(lp: &LinearProgram, options: &SolverOptions) -> Result<LpSolution> {
    lp.validate()?;
    simplex::Simplex::new(lp, options).run()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> LinearProgram {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, f64::INFINITY, -1.0);
        let y = lp.add_var("y", 0.0, f64::INFINITY, -2.0);
        lp.add_constraint("cap", vec![(x, 1.0), (y, 1.0)], Sense::Le, 1.0);
        lp
    }

    #[test]
    fn bound_active_identity() {
        let mut lp = LinearProgram::new();
        lp.add_var("x", 1.0, f64::INFINITY, 1.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert_eq!(sol.objective, 1.0);
        assert_eq!(lp.value_of(&sol, "x").unwrap(), 1.0);
    }

    #[test]
    fn triangle_vertex_and_dual() {
        // Vertices of the feasible triangle: (0,0) -> 0, (1,0) -> -1, (0,1) -> -2.
        let lp = triangle();
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.objective + 2.0).abs() < 1e-12);
        assert!(lp.value_of(&sol, "x").unwrap().abs() < 1e-12);
        assert!((lp.value_of(&sol, "y").unwrap() - 1.0).abs() < 1e-12);
        assert!((lp.dual_of(&sol, "cap").unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_feasible_set() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        lp.add_constraint("lo", vec![(x, 1.0)], Sense::Ge, 1.0);
        lp.add_constraint("hi", vec![(x, 1.0)], Sense::Le, 0.0);
        assert_eq!(solve(&lp).unwrap().status, Status::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, f64::INFINITY, -1.0);
        let y = lp.add_var("y", 0.0, f64::INFINITY, 0.0);
        lp.add_constraint("r", vec![(x, 1.0), (y, -1.0)], Sense::Le, 2.0);
        assert_eq!(solve(&lp).unwrap().status, Status::Unbounded);
    }

    #[test]
    fn unknown_tag_and_not_optimal() {
        let lp = triangle();
        let sol = solve(&lp).unwrap();
        assert!(matches!(lp.dual_of(&sol, "nope"), Err(Error::UnknownTag(t)) if t == "nope"));
        assert!(matches!(lp.value_of(&sol, "nope"), Err(Error::UnknownTag(_))));

        let mut bad = LinearProgram::new();
        let x = bad.add_var("x", 0.0, 1.0, 1.0);
        bad.add_constraint("r", vec![(x, 1.0)], Sense::Ge, 2.0);
        let sol = solve(&bad).unwrap();
        assert!(matches!(bad.value_of(&sol, "x"), Err(Error::NotOptimal(Status::Infeasible))));
    }

    #[test]
    fn malformed_programs_are_rejected() {
        let mut lp = LinearProgram::new();
        lp.add_var("x", 0.0, 1.0, 1.0);
        assert!(matches!(lp.add_dense_constraint("r", &[1.0, 2.0], Sense::Le, 1.0), Err(Error::MalformedProgram(_))));
        lp.add_constraint("r", vec![(3, 1.0)], Sense::Le, 1.0);
        assert!(matches!(solve(&lp), Err(Error::MalformedProgram(_))));

        let mut lp = LinearProgram::new();
        lp.add_var("x", 2.0, 1.0, 1.0);
        assert!(matches!(solve(&lp), Err(Error::MalformedProgram(_))));

        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, 1.0, 1.0);
        lp.add_constraint("r", vec![(x, 1.0)], Sense::Le, f64::INFINITY);
        assert!(matches!(solve(&lp), Err(Error::MalformedProgram(_))));
    }

    #[test]
    fn equality_rows_and_free_variables() {
        // min x + y, x - y = 1, x + y >= 3, x, y free -> x = 2, y = 1.
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        let y = lp.add_var("y", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        lp.add_constraint("diff", vec![(x, 1.0), (y, -1.0)], Sense::Eq, 1.0);
        lp.add_constraint("sum", vec![(x, 1.0), (y, 1.0)], Sense::Ge, 3.0);
        let sol = solve(&lp).unwrap();
        assert!((sol.objective - 3.0).abs() < 1e-12);
        assert!((sol.primal[x] - 2.0).abs() < 1e-12);
        assert!((sol.primal[y] - 1.0).abs() < 1e-12);
        assert!(lp.dual_of(&sol, "diff").unwrap().abs() < 1e-12);
        assert!((lp.dual_of(&sol, "sum").unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn upper_bounded_variables_flip() {
        // min -x - y with x, y in [0, 1] and x + y <= 5: both at upper bound.
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, 1.0, -1.0);
        let y = lp.add_var("y", 0.0, 1.0, -1.0);
        lp.add_constraint("r", vec![(x, 1.0), (y, 1.0)], Sense::Le, 5.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.objective, -2.0);
        assert_eq!(sol.reduced_costs, vec![-1.0, -1.0]);
        assert_eq!(sol.duals[0], 0.0);
    }

    #[test]
    fn no_rows() {
        let mut lp = LinearProgram::new();
        lp.add_var("x", -3.0, 4.0, 2.0);
        lp.add_var("y", -3.0, 4.0, -2.0);
        lp.add_var("z", 0.0, 0.0, 5.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.objective, -14.0);
    }
}
