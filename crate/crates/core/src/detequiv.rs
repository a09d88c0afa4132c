//! Deterministic equivalent over the expanded scenario tree.
//!
//! Every node carries a full copy of the stage physics. An internal node also
//! carries the linear form of the risk measure over its children: one free
//! `theta` per child pinned to that child's value expression, a free `cvar_z`
//! and one excess variable `delta` per child. Because every coefficient of the
//! risk expression is nonnegative, minimizing the root expression jointly over
//! all nodes equals the nested minimization.

use crate::error::{Error, Result};
use crate::hydrothermal::{add_physics, StateVector, SystemCase};
use crate::lp::{self, LinearProgram, Sense};
use crate::risk::RiskMeasure;
use crate::scenario::Lattice;

/// Largest tree the oracle will build.
pub const NODE_CAP: u128 = 10_000;

enum Link<'a> {
    Fixed(&'a [f64]),
    Parent(&'a [usize]),
}

struct Builder<'a> {
    case: &'a SystemCase,
    lattice: &'a Lattice,
    measure: RiskMeasure,
    lp: LinearProgram,
    nodes: usize,
}

impl Builder<'_> {
    /// Adds the subtree rooted at `(t, opening)` and returns its value as a
    /// linear expression.
    fn node(&mut self, t: usize, opening: usize, link: Link<'_>) -> Result<Vec<(usize, f64)>> {
        let id = self.nodes;
        self.nodes += 1;
        let prefix = format!("n{id}.");
        let block = add_physics(&mut self.lp, self.case, t, self.lattice.noise(t, opening), 0.0, &prefix)?;
        for (k, &copy) in block.state_in.iter().enumerate() {
            let label = format!("{prefix}state_copy[{k}]");
            match &link {
                Link::Fixed(values) => self.lp.add_constraint(label, vec![(copy, 1.0)], Sense::Eq, values[k]),
                Link::Parent(out) => self.lp.add_constraint(label, vec![(copy, 1.0), (out[k], -1.0)], Sense::Eq, 0.0),
            };
        }

        let mut value = block.cost_terms.clone();
        if t + 1 == self.lattice.stages() {
            return Ok(value);
        }
        let openings = self.lattice.openings();
        let lambda = self.measure.lambda();
        let z = (lambda > 0.0).then(|| {
            let z = self.lp.add_var(format!("{prefix}cvar_z"), f64::NEG_INFINITY, f64::INFINITY, 0.0);
            value.push((z, lambda));
            z
        });
        for child in 0..openings {
            let theta = self.lp.add_var(format!("{prefix}theta[{child}]"), f64::NEG_INFINITY, f64::INFINITY, 0.0);
            let child_value = self.node(t + 1, child, Link::Parent(&block.state_out))?;
            let mut row = vec![(theta, 1.0)];
            row.extend(child_value.into_iter().map(|(v, c)| (v, -c)));
            self.lp.add_constraint(format!("{prefix}theta_def[{child}]"), row, Sense::Eq, 0.0);
            value.push((theta, self.measure.mean_coefficient(openings)));
            if let Some(z) = z {
                let delta = self.lp.add_var(format!("{prefix}delta[{child}]"), 0.0, f64::INFINITY, 0.0);
                self.lp.add_constraint(
                    format!("{prefix}cvar[{child}]"),
                    vec![(delta, 1.0), (theta, -1.0), (z, 1.0)],
                    Sense::Ge,
                    0.0,
                );
                value.push((delta, self.measure.excess_coefficient(openings)));
            }
        }
        Ok(value)
    }
}

/// Nodes in the subtree rooted at stage `t` (0-based) of a `stages`-stage
/// lattice with `openings` branches per node.
pub fn subtree_size(stages: usize, openings: usize, t: usize) -> u128 {
    let mut total: u128 = 0;
    let mut level: u128 = 1;
    for _ in t..stages {
        total = total.saturating_add(level);
        level = level.saturating_mul(openings as u128);
    }
    total
}

fn build_subtree(
    case: &SystemCase,
    lattice: &Lattice,
    measure: &RiskMeasure,
    t: usize,
    state: &StateVector,
    opening: usize,
) -> Result<LinearProgram> {
    if t >= lattice.stages() || opening >= lattice.openings_at(t) {
        return Err(Error::DimensionMismatch(format!(
            "node ({t}, {opening}) outside a lattice of {} stages and {} openings",
            lattice.stages(),
            lattice.openings()
        )));
    }
    case.check_state(state)?;
    let size = subtree_size(lattice.stages(), lattice.openings(), t);
    if size > NODE_CAP {
        return Err(Error::TreeTooLarge { size, cap: NODE_CAP });
    }
    let mut builder = Builder { case, lattice, measure: *measure, lp: LinearProgram::new(), nodes: 0 };
    let flat = state.to_flat();
    let value = builder.node(t, opening, Link::Fixed(&flat))?;
    let mut lp = builder.lp;
    for (var, coeff) in value {
        lp.set_cost(var, lp.objective()[var] + coeff);
    }
    Ok(lp)
}

/// The full-tree program rooted at the deterministic first stage.
pub fn build_tree_lp(case: &SystemCase, lattice: &Lattice, measure: &RiskMeasure) -> Result<LinearProgram> {
    build_subtree(case, lattice, measure, 0, &case.initial_state(), 0)
}

fn optimum(lp: &LinearProgram) -> Result<f64> {
    let sol = lp::solve(lp)?;
    sol.require_optimal()?;
    Ok(sol.objective)
}

/// Optimal nested risk-adjusted cost of the whole problem.
pub fn solve_tree(case: &SystemCase, lattice: &Lattice, measure: &RiskMeasure) -> Result<f64> {
    optimum(&build_tree_lp(case, lattice, measure)?)
}

/// Exact value of stage `t` under opening `opening` when entered with `state`:
/// the stage cost plus the nested risk-adjusted cost of everything below.
pub fn exact_cost_to_go(
    case: &SystemCase,
    lattice: &Lattice,
    measure: &RiskMeasure,
    t: usize,
    state: &StateVector,
    opening: usize,
) -> Result<f64> {
    optimum(&build_subtree(case, lattice, measure, t, state, opening)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydrothermal::{Bus, Thermal};
    use crate::scenario::NoiseRealization;

    fn demand_noise(d: f64) -> NoiseRealization {
        NoiseRealization { inflow: vec![], renewable: vec![], demand: Some(vec![d]) }
    }

    fn closed_form_case() -> (SystemCase, Lattice) {
        let case = SystemCase {
            buses: vec![Bus { name: "n".into(), demand: vec![0.0] }],
            lines: vec![],
            thermals: vec![Thermal { name: "g".into(), bus: "n".into(), cost: 1.0, capacity: 100.0 }],
            hydros: vec![],
            renewables: vec![],
            deficit_cost: None,
            future_cost_floor: None,
        };
        let lattice =
            Lattice::new(2, vec![vec![demand_noise(0.0)], vec![demand_noise(1.0), demand_noise(3.0)]]).unwrap();
        (case, lattice)
    }

    #[test]
    fn worst_child_under_pure_cvar() {
        let (case, lattice) = closed_form_case();
        let m = RiskMeasure::new(1.0, 0.5).unwrap();
        assert!((solve_tree(&case, &lattice, &m).unwrap() - 3.0).abs() < 1e-12);
        let neutral = solve_tree(&case, &lattice, &RiskMeasure::risk_neutral()).unwrap();
        assert!((neutral - 2.0).abs() < 1e-12);
    }

    #[test]
    fn node_cap() {
        assert_eq!(subtree_size(7, 2, 0), 127);
        assert_eq!(subtree_size(7, 2, 6), 1);
        assert_eq!(subtree_size(3, 3, 1), 4);
        let big = Lattice::new(
            2,
            vec![vec![demand_noise(0.0)]; 1].into_iter().chain(vec![vec![demand_noise(1.0); 2]; 14]).collect(),
        )
        .unwrap();
        let (case, _) = closed_form_case();
        assert!(matches!(
            solve_tree(&case, &big, &RiskMeasure::risk_neutral()),
            Err(Error::TreeTooLarge { size: 32767, .. })
        ));
    }

    #[test]
    fn leaf_value_is_stage_cost() {
        let (case, lattice) = closed_form_case();
        let v = exact_cost_to_go(&case, &lattice, &RiskMeasure::new(0.3, 0.5).unwrap(), 1, &case.initial_state(), 1)
            .unwrap();
        assert!((v - 3.0).abs() < 1e-12);
    }
}
