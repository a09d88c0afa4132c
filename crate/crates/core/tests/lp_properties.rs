//! Randomized soundness checks for the bundled simplex: strong duality with an
//! independently assembled dual objective, primal feasibility, and agreement
//! with brute-force vertex enumeration on programs small enough to enumerate.

mod common;

use common::lp_oracle::{random_program, strong_duality_suite, vertex_suite};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use sddp_core::lp::{solve, Sense, Status};

#[test]
fn strong_duality_and_feasibility_on_random_programs() {
    strong_duality_suite(0x5eed1, 1000, 1e-7).unwrap();
}

#[test]
fn agrees_with_vertex_enumeration() {
    vertex_suite(0x5eed2, 500, 1e-7).unwrap();
}

#[test]
fn infeasible_random_programs_are_detected() {
    let mut rng = StdRng::seed_from_u64(0x5eed3);
    for _ in 0..200 {
        let g = random_program(&mut rng, 6, 6, false);
        let mut lp = g.lp.clone();
        // a row and its contradiction
        let n = lp.num_vars();
        let coeffs: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.gen_range(1..=9) as f64)).collect();
        lp.add_constraint("a", coeffs.clone(), Sense::Ge, 5.0);
        lp.add_constraint("b", coeffs, Sense::Le, 4.0);
        assert_eq!(solve(&lp).unwrap().status, Status::Infeasible);
    }
}

#[test]
fn solve_is_deterministic() {
    let mut rng = StdRng::seed_from_u64(7);
    let g = random_program(&mut rng, 12, 12, true);
    let a = solve(&g.lp).unwrap();
    let b = solve(&g.lp).unwrap();
    assert_eq!(a.primal, b.primal);
    assert_eq!(a.duals, b.duals);
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
}
