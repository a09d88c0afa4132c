mod common;

use sddp_core::detequiv::{build_tree_lp, exact_cost_to_go, solve_tree};
use sddp_core::hydrothermal::{add_physics, solve_stage, SystemCase};
use sddp_core::lp::{solve, LinearProgram, Sense};
use sddp_core::risk::RiskMeasure;
use sddp_core::scenario::{enumerate_paths, Lattice, PATH_CAP};
use sddp_core::synthetic::generate;

/// Expected cost over scenario paths: one copy of the physics per (path,
/// stage), probability-weighted costs, and nonanticipativity rows tying the
/// outgoing state of paths that share a history.
fn scenario_formulation(case: &SystemCase, lattice: &Lattice) -> f64 {
    let paths = enumerate_paths(lattice, PATH_CAP).unwrap();
    let prob = 1.0 / paths.len() as f64;
    let init = case.initial_state().to_flat();
    let mut lp = LinearProgram::new();
    let mut outs: Vec<Vec<Vec<usize>>> = Vec::new();
    for (s, path) in paths.iter().enumerate() {
        let mut prev: Option<Vec<usize>> = None;
        let mut mine = Vec::new();
        for t in 0..lattice.stages() {
            let opening = if t == 0 { 0 } else { path[t - 1] };
            let block = add_physics(&mut lp, case, t, lattice.noise(t, opening), prob, &format!("s{s}t{t}.")).unwrap();
            for (k, &copy) in block.state_in.iter().enumerate() {
                match &prev {
                    None => lp.add_constraint("", vec![(copy, 1.0)], Sense::Eq, init[k]),
                    Some(out) => lp.add_constraint("", vec![(copy, 1.0), (out[k], -1.0)], Sense::Eq, 0.0),
                };
            }
            prev = Some(block.state_out.clone());
            mine.push(block.state_out);
        }
        // paths are lexicographic: the previous path shares the longest prefix
        if s > 0 {
            let shared = paths[s].iter().zip(&paths[s - 1]).take_while(|(a, b)| a == b).count();
            for t in 0..=shared {
                for (&a, &b) in mine[t].iter().zip(&outs[s - 1][t]) {
                    lp.add_constraint("", vec![(a, 1.0), (b, -1.0)], Sense::Eq, 0.0);
                }
            }
        }
        outs.push(mine);
    }
    let sol = solve(&lp).unwrap();
    sol.require_optimal().unwrap();
    sol.objective
}

#[test]
fn risk_neutral_tree_equals_scenario_formulation() {
    for seed in 0..8 {
        let (case, lattice) = generate(&common::small_shape(seed), seed);
        let tree = solve_tree(&case, &lattice, &RiskMeasure::risk_neutral()).unwrap();
        let scen = scenario_formulation(&case, &lattice);
        assert!((tree - scen).abs() <= 1e-7 * (1.0 + scen.abs()), "seed {seed}: tree {tree} vs scenarios {scen}");
    }
}

#[test]
fn root_cost_to_go_equals_tree_optimum() {
    for seed in 0..6 {
        let (case, lattice) = generate(&common::small_shape(seed), seed);
        let m = RiskMeasure::new(0.5, 0.5).unwrap();
        let tree = solve_tree(&case, &lattice, &m).unwrap();
        let root = exact_cost_to_go(&case, &lattice, &m, 0, &case.initial_state(), 0).unwrap();
        assert!((tree - root).abs() <= 1e-8 * (1.0 + tree.abs()));
    }
}

#[test]
fn risk_aversion_never_lowers_the_optimum() {
    for seed in 0..8 {
        let (case, lattice) = generate(&common::small_shape(seed), 100 + seed);
        for alpha in [0.0, 0.5, 0.75] {
            let mut previous = f64::NEG_INFINITY;
            for lambda in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let v = solve_tree(&case, &lattice, &RiskMeasure::new(lambda, alpha).unwrap()).unwrap();
                assert!(v >= previous - 1e-7 * (1.0 + v.abs()), "seed {seed} alpha {alpha} lambda {lambda}");
                previous = v;
            }
        }
    }
}

#[test]
fn single_stage_tree_is_the_stage_program() {
    let shape = sddp_core::synthetic::Shape { stages: 1, ..common::small_shape(1) };
    let (case, lattice) = generate(&shape, 5);
    let m = RiskMeasure::new(0.5, 0.5).unwrap();
    let stage = solve_stage(&case, 1, 0, &case.initial_state(), lattice.noise(0, 0), &[], &m).unwrap();
    let tree = solve(&build_tree_lp(&case, &lattice, &m).unwrap()).unwrap();
    assert!((tree.objective - stage.objective).abs() <= 1e-9 * (1.0 + stage.objective.abs()));
}

#[test]
fn leaf_values_and_storage_monotonicity() {
    let (case, lattice) = generate(&common::small_shape(2), 2);
    let m = RiskMeasure::new(0.5, 0.5).unwrap();
    let last = lattice.stages() - 1;
    let mut rng = <rand_xoshiro::Xoshiro256PlusPlus as rand::SeedableRng>::seed_from_u64(4);
    for _ in 0..10 {
        let state = common::random_state(&case, &mut rng);
        for l in 0..lattice.openings() {
            let exact = exact_cost_to_go(&case, &lattice, &m, last, &state, l).unwrap();
            let stage = solve_stage(&case, lattice.stages(), last, &state, lattice.noise(last, l), &[], &m).unwrap();
            assert!((exact - stage.objective).abs() <= 1e-9 * (1.0 + exact.abs()));
        }
        let mut full = state.clone();
        let mut empty = state.clone();
        for (j, h) in case.hydros.iter().enumerate() {
            full.storages[j] = h.max_storage;
            empty.storages[j] = 0.0;
        }
        for t in 1..lattice.stages() {
            let f = exact_cost_to_go(&case, &lattice, &m, t, &full, 0).unwrap();
            let e = exact_cost_to_go(&case, &lattice, &m, t, &empty, 0).unwrap();
            assert!(f <= e + 1e-9 * (1.0 + e.abs()));
        }
    }
}
