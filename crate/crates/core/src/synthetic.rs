//! Seeded generator of small random hydrothermal cases, used by the test
//! suites and for experiments.
//!
//! Generated inflows are always nonnegative (nonnegative noises, lag
//! coefficients and history), so every stage program is feasible.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use crate::hydrothermal::{Bus, Hydro, Line, Renewable, SystemCase, Thermal};
use crate::scenario::{Lattice, NoiseRealization};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shape {
    pub buses: usize,
    pub thermals: usize,
    pub hydros: usize,
    pub renewables: usize,
    pub stages: usize,
    pub openings: usize,
    /// Largest autoregressive order; each hydro draws its order in `0..=max_lag`.
    pub max_lag: usize,
    /// Scale of the inflow noise spread between openings.
    pub dispersion: f64,
}

impl Default for Shape {
    fn default() -> Self {
        Self { buses: 1, thermals: 2, hydros: 1, renewables: 0, stages: 3, openings: 2, max_lag: 1, dispersion: 1.0 }
    }
}

pub fn generate(shape: &Shape, seed: u64) -> (SystemCase, Lattice) {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let bus_name = |i: usize| format!("bus{i}");
    let buses: Vec<Bus> = (0..shape.buses)
        .map(|i| {
            let base = rng.gen_range(30.0..80.0);
            Bus { name: bus_name(i), demand: (0..shape.stages).map(|_| base * rng.gen_range(0.8..1.2)).collect() }
        })
        .collect();
    let lines = (1..shape.buses)
        .map(|i| Line { from: bus_name(i - 1), to: bus_name(i), capacity: rng.gen_range(10.0..40.0) })
        .collect();
    let total_demand: f64 = buses.iter().map(|b| b.demand[0]).sum();
    let thermals = (0..shape.thermals)
        .map(|i| Thermal {
            name: format!("thermal{i}"),
            bus: bus_name(rng.gen_range(0..shape.buses)),
            cost: rng.gen_range(5.0..100.0),
            capacity: total_demand * rng.gen_range(0.2..0.5),
        })
        .collect();
    let hydros = (0..shape.hydros)
        .map(|i| {
            let max_storage = rng.gen_range(40.0..120.0);
            let order = rng.gen_range(0..=shape.max_lag);
            let ar_coefficients: Vec<f64> = (0..order).map(|k| rng.gen_range(0.1..0.5) / (k + 1) as f64).collect();
            let upstream = if i > 0 && rng.gen_bool(0.5) { vec![format!("hydro{}", i - 1)] } else { vec![] };
            Hydro {
                name: format!("hydro{i}"),
                bus: bus_name(rng.gen_range(0..shape.buses)),
                max_storage,
                max_turbine: rng.gen_range(15.0..40.0),
                production: rng.gen_range(0.8..1.2),
                upstream,
                initial_storage: max_storage * rng.gen_range(0.2..0.8),
                initial_inflows: (0..order).map(|_| rng.gen_range(5.0..20.0)).collect(),
                ar_coefficients,
            }
        })
        .collect();
    let renewables = (0..shape.renewables)
        .map(|i| Renewable { name: format!("renewable{i}"), bus: bus_name(rng.gen_range(0..shape.buses)) })
        .collect();
    let case = SystemCase { buses, lines, thermals, hydros, renewables, deficit_cost: None, future_cost_floor: None };

    let mean_inflow: Vec<f64> = (0..shape.hydros).map(|_| rng.gen_range(5.0..25.0)).collect();
    let noise = |rng: &mut Xoshiro256StarStar, spread: f64| NoiseRealization {
        inflow: mean_inflow.iter().map(|&m| (m * (1.0 + spread * rng.gen_range(-1.0..1.0))).max(0.0)).collect(),
        renewable: (0..shape.renewables).map(|_| rng.gen_range(0.0..15.0)).collect(),
        demand: None,
    };
    let mut noises = vec![vec![noise(&mut rng, 0.0)]];
    for _ in 1..shape.stages {
        noises.push((0..shape.openings).map(|_| noise(&mut rng, shape.dispersion)).collect());
    }
    let lattice = Lattice::new(shape.openings, noises).expect("generated lattice is well formed");
    (case, lattice)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_cases_validate() {
        for seed in 0..50 {
            let shape = Shape {
                buses: 1 + seed as usize % 3,
                hydros: seed as usize % 4,
                max_lag: 2,
                renewables: 1,
                ..Default::default()
            };
            let (case, lattice) = generate(&shape, seed);
            case.validate(lattice.stages()).unwrap();
            case.check_lattice(&lattice).unwrap();
            assert_eq!(generate(&shape, seed), (case, lattice));
        }
    }
}
