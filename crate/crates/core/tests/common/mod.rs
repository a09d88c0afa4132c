#![allow(dead_code)]

pub mod lp_oracle;

use rand::Rng;
use sddp_core::hydrothermal::{StateVector, SystemCase};
use sddp_core::risk::RiskMeasure;
use sddp_core::synthetic::Shape;

/// CVaR over equiprobable atoms as the mean of the worst `1 - alpha` of the
/// probability mass, splitting the boundary atom.
pub fn cvar_top_mass(values: &[f64], alpha: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let atom = 1.0 / values.len() as f64;
    let mut remaining = 1.0 - alpha;
    let mut acc = 0.0;
    for v in sorted {
        if remaining <= 0.0 {
            break;
        }
        let take = atom.min(remaining);
        acc += take * v;
        remaining -= take;
    }
    acc / (1.0 - alpha)
}

pub fn rho_top_mass(values: &[f64], m: &RiskMeasure) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (1.0 - m.lambda()) * mean + m.lambda() * cvar_top_mass(values, m.alpha())
}

/// Uniform state inside the storage bounds, with lags between zero and
/// twice the largest lag of the initial state (at least 30).
pub fn random_state<R: Rng>(case: &SystemCase, rng: &mut R) -> StateVector {
    let top = case.hydros.iter().flat_map(|h| h.initial_inflows.iter().copied()).fold(30.0f64, |m, v| m.max(2.0 * v));
    StateVector {
        storages: case.hydros.iter().map(|h| rng.gen_range(0.0..=h.max_storage)).collect(),
        inflow_lags: case
            .hydros
            .iter()
            .map(|h| (0..h.ar_coefficients.len()).map(|_| rng.gen_range(0.0..top)).collect())
            .collect(),
    }
}

/// Small cases whose full tree is cheap to solve.
pub fn small_shape(seed: u64) -> Shape {
    Shape {
        buses: 1 + (seed % 2) as usize,
        thermals: 2,
        hydros: 1 + (seed % 2) as usize,
        renewables: seed.is_multiple_of(3) as usize,
        stages: 3 + (seed % 2) as usize,
        openings: 2 + (seed % 3 == 1) as usize,
        max_lag: 1,
        dispersion: 0.8,
    }
}
