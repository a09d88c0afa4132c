//! Recombining scenario lattice, autoregressive inflows, path enumeration and
//! forward-pass opening samplers.
//!
//! Stages are 0-based in code. Stage 0 is the deterministic root with a single
//! realization; every later stage has the same `L` equiprobable openings.
//!
//! Random streams: every forward path owns a `Xoshiro256**` generator seeded
//! through [`path_rng`] from `(seed, iteration, path)`, so paths can be solved
//! in any order or concurrently and still reproduce bit for bit. Each sampled
//! opening consumes exactly one `f64` draw (53-bit, `[0, 1)`), mapped through
//! the inverse CDF of the stage weights.

use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::{SplitMix64, Xoshiro256StarStar};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydrothermal::StateVector;
use crate::risk::WeightVector;

/// Default cap on the number of enumerated scenario paths.
pub const PATH_CAP: u128 = 100_000;

/// One uncertainty outcome of a stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseRealization {
    /// Additive inflow noise per hydro plant (volume).
    pub inflow: Vec<f64>,
    /// Available capacity per renewable plant (power).
    #[serde(default)]
    pub renewable: Vec<f64>,
    /// Per-bus demand override (power); the stage's base demand when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand: Option<Vec<f64>>,
}

impl NoiseRealization {
    pub fn validate(&self) -> Result<()> {
        if let Some(r) = self.renewable.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::Schema {
                path: "renewable".into(),
                message: format!("renewable capacity {r} must be finite and nonnegative"),
            });
        }
        if let Some(d) = self.demand.iter().flatten().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::Schema {
                path: "demand".into(),
                message: format!("demand {d} must be finite and nonnegative"),
            });
        }
        if let Some(e) = self.inflow.iter().find(|e| !e.is_finite()) {
            return Err(Error::Schema { path: "inflow".into(), message: format!("inflow noise {e} is not finite") });
        }
        Ok(())
    }
}

/// Stagewise-independent recombining tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLattice", into = "RawLattice")]
pub struct Lattice {
    openings: usize,
    noises: Vec<Vec<NoiseRealization>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLattice {
    stages: usize,
    openings: usize,
    noises: Vec<Vec<NoiseRealization>>,
}

impl TryFrom<RawLattice> for Lattice {
    type Error = Error;
    fn try_from(raw: RawLattice) -> Result<Self> {
        if raw.noises.len() != raw.stages {
            return Err(Error::Schema {
                path: "noises".into(),
                message: format!("{} stages declared, {} noise lists given", raw.stages, raw.noises.len()),
            });
        }
        Lattice::new(raw.openings, raw.noises)
    }
}

impl From<Lattice> for RawLattice {
    fn from(l: Lattice) -> Self {
        RawLattice { stages: l.noises.len(), openings: l.openings, noises: l.noises }
    }
}

impl Lattice {
    /// `noises[0]` must hold exactly one realization, every later stage
    /// exactly `openings`.
    pub fn new(openings: usize, noises: Vec<Vec<NoiseRealization>>) -> Result<Self> {
        let schema = |path: String, message: String| Err(Error::Schema { path, message });
        if openings == 0 {
            return schema("openings".into(), "at least one opening is required".into());
        }
        if noises.is_empty() {
            return schema("stages".into(), "at least one stage is required".into());
        }
        if noises[0].len() != 1 {
            return schema("noises[0]".into(), format!("root stage needs one realization, got {}", noises[0].len()));
        }
        for (t, stage) in noises.iter().enumerate().skip(1) {
            if stage.len() != openings {
                return schema(format!("noises[{t}]"), format!("expected {openings} openings, got {}", stage.len()));
            }
        }
        for (t, stage) in noises.iter().enumerate() {
            for (l, noise) in stage.iter().enumerate() {
                noise.validate().map_err(|e| match e {
                    Error::Schema { path, message } => {
                        Error::Schema { path: format!("noises[{t}][{l}].{path}"), message }
                    }
                    other => other,
                })?;
            }
        }
        Ok(Self { openings, noises })
    }

    pub fn stages(&self) -> usize {
        self.noises.len()
    }

    /// Openings of every non-root stage.
    pub fn openings(&self) -> usize {
        self.openings
    }

    pub fn openings_at(&self, stage: usize) -> usize {
        self.noises[stage].len()
    }

    pub fn noise(&self, stage: usize, opening: usize) -> &NoiseRealization {
        &self.noises[stage][opening]
    }

    pub fn stage_noises(&self, stage: usize) -> &[NoiseRealization] {
        &self.noises[stage]
    }

    /// Number of root-to-leaf paths, `L^(T-1)`, saturating.
    pub fn path_count(&self) -> u128 {
        (self.openings as u128).saturating_pow((self.stages() - 1) as u32)
    }

    /// Number of nodes of the expanded tree, `sum_t L^(t-1)`, saturating.
    pub fn node_count(&self) -> u128 {
        (0..self.stages()).fold(0u128, |acc, t| acc.saturating_add((self.openings as u128).saturating_pow(t as u32)))
    }
}

/// Per-hydro autoregressive inflow model
/// `a_t = sum_k phi_k a_{t-k} + noise`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArProcess {
    coefficients: Vec<Vec<f64>>,
}

impl ArProcess {
    pub fn new(coefficients: Vec<Vec<f64>>) -> Result<Self> {
        if coefficients.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Schema { path: "ar_coefficients".into(), message: "non-finite coefficient".into() });
        }
        Ok(Self { coefficients })
    }

    pub fn hydros(&self) -> usize {
        self.coefficients.len()
    }

    pub fn order(&self, hydro: usize) -> usize {
        self.coefficients[hydro].len()
    }

    pub fn max_lag(&self) -> usize {
        self.coefficients.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn coefficients(&self, hydro: usize) -> &[f64] {
        &self.coefficients[hydro]
    }

    /// Evaluates the inflow of every hydro given its recent inflows, newest
    /// first.
    pub fn inflow_transition(&self, lag_history: &[Vec<f64>], noise: &NoiseRealization) -> Result<Vec<f64>> {
        if lag_history.len() != self.hydros() || noise.inflow.len() != self.hydros() {
            return Err(Error::DimensionMismatch(format!(
                "{} hydros, {} lag histories, {} inflow noises",
                self.hydros(),
                lag_history.len(),
                noise.inflow.len()
            )));
        }
        self.coefficients
            .iter()
            .zip(lag_history)
            .zip(&noise.inflow)
            .enumerate()
            .map(|(j, ((phi, history), eps))| {
                if history.len() < phi.len() {
                    return Err(Error::InsufficientHistory { hydro: j, needed: phi.len(), got: history.len() });
                }
                Ok(phi.iter().zip(history).map(|(p, a)| p * a).sum::<f64>() + eps)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMode {
    Uniform,
    #[serde(rename = "risk")]
    RiskAdjusted,
    /// Risk-adjusted on even iterations, uniform on odd ones.
    Alternating,
}

impl SamplerMode {
    /// Sampler used on 1-based iteration `k`.
    pub fn sampler_for_iteration(self, iteration: usize) -> IterationSampler {
        match self {
            SamplerMode::Uniform => IterationSampler::Uniform,
            SamplerMode::RiskAdjusted => IterationSampler::RiskAdjusted,
            SamplerMode::Alternating if iteration.is_multiple_of(2) => IterationSampler::RiskAdjusted,
            SamplerMode::Alternating => IterationSampler::Uniform,
        }
    }

    /// Whether iteration `k` records upper-bound statistics.
    pub fn records_upper_bound(self, iteration: usize) -> bool {
        !(self == SamplerMode::Alternating && iteration % 2 == 1)
    }

    pub fn name(self) -> &'static str {
        match self {
            SamplerMode::Uniform => "uniform",
            SamplerMode::RiskAdjusted => "risk",
            SamplerMode::Alternating => "alternating",
        }
    }
}

impl std::str::FromStr for SamplerMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(SamplerMode::Uniform),
            "risk" => Ok(SamplerMode::RiskAdjusted),
            "alternating" => Ok(SamplerMode::Alternating),
            other => Err(Error::InvalidConfig(format!("unknown sampling mode `{other}`"))),
        }
    }
}

/// Sampler actually applied within one forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IterationSampler {
    Uniform,
    RiskAdjusted,
}

impl IterationSampler {
    pub fn name(self) -> &'static str {
        match self {
            IterationSampler::Uniform => "uniform",
            IterationSampler::RiskAdjusted => "risk",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathStage {
    pub opening: usize,
    pub state_out: StateVector,
    pub immediate_cost: f64,
    /// Distribution this stage's opening was drawn from (a point mass at the root).
    pub weights: WeightVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub stages: Vec<PathStage>,
}

impl PathRecord {
    pub fn total_cost(&self) -> f64 {
        self.stages.iter().map(|s| s.immediate_cost).sum()
    }

    pub fn openings(&self) -> Vec<usize> {
        self.stages.iter().map(|s| s.opening).collect()
    }
}

pub type PathRng = Xoshiro256StarStar;

fn mix(x: u64) -> u64 {
    SplitMix64::seed_from_u64(x).next_u64()
}

/// Independent stream for path `path` of iteration `iteration`:
/// `Xoshiro256StarStar::seed_from_u64(mix(mix(mix(seed) ^ iteration) ^ path))`
/// where `mix(x)` is the first output of SplitMix64 seeded with `x`.
pub fn path_rng(seed: u64, iteration: u64, path: u64) -> PathRng {
    Xoshiro256StarStar::seed_from_u64(mix(mix(mix(seed) ^ iteration) ^ path))
}

/// Draws an opening index with probability `weights[l]` by inverting the
/// cumulative distribution with one uniform draw.
pub fn sample_opening<R: RngCore>(weights: &WeightVector, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let w = weights.as_slice();
    let mut cum = 0.0;
    for (l, &p) in w.iter().enumerate() {
        cum += p;
        if u < cum {
            return l;
        }
    }
    // u landed above the rounded total: take the last opening with mass.
    w.iter().rposition(|&p| p > 0.0).unwrap_or(w.len() - 1)
}

/// All opening sequences for stages `1..T` in lexicographic order.
pub fn enumerate_paths(lattice: &Lattice, cap: u128) -> Result<Vec<Vec<usize>>> {
    let count = lattice.path_count();
    if count > cap {
        return Err(Error::TreeTooLarge { size: count, cap });
    }
    let depth = lattice.stages() - 1;
    let l = lattice.openings();
    let mut paths = Vec::with_capacity(count as usize);
    let mut current = vec![0usize; depth];
    loop {
        paths.push(current.clone());
        // odometer increment, last position fastest
        let mut k = depth;
        loop {
            if k == 0 {
                return Ok(paths);
            }
            k -= 1;
            current[k] += 1;
            if current[k] < l {
                break;
            }
            current[k] = 0;
        }
    }
}
