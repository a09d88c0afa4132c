//! Multicut batched SDDP.
//!
//! Each iteration samples a batch of forward paths through the lattice, records
//! the first-stage objective as the lower bound and the mean path cost as the
//! upper-bound estimate, then walks the stages backwards adding one cut per
//! (path, opening) pair. Under risk-adjusted sampling, the opening of stage
//! `t + 1` is drawn from the weights that the stage-`t` solution assigns to
//! its per-opening cost-to-go values, so the path mean estimates the nested
//! risk-adjusted cost rather than the plain expectation.

mod cut;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cut::{Cut, CutPool};

use crate::error::{Error, Result};
use crate::hydrothermal::{solve_stage, StageSolution, StateVector, SystemCase};
use crate::risk::{sampling_weights_clamped, RiskMeasure, WeightVector};
use crate::scenario::{
    path_rng, sample_opening, IterationSampler, Lattice, PathRecord, PathStage, SamplerMode, PATH_CAP,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub max_iterations: usize,
    pub min_iterations: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub sampler_mode: SamplerMode,
    #[serde(rename = "risk")]
    pub measure: RiskMeasure,
    /// Extra slack in the stopping test, relative to the upper-bound mean.
    pub stop_gap_tol: f64,
    /// Multiplier of the standard error in the one-sided stopping test.
    pub ub_confidence: f64,
    /// Solve batch members on the rayon pool. Results do not depend on it.
    pub parallel: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            min_iterations: 1,
            batch_size: 10,
            seed: 0,
            sampler_mode: SamplerMode::RiskAdjusted,
            measure: RiskMeasure::risk_neutral(),
            stop_gap_tol: 0.0,
            ub_confidence: 1.96,
            parallel: true,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1".into());
        }
        if self.min_iterations == 0 || self.min_iterations > self.max_iterations {
            return bad(format!("min_iterations {} must lie in 1..={}", self.min_iterations, self.max_iterations));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.stop_gap_tol.is_finite() && self.stop_gap_tol >= 0.0) {
            return bad(format!("stop_gap_tol {} must be finite and nonnegative", self.stop_gap_tol));
        }
        if !(self.ub_confidence.is_finite() && self.ub_confidence >= 0.0) {
            return bad(format!("ub_confidence {} must be finite and nonnegative", self.ub_confidence));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpperBound {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Mean total path cost and its standard error (sample deviation over the
/// square root of the batch size, zero for one path).
pub fn upper_bound_estimate(paths: &[PathRecord]) -> Result<UpperBound> {
    if paths.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let costs: Vec<f64> = paths.iter().map(PathRecord::total_cost).collect();
    let n = costs.len() as f64;
    let mean = costs.iter().sum::<f64>() / n;
    let stderr = if costs.len() > 1 {
        let var = costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(UpperBound { mean, stderr, samples: costs.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsEntry {
    pub iteration: usize,
    pub lower_bound: f64,
    pub upper_bound: Option<UpperBound>,
    pub sampler: String,
    pub wall_ms: u64,
}

pub type BoundsLog = Vec<BoundsEntry>;

/// A dispatch model bound to its scenario lattice and risk measure.
#[derive(Debug, Clone, Copy)]
pub struct Model<'a> {
    pub case: &'a SystemCase,
    pub lattice: &'a Lattice,
    pub measure: RiskMeasure,
}

impl<'a> Model<'a> {
    pub fn new(case: &'a SystemCase, lattice: &'a Lattice, measure: RiskMeasure) -> Result<Self> {
        case.validate(lattice.stages())?;
        case.check_lattice(lattice)?;
        Ok(Self { case, lattice, measure })
    }

    pub fn stages(&self) -> usize {
        self.lattice.stages()
    }

    /// Solves stage `t` entered with `state` under opening `opening`.
    pub fn solve(&self, pool: &CutPool, t: usize, state: &StateVector, opening: usize) -> Result<StageSolution> {
        solve_stage(self.case, self.stages(), t, state, self.lattice.noise(t, opening), pool.stage(t), &self.measure)
    }

    /// First-stage objective under the current pool.
    pub fn lower_bound(&self, pool: &CutPool) -> Result<f64> {
        Ok(self.solve(pool, 0, &self.case.initial_state(), 0)?.objective)
    }

    fn next_weights(&self, sampler: IterationSampler, sol: &StageSolution) -> Result<WeightVector> {
        let openings = self.lattice.openings();
        match (sampler, &sol.betas) {
            (IterationSampler::RiskAdjusted, Some(betas)) => sampling_weights_clamped(betas, &self.measure),
            _ => Ok(WeightVector::uniform(openings)),
        }
    }

    fn forward_path(&self, pool: &CutPool, sampler: IterationSampler, rng_seed: (u64, u64, u64)) -> Result<PathRecord> {
        let mut rng = path_rng(rng_seed.0, rng_seed.1, rng_seed.2);
        let mut sol = self.solve(pool, 0, &self.case.initial_state(), 0)?;
        let mut stages = Vec::with_capacity(self.stages());
        stages.push(PathStage {
            opening: 0,
            state_out: sol.state_out.clone(),
            immediate_cost: sol.immediate_cost,
            weights: WeightVector::degenerate(1, 0),
        });
        for t in 1..self.stages() {
            let weights = self.next_weights(sampler, &sol)?;
            let opening = sample_opening(&weights, &mut rng);
            sol = self.solve(pool, t, &stages[t - 1].state_out, opening)?;
            stages.push(PathStage {
                opening,
                state_out: sol.state_out.clone(),
                immediate_cost: sol.immediate_cost,
                weights,
            });
        }
        Ok(PathRecord { stages })
    }

    /// Samples `batch` paths. Path `s` draws from its own stream, so the result
    /// does not depend on `parallel`.
    pub fn forward_pass(
        &self,
        pool: &CutPool,
        sampler: IterationSampler,
        iteration: u64,
        batch: usize,
        seed: u64,
        parallel: bool,
    ) -> Result<Vec<PathRecord>> {
        let run = |s: usize| self.forward_path(pool, sampler, (seed, iteration, s as u64));
        if parallel {
            (0..batch).into_par_iter().map(run).collect()
        } else {
            (0..batch).map(run).collect()
        }
    }

    /// Adds one cut per (path, opening) for every stage after the first,
    /// going backwards so each stage sees the cuts just built below it.
    /// Returns the number of cuts added.
    pub fn backward_pass(&self, pool: &mut CutPool, paths: &[PathRecord], parallel: bool) -> Result<usize> {
        let openings = self.lattice.openings();
        let mut added = 0;
        for t in (1..self.stages()).rev() {
            let jobs: Vec<(usize, usize)> = (0..paths.len()).flat_map(|s| (0..openings).map(move |l| (s, l))).collect();
            let snapshot: &CutPool = pool;
            let build = |&(s, l): &(usize, usize)| -> Result<(usize, Cut)> {
                let state = &paths[s].stages[t - 1].state_out;
                let sol = self.solve(snapshot, t, state, l)?;
                Ok((l, Cut::new(sol.state_dual, state.to_flat(), sol.objective)?))
            };
            let cuts: Vec<(usize, Cut)> = if parallel {
                jobs.par_iter().map(build).collect::<Result<_>>()?
            } else {
                jobs.iter().map(build).collect::<Result<_>>()?
            };
            added += cuts.len();
            for (l, cut) in cuts {
                pool.push(t - 1, l, cut);
            }
        }
        Ok(added)
    }

    /// Policy value over the whole tree: each node applies the pool, weighs its
    /// children by the weights its own cost-to-go values induce, and adds its
    /// stage cost.
    pub fn evaluate_policy_exact(&self, pool: &CutPool) -> Result<f64> {
        let paths = self.lattice.path_count();
        if paths > PATH_CAP {
            return Err(Error::TreeTooLarge { size: paths, cap: PATH_CAP });
        }
        self.node_value(pool, 0, &self.case.initial_state(), 0)
    }

    fn node_value(&self, pool: &CutPool, t: usize, state: &StateVector, opening: usize) -> Result<f64> {
        let sol = self.solve(pool, t, state, opening)?;
        let Some(betas) = &sol.betas else {
            return Ok(sol.immediate_cost);
        };
        let weights = sampling_weights_clamped(betas, &self.measure)?;
        let children: Vec<f64> =
            (0..self.lattice.openings())
                .into_par_iter()
                .map(|l| {
                    if weights.as_slice()[l] == 0.0 {
                        Ok(0.0)
                    } else {
                        self.node_value(pool, t + 1, &sol.state_out, l)
                    }
                })
                .collect::<Result<_>>()?;
        Ok(sol.immediate_cost + weights.expectation(&children))
    }

    /// Monte Carlo paths under the given sampler, on streams disjoint from
    /// those used in training.
    pub fn simulate(
        &self,
        pool: &CutPool,
        sampler: IterationSampler,
        paths: usize,
        seed: u64,
    ) -> Result<Vec<PathRecord>> {
        self.forward_pass(pool, sampler, 0, paths, seed, true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainedPolicy {
    pub fingerprint: String,
    pub config: EngineConfig,
    pub iterations: usize,
    pub lower_bound: f64,
    pub upper_bound: Option<UpperBound>,
    pub pool: CutPool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Continue,
    Converged,
    IterationLimit,
}

/// Iteration-at-a-time driver of the training loop.
pub struct Trainer<'a> {
    model: Model<'a>,
    config: EngineConfig,
    pool: CutPool,
    log: BoundsLog,
    iteration: usize,
    started: Instant,
}

impl<'a> Trainer<'a> {
    pub fn new(case: &'a SystemCase, lattice: &'a Lattice, config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let model = Model::new(case, lattice, config.measure)?;
        Ok(Self {
            model,
            config,
            pool: CutPool::new(lattice.stages(), lattice.openings()),
            log: Vec::new(),
            iteration: 0,
            started: Instant::now(),
        })
    }

    pub fn model(&self) -> &Model<'a> {
        &self.model
    }

    pub fn pool(&self) -> &CutPool {
        &self.pool
    }

    pub fn log(&self) -> &BoundsLog {
        &self.log
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Runs one iteration: forward pass, bounds, stopping test and, unless
    /// converged, the backward pass. The iteration limit of the config only
    /// decides the outcome reported; stepping further is allowed.
    pub fn step(&mut self) -> Result<StepOutcome> {
        self.iteration += 1;
        let k = self.iteration;
        let cfg = &self.config;
        let sampler = cfg.sampler_mode.sampler_for_iteration(k);
        let paths = self.model.forward_pass(&self.pool, sampler, k as u64, cfg.batch_size, cfg.seed, cfg.parallel)?;
        let lower_bound = self.model.lower_bound(&self.pool)?;
        let upper_bound =
            if cfg.sampler_mode.records_upper_bound(k) { Some(upper_bound_estimate(&paths)?) } else { None };

        let eligible = sampler == IterationSampler::RiskAdjusted || cfg.measure.lambda() == 0.0;
        let converged = k >= cfg.min_iterations
            && eligible
            && upper_bound.is_some_and(|ub| {
                lower_bound >= ub.mean - cfg.ub_confidence * ub.stderr - cfg.stop_gap_tol * ub.mean.abs()
            });
        if !converged {
            self.model.backward_pass(&mut self.pool, &paths, cfg.parallel)?;
        }

        let entry = BoundsEntry {
            iteration: k,
            lower_bound,
            upper_bound,
            sampler: sampler.name().to_string(),
            wall_ms: self.started.elapsed().as_millis() as u64,
        };
        match &entry.upper_bound {
            Some(ub) => log::info!(
                "iteration {k}: lower bound {lower_bound:.6}, upper bound {:.6} +/- {:.6}",
                ub.mean,
                ub.stderr
            ),
            None => log::info!("iteration {k}: lower bound {lower_bound:.6}"),
        }
        self.log.push(entry);

        Ok(if converged {
            StepOutcome::Converged
        } else if k >= cfg.max_iterations {
            StepOutcome::IterationLimit
        } else {
            StepOutcome::Continue
        })
    }

    /// Packages the current pool with the final lower bound and the last
    /// recorded upper-bound estimate.
    pub fn into_policy(self) -> Result<(TrainedPolicy, BoundsLog)> {
        let lower_bound = self.model.lower_bound(&self.pool)?;
        let upper_bound = self.log.iter().rev().find_map(|e| e.upper_bound);
        let policy = TrainedPolicy {
            fingerprint: crate::io::fingerprint(self.model.case, self.model.lattice)?,
            config: self.config,
            iterations: self.iteration,
            lower_bound,
            upper_bound,
            pool: self.pool,
        };
        Ok((policy, self.log))
    }
}

/// Trains until the stopping test passes or the iteration limit is reached.
pub fn train(case: &SystemCase, lattice: &Lattice, config: EngineConfig) -> Result<(TrainedPolicy, BoundsLog)> {
    let mut trainer = Trainer::new(case, lattice, config)?;
    while trainer.step()? == StepOutcome::Continue {}
    trainer.into_policy()
}
