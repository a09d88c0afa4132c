//! Hydrothermal dispatch stage model.
//!
//! Each stage dispatches thermal, hydro and renewable plants over a transport
//! network to meet bus demand, with a penalized deficit slack per bus. Hydro
//! reservoirs follow a water balance with upstream cascades and an
//! autoregressive inflow; storages and inflow lags form the state.
//!
//! The same physics block is reused by the full-tree oracle, which links
//! stage blocks through their state copies instead of fixing them.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, Sense};
use crate::risk::RiskMeasure;
use crate::scenario::{ArProcess, Lattice, NoiseRealization};
use crate::sddp::Cut;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub name: String,
    /// Base demand per stage; a single entry applies to every stage.
    pub demand: Vec<f64>,
}

/// Transmission link usable in both directions up to `capacity`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub from: String,
    pub to: String,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thermal {
    pub name: String,
    pub bus: String,
    pub cost: f64,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hydro {
    pub name: String,
    pub bus: String,
    pub max_storage: f64,
    /// Maximum turbined volume per stage.
    pub max_turbine: f64,
    /// Power produced per unit of turbined volume.
    pub production: f64,
    /// Plants whose turbined and spilled water flows into this reservoir.
    #[serde(default)]
    pub upstream: Vec<String>,
    /// Autoregressive coefficients, lag 1 first.
    #[serde(default)]
    pub ar_coefficients: Vec<f64>,
    pub initial_storage: f64,
    /// Inflows before the first stage, newest first.
    #[serde(default)]
    pub initial_inflows: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Renewable {
    pub name: String,
    pub bus: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemCase {
    pub buses: Vec<Bus>,
    #[serde(default)]
    pub lines: Vec<Line>,
    #[serde(default)]
    pub thermals: Vec<Thermal>,
    #[serde(default)]
    pub hydros: Vec<Hydro>,
    #[serde(default)]
    pub renewables: Vec<Renewable>,
    /// Penalty per unit of unserved demand; defaults to ten times the most
    /// expensive thermal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deficit_cost: Option<f64>,
    /// Lower bound of every per-opening cost-to-go variable; defaults to 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub future_cost_floor: Option<f64>,
}

/// Reservoir storages plus, per hydro, its most recent inflows newest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateVector {
    pub storages: Vec<f64>,
    pub inflow_lags: Vec<Vec<f64>>,
}

impl StateVector {
    /// Storages followed by each hydro's lags, in hydro order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.storages.clone();
        for lags in &self.inflow_lags {
            v.extend_from_slice(lags);
        }
        v
    }

    pub fn from_flat(case: &SystemCase, flat: &[f64]) -> Result<Self> {
        if flat.len() != case.state_dimension() {
            return Err(Error::DimensionMismatch(format!(
                "flat state has {} entries, case needs {}",
                flat.len(),
                case.state_dimension()
            )));
        }
        let h = case.hydros.len();
        let mut offset = h;
        let inflow_lags = case
            .hydros
            .iter()
            .map(|hy| {
                let k = hy.ar_coefficients.len();
                let lags = flat[offset..offset + k].to_vec();
                offset += k;
                lags
            })
            .collect();
        Ok(Self { storages: flat[..h].to_vec(), inflow_lags })
    }

    pub fn dimension(&self) -> usize {
        self.storages.len() + self.inflow_lags.iter().map(Vec::len).sum::<usize>()
    }
}

impl SystemCase {
    pub fn deficit_cost(&self) -> f64 {
        self.deficit_cost.unwrap_or_else(|| {
            let max = self.thermals.iter().map(|t| t.cost).fold(0.0, f64::max);
            if max > 0.0 {
                10.0 * max
            } else {
                1.0
            }
        })
    }

    pub fn future_cost_floor(&self) -> f64 {
        self.future_cost_floor.unwrap_or(0.0)
    }

    pub fn state_dimension(&self) -> usize {
        self.hydros.len() + self.hydros.iter().map(|h| h.ar_coefficients.len()).sum::<usize>()
    }

    pub fn ar_process(&self) -> ArProcess {
        ArProcess::new(self.hydros.iter().map(|h| h.ar_coefficients.clone()).collect()).expect("coefficients validated")
    }

    pub fn initial_state(&self) -> StateVector {
        StateVector {
            storages: self.hydros.iter().map(|h| h.initial_storage).collect(),
            inflow_lags: self.hydros.iter().map(|h| h.initial_inflows[..h.ar_coefficients.len()].to_vec()).collect(),
        }
    }

    fn bus_index(&self, name: &str) -> Result<usize> {
        self.buses.iter().position(|b| b.name == name).ok_or_else(|| Error::DanglingReference(format!("bus `{name}`")))
    }

    fn hydro_index(&self, name: &str) -> Result<usize> {
        self.hydros
            .iter()
            .position(|h| h.name == name)
            .ok_or_else(|| Error::DanglingReference(format!("hydro `{name}`")))
    }

    fn demand(&self, bus: usize, stage: usize, noise: &NoiseRealization) -> f64 {
        if let Some(d) = &noise.demand {
            return d[bus];
        }
        let base = &self.buses[bus].demand;
        if base.len() == 1 {
            base[0]
        } else {
            base[stage]
        }
    }

    /// Checks references, physical bounds and the cascade graph.
    pub fn validate(&self, stages: usize) -> Result<()> {
        let schema = |path: String, message: String| Err(Error::Schema { path, message });
        let nonneg = |path: String, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::Schema { path, message: format!("{v} must be finite and nonnegative") })
            }
        };
        if self.buses.is_empty() {
            return schema("system.buses".into(), "at least one bus is required".into());
        }
        unique(self.buses.iter().map(|b| &b.name), "system.buses")?;
        unique(self.thermals.iter().map(|b| &b.name), "system.thermals")?;
        unique(self.hydros.iter().map(|b| &b.name), "system.hydros")?;
        unique(self.renewables.iter().map(|b| &b.name), "system.renewables")?;

        for (i, b) in self.buses.iter().enumerate() {
            if b.demand.len() != 1 && b.demand.len() != stages {
                return schema(
                    format!("system.buses[{i}].demand"),
                    format!("expected 1 or {stages} entries, got {}", b.demand.len()),
                );
            }
            for (t, &d) in b.demand.iter().enumerate() {
                nonneg(format!("system.buses[{i}].demand[{t}]"), d)?;
            }
        }
        for (i, l) in self.lines.iter().enumerate() {
            self.bus_index(&l.from)?;
            self.bus_index(&l.to)?;
            nonneg(format!("system.lines[{i}].capacity"), l.capacity)?;
        }
        for (i, t) in self.thermals.iter().enumerate() {
            self.bus_index(&t.bus)?;
            nonneg(format!("system.thermals[{i}].cost"), t.cost)?;
            nonneg(format!("system.thermals[{i}].capacity"), t.capacity)?;
        }
        for r in &self.renewables {
            self.bus_index(&r.bus)?;
        }
        for (i, h) in self.hydros.iter().enumerate() {
            let p = |f: &str| format!("system.hydros[{i}].{f}");
            self.bus_index(&h.bus)?;
            nonneg(p("max_storage"), h.max_storage)?;
            nonneg(p("max_turbine"), h.max_turbine)?;
            nonneg(p("production"), h.production)?;
            nonneg(p("initial_storage"), h.initial_storage)?;
            if h.initial_storage > h.max_storage {
                return schema(
                    p("initial_storage"),
                    format!("{} exceeds max_storage {}", h.initial_storage, h.max_storage),
                );
            }
            if h.initial_inflows.len() < h.ar_coefficients.len() {
                return Err(Error::InsufficientHistory {
                    hydro: i,
                    needed: h.ar_coefficients.len(),
                    got: h.initial_inflows.len(),
                });
            }
            if h.ar_coefficients.iter().chain(&h.initial_inflows).any(|v| !v.is_finite()) {
                return schema(p("ar_coefficients"), "non-finite autoregressive data".into());
            }
            for up in &h.upstream {
                self.hydro_index(up)?;
            }
        }
        self.check_acyclic()?;

        let deficit = self.deficit_cost();
        nonneg("system.deficit_cost".into(), deficit)?;
        if let Some(t) = self.thermals.iter().find(|t| t.cost >= deficit) {
            return schema(
                "system.deficit_cost".into(),
                format!("deficit cost {deficit} must exceed thermal `{}` cost {}", t.name, t.cost),
            );
        }
        if !self.future_cost_floor().is_finite() {
            return schema("system.future_cost_floor".into(), "must be finite".into());
        }
        Ok(())
    }

    fn check_acyclic(&self) -> Result<()> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        let index: HashMap<&str, usize> = self.hydros.iter().enumerate().map(|(i, h)| (h.name.as_str(), i)).collect();
        let mut marks = vec![Mark::New; self.hydros.len()];
        fn visit(case: &SystemCase, index: &HashMap<&str, usize>, marks: &mut [Mark], i: usize) -> Result<()> {
            match marks[i] {
                Mark::Done => return Ok(()),
                Mark::Active => return Err(Error::CyclicCascade(case.hydros[i].name.clone())),
                Mark::New => {}
            }
            marks[i] = Mark::Active;
            for up in &case.hydros[i].upstream {
                visit(case, index, marks, index[up.as_str()])?;
            }
            marks[i] = Mark::Done;
            Ok(())
        }
        for i in 0..self.hydros.len() {
            visit(self, &index, &mut marks, i)?;
        }
        Ok(())
    }

    /// Checks that every noise realization matches the case dimensions.
    pub fn check_lattice(&self, lattice: &Lattice) -> Result<()> {
        for t in 0..lattice.stages() {
            for (l, noise) in lattice.stage_noises(t).iter().enumerate() {
                let path = format!("lattice.noises[{t}][{l}]");
                let mismatch = |field: &str, want: usize, got: usize| Error::Schema {
                    path: format!("{path}.{field}"),
                    message: format!("expected {want} entries, got {got}"),
                };
                if noise.inflow.len() != self.hydros.len() {
                    return Err(mismatch("inflow", self.hydros.len(), noise.inflow.len()));
                }
                if noise.renewable.len() != self.renewables.len() {
                    return Err(mismatch("renewable", self.renewables.len(), noise.renewable.len()));
                }
                if let Some(d) = &noise.demand {
                    if d.len() != self.buses.len() {
                        return Err(mismatch("demand", self.buses.len(), d.len()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn check_state(&self, state: &StateVector) -> Result<()> {
        let ok = state.storages.len() == self.hydros.len()
            && state.inflow_lags.len() == self.hydros.len()
            && state.inflow_lags.iter().zip(&self.hydros).all(|(l, h)| l.len() == h.ar_coefficients.len());
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "state has {} storages and lags {:?}; case has {} hydros",
                state.storages.len(),
                state.inflow_lags.iter().map(Vec::len).collect::<Vec<_>>(),
                self.hydros.len()
            )))
        }
    }
}

fn unique<'a>(names: impl Iterator<Item = &'a String>, path: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(Error::Schema { path: path.into(), message: format!("duplicate name `{n}`") });
        }
    }
    Ok(())
}

/// Column indices of one stage's physics inside a larger program.
#[derive(Debug, Clone)]
pub struct PhysicsBlock {
    /// Immediate cost as a linear expression.
    pub cost_terms: Vec<(usize, f64)>,
    /// Free copy variables of the incoming state, flat order.
    pub state_in: Vec<usize>,
    /// Variables holding the outgoing state, flat order.
    pub state_out: Vec<usize>,
    pub turbine: Vec<usize>,
    pub spill: Vec<usize>,
    pub inflow: Vec<usize>,
}

/// Adds dispatch variables and rows for one stage, with free copies of the
/// incoming state left for the caller to pin. Immediate-cost variables get
/// objective coefficient `cost_scale * unit cost`; labels start with `prefix`.
pub fn add_physics(
    lp: &mut LinearProgram,
    case: &SystemCase,
    stage: usize,
    noise: &NoiseRealization,
    cost_scale: f64,
    prefix: &str,
) -> Result<PhysicsBlock> {
    let nb = case.buses.len();
    let mut balance: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nb];
    let mut cost_terms = Vec::new();

    let mut state_in = Vec::with_capacity(case.state_dimension());
    let storage_copy: Vec<usize> = case
        .hydros
        .iter()
        .map(|h| lp.add_var(format!("{prefix}storage_in[{}]", h.name), f64::NEG_INFINITY, f64::INFINITY, 0.0))
        .collect();
    state_in.extend(&storage_copy);
    let lag_copy: Vec<Vec<usize>> = case
        .hydros
        .iter()
        .map(|h| {
            (0..h.ar_coefficients.len())
                .map(|k| lp.add_var(format!("{prefix}lag_in[{}][{k}]", h.name), f64::NEG_INFINITY, f64::INFINITY, 0.0))
                .collect()
        })
        .collect();
    for lags in &lag_copy {
        state_in.extend(lags);
    }

    for th in &case.thermals {
        let g = lp.add_var(format!("{prefix}thermal[{}]", th.name), 0.0, th.capacity, cost_scale * th.cost);
        cost_terms.push((g, th.cost));
        balance[case.bus_index(&th.bus)?].push((g, 1.0));
    }
    for (j, rn) in case.renewables.iter().enumerate() {
        let r = lp.add_var(format!("{prefix}renewable[{}]", rn.name), 0.0, noise.renewable[j], 0.0);
        balance[case.bus_index(&rn.bus)?].push((r, 1.0));
    }
    for (k, line) in case.lines.iter().enumerate() {
        let (a, b) = (case.bus_index(&line.from)?, case.bus_index(&line.to)?);
        let fwd = lp.add_var(format!("{prefix}flow[{k}]+"), 0.0, line.capacity, 0.0);
        let bwd = lp.add_var(format!("{prefix}flow[{k}]-"), 0.0, line.capacity, 0.0);
        balance[a].push((fwd, -1.0));
        balance[a].push((bwd, 1.0));
        balance[b].push((fwd, 1.0));
        balance[b].push((bwd, -1.0));
    }
    let deficit_cost = case.deficit_cost();
    for (n, bus) in case.buses.iter().enumerate() {
        let d = lp.add_var(format!("{prefix}deficit[{}]", bus.name), 0.0, f64::INFINITY, cost_scale * deficit_cost);
        cost_terms.push((d, deficit_cost));
        balance[n].push((d, 1.0));
    }

    let nh = case.hydros.len();
    let mut turbine = Vec::with_capacity(nh);
    let mut spill = Vec::with_capacity(nh);
    let mut storage_out = Vec::with_capacity(nh);
    let mut inflow = Vec::with_capacity(nh);
    for h in &case.hydros {
        turbine.push(lp.add_var(format!("{prefix}turbine[{}]", h.name), 0.0, h.max_turbine, 0.0));
        spill.push(lp.add_var(format!("{prefix}spill[{}]", h.name), 0.0, f64::INFINITY, 0.0));
        storage_out.push(lp.add_var(format!("{prefix}storage_out[{}]", h.name), 0.0, h.max_storage, 0.0));
        inflow.push(lp.add_var(format!("{prefix}inflow[{}]", h.name), f64::NEG_INFINITY, f64::INFINITY, 0.0));
    }
    for (j, h) in case.hydros.iter().enumerate() {
        balance[case.bus_index(&h.bus)?].push((turbine[j], h.production));
    }

    for (n, terms) in balance.into_iter().enumerate() {
        let demand = case.demand(n, stage, noise);
        lp.add_constraint(format!("{prefix}balance[{}]", case.buses[n].name), terms, Sense::Eq, demand);
    }
    for (j, h) in case.hydros.iter().enumerate() {
        let mut terms =
            vec![(storage_out[j], 1.0), (storage_copy[j], -1.0), (turbine[j], 1.0), (spill[j], 1.0), (inflow[j], -1.0)];
        for up in &h.upstream {
            let u = case.hydro_index(up)?;
            terms.push((turbine[u], -1.0));
            terms.push((spill[u], -1.0));
        }
        lp.add_constraint(format!("{prefix}mass[{}]", h.name), terms, Sense::Eq, 0.0);

        let mut terms = vec![(inflow[j], 1.0)];
        for (k, &phi) in h.ar_coefficients.iter().enumerate() {
            terms.push((lag_copy[j][k], -phi));
        }
        lp.add_constraint(format!("{prefix}inflow_ar[{}]", h.name), terms, Sense::Eq, noise.inflow[j]);
    }

    let mut state_out = storage_out;
    for (j, lags) in lag_copy.iter().enumerate() {
        if !lags.is_empty() {
            state_out.push(inflow[j]);
            state_out.extend(&lags[..lags.len() - 1]);
        }
    }
    Ok(PhysicsBlock { cost_terms, state_in, state_out, turbine, spill, inflow })
}

/// Stage program plus the indices needed to read its solution.
#[derive(Debug, Clone)]
pub struct StageLp {
    pub lp: LinearProgram,
    /// Row index of each state-copy row, flat state order.
    pub state_rows: Vec<usize>,
    pub state_out: Vec<usize>,
    pub cost_terms: Vec<(usize, f64)>,
    /// Per-opening cost-to-go variables; empty at the last stage.
    pub betas: Vec<usize>,
    pub turbine: Vec<usize>,
    pub spill: Vec<usize>,
    pub inflow: Vec<usize>,
}

/// Builds the multicut stage program: physics, state copies fixed to
/// `state_in`, and (before the last stage) one epigraph variable per opening
/// bounded below by its cuts and aggregated through the LP form of the risk
/// measure.
pub fn build_stage_lp(
    case: &SystemCase,
    stages: usize,
    t: usize,
    state_in: &StateVector,
    noise: &NoiseRealization,
    cuts: &[Vec<Cut>],
    measure: &RiskMeasure,
) -> Result<StageLp> {
    if t >= stages {
        return Err(Error::DimensionMismatch(format!("stage {t} outside horizon of {stages}")));
    }
    case.check_state(state_in)?;
    let mut lp = LinearProgram::new();
    let block = add_physics(&mut lp, case, t, noise, 1.0, "")?;

    let flat = state_in.to_flat();
    let state_rows = block
        .state_in
        .iter()
        .zip(&flat)
        .enumerate()
        .map(|(k, (&var, &value))| lp.add_constraint(format!("state_copy[{k}]"), vec![(var, 1.0)], Sense::Eq, value))
        .collect();

    let mut betas = Vec::new();
    if t + 1 < stages && !cuts.is_empty() {
        let openings = cuts.len();
        let floor = case.future_cost_floor();
        let lambda = measure.lambda();
        betas = (0..openings)
            .map(|l| lp.add_var(format!("beta[{l}]"), floor, f64::INFINITY, measure.mean_coefficient(openings)))
            .collect();
        if lambda > 0.0 {
            let z = lp.add_var("cvar_z", f64::NEG_INFINITY, f64::INFINITY, lambda);
            for (l, &beta) in betas.iter().enumerate() {
                let delta = lp.add_var(format!("delta[{l}]"), 0.0, f64::INFINITY, measure.excess_coefficient(openings));
                lp.add_constraint(format!("cvar[{l}]"), vec![(delta, 1.0), (beta, -1.0), (z, 1.0)], Sense::Ge, 0.0);
            }
        }
        let dim = block.state_out.len();
        for (l, opening_cuts) in cuts.iter().enumerate() {
            for cut in opening_cuts {
                if cut.dimension() != dim {
                    return Err(Error::DimensionMismatch(format!(
                        "cut dimension {} differs from state dimension {dim}",
                        cut.dimension()
                    )));
                }
                let mut terms = Vec::with_capacity(dim + 1);
                terms.push((betas[l], 1.0));
                for (&var, &g) in block.state_out.iter().zip(&cut.gradient) {
                    if g != 0.0 {
                        terms.push((var, -g));
                    }
                }
                lp.add_constraint("", terms, Sense::Ge, cut.offset());
            }
        }
    }

    Ok(StageLp {
        lp,
        state_rows,
        state_out: block.state_out,
        cost_terms: block.cost_terms,
        betas,
        turbine: block.turbine,
        spill: block.spill,
        inflow: block.inflow,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSolution {
    pub objective: f64,
    /// Thermal and deficit cost of the stage alone.
    pub immediate_cost: f64,
    pub state_out: StateVector,
    /// Derivative of the objective with respect to each incoming state entry.
    pub state_dual: Vec<f64>,
    /// Per-opening cost-to-go at the chosen outgoing state; `None` at the
    /// last stage.
    pub betas: Option<Vec<f64>>,
    pub turbine: Vec<f64>,
    pub spill: Vec<f64>,
    pub inflow: Vec<f64>,
}

/// Solves one stage. `betas` are the cut envelopes (floored) evaluated at the
/// optimal outgoing state, which coincide with the epigraph variables at any
/// optimum where those variables carry positive marginal cost.
pub fn solve_stage(
    case: &SystemCase,
    stages: usize,
    t: usize,
    state_in: &StateVector,
    noise: &NoiseRealization,
    cuts: &[Vec<Cut>],
    measure: &RiskMeasure,
) -> Result<StageSolution> {
    let stage = build_stage_lp(case, stages, t, state_in, noise, cuts, measure)?;
    let sol = lp::solve(&stage.lp)?;
    if !sol.is_optimal() {
        return Err(Error::StageInfeasible { stage: t, status: sol.status });
    }
    let flat_out: Vec<f64> = stage.state_out.iter().map(|&v| sol.primal[v]).collect();
    let immediate_cost = stage.cost_terms.iter().map(|&(v, c)| c * sol.primal[v]).sum();
    let betas = if t + 1 < stages {
        let floor = case.future_cost_floor();
        let openings = cuts.len().max(1);
        Some(
            (0..openings)
                .map(|l| cuts.get(l).into_iter().flatten().map(|c| c.evaluate(&flat_out)).fold(floor, f64::max))
                .collect(),
        )
    } else {
        None
    };
    Ok(StageSolution {
        objective: sol.objective,
        immediate_cost,
        state_out: StateVector::from_flat(case, &flat_out)?,
        state_dual: stage.state_rows.iter().map(|&r| sol.duals[r]).collect(),
        betas,
        turbine: stage.turbine.iter().map(|&v| sol.primal[v]).collect(),
        spill: stage.spill.iter().map(|&v| sol.primal[v]).collect(),
        inflow: stage.inflow.iter().map(|&v| sol.primal[v]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn thermal_case(demand: f64, cost: f64, cap: f64) -> SystemCase {
        SystemCase {
            buses: vec![Bus { name: "n".into(), demand: vec![demand] }],
            lines: vec![],
            thermals: vec![Thermal { name: "g".into(), bus: "n".into(), cost, capacity: cap }],
            hydros: vec![],
            renewables: vec![],
            deficit_cost: None,
            future_cost_floor: None,
        }
    }

    fn no_noise(hydros: usize) -> NoiseRealization {
        NoiseRealization { inflow: vec![0.0; hydros], renewable: vec![], demand: None }
    }

    fn empty_state(hydros: usize) -> StateVector {
        StateVector { storages: vec![0.0; hydros], inflow_lags: vec![vec![]; hydros] }
    }

    fn hydro(name: &str, storage: f64) -> Hydro {
        Hydro {
            name: name.into(),
            bus: "n".into(),
            max_storage: storage.max(10.0),
            max_turbine: 10.0,
            production: 1.0,
            upstream: vec![],
            ar_coefficients: vec![],
            initial_storage: storage,
            initial_inflows: vec![],
        }
    }

    #[test]
    fn thermal_only_dispatch() {
        let case = thermal_case(10.0, 2.0, 15.0);
        let risk = RiskMeasure::risk_neutral();
        let sol = solve_stage(&case, 1, 0, &empty_state(0), &no_noise(0), &[], &risk).unwrap();
        assert!((sol.objective - 20.0).abs() < 1e-12);
        assert!((sol.immediate_cost - 20.0).abs() < 1e-12);
        assert!(sol.betas.is_none());
    }

    #[test]
    fn zero_demand_costs_nothing() {
        let case = thermal_case(0.0, 2.0, 15.0);
        let sol = solve_stage(&case, 1, 0, &empty_state(0), &no_noise(0), &[], &RiskMeasure::risk_neutral()).unwrap();
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn hydro_covers_demand_for_free() {
        let mut case = thermal_case(10.0, 2.0, 15.0);
        case.hydros.push(hydro("h", 10.0));
        let state = case.initial_state();
        let sol = solve_stage(&case, 1, 0, &state, &no_noise(1), &[], &RiskMeasure::risk_neutral()).unwrap();
        assert!(sol.objective.abs() < 1e-12);
        assert!(sol.state_out.storages[0].abs() < 1e-12);
    }

    #[test]
    fn deficit_slack_prices_shortage() {
        let mut case = thermal_case(100.0, 1.0, 10.0);
        case.deficit_cost = Some(50.0);
        let sol = solve_stage(&case, 1, 0, &empty_state(0), &no_noise(0), &[], &RiskMeasure::risk_neutral()).unwrap();
        assert!((sol.immediate_cost - 4510.0).abs() < 1e-9);
    }

    #[test]
    fn single_cut_forces_beta() {
        // one opening, one cut with slope -3 on storage: beta = 30 - 3 v_out
        let mut case = thermal_case(0.0, 2.0, 15.0);
        case.hydros.push(hydro("h", 6.0));
        let state = case.initial_state();
        let cut = Cut::new(vec![-3.0], vec![0.0], 30.0).unwrap();
        let pool = vec![vec![cut]];
        let sol = solve_stage(&case, 2, 0, &state, &no_noise(1), &pool, &RiskMeasure::risk_neutral()).unwrap();
        // keep all water: v_out = 6, beta = 12
        assert!((sol.state_out.storages[0] - 6.0).abs() < 1e-9);
        assert_eq!(sol.betas.as_deref(), Some(&[12.0][..]));
        assert!((sol.objective - (sol.immediate_cost + 12.0)).abs() < 1e-9);
        // the marginal value of stored water is the cut slope
        assert!((sol.state_dual[0] + 3.0).abs() < 1e-9);
    }

    #[test]
    fn cascade_and_lags_balance_water() {
        let mut case = thermal_case(25.0, 3.0, 30.0);
        let mut up = hydro("up", 5.0);
        up.ar_coefficients = vec![0.5, 0.25];
        up.initial_inflows = vec![4.0, 8.0];
        let mut down = hydro("down", 2.0);
        down.upstream = vec!["up".into()];
        case.hydros = vec![up, down];
        case.validate(1).unwrap();
        let state = case.initial_state();
        let noise = NoiseRealization { inflow: vec![1.0, 2.0], renewable: vec![], demand: None };
        let sol = solve_stage(&case, 1, 0, &state, &noise, &[], &RiskMeasure::risk_neutral()).unwrap();
        assert!((sol.inflow[0] - 5.0).abs() < 1e-12);
        assert_eq!(sol.state_out.inflow_lags[0].len(), 2);
        assert!((sol.state_out.inflow_lags[0][0] - 5.0).abs() < 1e-12);
        assert!((sol.state_out.inflow_lags[0][1] - 4.0).abs() < 1e-12);
        for j in 0..2 {
            let upstream: f64 = case.hydros[j]
                .upstream
                .iter()
                .map(|n| {
                    let u = case.hydros.iter().position(|h| &h.name == n).unwrap();
                    sol.turbine[u] + sol.spill[u]
                })
                .sum();
            let residual = sol.state_out.storages[j] - state.storages[j] + sol.turbine[j] + sol.spill[j]
                - upstream
                - sol.inflow[j];
            assert!(residual.abs() < 1e-9);
        }
    }

    #[test]
    fn network_moves_power_between_buses() {
        let case = SystemCase {
            buses: vec![Bus { name: "a".into(), demand: vec![0.0] }, Bus { name: "b".into(), demand: vec![8.0] }],
            lines: vec![Line { from: "a".into(), to: "b".into(), capacity: 5.0 }],
            thermals: vec![
                Thermal { name: "cheap".into(), bus: "a".into(), cost: 1.0, capacity: 100.0 },
                Thermal { name: "dear".into(), bus: "b".into(), cost: 4.0, capacity: 100.0 },
            ],
            hydros: vec![],
            renewables: vec![Renewable { name: "wind".into(), bus: "b".into() }],
            deficit_cost: None,
            future_cost_floor: None,
        };
        let noise = NoiseRealization { inflow: vec![], renewable: vec![1.0], demand: None };
        let sol = solve_stage(&case, 1, 0, &empty_state(0), &noise, &[], &RiskMeasure::risk_neutral()).unwrap();
        // 1 from wind, 5 over the line at cost 1, 2 local at cost 4
        assert!((sol.immediate_cost - 13.0).abs() < 1e-9);
    }

    #[test]
    fn validation_errors() {
        let mut case = thermal_case(1.0, 2.0, 3.0);
        case.hydros.push(hydro("h", 1.0));
        case.hydros[0].upstream = vec!["h".into()];
        assert!(matches!(case.validate(1), Err(Error::CyclicCascade(n)) if n == "h"));
        case.hydros[0].upstream = vec!["ghost".into()];
        assert!(matches!(case.validate(1), Err(Error::DanglingReference(_))));
        case.hydros[0].upstream.clear();
        case.hydros[0].bus = "nowhere".into();
        assert!(matches!(case.validate(1), Err(Error::DanglingReference(_))));
        case.hydros[0].bus = "n".into();
        case.deficit_cost = Some(1.0);
        assert!(matches!(case.validate(1), Err(Error::Schema { .. })));
        case.deficit_cost = None;
        case.validate(1).unwrap();
        assert!(case.validate(3).is_ok());
        case.buses[0].demand = vec![1.0, 2.0];
        assert!(case.validate(3).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let case = thermal_case(1.0, 2.0, 3.0);
        let bad = empty_state(1);
        assert!(matches!(
            build_stage_lp(&case, 1, 0, &bad, &no_noise(0), &[], &RiskMeasure::risk_neutral()),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
