//! CVaR and VaR over equiprobable atoms, the composite measure
//! `rho = (1 - lambda) E + lambda CVaR_alpha`, and the opening weights that
//! turn `rho` into a plain expectation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, Sense};

/// Composite risk measure `(1 - lambda) E[Y] + lambda CVaR_alpha[Y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct RiskMeasure {
    lambda: f64,
    alpha: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasure {
    lambda: f64,
    alpha: f64,
}

impl TryFrom<RawMeasure> for RiskMeasure {
    type Error = Error;
    fn try_from(raw: RawMeasure) -> Result<Self> {
        RiskMeasure::new(raw.lambda, raw.alpha)
    }
}

impl From<RiskMeasure> for RawMeasure {
    fn from(m: RiskMeasure) -> Self {
        RawMeasure { lambda: m.lambda, alpha: m.alpha }
    }
}

impl RiskMeasure {
    /// `lambda` must lie in `[0, 1]` and `alpha` in `[0, 1)`.
    pub fn new(lambda: f64, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidMeasure(format!("lambda {lambda} outside [0, 1]")));
        }
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidMeasure(format!("alpha {alpha} outside [0, 1)")));
        }
        Ok(Self { lambda, alpha })
    }

    pub fn risk_neutral() -> Self {
        Self { lambda: 0.0, alpha: 0.0 }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Objective coefficient of each per-opening value in the LP form.
    pub fn mean_coefficient(&self, openings: usize) -> f64 {
        (1.0 - self.lambda) / openings as f64
    }

    /// Objective coefficient of each excess variable in the LP form.
    pub fn excess_coefficient(&self, openings: usize) -> f64 {
        self.lambda / ((1.0 - self.alpha) * openings as f64)
    }
}

/// Probability distribution over the openings of one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn uniform(openings: usize) -> Self {
        Self(vec![1.0 / openings as f64; openings])
    }

    /// Point mass; used for the deterministic first stage.
    pub fn degenerate(openings: usize, at: usize) -> Self {
        let mut w = vec![0.0; openings];
        w[at] = 1.0;
        Self(w)
    }

    /// Accepts weights that are nonnegative and sum to one within 1e-12.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(&w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::NegativeWeight(w));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!("weights sum to {sum}")));
        }
        Ok(Self(weights))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `sum_l w_l * values_l`.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.0.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// 1-based position of the VaR atom among `len` sorted atoms.
fn var_position(len: usize, alpha: f64) -> usize {
    ((alpha * len as f64).ceil() as usize).clamp(1, len)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Smallest atom whose empirical CDF reaches `alpha`.
pub fn var_oracle(values: &[f64], alpha: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[var_position(values.len(), alpha) - 1])
}

/// `min_b { b + E[(Y - b)^+] / (1 - alpha) }`, scanning `b` over the atoms.
/// The objective is piecewise linear with breakpoints at the atoms, so the
/// scan is exact.
pub fn cvar_oracle(values: &[f64], alpha: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidMeasure(format!("alpha {alpha} outside [0, 1)")));
    }
    let n = values.len() as f64;
    let objective = |b: f64| {
        let excess: f64 = values.iter().map(|&y| (y - b).max(0.0)).sum();
        b + excess / (n * (1.0 - alpha))
    };
    Ok(values.iter().map(|&b| objective(b)).fold(f64::INFINITY, f64::min))
}

pub fn rho(values: &[f64], measure: &RiskMeasure) -> Result<f64> {
    let cvar = cvar_oracle(values, measure.alpha)?;
    Ok((1.0 - measure.lambda) * mean(values) + measure.lambda * cvar)
}

/// Optimal point of the LP form of `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoLpSolution {
    pub value: f64,
    pub z: f64,
    pub deltas: Vec<f64>,
}

/// Evaluates `rho` by solving
/// `min (1-lambda)/L sum y + lambda z + lambda/((1-alpha)L) sum delta`
/// subject to `delta_l >= y_l - z`, `delta_l >= 0`.
pub fn rho_lp(values: &[f64], measure: &RiskMeasure) -> Result<RhoLpSolution> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let l = values.len();
    let mut lp = LinearProgram::new();
    let z = lp.add_var("z", f64::NEG_INFINITY, f64::INFINITY, measure.lambda);
    let deltas: Vec<usize> =
        (0..l).map(|i| lp.add_var(format!("delta{i}"), 0.0, f64::INFINITY, measure.excess_coefficient(l))).collect();
    for (i, (&d, &y)) in deltas.iter().zip(values).enumerate() {
        lp.add_constraint(format!("excess{i}"), vec![(d, 1.0), (z, 1.0)], Sense::Ge, y);
    }
    let sol = lp::solve(&lp)?;
    sol.require_optimal()?;
    let constant = measure.mean_coefficient(l) * values.iter().sum::<f64>();
    Ok(RhoLpSolution {
        value: constant + sol.objective,
        z: sol.primal[z],
        deltas: deltas.iter().map(|&d| sol.primal[d]).collect(),
    })
}

/// Weights `w` with `sum_l w_l beta_l = rho(beta)`.
///
/// Openings are ranked by `(beta, index)`. With `nu = ceil(alpha L)` (1 when
/// `alpha = 0`), ranks above `nu` carry `(1-lambda)/L + lambda/((1-alpha)L)`,
/// rank `nu` carries `(1-lambda)/L + lambda - lambda (L-nu)/((1-alpha)L)` and
/// ranks below `nu` carry `(1-lambda)/L`.
///
/// Fails with [`Error::NegativeWeight`] if the rank-`nu` weight comes out
/// negative beyond rounding.
pub fn sampling_weights(betas: &[f64], measure: &RiskMeasure) -> Result<WeightVector> {
    let raw = raw_sampling_weights(betas, measure)?;
    let nu_weight = raw.iter().copied().fold(f64::INFINITY, f64::min);
    if nu_weight < -1e-12 {
        return Err(Error::NegativeWeight(nu_weight));
    }
    Ok(WeightVector(raw.into_iter().map(|w| w.max(0.0)).collect()))
}

/// Like [`sampling_weights`] but clamps a negative VaR-position weight to
/// zero and renormalizes instead of failing.
pub fn sampling_weights_clamped(betas: &[f64], measure: &RiskMeasure) -> Result<WeightVector> {
    match sampling_weights(betas, measure) {
        Err(Error::NegativeWeight(w)) => {
            log::warn!("clamping negative sampling weight {w:e} to zero");
            let mut raw = raw_sampling_weights(betas, measure)?;
            raw.iter_mut().for_each(|w| *w = w.max(0.0));
            let sum: f64 = raw.iter().sum();
            Ok(WeightVector(raw.into_iter().map(|w| w / sum).collect()))
        }
        other => other,
    }
}

fn raw_sampling_weights(betas: &[f64], measure: &RiskMeasure) -> Result<Vec<f64>> {
    if betas.is_empty() {
        return Err(Error::EmptyInput);
    }
    let l = betas.len();
    let lf = l as f64;
    let (lambda, alpha) = (measure.lambda, measure.alpha);
    let nu = var_position(l, alpha);

    let low = (1.0 - lambda) / lf;
    let high = low + lambda / ((1.0 - alpha) * lf);
    let at_var = low + lambda - lambda * (l - nu) as f64 / ((1.0 - alpha) * lf);

    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| betas[a].total_cmp(&betas[b]).then(a.cmp(&b)));
    let mut weights = vec![0.0; l];
    for (rank0, &opening) in order.iter().enumerate() {
        let rank = rank0 + 1;
        weights[opening] = match rank.cmp(&nu) {
            std::cmp::Ordering::Greater => high,
            std::cmp::Ordering::Equal => at_var,
            std::cmp::Ordering::Less => low,
        };
    }
    Ok(weights)
}
