use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Affine minorant `intercept + gradient . (x - anchor)` of one opening's
/// cost-to-go function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cut {
    pub gradient: Vec<f64>,
    pub anchor: Vec<f64>,
    pub intercept: f64,
}

impl Cut {
    pub fn new(gradient: Vec<f64>, anchor: Vec<f64>, intercept: f64) -> Result<Self> {
        if gradient.len() != anchor.len() {
            return Err(Error::DimensionMismatch(format!(
                "cut gradient has {} entries, anchor {}",
                gradient.len(),
                anchor.len()
            )));
        }
        if !intercept.is_finite() || gradient.iter().chain(&anchor).any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("non-finite cut coefficient".into()));
        }
        Ok(Self { gradient, anchor, intercept })
    }

    pub fn dimension(&self) -> usize {
        self.gradient.len()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.intercept + self.gradient.iter().zip(x).zip(&self.anchor).map(|((g, x), a)| g * (x - a)).sum::<f64>()
    }

    /// `intercept - gradient . anchor`, the constant of the cut row.
    pub fn offset(&self) -> f64 {
        self.intercept - self.gradient.iter().zip(&self.anchor).map(|(g, a)| g * a).sum::<f64>()
    }
}

/// Append-only multicut pool. `stage(t)[l]` holds the cuts approximating the
/// cost-to-go of opening `l` of stage `t + 1`, seen from stage `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutPool {
    cuts: Vec<Vec<Vec<Cut>>>,
}

impl CutPool {
    pub fn new(stages: usize, openings: usize) -> Self {
        Self { cuts: vec![vec![Vec::new(); openings]; stages.saturating_sub(1)] }
    }

    /// Number of stages the pool was built for.
    pub fn stages(&self) -> usize {
        self.cuts.len() + 1
    }

    pub fn openings(&self) -> usize {
        self.cuts.first().map_or(0, Vec::len)
    }

    /// Cuts visible from stage `t`; empty at the last stage.
    pub fn stage(&self, t: usize) -> &[Vec<Cut>] {
        self.cuts.get(t).map_or(&[], Vec::as_slice)
    }

    pub fn push(&mut self, t: usize, opening: usize, cut: Cut) {
        self.cuts[t][opening].push(cut);
    }

    pub fn len(&self) -> usize {
        self.cuts.iter().flatten().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &Cut)> {
        self.cuts.iter().enumerate().flat_map(|(t, per_opening)| {
            per_opening.iter().enumerate().flat_map(move |(l, cuts)| cuts.iter().map(move |c| (t, l, c)))
        })
    }

    /// Checks shape against a case: stage count, openings and state dimension.
    pub fn check_shape(&self, stages: usize, openings: usize, dimension: usize) -> Result<()> {
        if self.stages() != stages || (stages > 1 && self.openings() != openings) {
            return Err(Error::DimensionMismatch(format!(
                "cut pool is {}x{}, case is {}x{}",
                self.stages(),
                self.openings(),
                stages,
                openings
            )));
        }
        if let Some((t, l, c)) = self.iter().find(|(_, _, c)| c.dimension() != dimension || c.anchor.len() != dimension)
        {
            return Err(Error::DimensionMismatch(format!(
                "cut at stage {t} opening {l} has dimension {}, state has {dimension}",
                c.dimension()
            )));
        }
        Ok(())
    }
}
