//! Bounded-variable revised simplex with a product-form basis inverse.
//!
//! Every row `i` gets a logical variable `r_i = a_i . x` whose bounds encode
//! the row sense, so the working system is `A x - r = 0` with bounds on all
//! `n + m` columns. The all-logical basis is `-I`; the basis inverse is kept as
//! a sequence of eta matrices on top of it and rebuilt periodically.
//!
//! Phase one minimizes the sum of bound violations of the basic variables,
//! phase two the true objective. Pricing is Dantzig's rule with a two-pass
//! Harris ratio test; after a run of degenerate pivots the solver switches to
//! Bland's rule until the objective moves again.

use super::{LinearProgram, LpSolution, Sense, Status, TOL_FEAS, TOL_OPT};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub tol_feas: f64,
    pub tol_opt: f64,
    /// Pivot magnitudes below this are never chosen in the ratio test.
    pub tol_pivot: f64,
    /// Number of consecutive degenerate pivots before switching to Bland's rule.
    pub stall_threshold: usize,
    /// Rebuild the basis inverse after this many eta updates.
    pub refactor_interval: usize,
    /// Hard iteration cap; `None` derives one from the problem size.
    pub max_iterations: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_feas: TOL_FEAS,
            tol_opt: TOL_OPT,
            tol_pivot: 1e-9,
            stall_threshold: 50,
            refactor_interval: 100,
            max_iterations: None,
        }
    }
}

const DROP_TOL: f64 = 1e-14;

struct Eta {
    row: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

pub(super) struct Simplex<'a> {
    opts: &'a SolverOptions,
    m: usize,
    n: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    /// Basis position of each column, `usize::MAX` when nonbasic.
    pos: Vec<usize>,
    etas: Vec<Eta>,
    /// Length of the eta file right after the last reinversion.
    factor_len: usize,
}

enum Pricing {
    Optimal,
    Enter { var: usize, dir: f64 },
}

impl<'a> Simplex<'a> {
    pub(super) fn new(lp: &LinearProgram, opts: &'a SolverOptions) -> Self {
        let n = lp.num_vars();
        let m = lp.num_rows();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in lp.rows().iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a == 0.0 {
                    continue;
                }
                match cols[j].last_mut() {
                    Some((r, v)) if *r == i => *v += a,
                    _ => cols[j].push((i, a)),
                }
            }
        }
        for col in &mut cols {
            // duplicates that are not adjacent
            col.sort_by_key(|&(i, _)| i);
            col.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
        }

        let mut cost = lp.objective().to_vec();
        let mut lo = lp.lower().to_vec();
        let mut hi = lp.upper().to_vec();
        for row in lp.rows() {
            cost.push(0.0);
            let (l, h) = match row.sense {
                Sense::Le => (f64::NEG_INFINITY, row.rhs),
                Sense::Ge => (row.rhs, f64::INFINITY),
                Sense::Eq => (row.rhs, row.rhs),
            };
            lo.push(l);
            hi.push(h);
        }

        let mut x = vec![0.0; n + m];
        for j in 0..n {
            x[j] = initial_value(lo[j], hi[j]);
        }
        let basis: Vec<usize> = (n..n + m).collect();
        let mut pos = vec![usize::MAX; n + m];
        for (p, &v) in basis.iter().enumerate() {
            pos[v] = p;
        }
        let mut s = Self { opts, m, n, cols, cost, lo, hi, x, basis, pos, etas: Vec::new(), factor_len: 0 };
        s.recompute_basic_values();
        s
    }

    /// `B^{-1} v` for a dense vector in row space.
    fn ftran(&self, v: &mut [f64]) {
        for e in v.iter_mut() {
            *e = -*e;
        }
        for eta in &self.etas {
            let vr = v[eta.row];
            if vr == 0.0 {
                continue;
            }
            let vr = vr / eta.pivot;
            v[eta.row] = vr;
            for &(i, a) in &eta.entries {
                v[i] -= a * vr;
            }
        }
    }

    /// `c^T B^{-1}` for a dense vector indexed by basis position.
    fn btran(&self, c: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut acc = c[eta.row];
            for &(i, a) in &eta.entries {
                acc -= a * c[i];
            }
            c[eta.row] = acc / eta.pivot;
        }
        for e in c.iter_mut() {
            *e = -*e;
        }
    }

    fn column(&self, var: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.m];
        if var < self.n {
            for &(i, a) in &self.cols[var] {
                v[i] = a;
            }
        } else {
            v[var - self.n] = -1.0;
        }
        v
    }

    fn push_eta(&mut self, row: usize, alpha: &[f64]) {
        let entries =
            alpha.iter().enumerate().filter(|&(i, a)| i != row && a.abs() > DROP_TOL).map(|(i, &a)| (i, a)).collect();
        self.etas.push(Eta { row, pivot: alpha[row], entries });
    }

    fn recompute_basic_values(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for var in 0..self.n + self.m {
            if self.pos[var] != usize::MAX || self.x[var] == 0.0 {
                continue;
            }
            let xv = self.x[var];
            if var < self.n {
                for &(i, a) in &self.cols[var] {
                    rhs[i] -= a * xv;
                }
            } else {
                rhs[var - self.n] += xv;
            }
        }
        self.ftran(&mut rhs);
        for (p, &var) in self.basis.iter().enumerate() {
            self.x[var] = rhs[p];
        }
    }

    /// Rebuilds the eta file from the all-logical basis. Structural columns
    /// that turn out numerically dependent are dropped back to a bound and
    /// replaced by logicals.
    fn reinvert(&mut self) {
        let mut structurals: Vec<usize> = self.basis.iter().copied().filter(|&v| v < self.n).collect();
        structurals.sort_by_key(|&v| (self.cols[v].len(), v));
        let keep_logical: Vec<bool> = (0..self.m).map(|i| self.pos[self.n + i] != usize::MAX).collect();

        self.etas.clear();
        for v in 0..self.n + self.m {
            self.pos[v] = usize::MAX;
        }
        for i in 0..self.m {
            self.basis[i] = self.n + i;
            self.pos[self.n + i] = i;
        }
        for var in structurals {
            let mut alpha = self.column(var);
            self.ftran(&mut alpha);
            let scale = alpha.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            let mut best: Option<(usize, f64)> = None;
            for (p, &a) in alpha.iter().enumerate() {
                let occupant = self.basis[p];
                if occupant < self.n || keep_logical[occupant - self.n] {
                    continue;
                }
                if best.is_none_or(|(_, b)| a.abs() > b) {
                    best = Some((p, a.abs()));
                }
            }
            match best {
                Some((p, mag)) if mag > self.opts.tol_pivot * scale.max(1.0) => {
                    self.push_eta(p, &alpha);
                    let old = self.basis[p];
                    self.pos[old] = usize::MAX;
                    self.basis[p] = var;
                    self.pos[var] = p;
                }
                _ => {
                    self.x[var] = nearest_bound(self.x[var], self.lo[var], self.hi[var]);
                }
            }
        }
        // Logicals that left the basis during reinversion sit at a bound.
        for i in 0..self.m {
            let v = self.n + i;
            if self.pos[v] == usize::MAX {
                self.x[v] = nearest_bound(self.x[v], self.lo[v], self.hi[v]);
            }
        }
        self.factor_len = self.etas.len();
        self.recompute_basic_values();
    }

    fn infeasibility(&self, var: usize) -> f64 {
        let x = self.x[var];
        if x < self.lo[var] - self.opts.tol_feas {
            -1.0
        } else if x > self.hi[var] + self.opts.tol_feas {
            1.0
        } else {
            0.0
        }
    }

    fn price(&self, y: &[f64], phase_one: bool, bland: bool) -> Pricing {
        let mut best: Option<(usize, f64, f64)> = None;
        for var in 0..self.n + self.m {
            if self.pos[var] != usize::MAX {
                continue;
            }
            let (lo, hi, x) = (self.lo[var], self.hi[var], self.x[var]);
            if lo == hi {
                continue;
            }
            let c = if phase_one { 0.0 } else { self.cost[var] };
            let d = if var < self.n {
                c - self.cols[var].iter().map(|&(i, a)| a * y[i]).sum::<f64>()
            } else {
                c + y[var - self.n]
            };
            let dir = if d < -self.opts.tol_opt && x < hi {
                1.0
            } else if d > self.opts.tol_opt && x > lo {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Pricing::Enter { var, dir };
            }
            if best.is_none_or(|(_, b, _)| d.abs() > b) {
                best = Some((var, d.abs(), dir));
            }
        }
        match best {
            Some((var, _, dir)) => Pricing::Enter { var, dir },
            None => Pricing::Optimal,
        }
    }

    /// Returns `(position, step, target)` of the blocking basic variable, or
    /// `None` when no basic variable limits the step.
    fn ratio_test(&self, alpha: &[f64], dir: f64, bland: bool) -> Option<(usize, f64, f64)> {
        let tol = self.opts.tol_feas;
        let scale = alpha.iter().fold(0.0f64, |m, a| m.max(a.abs())).max(1.0);
        let piv = self.opts.tol_pivot * scale;
        let mut candidates: Vec<(usize, f64, f64, f64)> = Vec::new();
        for (p, &a) in alpha.iter().enumerate() {
            if a.abs() <= piv {
                continue;
            }
            let var = self.basis[p];
            let rate = -dir * a;
            let (x, lo, hi) = (self.x[var], self.lo[var], self.hi[var]);
            let target = if rate < 0.0 {
                if x > hi + tol {
                    hi
                } else if lo.is_finite() {
                    lo
                } else {
                    continue;
                }
            } else if x < lo - tol {
                lo
            } else if hi.is_finite() {
                hi
            } else {
                continue;
            };
            let exact = ((target - x) / rate).max(0.0);
            let relaxed = ((target + rate.signum() * tol - x) / rate).max(0.0);
            candidates.push((p, exact, relaxed, a.abs()));
        }
        if candidates.is_empty() {
            return None;
        }
        let chosen = if bland {
            let min = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
            candidates.iter().filter(|c| c.1 <= min + 1e-12).min_by_key(|c| self.basis[c.0]).copied()
        } else {
            let bound = candidates.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
            candidates.iter().filter(|c| c.1 <= bound).max_by(|a, b| a.3.total_cmp(&b.3)).copied()
        }?;
        let var = self.basis[chosen.0];
        let rate = -dir * alpha[chosen.0];
        let x = self.x[var];
        let target = if rate < 0.0 {
            if x > self.hi[var] + tol {
                self.hi[var]
            } else {
                self.lo[var]
            }
        } else if x < self.lo[var] - tol {
            self.lo[var]
        } else {
            self.hi[var]
        };
        Some((chosen.0, chosen.1, target))
    }

    pub(super) fn run(mut self) -> Result<LpSolution> {
        let max_iter = self.opts.max_iterations.unwrap_or(100 * (self.n + self.m) + 1000);
        let mut iterations = 0usize;
        let mut stall = 0usize;
        let mut bland = false;
        let mut fresh = true;

        loop {
            if self.etas.len() - self.factor_len >= self.opts.refactor_interval {
                self.reinvert();
                fresh = true;
            }
            let infeas: Vec<f64> = self.basis.iter().map(|&v| self.infeasibility(v)).collect();
            let phase_one = infeas.iter().any(|&s| s != 0.0);
            let mut y: Vec<f64> =
                if phase_one { infeas.clone() } else { self.basis.iter().map(|&v| self.cost[v]).collect() };
            self.btran(&mut y);

            let (var, dir) = match self.price(&y, phase_one, bland) {
                Pricing::Enter { var, dir } => (var, dir),
                Pricing::Optimal => {
                    if !fresh {
                        self.reinvert();
                        fresh = true;
                        continue;
                    }
                    if phase_one {
                        return Ok(self.finish(Status::Infeasible, iterations));
                    }
                    return Ok(self.finish(Status::Optimal, iterations));
                }
            };

            iterations += 1;
            if iterations > max_iter {
                return Err(Error::NumericalFailure(format!("no convergence after {max_iter} simplex iterations")));
            }

            let mut alpha = self.column(var);
            self.ftran(&mut alpha);
            let flip = self.hi[var] - self.lo[var];
            let block = self.ratio_test(&alpha, dir, bland);

            let step = match block {
                Some((_, step, _)) if step < flip => step,
                _ if flip.is_finite() => flip,
                _ => {
                    if phase_one {
                        return Err(Error::NumericalFailure("unbounded direction in the feasibility phase".into()));
                    }
                    return Ok(self.finish(Status::Unbounded, iterations));
                }
            };

            if step <= 1e-12 {
                stall += 1;
                if stall > self.opts.stall_threshold {
                    bland = true;
                }
            } else {
                stall = 0;
                bland = false;
            }

            for (p, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    let bv = self.basis[p];
                    self.x[bv] -= dir * step * a;
                }
            }
            fresh = false;
            match block {
                Some((p, s, target)) if s < flip => {
                    let leaving = self.basis[p];
                    self.x[var] += dir * step;
                    self.x[leaving] = target;
                    self.push_eta(p, &alpha);
                    self.pos[leaving] = usize::MAX;
                    self.basis[p] = var;
                    self.pos[var] = p;
                }
                _ => {
                    self.x[var] = if dir > 0.0 { self.hi[var] } else { self.lo[var] };
                }
            }
        }
    }

    fn finish(&self, status: Status, iterations: usize) -> LpSolution {
        let primal = self.x[..self.n].to_vec();
        let objective = primal.iter().zip(&self.cost).map(|(x, c)| x * c).sum();
        let (duals, reduced_costs) = if status == Status::Optimal {
            let mut y: Vec<f64> = self.basis.iter().map(|&v| self.cost[v]).collect();
            self.btran(&mut y);
            let rc = (0..self.n)
                .map(|j| {
                    if self.pos[j] != usize::MAX {
                        0.0
                    } else {
                        self.cost[j] - self.cols[j].iter().map(|&(i, a)| a * y[i]).sum::<f64>()
                    }
                })
                .collect();
            (y, rc)
        } else {
            (vec![0.0; self.m], vec![0.0; self.n])
        };
        LpSolution { status, objective, primal, duals, reduced_costs, iterations }
    }
}

fn initial_value(lo: f64, hi: f64) -> f64 {
    if lo.is_finite() {
        lo
    } else if hi.is_finite() {
        hi
    } else {
        0.0
    }
}

fn nearest_bound(x: f64, lo: f64, hi: f64) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => {
            if (x - lo).abs() <= (hi - x).abs() {
                lo
            } else {
                hi
            }
        }
        (true, false) => lo,
        (false, true) => hi,
        (false, false) => 0.0,
    }
}
