//! Random feasible programs, an independently assembled dual objective and
//! brute-force vertex enumeration for checking the bundled simplex.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use sddp_core::lp::{solve, LinearProgram, Sense, Status};

pub struct Generated {
    pub lp: LinearProgram,
}

pub fn random_program(rng: &mut StdRng, max_vars: usize, max_rows: usize, degenerate: bool) -> Generated {
    let n = rng.gen_range(1..=max_vars);
    let m = rng.gen_range(0..=max_rows);
    let mut lp = LinearProgram::new();
    let mut x0 = Vec::with_capacity(n);
    for j in 0..n {
        let lo = rng.gen_range(-5..=0) as f64;
        let hi = lo + rng.gen_range(0..=10) as f64;
        let cost = rng.gen_range(-9..=9) as f64;
        lp.add_var(format!("x{j}"), lo, hi, cost);
        x0.push(rng.gen_range(lo as i64..=hi as i64) as f64);
    }
    for i in 0..m {
        let coeffs: Vec<(usize, f64)> =
            (0..n).map(|j| (j, rng.gen_range(-9..=9) as f64)).filter(|&(_, a)| a != 0.0).collect();
        let act: f64 = coeffs.iter().map(|&(j, a)| a * x0[j]).sum();
        let slack = if degenerate { 0.0 } else { rng.gen_range(0..=4) as f64 };
        let (sense, rhs) = match rng.gen_range(0..5) {
            0 => (Sense::Eq, act),
            1 | 2 => (Sense::Le, act + slack),
            _ => (Sense::Ge, act - slack),
        };
        lp.add_constraint(format!("r{i}"), coeffs, sense, rhs);
    }
    Generated { lp }
}

/// Objective of the dual built from the reported row duals, after checking
/// the dual sign conditions. Returns `None` if the duals are not dual feasible.
pub fn dual_objective(lp: &LinearProgram, duals: &[f64], tol: f64) -> Option<f64> {
    let mut obj = 0.0;
    let mut reduced = lp.objective().to_vec();
    for (row, &y) in lp.rows().iter().zip(duals) {
        match row.sense {
            Sense::Ge if y < -tol => return None,
            Sense::Le if y > tol => return None,
            _ => {}
        }
        obj += y * row.rhs;
        for &(j, a) in &row.coeffs {
            reduced[j] -= y * a;
        }
    }
    for (j, &d) in reduced.iter().enumerate() {
        let (lo, hi) = (lp.lower()[j], lp.upper()[j]);
        if d > tol {
            if !lo.is_finite() {
                return None;
            }
            obj += d * lo;
        } else if d < -tol {
            if !hi.is_finite() {
                return None;
            }
            obj += d * hi;
        } else if lo.is_finite() {
            obj += d * lo;
        } else if hi.is_finite() {
            obj += d * hi;
        }
    }
    Some(obj)
}

pub fn max_violation(lp: &LinearProgram, x: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (j, &v) in x.iter().enumerate() {
        worst = worst.max(lp.lower()[j] - v).max(v - lp.upper()[j]);
    }
    for row in lp.rows() {
        let a = row.activity(x);
        let v = match row.sense {
            Sense::Le => a - row.rhs,
            Sense::Ge => row.rhs - a,
            Sense::Eq => (a - row.rhs).abs(),
        };
        worst = worst.max(v);
    }
    worst
}

/// Solves a square system by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-10 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                if f != 0.0 {
                    for k in c..n {
                        a[r][k] -= f * a[c][k];
                    }
                    b[r] -= f * b[c];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Minimum objective over all vertices of a program with a bounded box.
pub fn brute_force_optimum(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    // hyperplanes: every row, then every lower and upper bound
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for row in lp.rows() {
        let mut dense = vec![0.0; n];
        for &(j, a) in &row.coeffs {
            dense[j] += a;
        }
        planes.push((dense, row.rhs));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lp.lower()[j]));
        planes.push((e, lp.upper()[j]));
    }
    // Equality rows are enforced by the feasibility check on each candidate.
    combinations(planes.len(), n).into_iter().filter_map(|set| vertex_value(lp, &planes, &set)).min_by(f64::total_cmp)
}

fn vertex_value(lp: &LinearProgram, planes: &[(Vec<f64>, f64)], set: &[usize]) -> Option<f64> {
    let a = set.iter().map(|&i| planes[i].0.clone()).collect();
    let b = set.iter().map(|&i| planes[i].1).collect();
    let x = solve_square(a, b)?;
    if max_violation(lp, &x) > 1e-9 {
        return None;
    }
    Some(x.iter().zip(lp.objective()).map(|(x, c)| x * c).sum())
}

/// 1000 programs with up to 12 variables and rows; every fourth is
/// degenerate. Checks feasibility and the duality gap at `tol`.
pub fn strong_duality_suite(seed: u64, cases: usize, tol: f64) -> Result<(), String> {
    let mut rng = StdRng::seed_from_u64(seed);
    for case in 0..cases {
        let g = random_program(&mut rng, 12, 12, case % 4 == 3);
        let sol = solve(&g.lp).map_err(|e| format!("case {case}: {e}"))?;
        if sol.status != Status::Optimal {
            return Err(format!("case {case}: status {:?}", sol.status));
        }
        let viol = max_violation(&g.lp, &sol.primal);
        if viol > tol {
            return Err(format!("case {case}: primal violation {viol:e}"));
        }
        let dual = dual_objective(&g.lp, &sol.duals, 1e-9).ok_or(format!("case {case}: duals not dual feasible"))?;
        let gap = (sol.objective - dual).abs();
        if gap > tol {
            return Err(format!("case {case}: duality gap {gap:e}"));
        }
    }
    Ok(())
}

/// Programs with up to 5 variables and rows against vertex enumeration.
pub fn vertex_suite(seed: u64, cases: usize, tol: f64) -> Result<(), String> {
    let mut rng = StdRng::seed_from_u64(seed);
    for case in 0..cases {
        let g = random_program(&mut rng, 5, 5, case % 3 == 2);
        let sol = solve(&g.lp).map_err(|e| format!("case {case}: {e}"))?;
        let brute = brute_force_optimum(&g.lp).ok_or(format!("case {case}: enumeration found no vertex"))?;
        if sol.status != Status::Optimal || (sol.objective - brute).abs() > tol {
            return Err(format!("case {case}: simplex {:?} {} vs enumeration {brute}", sol.status, sol.objective));
        }
    }
    Ok(())
}
