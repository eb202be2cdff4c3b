//! Dense two-phase tableau simplex for `min c.x` subject to `A_ub x <= b_ub`,
//! `A_eq x = b_eq`, `x >= 0`, with nonnegative right-hand sides.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const FEASIBILITY_TOL: f64 = 1e-9;

/// Entering-variable rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PivotRule {
    /// Lowest-index improving column; never cycles.
    #[default]
    Bland,
    /// Most negative reduced cost, falling back to Bland after a run of degenerate pivots.
    Dantzig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub ub_rows: Vec<Vec<f64>>,
    pub ub_rhs: Vec<f64>,
    pub eq_rows: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize, objective: &mut [f64]) {
        let scale = self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v /= scale;
        }
        let pivot_row = self.rows[row].clone();
        for (i, r) in self.rows.iter_mut().enumerate() {
            if i != row && r[col] != 0.0 {
                let factor = r[col];
                for (v, p) in r.iter_mut().zip(&pivot_row) {
                    *v -= factor * p;
                }
            }
        }
        let factor = objective[col];
        if factor != 0.0 {
            for (v, p) in objective.iter_mut().zip(&pivot_row) {
                *v -= factor * p;
            }
        }
        self.basis[row] = col;
    }

    /// Minimizes the reduced-cost row `objective` (last entry holds `-value`) over
    /// columns `< allowed`.
    fn optimize(&mut self, objective: &mut [f64], allowed: usize, rule: PivotRule) -> Result<()> {
        let rhs = self.width;
        let mut degenerate_run = 0;
        for _ in 0..50_000 {
            let use_bland = rule == PivotRule::Bland || degenerate_run > 50;
            let entering = if use_bland {
                (0..allowed).find(|&j| objective[j] < -PIVOT_TOL)
            } else {
                (0..allowed)
                    .filter(|&j| objective[j] < -PIVOT_TOL)
                    .min_by(|&a, &b| objective[a].total_cmp(&objective[b]))
            };
            let Some(col) = entering else {
                return Ok(());
            };
            let mut leaving: Option<(usize, f64)> = None;
            for (i, r) in self.rows.iter().enumerate() {
                if r[col] > PIVOT_TOL {
                    let ratio = r[rhs] / r[col];
                    let better = match leaving {
                        None => true,
                        Some((li, lr)) => ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li]),
                    };
                    if better {
                        leaving = Some((i, ratio));
                    }
                }
            }
            let Some((row, ratio)) = leaving else {
                return Err(Error::Lp("unbounded"));
            };
            degenerate_run = if ratio.abs() <= 1e-12 { degenerate_run + 1 } else { 0 };
            self.pivot(row, col, objective);
        }
        Err(Error::Lp("not converging within the iteration limit"))
    }
}

impl LinearProgram {
    pub fn solve(&self, rule: PivotRule) -> Result<LpSolution> {
        let n = self.cost.len();
        let m_ub = self.ub_rows.len();
        let m_eq = self.eq_rows.len();
        if self.ub_rhs.iter().chain(&self.eq_rhs).any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument("right-hand sides must be nonnegative".into()));
        }
        // Columns: originals, one slack per inequality, one artificial per equality, rhs.
        let width = n + m_ub + m_eq;
        let mut rows = Vec::with_capacity(m_ub + m_eq);
        let mut basis = Vec::with_capacity(m_ub + m_eq);
        for (i, (a, &rhs)) in self.ub_rows.iter().zip(&self.ub_rhs).enumerate() {
            let mut r = vec![0.0; width + 1];
            r[..n].copy_from_slice(a);
            r[n + i] = 1.0;
            r[width] = rhs;
            rows.push(r);
            basis.push(n + i);
        }
        for (i, (a, &rhs)) in self.eq_rows.iter().zip(&self.eq_rhs).enumerate() {
            let mut r = vec![0.0; width + 1];
            r[..n].copy_from_slice(a);
            r[n + m_ub + i] = 1.0;
            r[width] = rhs;
            rows.push(r);
            basis.push(n + m_ub + i);
        }
        let mut tab = Tableau { rows, basis, width };

        // Phase 1: minimize the sum of artificials.
        let mut phase1 = vec![0.0; width + 1];
        for r in &tab.rows[m_ub..] {
            for (v, a) in phase1.iter_mut().zip(r) {
                *v -= a;
            }
        }
        for v in &mut phase1[n + m_ub..width] {
            *v = 0.0;
        }
        tab.optimize(&mut phase1, n + m_ub, rule)?;
        if -phase1[width] > FEASIBILITY_TOL {
            return Err(Error::Lp("infeasible"));
        }
        // Drive remaining artificials out of the basis where possible.
        for row in 0..tab.rows.len() {
            if tab.basis[row] >= n + m_ub {
                if let Some(col) = (0..n + m_ub).find(|&j| tab.rows[row][j].abs() > PIVOT_TOL) {
                    tab.pivot(row, col, &mut phase1);
                }
            }
        }

        // Phase 2 over original and slack columns.
        let mut phase2 = vec![0.0; width + 1];
        phase2[..n].copy_from_slice(&self.cost);
        for (row, &col) in tab.basis.iter().enumerate() {
            let c = phase2[col];
            if c != 0.0 {
                for (v, a) in phase2.iter_mut().zip(&tab.rows[row]) {
                    *v -= c * a;
                }
            }
        }
        tab.optimize(&mut phase2, n + m_ub, rule)?;

        let mut x = vec![0.0; n];
        for (row, &col) in tab.basis.iter().enumerate() {
            if col < n {
                x[col] = tab.rows[row][width].max(0.0);
            }
        }
        let value = self.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution { x, value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_program() {
        // min -x - 2y  s.t. x + y <= 4, x <= 3, y <= 3  ->  x = 1, y = 3.
        let lp = LinearProgram {
            cost: vec![-1.0, -2.0],
            ub_rows: vec![vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            ub_rhs: vec![4.0, 3.0, 3.0],
            eq_rows: vec![],
            eq_rhs: vec![],
        };
        for rule in [PivotRule::Bland, PivotRule::Dantzig] {
            let sol = lp.solve(rule).unwrap();
            assert!((sol.value + 7.0).abs() < 1e-12);
            assert!((sol.x[0] - 1.0).abs() < 1e-12 && (sol.x[1] - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn equality_and_infeasibility() {
        let lp = LinearProgram {
            cost: vec![1.0, 3.0],
            ub_rows: vec![vec![1.0, 0.0]],
            ub_rhs: vec![0.25],
            eq_rows: vec![vec![1.0, 1.0]],
            eq_rhs: vec![1.0],
        };
        let sol = lp.solve(PivotRule::Bland).unwrap();
        assert!((sol.value - 2.5).abs() < 1e-12);
        let bad = LinearProgram { ub_rhs: vec![0.0], eq_rows: vec![vec![1.0, 0.0]], ..lp };
        assert_eq!(bad.solve(PivotRule::Bland), Err(Error::Lp("infeasible")));
    }
}
