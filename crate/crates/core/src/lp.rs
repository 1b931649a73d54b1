//! Dense two-phase primal simplex with Bland's rule.
//!
//! Solves `min c^T x` subject to linear rows and `x >= 0`. Meant for the
//! tiny programs built by the stationarity-gap computation; no sparsity, no
//! presolve.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex did not terminate within {0} pivots")]
    IterationLimit(usize),
    #[error("constraint has {found} coefficients, expected {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("non-finite coefficient in linear program")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    rows: Vec<(Vec<f64>, Relation, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

const PIVOT_LIMIT: usize = 100_000;
const EPS: f64 = 1e-11;

impl LinearProgram {
    /// Minimization of `objective^T x` over `x >= 0`.
    pub fn minimize(objective: Vec<f64>) -> Self {
        LinearProgram {
            objective,
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) -> Result<(), LpError> {
        if coeffs.len() != self.num_vars() {
            return Err(LpError::Dimension {
                expected: self.num_vars(),
                found: coeffs.len(),
            });
        }
        self.rows.push((coeffs, rel, rhs));
        Ok(())
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        let finite = self.objective.iter().all(|x| x.is_finite())
            && self
                .rows
                .iter()
                .all(|(c, _, b)| b.is_finite() && c.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(LpError::NonFinite);
        }
        Tableau::build(self).run(&self.objective)
    }
}

struct Tableau {
    /// `m` rows of `width + 1` entries; the last entry is the right-hand side.
    cells: Vec<Vec<f64>>,
    basis: Vec<usize>,
    num_vars: usize,
    /// Columns `>= first_artificial` are artificial.
    first_artificial: usize,
    width: usize,
    pivots: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Tableau {
        let n = lp.num_vars();
        // Normalize to nonnegative right-hand sides.
        let rows: Vec<(Vec<f64>, Relation, f64)> = lp
            .rows
            .iter()
            .map(|(c, rel, b)| {
                if *b < 0.0 {
                    let flipped = match rel {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (c.iter().map(|x| -x).collect(), flipped, -b)
                } else {
                    (c.clone(), *rel, *b)
                }
            })
            .collect();
        let num_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let num_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let first_artificial = n + num_slack;
        let width = first_artificial + num_art;
        let mut cells = Vec::with_capacity(rows.len());
        let mut basis = Vec::with_capacity(rows.len());
        let (mut slack, mut art) = (n, first_artificial);
        for (coeffs, rel, rhs) in rows {
            let mut row = vec![0.0; width + 1];
            row[..n].copy_from_slice(&coeffs);
            row[width] = rhs;
            match rel {
                Relation::Le => {
                    row[slack] = 1.0;
                    basis.push(slack);
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                    row[art] = 1.0;
                    basis.push(art);
                    art += 1;
                }
                Relation::Eq => {
                    row[art] = 1.0;
                    basis.push(art);
                    art += 1;
                }
            }
            cells.push(row);
        }
        Tableau {
            cells,
            basis,
            num_vars: n,
            first_artificial,
            width,
            pivots: 0,
        }
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let w = self.width;
        let p = self.cells[r][col];
        for x in self.cells[r].iter_mut() {
            *x /= p;
        }
        let pivot_row = self.cells[r].clone();
        for (i, row) in self.cells.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                for j in 0..=w {
                    row[j] -= f * pivot_row[j];
                }
                row[col] = 0.0;
            }
        }
        self.basis[r] = col;
        self.pivots += 1;
    }

    /// Reduced costs for `cost` over the first `cols` columns.
    fn reduced_costs(&self, cost: &[f64], cols: usize) -> Vec<f64> {
        let mut d: Vec<f64> = (0..cols).map(|j| cost.get(j).copied().unwrap_or(0.0)).collect();
        for (row, &b) in self.cells.iter().zip(&self.basis) {
            let cb = cost.get(b).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for (j, dj) in d.iter_mut().enumerate() {
                    *dj -= cb * row[j];
                }
            }
        }
        d
    }

    /// Runs simplex on `cost` restricted to the first `cols` columns.
    fn optimize(&mut self, cost: &[f64], cols: usize) -> Result<(), LpError> {
        let scale = 1.0 + cost.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        loop {
            if self.pivots >= PIVOT_LIMIT {
                return Err(LpError::IterationLimit(PIVOT_LIMIT));
            }
            let d = self.reduced_costs(cost, cols);
            // Bland: lowest-index improving column.
            let Some(enter) = (0..cols).find(|&j| d[j] < -EPS * scale) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.cells.iter().enumerate() {
                let a = row[enter];
                if a > EPS {
                    let ratio = row[self.width] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-14 * (1.0 + lr.abs())
                                || (ratio <= lr + 1e-14 * (1.0 + lr.abs())
                                    && self.basis[i] < self.basis[li])
                            {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(LpError::Unbounded);
            };
            self.pivot(r, enter);
        }
    }

    fn run(mut self, objective: &[f64]) -> Result<LpSolution, LpError> {
        if self.width > self.first_artificial {
            let mut phase1 = vec![0.0; self.width];
            for c in phase1[self.first_artificial..].iter_mut() {
                *c = 1.0;
            }
            self.optimize(&phase1, self.width)?;
            let infeas: f64 = self
                .cells
                .iter()
                .zip(&self.basis)
                .filter(|(_, &b)| b >= self.first_artificial)
                .map(|(row, _)| row[self.width])
                .sum();
            let rhs_scale = 1.0
                + self
                    .cells
                    .iter()
                    .fold(0.0f64, |m, r| m.max(r[self.width].abs()));
            if infeas > 1e-9 * rhs_scale {
                return Err(LpError::Infeasible);
            }
            // Drive remaining (zero-valued) artificials out of the basis.
            let mut r = 0;
            while r < self.cells.len() {
                if self.basis[r] >= self.first_artificial {
                    let col = (0..self.first_artificial).find(|&j| self.cells[r][j].abs() > 1e-9);
                    match col {
                        Some(j) => self.pivot(r, j),
                        None => {
                            // Redundant row.
                            self.cells.remove(r);
                            self.basis.remove(r);
                            continue;
                        }
                    }
                }
                r += 1;
            }
        }
        let cols = self.first_artificial;
        self.optimize(objective, cols)?;
        let mut x = vec![0.0; self.num_vars];
        for (row, &b) in self.cells.iter().zip(&self.basis) {
            if b < self.num_vars {
                x[b] = row[self.width];
            }
        }
        let objective_value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution {
            x,
            objective: objective_value,
            pivots: self.pivots,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  ->  36 at (2, 6)
        let mut lp = LinearProgram::minimize(vec![-3.0, -5.0]);
        lp.add_constraint(vec![1.0, 0.0], Relation::Le, 4.0).unwrap();
        lp.add_constraint(vec![0.0, 2.0], Relation::Le, 12.0).unwrap();
        lp.add_constraint(vec![3.0, 2.0], Relation::Le, 18.0).unwrap();
        let sol = lp.solve().unwrap();
        assert!((sol.objective + 36.0).abs() < 1e-12);
        assert!((sol.x[0] - 2.0).abs() < 1e-12 && (sol.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + 2y s.t. x + y = 1, x >= 0.25, y >= 0.5
        let mut lp = LinearProgram::minimize(vec![1.0, 2.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 1.0).unwrap();
        lp.add_constraint(vec![1.0, 0.0], Relation::Ge, 0.25).unwrap();
        lp.add_constraint(vec![0.0, 1.0], Relation::Ge, 0.5).unwrap();
        let sol = lp.solve().unwrap();
        assert!((sol.objective - 1.5).abs() < 1e-12);
    }

    #[test]
    fn negative_rhs_is_normalized() {
        // -x <= -2  <=>  x >= 2
        let mut lp = LinearProgram::minimize(vec![1.0]);
        lp.add_constraint(vec![-1.0], Relation::Le, -2.0).unwrap();
        assert!((lp.solve().unwrap().objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::minimize(vec![1.0]);
        lp.add_constraint(vec![1.0], Relation::Le, 1.0).unwrap();
        lp.add_constraint(vec![1.0], Relation::Ge, 2.0).unwrap();
        assert_eq!(lp.solve().unwrap_err(), LpError::Infeasible);

        let mut lp = LinearProgram::minimize(vec![-1.0, 0.0]);
        lp.add_constraint(vec![0.0, 1.0], Relation::Le, 1.0).unwrap();
        assert_eq!(lp.solve().unwrap_err(), LpError::Unbounded);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::minimize(vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 1.0).unwrap();
        lp.add_constraint(vec![2.0, 2.0], Relation::Eq, 2.0).unwrap();
        assert!((lp.solve().unwrap().objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's classic cycling LP; Bland's rule must terminate at -1/20.
        let mut lp = LinearProgram::minimize(vec![-0.75, 150.0, -0.02, 6.0]);
        lp.add_constraint(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0).unwrap();
        lp.add_constraint(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0).unwrap();
        lp.add_constraint(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0).unwrap();
        let sol = lp.solve().unwrap();
        assert!((sol.objective + 0.05).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let mut lp = LinearProgram::minimize(vec![1.0, 1.0]);
        assert!(lp.add_constraint(vec![1.0], Relation::Le, 1.0).is_err());
    }
}
