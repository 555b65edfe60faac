//! Equality-form linear programs and a dense two-phase simplex.
//!
//! Problems are `maximize c·x  s.t.  A x = b,  x ≥ 0`, with `A` stored as
//! sparse rows. The solver expands them into a dense tableau, so it is meant
//! for the few-thousand-column programs the genie MDP produces.

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("constraint references variable {index} but the problem has {variables}")]
    Dimension { index: usize, variables: usize },
    #[error("infeasible: phase-one objective {phase_one} > 0")]
    Infeasible { phase_one: f64 },
    #[error("unbounded objective (entering column {column})")]
    Unbounded { column: usize },
    #[error("no convergence after {pivots} pivots")]
    IterationLimit { pivots: usize },
    #[error(
        "solution violates constraints: max residual {residual}, most negative value {min_value}"
    )]
    Residual { residual: f64, min_value: f64 },
}

/// `maximize c·x  s.t.  A x = b,  x ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem<R: Real> {
    objective: Vec<R>,
    rows: Vec<Vec<(usize, R)>>,
    rhs: Vec<R>,
}

impl<R: Real> LpProblem<R> {
    pub fn new(objective: Vec<R>) -> Self {
        Self {
            objective,
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    /// Appends `Σ coeff·x = rhs`. Repeated indices are summed.
    pub fn add_equality(&mut self, mut coeffs: Vec<(usize, R)>, rhs: R) -> Result<(), LpError> {
        let variables = self.variables();
        if let Some(&(index, _)) = coeffs.iter().find(|(i, _)| *i >= variables) {
            return Err(LpError::Dimension { index, variables });
        }
        coeffs.sort_by_key(|(i, _)| *i);
        let mut merged: Vec<(usize, R)> = Vec::with_capacity(coeffs.len());
        for (i, v) in coeffs {
            match merged.last_mut() {
                Some((j, acc)) if *j == i => *acc = *acc + v,
                _ => merged.push((i, v)),
            }
        }
        merged.retain(|(_, v)| !v.is_zero());
        self.rows.push(merged);
        self.rhs.push(rhs);
        Ok(())
    }

    pub fn variables(&self) -> usize {
        self.objective.len()
    }

    pub fn constraints(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[R] {
        &self.objective
    }

    pub fn row(&self, i: usize) -> &[(usize, R)] {
        &self.rows[i]
    }

    pub fn rhs(&self) -> &[R] {
        &self.rhs
    }

    pub fn evaluate(&self, x: &[R]) -> R {
        self.objective.iter().zip(x).map(|(&c, &v)| c * v).sum()
    }

    /// Largest `|A x - b|` over all rows.
    pub fn max_residual(&self, x: &[R]) -> R {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, &b)| (row.iter().map(|&(j, a)| a * x[j]).sum::<R>() - b).abs())
            .fold(R::zero(), R::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<R: Real> {
    pub values: Vec<R>,
    pub objective: R,
    pub max_residual: R,
    pub pivots: usize,
}

/// Anything that can solve an [`LpProblem`] to optimality.
pub trait LpSolver<R: Real> {
    fn solve(&self, problem: &LpProblem<R>) -> Result<LpSolution<R>, LpError>;
}

/// Dense tableau simplex: phase one with one artificial per row, then phase two.
///
/// Uses Dantzig's rule and switches to Bland's rule after a run of degenerate
/// pivots, which MDP programs produce in abundance.
#[derive(Debug, Clone, Copy)]
pub struct DenseSimplex<R: Real> {
    pub tolerance: R,
    pub degenerate_switch: usize,
    pub max_pivots: Option<usize>,
}

impl<R: Real> Default for DenseSimplex<R> {
    fn default() -> Self {
        Self {
            tolerance: R::pivot_tolerance(),
            degenerate_switch: 5_000,
            max_pivots: None,
        }
    }
}

struct Tableau<R: Real> {
    data: Vec<R>,
    width: usize,
    rows: usize,
    /// Columns that may enter the basis.
    eligible: usize,
    basis: Vec<usize>,
    cost: Vec<R>,
    pivots: usize,
}

enum Phase {
    Optimal,
    Unbounded(usize),
    Limit,
}

impl<R: Real> Tableau<R> {
    fn rhs(&self, i: usize) -> R {
        self.data[i * self.width + self.width - 1]
    }

    fn at(&self, i: usize, j: usize) -> R {
        self.data[i * self.width + j]
    }

    fn pivot(&mut self, p: usize, e: usize) {
        let w = self.width;
        let inv = R::one() / self.data[p * w + e];
        let mut nonzero = Vec::new();
        for j in 0..w {
            let v = self.data[p * w + j];
            if !v.is_zero() {
                self.data[p * w + j] = v * inv;
                nonzero.push(j);
            }
        }
        self.data[p * w + e] = R::one();
        let (before, rest) = self.data.split_at_mut(p * w);
        let (pivot_row, after) = rest.split_at_mut(w);
        let eliminate = |row: &mut [R]| {
            let f = row[e];
            if !f.is_zero() {
                for &j in &nonzero {
                    row[j] = row[j] - f * pivot_row[j];
                }
                row[e] = R::zero();
            }
        };
        before.chunks_exact_mut(w).for_each(eliminate);
        after.chunks_exact_mut(w).for_each(eliminate);
        eliminate(&mut self.cost);
        self.basis[p] = e;
        self.pivots += 1;
    }

    /// Minimizes the current cost row.
    fn run(&mut self, tol: R, degenerate_switch: usize, limit: usize) -> Phase {
        let mut degenerate_run = 0;
        loop {
            if self.pivots >= limit {
                return Phase::Limit;
            }
            let bland = degenerate_run >= degenerate_switch;
            let entering = if bland {
                (0..self.eligible).find(|&j| self.cost[j] < -tol)
            } else {
                let mut best: Option<(usize, R)> = None;
                for j in 0..self.eligible {
                    let r = self.cost[j];
                    if r < -tol && best.is_none_or(|(_, b)| r < b) {
                        best = Some((j, r));
                    }
                }
                best.map(|(j, _)| j)
            };
            let Some(e) = entering else {
                return Phase::Optimal;
            };

            let mut leave: Option<(usize, R, R)> = None;
            for i in 0..self.rows {
                let a = self.at(i, e);
                if a > tol {
                    let ratio = self.rhs(i) / a;
                    let better = match leave {
                        None => true,
                        Some((l, best, pivot)) => {
                            let slack = tol * (R::one() + best.abs());
                            if ratio < best - slack {
                                true
                            } else if ratio <= best + slack {
                                if bland {
                                    self.basis[i] < self.basis[l]
                                } else {
                                    a > pivot
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some((i, ratio, a));
                    }
                }
            }
            let Some((p, ratio, _)) = leave else {
                return Phase::Unbounded(e);
            };
            if ratio <= tol {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(p, e);
        }
    }
}

impl<R: Real> LpSolver<R> for DenseSimplex<R> {
    fn solve(&self, problem: &LpProblem<R>) -> Result<LpSolution<R>, LpError> {
        let n = problem.variables();
        let m = problem.constraints();
        let width = n + m + 1;
        let tol = self.tolerance;
        let limit = self.max_pivots.unwrap_or(50 * (n + m) + 1000);

        let mut data = vec![R::zero(); m * width];
        for i in 0..m {
            let sign = if problem.rhs[i] < R::zero() {
                -R::one()
            } else {
                R::one()
            };
            for &(j, a) in &problem.rows[i] {
                data[i * width + j] = sign * a;
            }
            data[i * width + n + i] = R::one();
            data[i * width + width - 1] = sign * problem.rhs[i];
        }
        // Phase one: minimize the sum of artificials.
        let mut cost = vec![R::zero(); width];
        for i in 0..m {
            for j in 0..n {
                cost[j] = cost[j] - data[i * width + j];
            }
            cost[width - 1] = cost[width - 1] - data[i * width + width - 1];
        }
        let mut t = Tableau {
            data,
            width,
            rows: m,
            eligible: n,
            basis: (n..n + m).collect(),
            cost,
            pivots: 0,
        };
        match t.run(tol, self.degenerate_switch, limit) {
            Phase::Optimal => {}
            Phase::Limit => return Err(LpError::IterationLimit { pivots: t.pivots }),
            Phase::Unbounded(column) => return Err(LpError::Unbounded { column }),
        }
        let phase_one = -t.cost[width - 1];
        let scale = problem.rhs.iter().fold(R::one(), |s, b| s.max(b.abs()));
        if phase_one > R::residual_tolerance() * scale {
            return Err(LpError::Infeasible {
                phase_one: phase_one.as_f64(),
            });
        }

        // Pivot zero-level artificials out; rows with no structural entry are redundant.
        for p in 0..m {
            if t.basis[p] >= n {
                let candidate = (0..n).filter(|&j| t.at(p, j).abs() > tol).max_by(|&a, &b| {
                    t.at(p, a)
                        .abs()
                        .partial_cmp(&t.at(p, b).abs())
                        .expect("finite")
                });
                if let Some(e) = candidate {
                    t.pivot(p, e);
                }
            }
        }

        // Phase two: minimize -c·x.
        let mut cost = vec![R::zero(); width];
        for (c, &obj) in cost.iter_mut().zip(&problem.objective) {
            *c = -obj;
        }
        for i in 0..m {
            let b = t.basis[i];
            let cb = if b < n {
                -problem.objective[b]
            } else {
                R::zero()
            };
            if !cb.is_zero() {
                let row = &t.data[i * width..(i + 1) * width];
                for (c, &v) in cost.iter_mut().zip(row) {
                    if !v.is_zero() {
                        *c = *c - cb * v;
                    }
                }
            }
        }
        t.cost = cost;
        match t.run(tol, self.degenerate_switch, limit) {
            Phase::Optimal => {}
            Phase::Limit => return Err(LpError::IterationLimit { pivots: t.pivots }),
            Phase::Unbounded(column) => return Err(LpError::Unbounded { column }),
        }

        let mut values = vec![R::zero(); n];
        for i in 0..m {
            if t.basis[i] < n {
                values[t.basis[i]] = t.rhs(i);
            }
        }
        let min_value = values.iter().fold(R::zero(), |m, &v| m.min(v));
        for v in &mut values {
            if *v < R::zero() {
                *v = R::zero();
            }
        }
        let max_residual = problem.max_residual(&values);
        if max_residual > R::residual_tolerance() * scale || min_value < -R::residual_tolerance() {
            return Err(LpError::Residual {
                residual: max_residual.as_f64(),
                min_value: min_value.as_f64(),
            });
        }
        Ok(LpSolution {
            objective: problem.evaluate(&values),
            values,
            max_residual,
            pivots: t.pivots,
        })
    }
}
