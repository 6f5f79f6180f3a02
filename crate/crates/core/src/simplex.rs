//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Sized for the handful of variables and constraints that arise from the
//! feasibility polytope; no sparsity, no presolve.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;
const FEAS_EPS: f64 = 1e-9;

/// Default iteration cap across both phases.
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `maximize c·x` subject to the constraints and `x ≥ 0`.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        LinearProgram {
            objective: vec![0.0; n_vars],
            constraints: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn constrain(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.n_vars());
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        self.solve_with_cap(DEFAULT_MAX_ITER)
    }

    pub fn solve_with_cap(&self, max_iter: usize) -> Result<LpOutcome> {
        let n = self.n_vars();
        let rows = self.constraints.len();
        if rows == 0 {
            return Ok(if self.objective.iter().any(|&c| c > 0.0) {
                LpOutcome::Unbounded
            } else {
                LpOutcome::Optimal {
                    x: vec![0.0; n],
                    value: 0.0,
                }
            });
        }

        // Column layout: original | slack/surplus | artificial.
        let n_slack = self
            .constraints
            .iter()
            .filter(|c| c.relation != Relation::Eq)
            .count();
        let art_start = n + n_slack;
        let mut n_art = 0;
        let mut layout = Vec::with_capacity(rows);
        for c in &self.constraints {
            // Rows are normalised to a nonnegative right-hand side; a flipped
            // `≤` becomes `≥` and needs an artificial.
            let flip = c.rhs < 0.0;
            let rel = match (c.relation, flip) {
                (Relation::Le, true) => Relation::Ge,
                (Relation::Ge, true) => Relation::Le,
                (r, _) => r,
            };
            let needs_art = rel != Relation::Le;
            layout.push((flip, rel, needs_art));
            if needs_art {
                n_art += 1;
            }
        }
        let cols = art_start + n_art;
        let width = cols + 1;
        let mut tab = Tableau {
            rows,
            width,
            t: vec![0.0; rows * width],
            basis: vec![0; rows],
        };
        let mut slack = n;
        let mut art = art_start;
        for (r, (c, &(flip, rel, needs_art))) in self.constraints.iter().zip(&layout).enumerate() {
            let sign = if flip { -1.0 } else { 1.0 };
            for (j, &v) in c.coeffs.iter().enumerate() {
                tab.t[r * width + j] = sign * v;
            }
            tab.t[r * width + cols] = sign * c.rhs;
            match rel {
                Relation::Le => {
                    tab.t[r * width + slack] = 1.0;
                    tab.basis[r] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    tab.t[r * width + slack] = -1.0;
                    slack += 1;
                }
                Relation::Eq => {}
            }
            if needs_art {
                tab.t[r * width + art] = 1.0;
                tab.basis[r] = art;
                art += 1;
            }
        }

        let mut iters = 0;
        if n_art > 0 {
            let mut phase1 = vec![0.0; cols];
            for c in phase1.iter_mut().skip(art_start) {
                *c = -1.0;
            }
            let allowed = vec![true; cols];
            match tab.optimize(&phase1, &allowed, max_iter, &mut iters)? {
                Phase::Optimal => {}
                Phase::Unbounded => {
                    return Err(Error::Numeric("phase one reported unbounded".into()))
                }
            }
            let infeas: f64 = (0..rows)
                .filter(|&r| tab.basis[r] >= art_start)
                .map(|r| tab.rhs(r))
                .sum();
            let scale = 1.0
                + self
                    .constraints
                    .iter()
                    .map(|c| c.rhs.abs())
                    .fold(0.0, f64::max);
            if infeas > FEAS_EPS * scale {
                return Ok(LpOutcome::Infeasible);
            }
            // Drive zero-level artificials out of the basis where possible.
            for r in 0..rows {
                if tab.basis[r] >= art_start {
                    if let Some(j) = (0..art_start).find(|&j| tab.at(r, j).abs() > 1e-9) {
                        tab.pivot(r, j);
                    }
                }
            }
        }

        let mut cost = vec![0.0; cols];
        cost[..n].copy_from_slice(&self.objective);
        let allowed: Vec<bool> = (0..cols).map(|j| j < art_start).collect();
        match tab.optimize(&cost, &allowed, max_iter, &mut iters)? {
            Phase::Unbounded => Ok(LpOutcome::Unbounded),
            Phase::Optimal => {
                let mut x = vec![0.0; n];
                for r in 0..rows {
                    if tab.basis[r] < n {
                        x[tab.basis[r]] = tab.rhs(r);
                    }
                }
                let value = x.iter().zip(&self.objective).map(|(a, b)| a * b).sum();
                Ok(LpOutcome::Optimal { x, value })
            }
        }
    }
}

enum Phase {
    Optimal,
    Unbounded,
}

struct Tableau {
    rows: usize,
    width: usize,
    t: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.t[r * self.width + self.width - 1]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let d = self.t[pr * w + pc];
        for c in 0..w {
            self.t[pr * w + c] /= d;
        }
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let l = self.t[r * w + pc];
            if l != 0.0 {
                for c in 0..w {
                    self.t[r * w + c] -= l * self.t[pr * w + c];
                }
            }
        }
        self.basis[pr] = pc;
    }

    fn optimize(
        &mut self,
        cost: &[f64],
        allowed: &[bool],
        max_iter: usize,
        iters: &mut usize,
    ) -> Result<Phase> {
        let cols = self.width - 1;
        loop {
            if *iters >= max_iter {
                return Err(Error::Numeric(format!(
                    "simplex exceeded {max_iter} iterations"
                )));
            }
            *iters += 1;
            // Bland: lowest-index column with positive reduced cost enters.
            let entering = (0..cols).filter(|&j| allowed[j]).find(|&j| {
                let z: f64 = (0..self.rows)
                    .map(|r| cost[self.basis[r]] * self.at(r, j))
                    .sum();
                cost[j] - z > PIVOT_EPS
            });
            let Some(pc) = entering else {
                return Ok(Phase::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            let tie = (ratio - lratio).abs() <= 1e-12 * (1.0 + lratio.abs());
                            if ratio < lratio && !tie || tie && self.basis[r] < self.basis[lr] {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(Phase::Unbounded),
                Some((pr, _)) => self.pivot(pr, pc),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(outcome: LpOutcome) -> (Vec<f64>, f64) {
        match outcome {
            LpOutcome::Optimal { x, value } => (x, value),
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![3.0, 5.0];
        lp.constrain(vec![1.0, 0.0], Relation::Le, 4.0)
            .constrain(vec![0.0, 2.0], Relation::Le, 12.0)
            .constrain(vec![3.0, 2.0], Relation::Le, 18.0);
        let (x, v) = optimal(lp.solve().unwrap());
        assert!((v - 36.0).abs() < 1e-9);
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn needs_phase_one() {
        // max -x - y, x + y ≥ 2, x - y = 0 → (1, 1), -2
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-1.0, -1.0];
        lp.constrain(vec![1.0, 1.0], Relation::Ge, 2.0).constrain(
            vec![1.0, -1.0],
            Relation::Eq,
            0.0,
        );
        let (x, v) = optimal(lp.solve().unwrap());
        assert!((v + 2.0).abs() < 1e-9);
        assert!((x[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs_rows() {
        // x ≤ 3, -x ≤ -1 (x ≥ 1); min x → 1
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![-1.0];
        lp.constrain(vec![1.0], Relation::Le, 3.0)
            .constrain(vec![-1.0], Relation::Le, -1.0);
        let (x, _) = optimal(lp.solve().unwrap());
        assert!((x[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![1.0];
        lp.constrain(vec![1.0], Relation::Le, 0.25)
            .constrain(vec![1.0], Relation::Ge, 0.75);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Infeasible);

        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 0.0];
        lp.constrain(vec![0.0, 1.0], Relation::Le, 1.0);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn degenerate_vertex_terminates() {
        // Classic cycling example (Beale); Bland's rule must terminate.
        let mut lp = LinearProgram::new(4);
        lp.objective = vec![0.75, -20.0, 0.5, -6.0];
        lp.constrain(vec![0.25, -8.0, -1.0, 9.0], Relation::Le, 0.0)
            .constrain(vec![0.5, -12.0, -0.5, 3.0], Relation::Le, 0.0)
            .constrain(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let (_, v) = optimal(lp.solve().unwrap());
        assert!((v - 1.25).abs() < 1e-9);
    }

    #[test]
    fn iteration_cap_is_an_error() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![3.0, 5.0];
        lp.constrain(vec![1.0, 0.0], Relation::Le, 4.0).constrain(
            vec![3.0, 2.0],
            Relation::Le,
            18.0,
        );
        assert!(matches!(lp.solve_with_cap(1), Err(Error::Numeric(_))));
    }
}
