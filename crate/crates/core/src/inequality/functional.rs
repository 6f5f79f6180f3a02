//! Both sides of the inequality on discretized fields.

use serde::{Deserialize, Serialize};

use super::pointwise::check_exponent;
use crate::coefficients::{CoefficientSystem, IndexSet};
use crate::error::{input, Result};
use crate::fields::{
    derivative_along, derivative_transpose_add, field_f, regime_sets_of_f, CompensatedSum, Grid,
    GridField,
};
use crate::polytope::{all_degenerate_states, sigma_obs, truncation_bound_of, DegenerateStates};
use crate::table::{fmt_f64, Table};

/// `f` residuals below this are floating-point noise; integrals at or below
/// `N |Ω| ZERO_RESIDUAL^p` count as zero.
pub const ZERO_RESIDUAL: f64 = 1e-12;

/// Componentwise `min(u, M)`.
pub fn truncate(u: &GridField, m_bound: f64) -> Result<GridField> {
    if !(m_bound > 0.0) {
        return Err(input("truncation bound must be positive"));
    }
    let comps = u
        .components()
        .iter()
        .map(|c| c.iter().map(|&v| v.min(m_bound)).collect())
        .collect();
    GridField::new(u.grid().clone(), comps)
}

/// Both sides of the inequality for one field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    /// `∫ Σ |f_i|^p`.
    pub lhs: f64,
    /// `∫ Σ ũ_i (|f_i|^p + |∇f_i|^p)`.
    pub rhs: f64,
    /// `lhs / rhs`; 0 when `lhs` vanishes, `+∞` when only `rhs` does.
    pub ratio: f64,
    pub p: f64,
    /// Truncation was requested and clipped at least one value.
    pub truncated: bool,
    /// Threshold used for the regime sets (`None` if no gap is available).
    pub sigma: Option<f64>,
    pub regime_measures: Vec<(IndexSet, f64)>,
    pub regime_leftover: f64,
}

/// A coefficient system with everything the field experiments need:
/// degenerate states, the truncation bound `M` and the gap `σ`.
#[derive(Clone, Debug)]
pub struct InequalityProblem {
    sys: CoefficientSystem,
    p: f64,
    states: DegenerateStates,
    m_trunc: f64,
    sigma: Option<f64>,
}

impl InequalityProblem {
    /// `σ` is taken from the LP certificate when the system is admissible.
    pub fn new(sys: &CoefficientSystem, p: f64) -> Result<Self> {
        check_exponent(p)?;
        let states = all_degenerate_states(sys)?;
        let m_trunc = truncation_bound_of(&states);
        let sigma = sigma_obs(sys).ok().map(|c| c.sigma);
        Ok(InequalityProblem {
            sys: sys.clone(),
            p,
            states,
            m_trunc,
            sigma,
        })
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(input("sigma must be positive"));
        }
        self.sigma = Some(sigma);
        Ok(self)
    }

    pub fn system(&self) -> &CoefficientSystem {
        &self.sys
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn states(&self) -> &DegenerateStates {
        &self.states
    }

    pub fn m_trunc(&self) -> f64 {
        self.m_trunc
    }

    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    pub(crate) fn zero_tol(&self, grid: &Grid) -> f64 {
        self.sys.n_species() as f64 * grid.volume() * ZERO_RESIDUAL.powf(self.p)
    }

    pub(crate) fn ratio_of(&self, grid: &Grid, lhs: f64, rhs: f64) -> f64 {
        let tol = self.zero_tol(grid);
        if lhs <= tol {
            0.0
        } else if rhs <= tol * self.m_trunc.max(1.0) {
            f64::INFINITY
        } else {
            lhs / rhs
        }
    }

    pub fn evaluate(&self, u: &GridField, use_truncation: bool) -> Result<InequalityReport> {
        let f = field_f(&self.sys, u)?;
        let parts = sides(
            &self.sys,
            self.p,
            u,
            use_truncation.then_some(self.m_trunc),
            None,
        );
        let (regime_measures, regime_leftover) = match self.sigma {
            Some(s) => {
                let r = regime_sets_of_f(&f, s)?;
                (r.measures(), r.leftover_measure)
            }
            None => (Vec::new(), 0.0),
        };
        Ok(InequalityReport {
            lhs: parts.lhs,
            rhs: parts.rhs,
            ratio: self.ratio_of(u.grid(), parts.lhs, parts.rhs),
            p: self.p,
            truncated: parts.clipped,
            sigma: self.sigma,
            regime_measures,
            regime_leftover,
        })
    }
}

/// One-shot evaluation; builds an [`InequalityProblem`] internally.
pub fn evaluate_inequality(
    sys: &CoefficientSystem,
    u: &GridField,
    p: f64,
    use_truncation: bool,
) -> Result<InequalityReport> {
    InequalityProblem::new(sys, p)?.evaluate(u, use_truncation)
}

pub(crate) struct Sides {
    pub lhs: f64,
    pub rhs: f64,
    pub clipped: bool,
}

/// Gradients of both sides with respect to every cell value of every component.
pub(crate) struct SideGradients {
    pub lhs: Vec<Vec<f64>>,
    pub rhs: Vec<Vec<f64>>,
}

#[inline]
fn abs_pow(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else {
        x.abs().powf(p)
    }
}

/// Evaluate both sides; when `grads` is given, also fill in their gradients
/// with respect to `u` (one vector per component).
pub(crate) fn sides(
    sys: &CoefficientSystem,
    p: f64,
    u: &GridField,
    m_trunc: Option<f64>,
    grads: Option<&mut SideGradients>,
) -> Sides {
    let n = sys.n_species();
    let grid = u.grid();
    let cells = grid.cell_count();
    let dim = grid.dim();
    let vol = grid.cell_volume();
    let m = sys.vector_m();

    let mut f = Vec::with_capacity(n);
    for i in 0..n {
        let mut fi = vec![m[i]; cells];
        for k in 0..n {
            let a = sys.a(i, k);
            if a != 0.0 {
                for (o, &v) in fi.iter_mut().zip(u.component(k)) {
                    *o -= a * v;
                }
            }
        }
        f.push(fi);
    }
    let mut deriv = vec![vec![vec![0.0; cells]; dim]; n];
    for i in 0..n {
        for a in 0..dim {
            derivative_along(grid, &f[i], a, &mut deriv[i][a]);
        }
    }
    let weight = |k: usize, c: usize| -> f64 {
        let v = u.component(k)[c];
        match m_trunc {
            Some(m) => v.min(m),
            None => v,
        }
    };
    let clipped = m_trunc.is_some_and(|m| u.components().iter().flatten().any(|&v| v > m));

    // |∇f_i|² per cell.
    let grad_sq: Vec<Vec<f64>> = deriv
        .iter()
        .map(|d| {
            let mut g2 = vec![0.0; cells];
            for da in d {
                for (o, &v) in g2.iter_mut().zip(da) {
                    *o += v * v;
                }
            }
            g2
        })
        .collect();

    let mut lhs_acc = CompensatedSum::default();
    let mut rhs_acc = CompensatedSum::default();
    for i in 0..n {
        for c in 0..cells {
            let fp = abs_pow(f[i][c], p);
            let gp = if p == 2.0 {
                grad_sq[i][c]
            } else {
                grad_sq[i][c].powf(0.5 * p)
            };
            lhs_acc.add(fp);
            rhs_acc.add(weight(i, c) * (fp + gp));
        }
    }
    let lhs = lhs_acc.total() * vol;
    let rhs = rhs_acc.total() * vol;

    if let Some(out) = grads {
        // dL/df_i and dR/df_i per cell, then chain through f = m − A u.
        let mut dl_df = vec![vec![0.0; cells]; n];
        let mut dr_df = vec![vec![0.0; cells]; n];
        let mut w = vec![0.0; cells];
        for i in 0..n {
            for c in 0..cells {
                let fi = f[i][c];
                let dfp = if p == 2.0 {
                    2.0 * fi
                } else if fi == 0.0 {
                    0.0
                } else {
                    p * fi.abs().powf(p - 1.0) * fi.signum()
                };
                dl_df[i][c] = vol * dfp;
                dr_df[i][c] = vol * weight(i, c) * dfp;
            }
            for a in 0..dim {
                for c in 0..cells {
                    let g2 = grad_sq[i][c];
                    w[c] = if g2 == 0.0 {
                        0.0
                    } else {
                        let scale = if p == 2.0 {
                            2.0
                        } else {
                            p * g2.powf(0.5 * p - 1.0)
                        };
                        vol * weight(i, c) * scale * deriv[i][a][c]
                    };
                }
                derivative_transpose_add(grid, &w, a, &mut dr_df[i]);
            }
        }
        for k in 0..n {
            let gl = &mut out.lhs[k];
            let gr = &mut out.rhs[k];
            gl.iter_mut().for_each(|v| *v = 0.0);
            gr.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..n {
                let a = sys.a(i, k);
                if a == 0.0 {
                    continue;
                }
                for c in 0..cells {
                    gl[c] -= a * dl_df[i][c];
                    gr[c] -= a * dr_df[i][c];
                }
            }
            let uk = u.component(k);
            for c in 0..cells {
                let active = m_trunc.map_or(true, |m| uk[c] < m);
                if active {
                    let gp = if p == 2.0 {
                        grad_sq[k][c]
                    } else {
                        grad_sq[k][c].powf(0.5 * p)
                    };
                    gr[c] += vol * (abs_pow(f[k][c], p) + gp);
                }
            }
        }
    }
    Sides { lhs, rhs, clipped }
}

/// One step of a blow-up sequence.
#[derive(Clone, Debug)]
pub struct BlowupStep {
    pub k: usize,
    pub u: Vec<f64>,
    pub field: GridField,
    pub report: InequalityReport,
}

/// Constant fields `u_k = u_I + (u_∅ − u_I)/k`, `k = 1 … steps`, clipped at 0.
pub fn blowup_sequence(
    problem: &InequalityProblem,
    i_set: IndexSet,
    steps: usize,
    grid: &Grid,
) -> Result<Vec<BlowupStep>> {
    let n = problem.sys.n_species();
    if i_set.is_empty() || !i_set.fits(n) {
        return Err(input("blow-up needs a nonempty index set within 1..=N"));
    }
    let target = &problem.states.get(i_set).u;
    let coex = &problem.states.coexistence().u;
    (1..=steps)
        .map(|k| {
            let u: Vec<f64> = target
                .iter()
                .zip(coex)
                .map(|(t, c)| (t + (c - t) / k as f64).max(0.0))
                .collect();
            let field = GridField::constant(grid, &u)?;
            let report = problem.evaluate(&field, false)?;
            Ok(BlowupStep {
                k,
                u,
                field,
                report,
            })
        })
        .collect()
}

pub fn blowup_csv(steps: &[BlowupStep]) -> String {
    let mut t = Table::new(["k", "lhs", "rhs", "ratio"]);
    for s in steps {
        t.push(vec![
            s.k.to_string(),
            fmt_f64(s.report.lhs),
            fmt_f64(s.report.rhs),
            fmt_f64(s.report.ratio),
        ]);
    }
    t.to_csv()
}
