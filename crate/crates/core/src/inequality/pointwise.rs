use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientSystem, IndexSet};
use crate::error::{input, Result};
use crate::fields::{integrate_values, GridField};
use crate::polytope::degenerate_state;

/// `f` is treated as identically zero (the tie case of `v`) when every
/// component is below this in magnitude.
pub const TIE_TOL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointEvaluation {
    /// `g = Σ |f_i|^p`.
    pub g_value: f64,
    /// `v = Σ u_i |f_i|^p / g`, or `min_i u_i` at a tie.
    pub v_value: f64,
    pub tie_flag: bool,
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(input(format!(
            "exponent p = {p} must be finite and at least 1"
        )));
    }
    Ok(())
}

pub fn point_eval(sys: &CoefficientSystem, u: &[f64], p: f64) -> Result<PointEvaluation> {
    check_exponent(p)?;
    let f = sys.evaluate_f(u)?;
    Ok(eval_with_f(u, &f, p))
}

/// `g` and `v` from a precomputed `f(u)`.
pub(crate) fn eval_with_f(u: &[f64], f: &[f64], p: f64) -> PointEvaluation {
    if f.iter().all(|v| v.abs() <= TIE_TOL) {
        let g = f.iter().map(|v| v.abs().powf(p)).sum();
        let vmin = u.iter().copied().fold(f64::INFINITY, f64::min);
        return PointEvaluation {
            g_value: g,
            v_value: vmin,
            tie_flag: true,
        };
    }
    let mut g = 0.0;
    let mut weighted = 0.0;
    for (&ui, &fi) in u.iter().zip(f) {
        let w = fi.abs().powf(p);
        g += w;
        weighted += ui * w;
    }
    PointEvaluation {
        g_value: g,
        v_value: weighted / g,
        tie_flag: false,
    }
}

/// `E(u) = ½ ∫ A (u − u∞)·(u − u∞)` with `u∞ = u_∅`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyValue {
    pub value: f64,
    /// The matrix was not symmetric and `(A + Aᵀ)/2` was used.
    pub symmetrized: bool,
}

const SYMMETRY_TOL: f64 = 1e-12;

pub fn entropy(sys: &CoefficientSystem, u: &GridField) -> Result<EntropyValue> {
    let n = sys.n_species();
    if u.n_components() != n {
        return Err(input(format!(
            "field has {} components, expected {n}",
            u.n_components()
        )));
    }
    let u_inf = degenerate_state(sys, IndexSet::EMPTY)?.u;
    let mut sym = vec![0.0; n * n];
    let mut symmetrized = false;
    for i in 0..n {
        for j in 0..n {
            let (aij, aji) = (sys.a(i, j), sys.a(j, i));
            if (aij - aji).abs() > SYMMETRY_TOL {
                symmetrized = true;
            }
            sym[i * n + j] = 0.5 * (aij + aji);
        }
    }
    if symmetrized {
        log::warn!("coefficient matrix is not symmetric; using (A + Aᵀ)/2 in the entropy");
    }
    let cells = u.grid().cell_count();
    let mut dens = Vec::with_capacity(cells);
    let mut d = vec![0.0; n];
    for c in 0..cells {
        for (k, dk) in d.iter_mut().enumerate() {
            *dk = u.component(k)[c] - u_inf[k];
        }
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += d[i] * sym[i * n + j] * d[j];
            }
        }
        dens.push(0.5 * q);
    }
    Ok(EntropyValue {
        value: integrate_values(u.grid(), &dens),
        symmetrized,
    })
}
