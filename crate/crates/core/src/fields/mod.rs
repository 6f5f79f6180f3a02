//! Fields on uniform rectangular grids and the level-set geometry built on them.

mod analysis;
mod grid;
pub mod io;
mod region;

pub use analysis::{
    coarea_check, estimate_isoperimetric_constant, CoareaCheck, IsoperimetricEstimate,
    IsoperimetricSample, SampleFamily, DEFAULT_LEVELS,
};
pub use grid::{
    gradient, integrate, stable_sum, Grid, GridField, GridSpec, DEFAULT_CELL_CAP, MIN_RESOLUTION,
};
pub use region::{
    perimeter_estimate, regime_sets, relative_perimeter, sublevel_set, superlevel_set,
    union_levelset_region, LevelUnion, PerimeterEstimate, RegimeSets, Region,
};

pub(crate) use grid::{
    derivative_along, derivative_transpose_add, integrate_values, CompensatedSum,
};
pub(crate) use region::regime_sets_of_f;

use crate::coefficients::CoefficientSystem;
use crate::error::{input, Result};

/// Negative values down to this magnitude are tolerated silently.
const NEGATIVITY_TOL: f64 = 1e-12;

/// `f = m − A u` cell by cell.
pub fn field_f(sys: &CoefficientSystem, u: &GridField) -> Result<GridField> {
    let n = sys.n_species();
    if u.n_components() != n {
        return Err(input(format!(
            "field has {} components, system has {n} species",
            u.n_components()
        )));
    }
    let worst = u
        .components()
        .iter()
        .flatten()
        .fold(0.0_f64, |a, &v| a.min(v));
    if worst < -NEGATIVITY_TOL {
        log::warn!("field has negative entries (min {worst:e}); evaluating anyway");
    }
    let cells = u.grid().cell_count();
    let mut out = vec![vec![0.0; cells]; n];
    let mut uc = vec![0.0; n];
    let mut fc = vec![0.0; n];
    for c in 0..cells {
        for (k, comp) in u.components().iter().enumerate() {
            uc[k] = comp[c];
        }
        sys.f_into(&uc, &mut fc);
        for (k, o) in out.iter_mut().enumerate() {
            o[c] = fc[k];
        }
    }
    GridField::new(u.grid().clone(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::all_degenerate_states;

    #[test]
    fn field_f_examples() {
        let sys = CoefficientSystem::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]], &[1.0, 1.0]).unwrap();
        let g = Grid::unit_square(8).unwrap();
        let st = all_degenerate_states(&sys).unwrap();
        let f = field_f(&sys, &GridField::constant(&g, &st.coexistence().u).unwrap()).unwrap();
        assert!(f.components().iter().flatten().all(|v| v.abs() < 1e-15));
        let f = field_f(&sys, &GridField::constant(&g, &[0.0, 0.0]).unwrap()).unwrap();
        assert!(f.components().iter().flatten().all(|&v| v == 1.0));
        let f = field_f(&sys, &GridField::constant(&g, &[0.0, 0.5]).unwrap()).unwrap();
        assert!(f.component(0).iter().all(|&v| v == 0.5));
        assert!(f.component(1).iter().all(|&v| v == 0.0));
        assert!(field_f(&sys, &GridField::constant(&g, &[0.0]).unwrap()).is_err());
    }
}
