use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};

/// Fewest cells allowed along any axis.
pub const MIN_RESOLUTION: usize = 4;
/// Default bound on the total cell count.
pub const DEFAULT_CELL_CAP: usize = 1 << 22;

/// Uniform cell-centred grid over the rectangle `[0, L_0] × [0, L_1]` (or the
/// interval `[0, L_0]`). Cells are stored row-major with axis 0 slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    extents: Vec<f64>,
    resolution: Vec<usize>,
    spacing: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridSpec {
    pub extents: Vec<f64>,
    pub resolution: Vec<usize>,
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;

    fn try_from(spec: GridSpec) -> Result<Self> {
        Grid::new(spec.extents, spec.resolution)
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> Self {
        GridSpec {
            extents: g.extents,
            resolution: g.resolution,
        }
    }
}

impl Grid {
    pub fn new(extents: Vec<f64>, resolution: Vec<usize>) -> Result<Self> {
        Grid::with_cap(extents, resolution, DEFAULT_CELL_CAP)
    }

    pub fn with_cap(extents: Vec<f64>, resolution: Vec<usize>, cap: usize) -> Result<Self> {
        let dim = extents.len();
        if !(1..=2).contains(&dim) || resolution.len() != dim {
            return Err(input(
                "grids are 1- or 2-dimensional with one resolution per axis",
            ));
        }
        if extents.iter().any(|&e| !(e.is_finite() && e > 0.0)) {
            return Err(input("extents must be positive and finite"));
        }
        if resolution.iter().any(|&r| r < MIN_RESOLUTION) {
            return Err(input(format!(
                "resolution must be at least {MIN_RESOLUTION} per axis"
            )));
        }
        let cells = resolution
            .iter()
            .try_fold(1usize, |acc, &r| acc.checked_mul(r))
            .unwrap_or(usize::MAX);
        if cells > cap {
            return Err(Error::Capacity(format!(
                "{cells} cells exceed the cap of {cap}"
            )));
        }
        let spacing = extents
            .iter()
            .zip(&resolution)
            .map(|(e, &r)| e / r as f64)
            .collect();
        Ok(Grid {
            extents,
            resolution,
            spacing,
        })
    }

    pub fn unit_interval(n: usize) -> Result<Self> {
        Grid::new(vec![1.0], vec![n])
    }

    pub fn unit_square(n: usize) -> Result<Self> {
        Grid::new(vec![1.0, 1.0], vec![n, n])
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn cell_count(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// `|Ω|`.
    pub fn volume(&self) -> f64 {
        self.extents.iter().product()
    }

    /// Distance in flat index between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.resolution[axis + 1..].iter().product()
    }

    /// Per-axis cell indices of a flat index.
    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        match self.dim() {
            1 => [idx, 0],
            _ => [idx / self.resolution[1], idx % self.resolution[1]],
        }
    }

    /// Cell-centre coordinates; unused axes are zero.
    pub fn center(&self, idx: usize) -> [f64; 2] {
        let mi = self.multi_index(idx);
        let mut x = [0.0; 2];
        for (axis, xa) in x.iter_mut().enumerate().take(self.dim()) {
            *xa = (mi[axis] as f64 + 0.5) * self.spacing[axis];
        }
        x
    }

    /// Measure of a single face orthogonal to `axis`.
    pub fn face_measure(&self, axis: usize) -> f64 {
        (0..self.dim())
            .filter(|&a| a != axis)
            .map(|a| self.spacing[a])
            .product()
    }
}

/// Neumaier-compensated sum in iteration order.
pub fn stable_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::default();
    for v in values {
        acc.add(v);
    }
    acc.total()
}

/// Running Neumaier sum.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(self) -> f64 {
        self.sum + self.comp
    }
}

/// Cell-centred samples of `K` components on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    grid: Grid,
    components: Vec<Vec<f64>>,
}

impl GridField {
    pub fn new(grid: Grid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.is_empty() {
            return Err(input("a field needs at least one component"));
        }
        let cells = grid.cell_count();
        if components.iter().any(|c| c.len() != cells) {
            return Err(input(format!("every component must have {cells} values")));
        }
        if components.iter().flatten().any(|v| !v.is_finite()) {
            return Err(input("field values must be finite"));
        }
        Ok(GridField { grid, components })
    }

    /// Field with the same value vector in every cell.
    pub fn constant(grid: &Grid, values: &[f64]) -> Result<Self> {
        let cells = grid.cell_count();
        GridField::new(
            grid.clone(),
            values.iter().map(|&v| vec![v; cells]).collect(),
        )
    }

    /// Sample `f(x)` at cell centres; `f` returns all `k` components.
    pub fn from_fn<F: Fn([f64; 2]) -> Vec<f64>>(grid: &Grid, k: usize, f: F) -> Result<Self> {
        let cells = grid.cell_count();
        let mut comps = vec![Vec::with_capacity(cells); k];
        for idx in 0..cells {
            let v = f(grid.center(idx));
            if v.len() != k {
                return Err(input(format!(
                    "sampler returned {} components, expected {k}",
                    v.len()
                )));
            }
            for (c, x) in comps.iter_mut().zip(v) {
                c.push(x);
            }
        }
        GridField::new(grid.clone(), comps)
    }

    pub fn scalar_from_fn<F: Fn([f64; 2]) -> f64>(grid: &Grid, f: F) -> Result<Self> {
        GridField::from_fn(grid, 1, |x| vec![f(x)])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, k: usize) -> &[f64] {
        &self.components[k]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.components
    }

    /// Component `k` as a standalone scalar field.
    pub fn scalar(&self, k: usize) -> GridField {
        GridField {
            grid: self.grid.clone(),
            components: vec![self.components[k].clone()],
        }
    }

    /// Values of all components at one cell.
    pub fn at(&self, idx: usize) -> Vec<f64> {
        self.components.iter().map(|c| c[idx]).collect()
    }

    pub(crate) fn require_scalar(&self) -> Result<&[f64]> {
        if self.components.len() != 1 {
            return Err(input(format!(
                "expected a scalar field, got {} components",
                self.components.len()
            )));
        }
        Ok(&self.components[0])
    }
}

/// Derivative along `axis`: central differences inside, one-sided at the two
/// boundary layers.
pub(crate) fn derivative_along(grid: &Grid, values: &[f64], axis: usize, out: &mut [f64]) {
    let n = grid.resolution()[axis];
    let h = grid.spacing()[axis];
    let stride = grid.stride(axis);
    let cells = grid.cell_count();
    for (idx, o) in out.iter_mut().enumerate().take(cells) {
        let i = (idx / stride) % n;
        *o = if i == 0 {
            (values[idx + stride] - values[idx]) / h
        } else if i == n - 1 {
            (values[idx] - values[idx - stride]) / h
        } else {
            (values[idx + stride] - values[idx - stride]) / (2.0 * h)
        };
    }
}

/// Adds `Dᵀ w` to `out`, where `D` is the stencil of [`derivative_along`].
pub(crate) fn derivative_transpose_add(grid: &Grid, weights: &[f64], axis: usize, out: &mut [f64]) {
    let n = grid.resolution()[axis];
    let h = grid.spacing()[axis];
    let stride = grid.stride(axis);
    for (idx, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let i = (idx / stride) % n;
        if i == 0 {
            out[idx + stride] += w / h;
            out[idx] -= w / h;
        } else if i == n - 1 {
            out[idx] += w / h;
            out[idx - stride] -= w / h;
        } else {
            out[idx + stride] += w / (2.0 * h);
            out[idx - stride] -= w / (2.0 * h);
        }
    }
}

/// Gradient of a scalar field: one component per axis.
pub fn gradient(field: &GridField) -> Result<GridField> {
    let values = field.require_scalar()?;
    let grid = field.grid();
    if grid.resolution().iter().any(|&r| r < MIN_RESOLUTION) {
        return Err(input(format!(
            "resolution must be at least {MIN_RESOLUTION}"
        )));
    }
    let comps = (0..grid.dim())
        .map(|axis| {
            let mut d = vec![0.0; grid.cell_count()];
            derivative_along(grid, values, axis, &mut d);
            d
        })
        .collect();
    Ok(GridField {
        grid: grid.clone(),
        components: comps,
    })
}

/// Midpoint quadrature of a scalar field.
pub fn integrate(field: &GridField) -> Result<f64> {
    let values = field.require_scalar()?;
    Ok(integrate_values(field.grid(), values))
}

pub(crate) fn integrate_values(grid: &Grid, values: &[f64]) -> f64 {
    stable_sum(values.iter().copied()) * grid.cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(Grid::unit_square(3).is_err());
        assert!(Grid::new(vec![1.0, 0.0], vec![8, 8]).is_err());
        assert!(Grid::new(vec![1.0, 1.0, 1.0], vec![8, 8, 8]).is_err());
        assert!(matches!(
            Grid::with_cap(vec![1.0, 1.0], vec![64, 64], 1000),
            Err(Error::Capacity(_))
        ));
        let g = Grid::new(vec![2.0, 1.0], vec![8, 4]).unwrap();
        assert_eq!(g.spacing(), &[0.25, 0.25]);
        assert_eq!(g.volume(), 2.0);
        assert_eq!(g.cell_count(), 32);
        assert_eq!(g.stride(0), 4);
        assert_eq!(g.stride(1), 1);
        assert_eq!(g.center(5), [0.375, 0.375]);
    }

    #[test]
    fn gradient_of_linear_is_exact() {
        for n in [4, 7, 32] {
            let g = Grid::unit_interval(n).unwrap();
            let f = GridField::scalar_from_fn(&g, |x| x[0]).unwrap();
            let d = gradient(&f).unwrap();
            assert!(d.component(0).iter().all(|v| (v - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = Grid::unit_square(8).unwrap();
        let f = GridField::constant(&g, &[3.5]).unwrap();
        let d = gradient(&f).unwrap();
        assert_eq!(d.n_components(), 2);
        assert!(d.components().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn central_difference_exact_for_quadratic_inside() {
        let n = 16;
        let g = Grid::unit_square(n).unwrap();
        let f = GridField::scalar_from_fn(&g, |x| x[0] * x[0]).unwrap();
        let d = gradient(&f).unwrap();
        for idx in 0..g.cell_count() {
            let [i, _] = g.multi_index(idx);
            if i > 0 && i < n - 1 {
                let x = g.center(idx)[0];
                assert!((d.component(0)[idx] - 2.0 * x).abs() < 1e-12);
            }
            assert!(d.component(1)[idx].abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_requires_scalar() {
        let g = Grid::unit_interval(8).unwrap();
        let f = GridField::constant(&g, &[1.0, 2.0]).unwrap();
        assert!(gradient(&f).is_err());
    }

    #[test]
    fn transpose_matches_stencil() {
        let g = Grid::new(vec![1.0, 2.0], vec![5, 6]).unwrap();
        let cells = g.cell_count();
        for axis in 0..2 {
            // <D e_j, e_i> == <e_j, Dᵀ e_i> for all unit vectors.
            for j in 0..cells {
                let mut e = vec![0.0; cells];
                e[j] = 1.0;
                let mut de = vec![0.0; cells];
                derivative_along(&g, &e, axis, &mut de);
                for (i, &dij) in de.iter().enumerate() {
                    let mut ei = vec![0.0; cells];
                    ei[i] = 1.0;
                    let mut dte = vec![0.0; cells];
                    derivative_transpose_add(&g, &ei, axis, &mut dte);
                    assert!((dij - dte[j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn integrate_examples() {
        let g = Grid::unit_square(16).unwrap();
        assert!(
            (integrate(&GridField::constant(&g, &[1.0]).unwrap()).unwrap() - 1.0).abs() < 1e-15
        );
        let g2 = Grid::new(vec![2.0, 3.0], vec![8, 8]).unwrap();
        let c = integrate(&GridField::constant(&g2, &[0.7]).unwrap()).unwrap();
        assert!((c - 4.2).abs() < 1e-13);
        let g1 = Grid::unit_interval(256).unwrap();
        let lin = integrate(&GridField::scalar_from_fn(&g1, |x| x[0]).unwrap()).unwrap();
        assert!((lin - 0.5).abs() < 1e-6);
    }

    #[test]
    fn stable_sum_compensates() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(stable_sum(v), 2.0);
    }
}
