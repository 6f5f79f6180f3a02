use serde::{Deserialize, Serialize};

use super::grid::{Grid, GridField};
use crate::coefficients::{CoefficientSystem, IndexSet, DEFAULT_ENUMERATION_CAP};
use crate::error::{input, Error, Result};
use crate::table::Table;

/// A set of cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    grid: Grid,
    mask: Vec<bool>,
}

impl Region {
    pub fn new(grid: Grid, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != grid.cell_count() {
            return Err(input(format!("mask must have {} cells", grid.cell_count())));
        }
        Ok(Region { grid, mask })
    }

    pub fn from_predicate<F: Fn([f64; 2]) -> bool>(grid: &Grid, pred: F) -> Self {
        let mask = (0..grid.cell_count())
            .map(|idx| pred(grid.center(idx)))
            .collect();
        Region {
            grid: grid.clone(),
            mask,
        }
    }

    pub fn empty(grid: &Grid) -> Self {
        Region {
            grid: grid.clone(),
            mask: vec![false; grid.cell_count()],
        }
    }

    pub fn full(grid: &Grid) -> Self {
        Region {
            grid: grid.clone(),
            mask: vec![true; grid.cell_count()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.grid.cell_volume()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn complement(&self) -> Region {
        Region {
            grid: self.grid.clone(),
            mask: self.mask.iter().map(|b| !b).collect(),
        }
    }

    pub fn union(&self, other: &Region) -> Region {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Region) -> Region {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn is_disjoint(&self, other: &Region) -> bool {
        self.mask.iter().zip(&other.mask).all(|(a, b)| !(a & b))
    }

    fn zip_with(&self, other: &Region, op: impl Fn(bool, bool) -> bool) -> Region {
        assert_eq!(self.grid, other.grid, "regions live on different grids");
        let mask = self
            .mask
            .iter()
            .zip(&other.mask)
            .map(|(&a, &b)| op(a, b))
            .collect();
        Region {
            grid: self.grid.clone(),
            mask,
        }
    }

    /// 0/1 grid, one line per index of the last axis (`y`), cells along `x`.
    pub fn to_csv(&self) -> String {
        let g = &self.grid;
        let mut out = String::new();
        match g.dim() {
            1 => {
                let line: Vec<&str> = self
                    .mask
                    .iter()
                    .map(|&b| if b { "1" } else { "0" })
                    .collect();
                out.push_str(&line.join(","));
                out.push('\n');
            }
            _ => {
                let (nx, ny) = (g.resolution()[0], g.resolution()[1]);
                for j in 0..ny {
                    let line: Vec<&str> = (0..nx)
                        .map(|i| if self.mask[i * ny + j] { "1" } else { "0" })
                        .collect();
                    out.push_str(&line.join(","));
                    out.push('\n');
                }
            }
        }
        out
    }
}

fn mask_by(field: &GridField, pred: impl Fn(f64) -> bool) -> Result<Region> {
    let values = field.require_scalar()?;
    Ok(Region {
        grid: field.grid().clone(),
        mask: values.iter().map(|&v| pred(v)).collect(),
    })
}

/// `[f > t]`.
pub fn superlevel_set(field: &GridField, t: f64) -> Result<Region> {
    mask_by(field, |v| v > t)
}

/// `[f < t]`.
pub fn sublevel_set(field: &GridField, t: f64) -> Result<Region> {
    mask_by(field, |v| v < t)
}

/// How the component level sets are merged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelUnion {
    /// `∪_i [|f_i| > t]`.
    Symmetric,
    /// `[f_lead > t] ∪ ∪_i [f_i < −t]`, `lead` zero-based.
    Signed { lead: usize },
}

pub fn union_levelset_region(f: &GridField, t: f64, kind: LevelUnion) -> Result<Region> {
    if !(t > 0.0) {
        return Err(input("level must be positive"));
    }
    let n = f.n_components();
    let cells = f.grid().cell_count();
    let mask = match kind {
        LevelUnion::Symmetric => (0..cells)
            .map(|c| (0..n).any(|i| f.component(i)[c].abs() > t))
            .collect(),
        LevelUnion::Signed { lead } => {
            if lead >= n {
                return Err(input(format!("lead index {} out of range", lead + 1)));
            }
            (0..cells)
                .map(|c| f.component(lead)[c] > t || (0..n).any(|i| f.component(i)[c] < -t))
                .collect()
        }
    };
    Ok(Region {
        grid: f.grid().clone(),
        mask,
    })
}

/// Face-counting estimate of the perimeter inside `Ω`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerimeterEstimate {
    /// Sum of interior faces separating the region from its complement.
    pub raw: f64,
    /// Same faces, each weighted by `1 / (|n_x| + |n_y|)` for a local normal
    /// estimated from the smoothed indicator. Equals `raw` for axis-aligned
    /// boundaries and in one dimension.
    pub calibrated: f64,
}

/// Raw face-counting relative perimeter; faces on `∂Ω` are not counted.
pub fn relative_perimeter(region: &Region) -> f64 {
    perimeter_estimate(region).raw
}

pub fn perimeter_estimate(region: &Region) -> PerimeterEstimate {
    let g = &region.grid;
    let mask = &region.mask;
    let normals = (g.dim() == 2).then(|| indicator_normals(region));
    let mut raw = Vec::new();
    let mut cal = Vec::new();
    for axis in 0..g.dim() {
        let stride = g.stride(axis);
        let n = g.resolution()[axis];
        let face = g.face_measure(axis);
        for idx in 0..g.cell_count() {
            let i = (idx / stride) % n;
            if i + 1 == n || mask[idx] == mask[idx + stride] {
                continue;
            }
            raw.push(face);
            let w = match &normals {
                None => 1.0,
                Some(nrm) => {
                    let nx = nrm[idx].0 + nrm[idx + stride].0;
                    let ny = nrm[idx].1 + nrm[idx + stride].1;
                    let l1 = nx.abs() + ny.abs();
                    if l1 > 0.0 {
                        (nx.hypot(ny) / l1).clamp(std::f64::consts::FRAC_1_SQRT_2, 1.0)
                    } else {
                        1.0
                    }
                }
            };
            cal.push(face * w);
        }
    }
    PerimeterEstimate {
        raw: super::grid::stable_sum(raw),
        calibrated: super::grid::stable_sum(cal),
    }
}

/// Smoothing and difference taps for the indicator normal (a 5×5 extension of
/// the Sobel operator).
const SMOOTH_TAPS: [f64; 5] = [1.0, 4.0, 6.0, 4.0, 1.0];
const DIFF_TAPS: [f64; 5] = [-1.0, -2.0, 0.0, 2.0, 1.0];

/// Gradient of the smoothed 0/1 indicator with replicated edges, scaled by
/// the spacing so anisotropic cells give geometric directions.
fn indicator_normals(region: &Region) -> Vec<(f64, f64)> {
    let g = &region.grid;
    let (nx, ny) = (g.resolution()[0] as isize, g.resolution()[1] as isize);
    let (hx, hy) = (g.spacing()[0], g.spacing()[1]);
    let val = |i: isize, j: isize| -> f64 {
        let i = i.clamp(0, nx - 1);
        let j = j.clamp(0, ny - 1);
        f64::from(u8::from(region.mask[(i * ny + j) as usize]))
    };
    let mut out = Vec::with_capacity(g.cell_count());
    for i in 0..nx {
        for j in 0..ny {
            let (mut gx, mut gy) = (0.0, 0.0);
            for (a, (&sa, &da)) in SMOOTH_TAPS.iter().zip(&DIFF_TAPS).enumerate() {
                for (b, (&sb, &db)) in SMOOTH_TAPS.iter().zip(&DIFF_TAPS).enumerate() {
                    let v = val(i + a as isize - 2, j + b as isize - 2);
                    if v != 0.0 {
                        gx += da * sb * v;
                        gy += sa * db * v;
                    }
                }
            }
            out.push((gx / hx, gy / hy));
        }
    }
    out
}

/// Regions where `f_i > σ` on `I` and `|f_j| < σ/2` off `I`, for every `I`.
#[derive(Clone, Debug)]
pub struct RegimeSets {
    pub regions: Vec<(IndexSet, Region)>,
    /// `|Ω| − Σ_I |A(I)|`.
    pub leftover_measure: f64,
}

impl RegimeSets {
    pub fn measures(&self) -> Vec<(IndexSet, f64)> {
        self.regions
            .iter()
            .map(|(s, r)| (*s, r.measure()))
            .collect()
    }

    pub fn get(&self, set: IndexSet) -> Option<&Region> {
        self.regions.iter().find(|(s, _)| *s == set).map(|(_, r)| r)
    }

    pub fn to_csv(&self) -> String {
        let mut t = Table::new(["set", "measure"]);
        for (s, m) in self.measures() {
            t.push(vec![format!("\"{s}\""), crate::table::fmt_f64(m)]);
        }
        t.push(vec![
            "leftover".into(),
            crate::table::fmt_f64(self.leftover_measure),
        ]);
        t.to_csv()
    }
}

pub fn regime_sets(sys: &CoefficientSystem, u: &GridField, sigma: f64) -> Result<RegimeSets> {
    let f = super::field_f(sys, u)?;
    regime_sets_of_f(&f, sigma)
}

pub(crate) fn regime_sets_of_f(f: &GridField, sigma: f64) -> Result<RegimeSets> {
    let n = f.n_components();
    if n > DEFAULT_ENUMERATION_CAP {
        return Err(Error::Capacity(format!(
            "N = {n} exceeds {DEFAULT_ENUMERATION_CAP}"
        )));
    }
    if !(sigma > 0.0) {
        return Err(input("sigma must be positive"));
    }
    let grid = f.grid();
    let cells = grid.cell_count();
    // Each cell belongs to at most one regime: the set {i : f_i > σ}, provided
    // every other component satisfies |f_j| < σ/2.
    let mut masks = vec![vec![false; cells]; 1 << n];
    for c in 0..cells {
        let mut set = IndexSet::EMPTY;
        let mut ok = true;
        for i in 0..n {
            let v = f.component(i)[c];
            if v > sigma {
                set = set.insert(i);
            } else if v.abs() >= 0.5 * sigma {
                ok = false;
                break;
            }
        }
        if ok {
            masks[set.bits() as usize][c] = true;
        }
    }
    let regions: Vec<(IndexSet, Region)> = IndexSet::all(n)
        .zip(masks)
        .map(|(s, mask)| {
            (
                s,
                Region {
                    grid: grid.clone(),
                    mask,
                },
            )
        })
        .collect();
    let covered: usize = regions.iter().map(|(_, r)| r.count()).sum();
    let leftover_measure = (cells - covered) as f64 * grid.cell_volume();
    Ok(RegimeSets {
        regions,
        leftover_measure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::all_degenerate_states;

    fn cell(n: usize) -> f64 {
        1.0 / n as f64
    }

    #[test]
    fn level_set_examples() {
        let n = 64;
        let g = Grid::unit_interval(n).unwrap();
        let f = GridField::scalar_from_fn(&g, |x| x[0]).unwrap();
        let r = superlevel_set(&f, 0.5).unwrap();
        assert!((r.measure() - 0.5).abs() <= cell(n));
        assert_eq!(superlevel_set(&f, -1.0).unwrap().measure(), 1.0);
        assert!(superlevel_set(&f, 1.0).unwrap().is_empty());
        assert!(sublevel_set(&f, 0.0).unwrap().is_empty());
    }

    #[test]
    fn union_examples() {
        let n = 64;
        let g = Grid::unit_interval(n).unwrap();
        let zero = GridField::constant(&g, &[0.0, 0.0]).unwrap();
        assert!(union_levelset_region(&zero, 0.1, LevelUnion::Symmetric)
            .unwrap()
            .is_empty());

        let f = GridField::scalar_from_fn(&g, |x| x[0] - 0.5).unwrap();
        let r = union_levelset_region(&f, 0.25, LevelUnion::Symmetric).unwrap();
        assert!((r.measure() - 0.5).abs() <= cell(n));

        let f2 = GridField::from_fn(&g, 2, |x| vec![x[0], 0.1]).unwrap();
        let r = union_levelset_region(&f2, 0.05, LevelUnion::Signed { lead: 0 }).unwrap();
        let expected = Region::from_predicate(&g, |x| x[0] > 0.05);
        assert_eq!(r, expected);

        assert!(union_levelset_region(&f2, 0.0, LevelUnion::Symmetric).is_err());
        assert!(union_levelset_region(&f2, 0.1, LevelUnion::Signed { lead: 2 }).is_err());
    }

    #[test]
    fn perimeter_examples() {
        let g = Grid::unit_square(64).unwrap();
        let half = Region::from_predicate(&g, |x| x[0] < 0.5);
        assert_eq!(relative_perimeter(&half), 1.0);
        assert_eq!(perimeter_estimate(&half).calibrated, 1.0);
        assert_eq!(relative_perimeter(&Region::full(&g)), 0.0);
        assert_eq!(relative_perimeter(&Region::empty(&g)), 0.0);
    }

    #[test]
    fn disc_perimeter_bracketed() {
        let g = Grid::unit_square(512).unwrap();
        let disc = Region::from_predicate(&g, |x| (x[0] - 0.5).hypot(x[1] - 0.5) < 0.25);
        let p = perimeter_estimate(&disc);
        let exact = 2.0 * std::f64::consts::PI * 0.25;
        // A convex staircase has the perimeter of its bounding box.
        assert!(p.raw > exact && p.raw <= 2.0 + 1e-12, "raw = {}", p.raw);
        assert!(
            (p.calibrated - exact).abs() / exact < 0.02,
            "calibrated = {}",
            p.calibrated
        );
    }

    #[test]
    fn diagonal_calibration() {
        let g = Grid::unit_square(128).unwrap();
        let r = Region::from_predicate(&g, |x| x[0] + x[1] > 1.0);
        let p = perimeter_estimate(&r);
        let exact = std::f64::consts::SQRT_2;
        assert!((p.raw / exact - std::f64::consts::SQRT_2).abs() < 0.02);
        assert!(
            (p.calibrated - exact).abs() / exact < 0.02,
            "calibrated = {}",
            p.calibrated
        );
    }

    #[test]
    fn one_dimensional_perimeter_counts_points() {
        let g = Grid::unit_interval(32).unwrap();
        let r = Region::from_predicate(&g, |x| x[0] > 0.25 && x[0] < 0.5);
        assert_eq!(relative_perimeter(&r), 2.0);
    }

    #[test]
    fn regime_examples() {
        let sys = CoefficientSystem::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]], &[1.0, 1.0]).unwrap();
        let states = all_degenerate_states(&sys).unwrap();
        let g = Grid::unit_square(8).unwrap();
        let sigma = 0.2;

        let u = GridField::constant(&g, &states.coexistence().u).unwrap();
        let r = regime_sets(&sys, &u, sigma).unwrap();
        assert_eq!(r.get(IndexSet::EMPTY).unwrap().measure(), 1.0);
        assert_eq!(r.leftover_measure, 0.0);

        let first = IndexSet::from_indices([0]);
        let u = GridField::constant(&g, &states.get(first).u).unwrap();
        let r = regime_sets(&sys, &u, sigma).unwrap();
        assert_eq!(r.get(first).unwrap().measure(), 1.0);

        // f_1 ≡ 3σ/4 sits in the gap between σ/2 and σ.
        let f = GridField::constant(&g, &[0.75 * sigma, 0.0]).unwrap();
        let r = regime_sets_of_f(&f, sigma).unwrap();
        assert!(r.regions.iter().all(|(_, reg)| reg.is_empty()));
        assert_eq!(r.leftover_measure, 1.0);
    }

    #[test]
    fn region_csv_layout() {
        let g = Grid::new(vec![1.0, 1.0], vec![4, 4]).unwrap();
        let r = Region::from_predicate(&g, |x| x[0] < 0.25);
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().all(|l| l == "1,0,0,0"));
    }
}
