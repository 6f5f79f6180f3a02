//! Coarea and relative isoperimetric diagnostics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{gradient, stable_sum, Grid, GridField};
use super::region::{perimeter_estimate, relative_perimeter, superlevel_set, Region};
use crate::error::{input, Result};

/// Default number of midpoint levels for the coarea integral.
pub const DEFAULT_LEVELS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoareaCheck {
    /// `∫ |∇f|` over `{t_lo < f < t_hi}`.
    pub grad_integral: f64,
    /// `Σ_k P([f > t_k]) Δt` with raw face counting.
    pub level_integral_raw: f64,
    /// Same with the orientation-calibrated perimeter.
    pub level_integral_calibrated: f64,
    pub rel_error_raw: f64,
    pub rel_error_calibrated: f64,
}

pub fn coarea_check(
    field: &GridField,
    t_lo: f64,
    t_hi: f64,
    n_levels: usize,
) -> Result<CoareaCheck> {
    let values = field.require_scalar()?;
    if !(t_lo < t_hi) {
        return Err(input("coarea window needs t_lo < t_hi"));
    }
    if n_levels < 8 {
        return Err(input("coarea check needs at least 8 levels"));
    }
    let grid = field.grid();
    let grad = gradient(field)?;
    let norms = (0..grid.cell_count()).map(|c| {
        if values[c] > t_lo && values[c] < t_hi {
            grad.components()
                .iter()
                .map(|d| d[c] * d[c])
                .sum::<f64>()
                .sqrt()
        } else {
            0.0
        }
    });
    let grad_integral = stable_sum(norms) * grid.cell_volume();

    let dt = (t_hi - t_lo) / n_levels as f64;
    let mut raw = Vec::with_capacity(n_levels);
    let mut cal = Vec::with_capacity(n_levels);
    for k in 0..n_levels {
        let t = t_lo + (k as f64 + 0.5) * dt;
        let p = perimeter_estimate(&superlevel_set(field, t)?);
        raw.push(p.raw * dt);
        cal.push(p.calibrated * dt);
    }
    let level_integral_raw = stable_sum(raw);
    let level_integral_calibrated = stable_sum(cal);
    let denom = grad_integral.max(1e-12);
    Ok(CoareaCheck {
        grad_integral,
        level_integral_raw,
        level_integral_calibrated,
        rel_error_raw: (level_integral_raw - grad_integral).abs() / denom,
        rel_error_calibrated: (level_integral_calibrated - grad_integral).abs() / denom,
    })
}

/// Families of test regions for the isoperimetric estimate. Every generated
/// region is nonempty with `|A| ≤ |Ω|/2`; others are discarded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SampleFamily {
    /// `{x_a < s}` and `{x_a > L_a − s}` for `count` values of `s` up to `L_a/2`.
    HalfSlabs { count: usize },
    /// Discs centred at the corners (2-D only).
    CornerQuarterDiscs { count: usize },
    /// Discs (intervals in 1-D) centred in `Ω`.
    CenteredDiscs { count: usize },
    /// Unions of `rects` random axis-aligned boxes.
    RandomRectangleUnions {
        count: usize,
        rects: usize,
        seed: u64,
    },
}

impl SampleFamily {
    pub fn name(&self) -> &'static str {
        match self {
            SampleFamily::HalfSlabs { .. } => "half_slab",
            SampleFamily::CornerQuarterDiscs { .. } => "corner_quarter_disc",
            SampleFamily::CenteredDiscs { .. } => "centered_disc",
            SampleFamily::RandomRectangleUnions { .. } => "random_rectangles",
        }
    }

    /// The four families with modest sample counts.
    pub fn standard(seed: u64) -> Vec<SampleFamily> {
        vec![
            SampleFamily::HalfSlabs { count: 8 },
            SampleFamily::CornerQuarterDiscs { count: 8 },
            SampleFamily::CenteredDiscs { count: 8 },
            SampleFamily::RandomRectangleUnions {
                count: 32,
                rects: 3,
                seed,
            },
        ]
    }

    fn regions(&self, grid: &Grid) -> Vec<Region> {
        let ext = grid.extents();
        let dim = grid.dim();
        match *self {
            SampleFamily::HalfSlabs { count } => {
                let mut out = Vec::new();
                for axis in 0..dim {
                    for k in 1..=count {
                        let s = 0.5 * ext[axis] * k as f64 / count as f64;
                        out.push(Region::from_predicate(grid, |x| x[axis] < s));
                        out.push(Region::from_predicate(grid, |x| x[axis] > ext[axis] - s));
                    }
                }
                out
            }
            SampleFamily::CornerQuarterDiscs { count } => {
                if dim < 2 {
                    return Vec::new();
                }
                let r_max = ext[0].min(ext[1]);
                let mut out = Vec::new();
                for corner in 0..4 {
                    let cx = if corner & 1 == 0 { 0.0 } else { ext[0] };
                    let cy = if corner & 2 == 0 { 0.0 } else { ext[1] };
                    for k in 1..=count {
                        let r = r_max * k as f64 / count as f64;
                        out.push(Region::from_predicate(grid, |x| {
                            (x[0] - cx).hypot(x[1] - cy) < r
                        }));
                    }
                }
                out
            }
            SampleFamily::CenteredDiscs { count } => {
                let c: Vec<f64> = ext.iter().map(|e| 0.5 * e).collect();
                let r_max = ext.iter().fold(f64::INFINITY, |a, &e| a.min(0.5 * e));
                (1..=count)
                    .map(|k| {
                        let r = r_max * k as f64 / count as f64;
                        Region::from_predicate(grid, |x| {
                            (0..dim).map(|a| (x[a] - c[a]).powi(2)).sum::<f64>().sqrt() < r
                        })
                    })
                    .collect()
            }
            SampleFamily::RandomRectangleUnions { count, rects, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..count)
                    .map(|_| {
                        let boxes: Vec<[(f64, f64); 2]> = (0..rects)
                            .map(|_| {
                                let mut b = [(0.0, 0.0); 2];
                                for (a, slot) in b.iter_mut().enumerate().take(dim) {
                                    let lo = rng.gen::<f64>() * ext[a];
                                    let len = rng.gen::<f64>() * 0.5 * ext[a];
                                    *slot = (lo, (lo + len).min(ext[a]));
                                }
                                b
                            })
                            .collect();
                        Region::from_predicate(grid, |x| {
                            boxes
                                .iter()
                                .any(|b| (0..dim).all(|a| x[a] > b[a].0 && x[a] < b[a].1))
                        })
                    })
                    .collect()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsoperimetricSample {
    pub family: String,
    pub measure: f64,
    pub perimeter: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsoperimetricEstimate {
    /// `min P(A; Ω) / |A|^{(d−1)/d}` over the samples: an upper bound on `c_Ω`.
    pub constant: f64,
    pub exponent: f64,
    pub samples: Vec<IsoperimetricSample>,
}

pub fn estimate_isoperimetric_constant(
    grid: &Grid,
    families: &[SampleFamily],
) -> Result<IsoperimetricEstimate> {
    let d = grid.dim() as f64;
    let exponent = (d - 1.0) / d;
    let half = 0.5 * grid.volume();
    let mut samples = Vec::new();
    for fam in families {
        for region in fam.regions(grid) {
            let measure = region.measure();
            if region.is_empty() || measure > half {
                continue;
            }
            let perimeter = relative_perimeter(&region);
            samples.push(IsoperimetricSample {
                family: fam.name().to_string(),
                measure,
                perimeter,
                ratio: perimeter / measure.powf(exponent),
            });
        }
    }
    if samples.is_empty() {
        return Err(input("no admissible sample regions were generated"));
    }
    let constant = samples
        .iter()
        .map(|s| s.ratio)
        .fold(f64::INFINITY, f64::min);
    Ok(IsoperimetricEstimate {
        constant,
        exponent,
        samples,
    })
}
