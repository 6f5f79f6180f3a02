//! Numerical estimate of the best constant `C` over fields kept away from the
//! nontrivial degenerate states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::functional::{sides, InequalityProblem, InequalityReport, SideGradients};
use crate::coefficients::{CoefficientSystem, IndexSet};
use crate::error::{input, Result};
use crate::fields::{Grid, GridField};
use crate::table::{fmt_f64, Table};

/// Ratios above this on a separated field mean the separation is too weak
/// to keep the quotient bounded.
pub const DIVERGENCE_RATIO: f64 = 1e12;
/// Regularization of the denominator, relative to `|Ω|`.
pub const RHS_REGULARIZATION: f64 = 1e-9;
const PUSHBACK_SLACK: f64 = 1e-9;
const PROJECTION_ROUNDS: usize = 20;
const BASELINE_CHUNK: usize = 256;

/// Minimum normalized L¹ distance `(1/|Ω|) ∫ Σ_i |u_i − u_{I,i}|` from every
/// `u_I`, `I ≠ ∅`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationSpec {
    pub rho: f64,
}

impl SeparationSpec {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(input(format!("separation rho = {rho} must be positive")));
        }
        Ok(SeparationSpec { rho })
    }

    /// Rejects `rho` at or above the smallest pairwise distance between
    /// degenerate states.
    pub fn validate(&self, problem: &InequalityProblem) -> Result<()> {
        SeparationSpec::new(self.rho)?;
        let limit = min_pairwise_distance(problem);
        if self.rho >= limit {
            return Err(input(format!(
                "separation rho = {} must be below the smallest pairwise distance {limit} \
                 between degenerate states",
                self.rho
            )));
        }
        Ok(())
    }
}

/// Smallest L¹ distance between two distinct degenerate states.
pub fn min_pairwise_distance(problem: &InequalityProblem) -> f64 {
    let states: Vec<&[f64]> = problem.states().iter().map(|s| s.u.as_slice()).collect();
    let mut best = f64::INFINITY;
    for a in 0..states.len() {
        for b in a + 1..states.len() {
            best = best.min(l1(states[a], states[b]));
        }
    }
    best
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Parametrization of the fields searched over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpace {
    /// Spatially constant fields.
    Constant,
    /// Piecewise (bi)linear fields on `nodes` equispaced nodes per axis.
    Lattice { nodes: usize },
    /// One free value per cell.
    Cellwise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub starts: usize,
    pub iterations: usize,
    pub seed: u64,
    pub use_truncation: bool,
    /// Baseline evaluations as a multiple of the optimizer's.
    pub baseline_factor: f64,
    pub field_space: FieldSpace,
    /// Coordinates checked by finite differences at each start.
    pub fd_check_coords: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            starts: 16,
            iterations: 500,
            seed: 0,
            use_truncation: false,
            baseline_factor: 1.0,
            field_space: FieldSpace::Lattice { nodes: 3 },
            fd_check_coords: 8,
        }
    }
}

/// Per-start record of the ascent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartTrace {
    pub kind: String,
    /// Objective after every iteration (including the start point).
    pub ratios: Vec<f64>,
    pub best: f64,
    /// Largest relative discrepancy between analytic and finite-difference
    /// partial derivatives at the start point.
    pub fd_max_rel_error: f64,
}

#[derive(Clone, Debug)]
pub struct ConstantEstimate {
    /// Exact ratio of the best field found by either search.
    pub c_estimate: f64,
    pub optimizer_best: f64,
    pub baseline_best: f64,
    pub optimizer_evaluations: usize,
    pub baseline_evaluations: usize,
    pub maximizer: GridField,
    pub maximizer_report: InequalityReport,
    pub traces: Vec<StartTrace>,
    /// The ratio exceeded [`DIVERGENCE_RATIO`] on a separated field.
    pub separation_too_small: bool,
    pub fd_max_rel_error: f64,
    pub rho: f64,
}

impl ConstantEstimate {
    pub fn trace_csv(&self) -> String {
        let mut t = Table::new(["start", "kind", "iteration", "ratio"]);
        for (s, tr) in self.traces.iter().enumerate() {
            for (it, r) in tr.ratios.iter().enumerate() {
                t.push(vec![
                    s.to_string(),
                    tr.kind.clone(),
                    it.to_string(),
                    fmt_f64(*r),
                ]);
            }
        }
        t.to_csv()
    }
}

/// Maps parameters to fields: `u_k(x) = Σ_n params[k][n] φ_n(x)` with the
/// `φ_n` a partition of unity.
struct Basis {
    per_component: usize,
    /// For each cell, the nonzero `(node, weight)` pairs, `stride` per cell.
    cells: Option<Vec<(usize, f64)>>,
    stride: usize,
    kind: FieldSpace,
}

impl Basis {
    fn new(grid: &Grid, space: FieldSpace) -> Result<Self> {
        let cells = grid.cell_count();
        match space {
            FieldSpace::Constant => Ok(Basis {
                per_component: 1,
                cells: None,
                stride: 1,
                kind: space,
            }),
            FieldSpace::Cellwise => Ok(Basis {
                per_component: cells,
                cells: None,
                stride: 1,
                kind: space,
            }),
            FieldSpace::Lattice { nodes } => {
                if nodes < 2 {
                    return Err(input("a lattice needs at least 2 nodes per axis"));
                }
                let dim = grid.dim();
                let stride = 1usize << dim;
                let mut table = Vec::with_capacity(cells * stride);
                for c in 0..cells {
                    let x = grid.center(c);
                    let mut entries = vec![(0usize, 1.0)];
                    for a in 0..dim {
                        let t = x[a] / grid.extents()[a] * (nodes - 1) as f64;
                        let j0 = (t.floor() as usize).min(nodes - 2);
                        let w = t - j0 as f64;
                        let mut next = Vec::with_capacity(entries.len() * 2);
                        for &(idx, wt) in &entries {
                            next.push((idx * nodes + j0, wt * (1.0 - w)));
                            next.push((idx * nodes + j0 + 1, wt * w));
                        }
                        entries = next;
                    }
                    table.extend(entries);
                }
                Ok(Basis {
                    per_component: nodes.pow(dim as u32),
                    cells: Some(table),
                    stride,
                    kind: space,
                })
            }
        }
    }

    fn field(&self, grid: &Grid, n: usize, params: &[f64]) -> GridField {
        let cells = grid.cell_count();
        let comps = (0..n)
            .map(|k| {
                let p = &params[k * self.per_component..(k + 1) * self.per_component];
                match (&self.kind, &self.cells) {
                    (FieldSpace::Constant, _) => vec![p[0]; cells],
                    (FieldSpace::Cellwise, _) => p.to_vec(),
                    (_, Some(table)) => table
                        .chunks_exact(self.stride)
                        .map(|e| e.iter().map(|&(j, w)| w * p[j]).sum())
                        .collect(),
                    _ => unreachable!(),
                }
            })
            .collect();
        GridField::new(grid.clone(), comps).expect("basis produces well-formed fields")
    }

    /// Pulls a per-cell gradient back to parameter space.
    fn pull_back(&self, n: usize, cell_grad: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; n * self.per_component];
        for k in 0..n {
            let o = &mut out[k * self.per_component..(k + 1) * self.per_component];
            match (&self.kind, &self.cells) {
                (FieldSpace::Constant, _) => o[0] = cell_grad[k].iter().sum(),
                (FieldSpace::Cellwise, _) => o.copy_from_slice(&cell_grad[k]),
                (_, Some(table)) => {
                    for (c, e) in table.chunks_exact(self.stride).enumerate() {
                        for &(j, w) in e {
                            o[j] += w * cell_grad[k][c];
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
        out
    }
}

struct Objective<'a> {
    problem: &'a InequalityProblem,
    grid: &'a Grid,
    basis: Basis,
    n: usize,
    rho: f64,
    eps: f64,
    upper: f64,
    m_trunc: Option<f64>,
}

#[derive(Clone, Copy)]
struct Value {
    objective: f64,
}

impl<'a> Objective<'a> {
    fn dim(&self) -> usize {
        self.n * self.basis.per_component
    }

    fn field(&self, params: &[f64]) -> GridField {
        self.basis.field(self.grid, self.n, params)
    }

    fn value(&self, params: &[f64]) -> Value {
        let u = self.field(params);
        let s = sides(
            self.problem.system(),
            self.problem.p(),
            &u,
            self.m_trunc,
            None,
        );
        Value {
            objective: s.lhs / (s.rhs + self.eps),
        }
    }

    fn value_grad(&self, params: &[f64]) -> (Value, Vec<f64>) {
        let u = self.field(params);
        let cells = self.grid.cell_count();
        let mut g = SideGradients {
            lhs: vec![vec![0.0; cells]; self.n],
            rhs: vec![vec![0.0; cells]; self.n],
        };
        let s = sides(
            self.problem.system(),
            self.problem.p(),
            &u,
            self.m_trunc,
            Some(&mut g),
        );
        let den = s.rhs + self.eps;
        let cell_grad: Vec<Vec<f64>> = g
            .lhs
            .iter()
            .zip(&g.rhs)
            .map(|(gl, gr)| {
                gl.iter()
                    .zip(gr)
                    .map(|(l, r)| (l * den - s.lhs * r) / (den * den))
                    .collect()
            })
            .collect();
        let v = Value {
            objective: s.lhs / den,
        };
        (v, self.basis.pull_back(self.n, &cell_grad))
    }

    /// Normalized L¹ distance from each `u_I`, `I ≠ ∅`, in index order.
    fn distances(&self, params: &[f64]) -> Vec<f64> {
        let states = self.problem.states().nontrivial();
        match self.basis.kind {
            FieldSpace::Constant => states.map(|st| l1(params, &st.u)).collect(),
            _ => {
                let u = self.field(params);
                let cells = self.grid.cell_count() as f64;
                states
                    .map(|st| {
                        (0..self.n)
                            .map(|k| {
                                let t = st.u[k];
                                u.component(k).iter().map(|v| (v - t).abs()).sum::<f64>() / cells
                            })
                            .sum()
                    })
                    .collect()
            }
        }
    }

    /// Clamp to `[0, 2M]`, then push radially away from the first `u_I`
    /// closer than `rho`, and repeat; `None` if that does not settle.
    fn project(&self, params: &[f64]) -> Option<Vec<f64>> {
        let pc = self.basis.per_component;
        let mut x: Vec<f64> = params.iter().map(|v| v.clamp(0.0, self.upper)).collect();
        let coex = &self.problem.states().coexistence().u;
        for _ in 0..PROJECTION_ROUNDS {
            let d = self.distances(&x);
            let Some((st, &d)) = self
                .problem
                .states()
                .nontrivial()
                .zip(&d)
                .find(|(_, &d)| d < self.rho)
            else {
                return Some(x);
            };
            if d > 0.0 {
                let s = self.rho / d * (1.0 + PUSHBACK_SLACK);
                for k in 0..self.n {
                    for v in &mut x[k * pc..(k + 1) * pc] {
                        *v = st.u[k] + (*v - st.u[k]) * s;
                    }
                }
            } else {
                let t = self.rho / l1(coex, &st.u) * (1.0 + PUSHBACK_SLACK);
                for k in 0..self.n {
                    let v = st.u[k] + t * (coex[k] - st.u[k]);
                    x[k * pc..(k + 1) * pc].iter_mut().for_each(|p| *p = v);
                }
            }
            for v in &mut x {
                *v = v.clamp(0.0, self.upper);
            }
        }
        None
    }

    #[cfg(test)]
    fn feasible(&self, x: &[f64]) -> bool {
        x.iter().all(|&v| (0.0..=self.upper).contains(&v))
            && self.distances(x).iter().all(|&d| d >= self.rho)
    }

    fn constant_params(&self, u: &[f64]) -> Vec<f64> {
        let pc = self.basis.per_component;
        u.iter()
            .flat_map(|&v| std::iter::repeat(v).take(pc))
            .collect()
    }
}

struct StartOutcome {
    trace: StartTrace,
    best: Option<(f64, Vec<f64>)>,
    evaluations: usize,
}

fn fd_check(
    obj: &Objective,
    x: &[f64],
    value: f64,
    grad: &[f64],
    coords: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, usize) {
    // Partials far below the objective's natural scale are compared absolutely.
    let floor = 1e-2 * (1.0 + value.abs()) / obj.upper;
    let mut worst: f64 = 0.0;
    let mut evals = 0;
    for _ in 0..coords.min(x.len()) {
        let j = rng.gen_range(0..x.len());
        let h = 1e-6 * x[j].abs().max(1e-3);
        let mut xp = x.to_vec();
        xp[j] += h;
        let mut xm = x.to_vec();
        xm[j] -= h;
        let fd = (obj.value(&xp).objective - obj.value(&xm).objective) / (2.0 * h);
        evals += 2;
        let scale = fd.abs().max(grad[j].abs()).max(floor);
        worst = worst.max((fd - grad[j]).abs() / scale);
    }
    (worst, evals)
}

fn ascend(
    obj: &Objective,
    kind: String,
    start: Vec<f64>,
    cfg: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
) -> StartOutcome {
    let mut evaluations = 0;
    let Some(mut x) = obj.project(&start) else {
        return StartOutcome {
            trace: StartTrace {
                kind,
                ratios: Vec::new(),
                best: 0.0,
                fd_max_rel_error: 0.0,
            },
            best: None,
            evaluations,
        };
    };
    let (mut val, mut grad) = obj.value_grad(&x);
    evaluations += 1;
    let (fd_err, fd_evals) = fd_check(obj, &x, val.objective, &grad, cfg.fd_check_coords, rng);
    evaluations += fd_evals;
    let mut ratios = vec![val.objective];
    let mut step = 0.1 * obj.upper;
    let floor = 1e-12 * obj.upper;
    for _ in 0..cfg.iterations {
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() || step < floor {
            break;
        }
        let trial: Vec<f64> = x
            .iter()
            .zip(&grad)
            .map(|(v, g)| v + step * g / norm)
            .collect();
        let candidate = obj.project(&trial);
        let accepted = match candidate {
            Some(c) => {
                let (cv, cg) = obj.value_grad(&c);
                evaluations += 1;
                if cv.objective > val.objective {
                    x = c;
                    val = cv;
                    grad = cg;
                    true
                } else {
                    false
                }
            }
            None => false,
        };
        if !accepted {
            step *= 0.5;
        }
        ratios.push(val.objective);
    }
    StartOutcome {
        trace: StartTrace {
            kind,
            ratios,
            best: val.objective,
            fd_max_rel_error: fd_err,
        },
        best: Some((val.objective, x)),
        evaluations,
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Start points: `u_∅`, then `u_I` nudged by `rho` toward `u_∅` and along each
/// axis, then alternating perturbations of `u_∅` and random fields.
fn start_points(obj: &Objective, count: usize, seed: u64) -> Vec<(String, Vec<f64>)> {
    let states = obj.problem.states();
    let coex = states.coexistence().u.clone();
    let rho = obj.rho;
    let mut out = vec![("coexistence".to_string(), obj.constant_params(&coex))];
    for st in states.nontrivial() {
        let d = l1(&coex, &st.u);
        let toward: Vec<f64> =
            st.u.iter()
                .zip(&coex)
                .map(|(a, b)| a + rho / d * (b - a))
                .collect();
        out.push((
            format!("toward_coexistence{}", st.i_set),
            obj.constant_params(&toward),
        ));
    }
    for st in states.nontrivial() {
        for k in 0..obj.n {
            for sign in [1.0, -1.0] {
                let mut v = st.u.clone();
                v[k] += sign * rho;
                if v[k] >= 0.0 {
                    out.push((
                        format!(
                            "axis{}_{}{}",
                            k + 1,
                            if sign > 0.0 { "up" } else { "down" },
                            st.i_set
                        ),
                        obj.constant_params(&v),
                    ));
                }
            }
        }
    }
    out.truncate(count);
    let mut r = 0u64;
    while out.len() < count {
        let mut rng = stream_rng(seed, 1_000_000 + r);
        let x: Vec<f64> = if r % 2 == 0 {
            let base = obj.constant_params(&coex);
            base.iter()
                .map(|v| (v * (1.0 + 0.5 * (rng.gen::<f64>() - 0.5))).max(0.0))
                .collect()
        } else {
            (0..obj.dim())
                .map(|_| rng.gen::<f64>() * obj.upper * 0.5)
                .collect()
        };
        out.push((
            if r % 2 == 0 { "perturbed" } else { "random" }.to_string(),
            x,
        ));
        r += 1;
    }
    out
}

/// A random parameter vector: uniform in the box, or a degenerate state
/// shifted by a random constant offset per component plus per-parameter
/// noise, both with log-uniform magnitudes.
fn random_sample(obj: &Objective, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = obj.dim();
    if rng.gen_bool(0.25) {
        return (0..d).map(|_| rng.gen::<f64>() * obj.upper).collect();
    }
    let pc = obj.basis.per_component;
    let states = obj.problem.states();
    let pick = rng.gen_range(0..(1usize << obj.n));
    let anchor = &states.get(IndexSet::from_bits(pick as u64)).u;
    let log_mag = |rng: &mut ChaCha8Rng| {
        let mag = 10f64.powf(rng.gen_range(-4.0..0.0)) * obj.upper;
        if rng.gen_bool(0.5) {
            mag
        } else {
            -mag
        }
    };
    let noise = 10f64.powf(rng.gen_range(-4.0..0.0));
    let mut out = Vec::with_capacity(d);
    for &a in anchor {
        let offset = log_mag(rng);
        for _ in 0..pc {
            out.push(a + offset + noise * log_mag(rng));
        }
    }
    out
}

/// Pure random search: `budget` samples, each projected and evaluated.
fn random_search(obj: &Objective, budget: usize, seed: u64) -> Option<(f64, Vec<f64>)> {
    let chunks = budget.div_ceil(BASELINE_CHUNK);
    let results: Vec<Option<(f64, Vec<f64>)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed ^ 0x5eed_ba5e, c as u64);
            let len = BASELINE_CHUNK.min(budget - c * BASELINE_CHUNK);
            let mut best: Option<(f64, Vec<f64>)> = None;
            for _ in 0..len {
                let raw = random_sample(obj, &mut rng);
                if let Some(x) = obj.project(&raw) {
                    let v = obj.value(&x).objective;
                    if best.as_ref().map_or(true, |(b, _)| v > *b) {
                        best = Some((v, x));
                    }
                }
            }
            best
        })
        .collect();
    results
        .into_iter()
        .flatten()
        .fold(None, |acc, cand| match acc {
            Some((b, _)) if b >= cand.0 => acc,
            _ => Some(cand),
        })
}

/// Maximize `lhs / rhs` over fields at normalized L¹ distance at least `rho`
/// from every `u_I`, `I ≠ ∅`.
pub fn estimate_constant(
    sys: &CoefficientSystem,
    p: f64,
    grid: &Grid,
    sep: SeparationSpec,
    config: &OptimizerConfig,
) -> Result<ConstantEstimate> {
    let problem = InequalityProblem::new(sys, p)?;
    estimate_constant_for(&problem, grid, sep, config)
}

pub fn estimate_constant_for(
    problem: &InequalityProblem,
    grid: &Grid,
    sep: SeparationSpec,
    config: &OptimizerConfig,
) -> Result<ConstantEstimate> {
    sep.validate(problem)?;
    if config.starts == 0 {
        return Err(input("at least one start is required"));
    }
    if !(config.baseline_factor >= 0.0 && config.baseline_factor.is_finite()) {
        return Err(input("baseline factor must be finite and nonnegative"));
    }
    let m = problem.m_trunc();
    let obj = Objective {
        problem,
        grid,
        basis: Basis::new(grid, config.field_space)?,
        n: problem.system().n_species(),
        rho: sep.rho,
        eps: RHS_REGULARIZATION * grid.volume(),
        upper: 2.0 * m,
        m_trunc: config.use_truncation.then_some(m),
    };

    let starts = start_points(&obj, config.starts, config.seed);
    let outcomes: Vec<StartOutcome> = starts
        .into_par_iter()
        .enumerate()
        .map(|(i, (kind, x))| {
            let mut rng = stream_rng(config.seed, i as u64);
            ascend(&obj, kind, x, config, &mut rng)
        })
        .collect();

    let optimizer_evaluations: usize = outcomes.iter().map(|o| o.evaluations).sum();
    let fd_max_rel_error = outcomes
        .iter()
        .map(|o| o.trace.fd_max_rel_error)
        .fold(0.0, f64::max);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut traces = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        if let Some((v, x)) = o.best {
            if best.as_ref().map_or(true, |(b, _)| v > *b) {
                best = Some((v, x));
            }
        }
        traces.push(o.trace);
    }
    let optimizer_best = best.as_ref().map_or(0.0, |b| b.0);

    let budget = (config.baseline_factor * optimizer_evaluations as f64).round() as usize;
    let baseline = random_search(&obj, budget, config.seed);
    let baseline_best = baseline.as_ref().map_or(0.0, |b| b.0);
    if let Some((v, x)) = baseline {
        if best.as_ref().map_or(true, |(b, _)| v > *b) {
            best = Some((v, x));
        }
    }
    let (_, x) =
        best.ok_or_else(|| input("no start point could be made to satisfy the separation"))?;
    let maximizer = obj.field(&x);
    let maximizer_report = problem.evaluate(&maximizer, config.use_truncation)?;
    let c_estimate = maximizer_report.ratio;
    let separation_too_small = c_estimate > DIVERGENCE_RATIO;
    if separation_too_small {
        log::warn!(
            "ratio {c_estimate:e} on a separated field: separation rho = {} is too small",
            sep.rho
        );
    }
    Ok(ConstantEstimate {
        c_estimate,
        optimizer_best,
        baseline_best,
        optimizer_evaluations,
        baseline_evaluations: budget,
        maximizer,
        maximizer_report,
        traces,
        separation_too_small,
        fd_max_rel_error,
        rho: sep.rho,
    })
}

/// `C(ρ)` for each separation in `rhos`.
pub fn constant_curve(
    problem: &InequalityProblem,
    grid: &Grid,
    rhos: &[f64],
    config: &OptimizerConfig,
) -> Result<Vec<ConstantEstimate>> {
    rhos.iter()
        .map(|&r| estimate_constant_for(problem, grid, SeparationSpec::new(r)?, config))
        .collect()
}

pub fn curve_csv(curve: &[ConstantEstimate]) -> String {
    let mut t = Table::new(["rho", "lhs", "rhs", "ratio"]);
    for e in curve {
        t.push_floats(&[
            e.rho,
            e.maximizer_report.lhs,
            e.maximizer_report.rhs,
            e.c_estimate,
        ]);
    }
    t.to_csv()
}
