//! Degenerate states `u_I`, the feasibility polytope `{u ≥ 0, f(u) ≥ 0}` and
//! its cube structure, and the uniform gap `σ` obtained by linear programming.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{
    admissibility_margin, CoefficientSystem, IndexSet, DEFAULT_ENUMERATION_CAP,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::simplex::{LinearProgram, LpOutcome, Relation};
use crate::table::{fmt_f64, Table};

/// Pivot magnitude below which a degenerate-state system counts as singular.
pub const SINGULAR_TOL: f64 = 1e-12;
/// Multiplier turning the largest degenerate-state coordinate into the
/// strict truncation bound `M`.
pub const TRUNCATION_MARGIN: f64 = 1.5;
/// A hyperplane-intersection point is feasible if every constraint holds to this.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Vertices closer than this (max norm) are merged.
pub const DEDUP_TOL: f64 = 1e-8;
/// Bisection width for the gap `σ`.
pub const SIGMA_BISECTION_TOL: f64 = 1e-6;

/// Solution of `u_i = 0 (i ∈ I)`, `f_j(u) = 0 (j ∉ I)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegenerateState {
    pub i_set: IndexSet,
    pub u: Vec<f64>,
    pub f: Vec<f64>,
}

impl DegenerateState {
    /// `u_∅ = A⁻¹ m`, the coexistence state.
    pub fn is_coexistence(&self) -> bool {
        self.i_set.is_empty()
    }
}

pub fn degenerate_state(sys: &CoefficientSystem, i_set: IndexSet) -> Result<DegenerateState> {
    let n = sys.n_species();
    if !i_set.fits(n) {
        return Err(crate::error::input(format!(
            "{i_set} is not a subset of 1..={n}"
        )));
    }
    let free: Vec<usize> = i_set.complement(n).members().collect();
    let k = free.len();
    let mut sub = Vec::with_capacity(k * k);
    for &r in &free {
        for &c in &free {
            sub.push(sys.a(r, c));
        }
    }
    let rhs: Vec<f64> = free.iter().map(|&r| sys.vector_m()[r]).collect();
    let (x, det) = linalg::solve(&sub, &rhs, k).ok_or(Error::Singular {
        det: 0.0,
        tol: SINGULAR_TOL,
    })?;
    if det.abs() < SINGULAR_TOL {
        return Err(Error::Singular {
            det,
            tol: SINGULAR_TOL,
        });
    }
    let mut u = vec![0.0; n];
    for (&i, v) in free.iter().zip(x) {
        u[i] = v;
    }
    let f = sys.evaluate_f(&u)?;
    Ok(DegenerateState { i_set, u, f })
}

/// All `2^N` degenerate states, indexed by the bitmask of their index set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegenerateStates {
    n: usize,
    states: Vec<DegenerateState>,
}

impl DegenerateStates {
    pub fn n_species(&self) -> usize {
        self.n
    }

    pub fn get(&self, i_set: IndexSet) -> &DegenerateState {
        &self.states[i_set.bits() as usize]
    }

    pub fn coexistence(&self) -> &DegenerateState {
        &self.states[0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &DegenerateState> {
        self.states.iter()
    }

    /// States with `I ≠ ∅`, i.e. the ones a separated field must avoid.
    pub fn nontrivial(&self) -> impl Iterator<Item = &DegenerateState> {
        self.states.iter().skip(1)
    }

    /// Largest coordinate over all states.
    pub fn max_coordinate(&self) -> f64 {
        self.states
            .iter()
            .flat_map(|s| s.u.iter().copied())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut header = vec!["set".to_string()];
        header.extend((1..=self.n).map(|i| format!("u{i}")));
        header.extend((1..=self.n).map(|i| format!("f{i}")));
        let mut t = Table::new(header);
        for s in &self.states {
            let mut row = vec![format!("\"{}\"", s.i_set)];
            row.extend(s.u.iter().chain(&s.f).map(|&v| fmt_f64(v)));
            t.push(row);
        }
        t.to_csv()
    }
}

pub fn all_degenerate_states(sys: &CoefficientSystem) -> Result<DegenerateStates> {
    let n = sys.n_species();
    if n > DEFAULT_ENUMERATION_CAP {
        return Err(Error::Capacity(format!(
            "N = {n} exceeds the exhaustive enumeration cap {DEFAULT_ENUMERATION_CAP}"
        )));
    }
    let states = IndexSet::all(n)
        .map(|set| degenerate_state(sys, set))
        .collect::<Result<Vec<_>>>()?;
    Ok(DegenerateStates { n, states })
}

/// `M = 1.5 · sup_{I,i} u_{I,i}`.
pub fn truncation_bound(sys: &CoefficientSystem) -> Result<f64> {
    let states = all_degenerate_states(sys)?;
    Ok(truncation_bound_of(&states))
}

pub(crate) fn truncation_bound_of(states: &DegenerateStates) -> f64 {
    TRUNCATION_MARGIN * states.max_coordinate().max(f64::MIN_POSITIVE)
}

/// One of the `2N` bounding hyperplanes of the feasibility polytope.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Hyperplane {
    /// `u_i = 0` (zero-based `i`).
    Coordinate(usize),
    /// `f_i = 0` (zero-based `i`).
    Residual(usize),
}

impl Hyperplane {
    /// Hyperplanes `0..N` are coordinates, `N..2N` residuals.
    pub fn from_ordinal(k: usize, n: usize) -> Self {
        if k < n {
            Hyperplane::Coordinate(k)
        } else {
            Hyperplane::Residual(k - n)
        }
    }

    /// Row `(coeffs, rhs)` of the equation `coeffs · u = rhs`.
    fn equation(self, sys: &CoefficientSystem) -> (Vec<f64>, f64) {
        let n = sys.n_species();
        match self {
            Hyperplane::Coordinate(i) => {
                let mut row = vec![0.0; n];
                row[i] = 1.0;
                (row, 0.0)
            }
            Hyperplane::Residual(i) => ((0..n).map(|j| sys.a(i, j)).collect(), sys.vector_m()[i]),
        }
    }

    fn value(self, u: &[f64], f: &[f64]) -> f64 {
        match self {
            Hyperplane::Coordinate(i) => u[i],
            Hyperplane::Residual(i) => f[i],
        }
    }
}

impl fmt::Display for Hyperplane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hyperplane::Coordinate(i) => write!(f, "u{}=0", i + 1),
            Hyperplane::Residual(i) => write!(f, "f{}=0", i + 1),
        }
    }
}

/// Vertices of `{u ≥ 0, f(u) ≥ 0}` by brute force over all `N`-subsets of the
/// `2N` hyperplanes. Output is sorted lexicographically, so it does not depend
/// on enumeration order.
pub fn enumerate_vertices(sys: &CoefficientSystem) -> Result<Vec<Vec<f64>>> {
    let n = sys.n_species();
    if n > DEFAULT_ENUMERATION_CAP {
        return Err(Error::Capacity(format!(
            "N = {n} exceeds the vertex enumeration cap {DEFAULT_ENUMERATION_CAP}"
        )));
    }
    let subsets = n_subsets(2 * n, n);
    let candidates: Vec<Vec<f64>> = subsets
        .par_iter()
        .filter_map(|&mask| intersection_point(sys, mask))
        .collect();
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    for c in candidates {
        if !vertices.iter().any(|v| max_dist(v, &c) <= DEDUP_TOL) {
            vertices.push(c);
        }
    }
    vertices.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(vertices)
}

/// All bitmasks over `bits` positions with exactly `k` ones, in increasing order.
fn n_subsets(bits: usize, k: usize) -> Vec<u64> {
    let mut out = Vec::new();
    if k == 0 {
        out.push(0);
        return out;
    }
    let limit = 1u64 << bits;
    let mut v: u64 = (1 << k) - 1;
    while v < limit {
        out.push(v);
        // Gosper's hack: next integer with the same popcount.
        let c = v & v.wrapping_neg();
        let r = v + c;
        v = (((r ^ v) >> 2) / c) | r;
    }
    out
}

fn intersection_point(sys: &CoefficientSystem, mask: u64) -> Option<Vec<f64>> {
    let n = sys.n_species();
    let mut mat = Vec::with_capacity(n * n);
    let mut rhs = Vec::with_capacity(n);
    for k in (0..2 * n).filter(|k| mask & (1 << k) != 0) {
        let (row, b) = Hyperplane::from_ordinal(k, n).equation(sys);
        mat.extend(row);
        rhs.push(b);
    }
    let (u, det) = linalg::solve(&mat, &rhs, n)?;
    if det.abs() < SINGULAR_TOL || u.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let f = sys.evaluate_f(&u).ok()?;
    let feasible = u.iter().chain(&f).all(|&v| v >= -FEASIBILITY_TOL);
    feasible.then_some(u)
}

fn max_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Vertices incident to one hyperplane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FacetIncidence {
    pub hyperplane: Hyperplane,
    pub label: String,
    /// Indices into [`PolytopeReport::vertices`].
    pub vertices: Vec<usize>,
    /// Affine dimension of the incident vertex set.
    pub affine_dim: usize,
}

/// Image of a degenerate state under the cube map: `alpha_i = 0` iff `i ∈ I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeLabel {
    pub i_set: IndexSet,
    pub alpha: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolytopeReport {
    pub n_species: usize,
    pub vertices: Vec<Vec<f64>>,
    /// For each vertex, the degenerate state it coincides with (if any).
    pub vertex_index_sets: Vec<Option<IndexSet>>,
    pub facet_incidence: Vec<FacetIncidence>,
    pub certificate: Vec<CubeLabel>,
    pub bounded: bool,
    /// Vertex set equals `{u_I}` (bijectively, within `FEASIBILITY_TOL`).
    pub vertices_match_states: bool,
    /// Every hyperplane carries a facet with the cube's vertex pattern.
    pub facets_match_cube: bool,
    /// The 0/1 map preserves hyperplane incidence in both directions.
    pub certificate_preserves_incidence: bool,
    pub is_cuboid: bool,
}

impl PolytopeReport {
    pub fn vertices_csv(&self) -> String {
        vertices_csv(&self.vertices)
    }
}

pub fn vertices_csv(vertices: &[Vec<f64>]) -> String {
    let n = vertices.first().map_or(0, Vec::len);
    let mut t = Table::new((1..=n).map(|i| format!("u{i}")));
    for v in vertices {
        t.push_floats(v);
    }
    t.to_csv()
}

/// Check that the feasibility polytope is combinatorially a cube with the
/// degenerate states as vertices.
pub fn verify_cuboid(sys: &CoefficientSystem) -> Result<PolytopeReport> {
    let n = sys.n_species();
    let vertices = enumerate_vertices(sys)?;
    let bounded = polytope_is_bounded(sys)?;

    // States may fail to exist for systems with a vanishing minor; that alone
    // rules out the cube structure.
    let states: Option<DegenerateStates> = match all_degenerate_states(sys) {
        Ok(s) => Some(s),
        Err(Error::Singular { .. }) => None,
        Err(e) => return Err(e),
    };

    let vertex_index_sets: Vec<Option<IndexSet>> = vertices
        .iter()
        .map(|v| {
            states.as_ref().and_then(|st| {
                st.iter()
                    .find(|s| max_dist(&s.u, v) <= FEASIBILITY_TOL)
                    .map(|s| s.i_set)
            })
        })
        .collect();
    let mut matched: Vec<IndexSet> = vertex_index_sets.iter().flatten().copied().collect();
    matched.sort();
    matched.dedup();
    let vertices_match_states = states.is_some()
        && vertices.len() == 1 << n
        && vertex_index_sets.iter().all(Option::is_some)
        && matched.len() == vertices.len();

    let f_values: Vec<Vec<f64>> = vertices
        .iter()
        .map(|v| sys.evaluate_f(v))
        .collect::<Result<_>>()?;
    let facet_incidence: Vec<FacetIncidence> = (0..2 * n)
        .map(|k| {
            let h = Hyperplane::from_ordinal(k, n);
            let incident: Vec<usize> = (0..vertices.len())
                .filter(|&vi| h.value(&vertices[vi], &f_values[vi]).abs() <= FEASIBILITY_TOL)
                .collect();
            let affine_dim = affine_dimension(&vertices, &incident);
            FacetIncidence {
                hyperplane: h,
                label: h.to_string(),
                vertices: incident,
                affine_dim,
            }
        })
        .collect();

    let certificate: Vec<CubeLabel> = IndexSet::all(n)
        .map(|set| CubeLabel {
            i_set: set,
            alpha: (0..n).map(|i| u8::from(!set.contains(i))).collect(),
        })
        .collect();

    let cube_incident = |h: Hyperplane, set: IndexSet| match h {
        Hyperplane::Coordinate(i) => set.contains(i),
        Hyperplane::Residual(i) => !set.contains(i),
    };

    let facets_match_cube = vertices_match_states
        && facet_incidence.iter().all(|fi| {
            let expected: Vec<IndexSet> = IndexSet::all(n)
                .filter(|&s| cube_incident(fi.hyperplane, s))
                .collect();
            let mut got: Vec<IndexSet> = fi
                .vertices
                .iter()
                .filter_map(|&vi| vertex_index_sets[vi])
                .collect();
            got.sort();
            fi.vertices.len() == 1 << (n - 1) && fi.affine_dim == n - 1 && got == expected
        });

    let certificate_preserves_incidence = vertices_match_states
        && facet_incidence.iter().all(|fi| {
            (0..vertices.len()).all(|vi| {
                let set = vertex_index_sets[vi].expect("all vertices matched");
                let label = &certificate[set.bits() as usize].alpha;
                let on_cube_facet = match fi.hyperplane {
                    Hyperplane::Coordinate(i) => label[i] == 0,
                    Hyperplane::Residual(i) => label[i] == 1,
                };
                on_cube_facet == fi.vertices.contains(&vi)
            })
        });

    let is_cuboid =
        bounded && vertices_match_states && facets_match_cube && certificate_preserves_incidence;
    Ok(PolytopeReport {
        n_species: n,
        vertices,
        vertex_index_sets,
        facet_incidence,
        certificate,
        bounded,
        vertices_match_states,
        facets_match_cube,
        certificate_preserves_incidence,
        is_cuboid,
    })
}

fn affine_dimension(vertices: &[Vec<f64>], subset: &[usize]) -> usize {
    if subset.len() <= 1 {
        return 0;
    }
    let n = vertices[subset[0]].len();
    let base = &vertices[subset[0]];
    let diffs: Vec<f64> = subset[1..]
        .iter()
        .flat_map(|&vi| vertices[vi].iter().zip(base).map(|(a, b)| a - b))
        .collect();
    linalg::rank(&diffs, subset.len() - 1, n, 1e-9)
}

/// Maximize `Σ u_i` over the polytope; unbounded means it is not a polytope.
fn polytope_is_bounded(sys: &CoefficientSystem) -> Result<bool> {
    let n = sys.n_species();
    let mut lp = LinearProgram::new(n);
    lp.objective = vec![1.0; n];
    for i in 0..n {
        lp.constrain(
            (0..n).map(|j| sys.a(i, j)).collect(),
            Relation::Le,
            sys.vector_m()[i],
        );
    }
    Ok(match lp.solve()? {
        LpOutcome::Optimal { .. } => true,
        LpOutcome::Unbounded => false,
        // An empty feasible set has no vertices to compare; it is not a cube.
        LpOutcome::Infeasible => false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlabOptimum {
    pub status: LpStatus,
    /// `max min_i f_i(u)` over the slab; `None` when the slab is empty.
    pub t_star: Option<f64>,
    pub maximizer: Option<Vec<f64>>,
}

/// `sup { min_i f_i(u) : u ≥ 0, u_j ≤ σ, f_j(u) ≤ σ }` as the LP
/// `max t` s.t. `f_i(u) ≥ t`, with `t = t⁺ − t⁻` split into nonnegative parts.
pub fn lp_max_min_f(sys: &CoefficientSystem, j: usize, sigma: f64) -> Result<SlabOptimum> {
    let n = sys.n_species();
    if j >= n {
        return Err(crate::error::input(format!("index {} out of range", j + 1)));
    }
    if !(sigma > 0.0) {
        return Err(crate::error::input("sigma must be positive"));
    }
    // Variables: u_0..u_{n−1}, t⁺, t⁻.
    let mut lp = LinearProgram::new(n + 2);
    lp.objective[n] = 1.0;
    lp.objective[n + 1] = -1.0;
    for i in 0..n {
        let mut row: Vec<f64> = (0..n).map(|k| sys.a(i, k)).collect();
        row.push(1.0);
        row.push(-1.0);
        lp.constrain(row, Relation::Le, sys.vector_m()[i]);
    }
    let mut cap = vec![0.0; n + 2];
    cap[j] = 1.0;
    lp.constrain(cap, Relation::Le, sigma);
    let mut slab: Vec<f64> = (0..n).map(|k| -sys.a(j, k)).collect();
    slab.extend([0.0, 0.0]);
    lp.constrain(slab, Relation::Le, sigma - sys.vector_m()[j]);

    match lp.solve()? {
        LpOutcome::Infeasible => Ok(SlabOptimum {
            status: LpStatus::Infeasible,
            t_star: None,
            maximizer: None,
        }),
        LpOutcome::Unbounded => Err(Error::Numeric(format!(
            "slab LP for index {} at sigma = {sigma} is unbounded",
            j + 1
        ))),
        LpOutcome::Optimal { x, value } => Ok(SlabOptimum {
            status: LpStatus::Optimal,
            t_star: Some(value),
            maximizer: Some(x[..n].to_vec()),
        }),
    }
}

impl SlabOptimum {
    /// The gap implication holds at `sigma`: the slab is empty, or every point
    /// in it has some `f_i ≤ −σ`.
    pub fn gap_holds(&self, sigma: f64) -> bool {
        match self.t_star {
            None => true,
            Some(t) => t <= -sigma,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub sigma: f64,
    pub status: LpStatus,
    pub t_star: Option<f64>,
    pub gap_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexProfile {
    /// One-based species index.
    pub index: usize,
    pub sigma: f64,
    pub samples: Vec<ProfileSample>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaCertificate {
    pub sigma: f64,
    pub sigma_max: f64,
    /// One-based index whose profile attains the minimum.
    pub binding_index: usize,
    pub per_index: Vec<IndexProfile>,
}

impl SigmaCertificate {
    pub fn profile_csv(&self) -> String {
        let mut t = Table::new(["index", "sigma", "status", "t_star", "gap_holds"]);
        for p in &self.per_index {
            for s in &p.samples {
                t.push(vec![
                    p.index.to_string(),
                    fmt_f64(s.sigma),
                    format!("{:?}", s.status).to_lowercase(),
                    s.t_star.map_or_else(String::new, fmt_f64),
                    s.gap_holds.to_string(),
                ]);
            }
        }
        t.to_csv()
    }
}

/// Largest `σ` (to bisection tolerance, from below) such that `u_j ≤ σ` and
/// `f_j(u) ≤ σ` force `min_i f_i(u) ≤ −σ`, minimized over `j`.
pub fn sigma_obs(sys: &CoefficientSystem) -> Result<SigmaCertificate> {
    let adm = admissibility_margin(sys)?;
    if !adm.is_admissible() {
        return Err(Error::Inadmissible {
            kappa_star: adm.kappa_star,
        });
    }
    let sigma_max = truncation_bound(sys)?;
    let n = sys.n_species();
    let per_index = (0..n)
        .into_par_iter()
        .map(|j| bisect_index(sys, j, sigma_max))
        .collect::<Result<Vec<_>>>()?;
    let binding = per_index
        .iter()
        .min_by(|a, b| a.sigma.total_cmp(&b.sigma))
        .expect("N ≥ 1");
    let sigma = binding.sigma;
    if sigma < SIGMA_BISECTION_TOL {
        return Err(Error::DegenerateMargin {
            sigma,
            floor: SIGMA_BISECTION_TOL,
        });
    }
    Ok(SigmaCertificate {
        sigma,
        sigma_max,
        binding_index: binding.index,
        per_index,
    })
}

fn bisect_index(sys: &CoefficientSystem, j: usize, sigma_max: f64) -> Result<IndexProfile> {
    let mut samples = Vec::new();
    let mut probe = |s: f64| -> Result<bool> {
        let opt = lp_max_min_f(sys, j, s)?;
        let holds = opt.gap_holds(s);
        samples.push(ProfileSample {
            sigma: s,
            status: opt.status,
            t_star: opt.t_star,
            gap_holds: holds,
        });
        Ok(holds)
    };
    let sigma = if probe(sigma_max)? {
        sigma_max
    } else {
        // Invariant: the gap holds at `lo` (vacuously at 0) and fails at `hi`.
        let (mut lo, mut hi) = (0.0, sigma_max);
        while hi - lo > SIGMA_BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            if probe(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    Ok(IndexProfile {
        index: j + 1,
        sigma,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(rows: &[&[f64]], m: &[f64]) -> CoefficientSystem {
        CoefficientSystem::from_rows(rows, m).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && max_dist(a, b) <= tol
    }

    #[test]
    fn degenerate_state_examples() {
        let id = sys(&[&[1.0, 0.0], &[0.0, 1.0]], &[1.0, 1.0]);
        let s = degenerate_state(&id, IndexSet::from_indices([0])).unwrap();
        assert_eq!(s.u, vec![0.0, 1.0]);
        assert_eq!(s.f, vec![1.0, 0.0]);

        let s2 = sys(&[&[2.0, 1.0], &[1.0, 2.0]], &[1.0, 1.0]);
        let s = degenerate_state(&s2, IndexSet::from_indices([0])).unwrap();
        assert!(close(&s.u, &[0.0, 0.5], 1e-15));
        assert!(close(&s.f, &[0.5, 0.0], 1e-15));

        let full = degenerate_state(&s2, IndexSet::full(2)).unwrap();
        assert_eq!(full.u, vec![0.0, 0.0]);
        assert_eq!(full.f, vec![1.0, 1.0]);
    }

    #[test]
    fn singular_state_is_an_error() {
        let s = sys(&[&[1.0, 1.0], &[1.0, 1.0]], &[1.0, 1.0]);
        assert!(matches!(
            degenerate_state(&s, IndexSet::EMPTY),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn all_states_examples() {
        let s2 = sys(&[&[2.0, 1.0], &[1.0, 2.0]], &[1.0, 1.0]);
        let st = all_degenerate_states(&s2).unwrap();
        let third = 1.0 / 3.0;
        assert!(st.coexistence().is_coexistence());
        assert!(close(&st.coexistence().u, &[third, third], 1e-15));
        assert!(close(
            &st.get(IndexSet::from_indices([0])).u,
            &[0.0, 0.5],
            1e-15
        ));
        assert!(close(
            &st.get(IndexSet::from_indices([1])).u,
            &[0.5, 0.0],
            1e-15
        ));
        assert_eq!(st.get(IndexSet::full(2)).u, vec![0.0, 0.0]);

        let one = sys(&[&[1.0]], &[1.0]);
        let st = all_degenerate_states(&one).unwrap();
        assert_eq!(st.coexistence().u, vec![1.0]);
        assert_eq!(st.get(IndexSet::full(1)).u, vec![0.0]);
    }

    #[test]
    fn truncation_bound_examples() {
        let id = sys(&[&[1.0, 0.0], &[0.0, 1.0]], &[1.0, 1.0]);
        assert_eq!(truncation_bound(&id).unwrap(), 1.5);
        assert_eq!(truncation_bound(&sys(&[&[1.0]], &[1.0])).unwrap(), 1.5);
        let s2 = sys(&[&[2.0, 1.0], &[1.0, 2.0]], &[1.0, 1.0]);
        assert!((truncation_bound(&s2).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn vertex_examples() {
        let id = sys(&[&[1.0, 0.0], &[0.0, 1.0]], &[1.0, 1.0]);
        let v = enumerate_vertices(&id).unwrap();
        assert_eq!(
            v,
            vec![
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0]
            ]
        );

        let s2 = sys(&[&[2.0, 1.0], &[1.0, 2.0]], &[1.0, 1.0]);
        let v = enumerate_vertices(&s2).unwrap();
        let states = all_degenerate_states(&s2).unwrap();
        assert_eq!(v.len(), 4);
        for s in states.iter() {
            assert!(v.iter().any(|x| close(x, &s.u, 1e-12)));
        }

        // Inadmissible: (0, 1/2) lies on both u_1 = 0 and f_1 = 0.
        let bad = sys(&[&[1.0, 2.0], &[2.0, 1.0]], &[1.0, 1.0]);
        let v = enumerate_vertices(&bad).unwrap();
        let states = all_degenerate_states(&bad).unwrap();
        assert!(v.iter().any(|x| close(x, &[0.0, 0.5], 1e-12)));
        assert!(!states
            .iter()
            .all(|s| v.iter().any(|x| close(x, &s.u, 1e-9))));
    }

    #[test]
    fn cuboid_examples() {
        let id = sys(&[&[1.0, 0.0], &[0.0, 1.0]], &[1.0, 1.0]);
        let r = verify_cuboid(&id).unwrap();
        assert!(r.is_cuboid, "{r:?}");
        let s2 = sys(&[&[2.0, 1.0], &[1.0, 2.0]], &[1.0, 1.0]);
        assert!(verify_cuboid(&s2).unwrap().is_cuboid);
        let bad = sys(&[&[1.0, 2.0], &[2.0, 1.0]], &[1.0, 1.0]);
        let r = verify_cuboid(&bad).unwrap();
        assert!(!r.is_cuboid);
        assert!(!r.vertices_match_states);
    }

    #[test]
    fn one_species_cuboid_is_a_segment() {
        let r = verify_cuboid(&sys(&[&[1.0]], &[1.0])).unwrap();
        assert!(r.is_cuboid);
        assert_eq!(r.vertices, vec![vec![0.0], vec![1.0]]);
    }

    #[test]
    fn slab_lp_examples() {
        let one = sys(&[&[1.0]], &[1.0]);
        let r = lp_max_min_f(&one, 0, 0.25).unwrap();
        assert_eq!(r.status, LpStatus::Infeasible);
        assert!(r.gap_holds(0.25));

        // Slab is u ∈ [0.4, 0.6]; min f = 1 − u is largest at u = 0.4.
        let r = lp_max_min_f(&one, 0, 0.6).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.t_star.unwrap() - 0.6).abs() < 1e-12);
        assert!((r.maximizer.unwrap()[0] - 0.4).abs() < 1e-12);

        assert!(lp_max_min_f(&one, 0, 0.0).is_err());
    }

    #[test]
    fn slab_lp_against_grid_sampling() {
        let s2 = sys(&[&[2.0, 1.0], &[1.0, 2.0]], &[1.0, 1.0]);
        let sigma = 0.05;
        let r = lp_max_min_f(&s2, 0, sigma).unwrap();
        assert!(r.gap_holds(sigma));
        // Oracle: dense grid over the slab, max of min f.
        let mut best = f64::NEG_INFINITY;
        let steps = 400;
        for a in 0..=steps {
            let u0 = sigma * a as f64 / steps as f64;
            for b in 0..=steps {
                let u1 = 2.0 * b as f64 / steps as f64;
                let f = s2.evaluate_f(&[u0, u1]).unwrap();
                if f[0] <= sigma {
                    best = best.max(f[0].min(f[1]));
                }
            }
        }
        assert!(best <= -sigma);
        assert!(r.t_star.map_or(true, |t| t >= best - 1e-9));
    }

    #[test]
    fn sigma_examples() {
        let one = sys(&[&[1.0]], &[1.0]);
        let c = sigma_obs(&one).unwrap();
        assert!((c.sigma - 0.5).abs() <= 1e-6, "sigma = {}", c.sigma);
        assert!(c.sigma < 0.5);

        let id = sys(&[&[1.0, 0.0], &[0.0, 1.0]], &[1.0, 1.0]);
        let c = sigma_obs(&id).unwrap();
        assert!((c.sigma - 0.5).abs() <= 1e-6);

        let s2 = sys(&[&[2.0, 1.0], &[1.0, 2.0]], &[1.0, 1.0]);
        let c = sigma_obs(&s2).unwrap();
        assert!(c.sigma > 0.0 && c.sigma <= 1.0);
        for p in &c.per_index {
            for s in &p.samples {
                assert_eq!(s.gap_holds, s.sigma <= p.sigma);
            }
        }
    }

    #[test]
    fn sigma_rejects_inadmissible() {
        let bad = sys(&[&[1.0, 2.0], &[2.0, 1.0]], &[1.0, 1.0]);
        assert!(matches!(sigma_obs(&bad), Err(Error::Inadmissible { .. })));
    }

    #[test]
    fn subsets_enumeration() {
        assert_eq!(n_subsets(4, 2).len(), 6);
        assert_eq!(n_subsets(6, 3).len(), 20);
        assert!(n_subsets(6, 3).iter().all(|m| m.count_ones() == 3));
    }
}
