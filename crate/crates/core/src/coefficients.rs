//! Coefficient systems `(A, m)`, the affine map `f(u) = m − A u`, and the
//! determinant conditions that make a system admissible.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::linalg;

/// Default limit on `N` for anything that enumerates all `2^N` index sets.
pub const DEFAULT_ENUMERATION_CAP: usize = 12;

/// Hard limit imposed by the bitmask representation of [`IndexSet`].
pub const MAX_SPECIES: usize = 64;

/// A subset of `{0, …, N−1}` stored as a bitmask.
///
/// Internally indices are zero-based; `Display` and serialization use the
/// one-based convention (`{1,2}`), which is also how configuration files and
/// reports name species.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct IndexSet(u64);

impl IndexSet {
    pub const EMPTY: IndexSet = IndexSet(0);

    pub fn from_bits(bits: u64) -> Self {
        IndexSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    /// The full set `{0, …, n−1}`.
    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_SPECIES);
        if n == 64 {
            IndexSet(u64::MAX)
        } else {
            IndexSet((1u64 << n) - 1)
        }
    }

    /// Build from zero-based indices.
    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        IndexSet(indices.into_iter().fold(0, |acc, i| {
            assert!(i < MAX_SPECIES, "index {i} out of range");
            acc | (1 << i)
        }))
    }

    /// Build from one-based indices, as written in configuration files.
    pub fn from_one_based(indices: &[usize]) -> Result<Self> {
        let mut bits = 0u64;
        for &i in indices {
            if i == 0 || i > MAX_SPECIES {
                return Err(input(format!(
                    "index {i} is not a valid one-based species index"
                )));
            }
            bits |= 1 << (i - 1);
        }
        Ok(IndexSet(bits))
    }

    pub fn contains(self, i: usize) -> bool {
        i < MAX_SPECIES && self.0 & (1 << i) != 0
    }

    pub fn insert(self, i: usize) -> Self {
        IndexSet(self.0 | (1 << i))
    }

    pub fn remove(self, i: usize) -> Self {
        IndexSet(self.0 & !(1 << i))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Complement within `{0, …, n−1}`.
    pub fn complement(self, n: usize) -> Self {
        IndexSet(!self.0 & IndexSet::full(n).0)
    }

    /// Whether every member is below `n`.
    pub fn fits(self, n: usize) -> bool {
        self.0 & !IndexSet::full(n).0 == 0
    }

    /// Zero-based members in increasing order.
    pub fn members(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..MAX_SPECIES).filter(move |&i| bits & (1 << i) != 0)
    }

    pub fn one_based(self) -> Vec<usize> {
        self.members().map(|i| i + 1).collect()
    }

    /// All `2^n` subsets of `{0, …, n−1}`, ordered by bitmask.
    pub fn all(n: usize) -> impl Iterator<Item = IndexSet> {
        assert!(n < MAX_SPECIES);
        (0..(1u64 << n)).map(IndexSet)
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.members().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for IndexSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_based().serialize(s)
    }
}

impl<'de> Deserialize<'de> for IndexSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        IndexSet::from_one_based(&v).map_err(serde::de::Error::custom)
    }
}

/// Constant coefficients `(A, m)` of the affine map `f_i(u) = m_i − Σ_j a_ij u_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemSpec", into = "SystemSpec")]
pub struct CoefficientSystem {
    n: usize,
    a: Vec<f64>,
    m: Vec<f64>,
}

/// Wire form: `{"n": 2, "a": [[2, 1], [1, 2]], "m": [1, 1]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct SystemSpec {
    n: usize,
    a: Vec<Vec<f64>>,
    m: Vec<f64>,
}

impl TryFrom<SystemSpec> for CoefficientSystem {
    type Error = Error;

    fn try_from(spec: SystemSpec) -> Result<Self> {
        if spec.a.len() != spec.n || spec.a.iter().any(|row| row.len() != spec.n) {
            return Err(input(format!("matrix `a` must be {0}×{0}", spec.n)));
        }
        CoefficientSystem::new(spec.n, spec.a.concat(), spec.m)
    }
}

impl From<CoefficientSystem> for SystemSpec {
    fn from(sys: CoefficientSystem) -> Self {
        SystemSpec {
            n: sys.n,
            a: sys.a.chunks(sys.n).map(<[f64]>::to_vec).collect(),
            m: sys.m,
        }
    }
}

impl CoefficientSystem {
    /// `a` is row-major, `n × n`.
    pub fn new(n: usize, a: Vec<f64>, m: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(input("number of species must be at least 1"));
        }
        if n > MAX_SPECIES {
            return Err(Error::Capacity(format!("N = {n} exceeds {MAX_SPECIES}")));
        }
        if a.len() != n * n {
            return Err(input(format!(
                "matrix has {} entries, expected {}",
                a.len(),
                n * n
            )));
        }
        if m.len() != n {
            return Err(input(format!(
                "vector m has {} entries, expected {n}",
                m.len()
            )));
        }
        if a.iter().chain(&m).any(|v| !v.is_finite()) {
            return Err(input("coefficients must be finite"));
        }
        Ok(CoefficientSystem { n, a, m })
    }

    /// Convenience constructor from matrix rows.
    pub fn from_rows(rows: &[&[f64]], m: &[f64]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(input("matrix rows must all have length N"));
        }
        CoefficientSystem::new(n, rows.concat(), m.to_vec())
    }

    pub fn n_species(&self) -> usize {
        self.n
    }

    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.a
    }

    pub fn vector_m(&self) -> &[f64] {
        &self.m
    }

    /// Same matrix, with `m` scaled by `lambda`.
    pub fn scale_m(&self, lambda: f64) -> Self {
        CoefficientSystem {
            n: self.n,
            a: self.a.clone(),
            m: self.m.iter().map(|v| v * lambda).collect(),
        }
    }

    /// `f(u) = m − A u`.
    pub fn evaluate_f(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.n {
            return Err(input(format!(
                "state has length {}, expected {}",
                u.len(),
                self.n
            )));
        }
        let mut f = vec![0.0; self.n];
        self.f_into(u, &mut f);
        Ok(f)
    }

    /// Unchecked `f(u)` into a caller buffer; used in hot loops.
    #[inline]
    pub fn f_into(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.a[i * n..(i + 1) * n];
            out[i] = self.m[i] - row.iter().zip(u).map(|(a, x)| a * x).sum::<f64>();
        }
    }

    /// `Δ_I`: determinant of the principal submatrix on `i_set` (`Δ_∅ = 1`).
    pub fn minor_determinant(&self, i_set: IndexSet) -> Result<f64> {
        self.check_set(i_set)?;
        let idx: Vec<usize> = i_set.members().collect();
        let r = idx.len();
        let mut sub = Vec::with_capacity(r * r);
        for &i in &idx {
            for &j in &idx {
                sub.push(self.a(i, j));
            }
        }
        Ok(linalg::determinant(&sub, r))
    }

    /// `Δ_{I,j}`: rows `i_1 … i_r, j`; columns `i_1 … i_r` followed by the `m` column.
    pub fn augmented_determinant(&self, i_set: IndexSet, j: usize) -> Result<f64> {
        self.check_set(i_set)?;
        if j >= self.n {
            return Err(input(format!(
                "index {} out of range for N = {}",
                j + 1,
                self.n
            )));
        }
        if i_set.contains(j) {
            return Err(input(format!("index {} belongs to {}", j + 1, i_set)));
        }
        let idx: Vec<usize> = i_set.members().collect();
        let r = idx.len();
        if r == 0 {
            return Ok(self.m[j]);
        }
        let k = r + 1;
        let mut sub = Vec::with_capacity(k * k);
        for &row in idx.iter().chain(std::iter::once(&j)) {
            for &col in &idx {
                sub.push(self.a(row, col));
            }
            sub.push(self.m[row]);
        }
        Ok(linalg::determinant(&sub, k))
    }

    /// `min(1 / max|a_ij|, 1 / max m_i)`; a bound that cannot bind is `+∞`.
    pub fn bound_margin(&self) -> f64 {
        let amax = self.a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let mmax = self.m.iter().fold(f64::NEG_INFINITY, |acc, &v| acc.max(v));
        let from_a = if amax > 0.0 {
            1.0 / amax
        } else {
            f64::INFINITY
        };
        let from_m = if mmax > 0.0 {
            1.0 / mmax
        } else {
            f64::INFINITY
        };
        from_a.min(from_m)
    }

    fn check_set(&self, i_set: IndexSet) -> Result<()> {
        if !i_set.fits(self.n) {
            return Err(input(format!("{i_set} is not a subset of 1..={}", self.n)));
        }
        Ok(())
    }
}

/// Certificate for the determinant and boundedness conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub kappa_star: f64,
    pub worst_minor_set: IndexSet,
    pub worst_minor_value: f64,
    pub worst_augmented_set: IndexSet,
    /// One-based, like the set members.
    pub worst_augmented_index: usize,
    pub worst_augmented_value: f64,
    pub bound_margin: f64,
    pub minors_evaluated: usize,
    pub augmented_evaluated: usize,
}

impl AdmissibilityReport {
    pub fn is_admissible(&self) -> bool {
        self.kappa_star > 0.0
    }

    /// Whether the system satisfies all three conditions at level `kappa`.
    pub fn admits(&self, kappa: f64) -> bool {
        self.is_admissible() && kappa > 0.0 && kappa <= self.kappa_star
    }
}

/// Exhaustively evaluate every `Δ_I` (`I ≠ ∅`) and every `Δ_{I,j}` (`j ∉ I`).
pub fn admissibility_margin(sys: &CoefficientSystem) -> Result<AdmissibilityReport> {
    admissibility_margin_with_cap(sys, DEFAULT_ENUMERATION_CAP)
}

pub fn admissibility_margin_with_cap(
    sys: &CoefficientSystem,
    cap: usize,
) -> Result<AdmissibilityReport> {
    let n = sys.n_species();
    if n > cap {
        return Err(Error::Capacity(format!(
            "N = {n} exceeds the exhaustive enumeration cap {cap}"
        )));
    }
    // Per-set results are collected in bitmask order, so the reduction below
    // is deterministic regardless of scheduling.
    let per_set: Vec<(IndexSet, f64, Vec<(usize, f64)>)> = IndexSet::all(n)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|set| {
            let minor = sys.minor_determinant(set).expect("set within range");
            let aug = set
                .complement(n)
                .members()
                .map(|j| (j, sys.augmented_determinant(set, j).expect("j outside set")))
                .collect();
            (set, minor, aug)
        })
        .collect();

    let mut worst_minor = (IndexSet::EMPTY, f64::INFINITY);
    let mut worst_aug = (IndexSet::EMPTY, 0usize, f64::INFINITY);
    let mut augmented_evaluated = 0;
    for (set, minor, aug) in &per_set {
        if !set.is_empty() && *minor < worst_minor.1 {
            worst_minor = (*set, *minor);
        }
        for &(j, v) in aug {
            augmented_evaluated += 1;
            if v < worst_aug.2 {
                worst_aug = (*set, j, v);
            }
        }
    }
    let bound_margin = sys.bound_margin();
    let kappa_star = worst_minor.1.min(worst_aug.2).min(bound_margin).max(0.0);
    Ok(AdmissibilityReport {
        kappa_star,
        worst_minor_set: worst_minor.0,
        worst_minor_value: worst_minor.1,
        worst_augmented_set: worst_aug.0,
        worst_augmented_index: worst_aug.1 + 1,
        worst_augmented_value: worst_aug.2,
        bound_margin,
        minors_evaluated: per_set.len(),
        augmented_evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(rows: &[&[f64]], m: &[f64]) -> CoefficientSystem {
        CoefficientSystem::from_rows(rows, m).unwrap()
    }

    #[test]
    fn evaluate_f_examples() {
        let s1 = sys(&[&[1.0]], &[1.0]);
        assert_eq!(s1.evaluate_f(&[0.0]).unwrap(), vec![1.0]);
        let id = sys(&[&[1.0, 0.0], &[0.0, 1.0]], &[1.0, 1.0]);
        assert_eq!(id.evaluate_f(&[1.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        let s2 = sys(&[&[2.0, 1.0], &[1.0, 2.0]], &[1.0, 1.0]);
        assert_eq!(s2.evaluate_f(&[0.0, 0.5]).unwrap(), vec![0.5, 0.0]);
        assert!(matches!(s2.evaluate_f(&[1.0]), Err(Error::Input(_))));
    }

    #[test]
    fn minor_examples() {
        let id = sys(&[&[1.0, 0.0], &[0.0, 1.0]], &[1.0, 1.0]);
        assert_eq!(id.minor_determinant(IndexSet::full(2)).unwrap(), 1.0);
        let s2 = sys(&[&[2.0, 1.0], &[1.0, 2.0]], &[1.0, 1.0]);
        assert!((s2.minor_determinant(IndexSet::full(2)).unwrap() - 3.0).abs() < 1e-15);
        assert_eq!(s2.minor_determinant(IndexSet::EMPTY).unwrap(), 1.0);
        assert!(s2.minor_determinant(IndexSet::from_indices([2])).is_err());
    }

    #[test]
    fn augmented_examples() {
        let id = sys(&[&[1.0, 0.0], &[0.0, 1.0]], &[1.0, 1.0]);
        let first = IndexSet::from_indices([0]);
        assert_eq!(id.augmented_determinant(first, 1).unwrap(), 1.0);
        let s2 = sys(&[&[2.0, 1.0], &[1.0, 2.0]], &[1.0, 1.0]);
        assert!((s2.augmented_determinant(first, 1).unwrap() - 1.0).abs() < 1e-15);
        let s3 = sys(&[&[2.0, 1.0], &[1.0, 2.0]], &[0.7, 1.3]);
        assert_eq!(s3.augmented_determinant(IndexSet::EMPTY, 0).unwrap(), 0.7);
        assert_eq!(s3.augmented_determinant(IndexSet::EMPTY, 1).unwrap(), 1.3);
        assert!(matches!(
            s2.augmented_determinant(first, 0),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn margin_examples() {
        let id = sys(&[&[1.0, 0.0], &[0.0, 1.0]], &[1.0, 1.0]);
        let r = admissibility_margin(&id).unwrap();
        assert_eq!(r.kappa_star, 1.0);
        assert_eq!(r.minors_evaluated, 4);
        assert_eq!(r.augmented_evaluated, 4);

        let s2 = sys(&[&[2.0, 1.0], &[1.0, 2.0]], &[1.0, 1.0]);
        let r = admissibility_margin(&s2).unwrap();
        assert!((r.kappa_star - 0.5).abs() < 1e-15);
        assert_eq!(r.bound_margin, 0.5);
        assert!((r.worst_augmented_value - 1.0).abs() < 1e-15);
        assert!(r.admits(0.5) && !r.admits(0.6));

        let bad = sys(&[&[1.0, 2.0], &[2.0, 1.0]], &[1.0, 1.0]);
        let r = admissibility_margin(&bad).unwrap();
        assert_eq!(r.kappa_star, 0.0);
        assert_eq!(r.worst_minor_set, IndexSet::full(2));
        assert!((r.worst_minor_value + 3.0).abs() < 1e-15);
        assert!(!r.is_admissible());
    }

    #[test]
    fn margin_capacity() {
        let n = 13;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 1.0;
        }
        let s = CoefficientSystem::new(n, a, vec![1.0; n]).unwrap();
        assert!(matches!(admissibility_margin(&s), Err(Error::Capacity(_))));
        assert!(admissibility_margin_with_cap(&s, 13).is_ok());
    }

    #[test]
    fn config_round_trip() {
        let json = r#"{"n": 2, "a": [[2, 1], [1, 2]], "m": [1, 1]}"#;
        let s: CoefficientSystem = serde_json::from_str(json).unwrap();
        assert_eq!(s.a(0, 1), 1.0);
        let back: CoefficientSystem =
            serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(s, back);
        let bad = r#"{"n": 2, "a": [[2, 1]], "m": [1, 1]}"#;
        assert!(serde_json::from_str::<CoefficientSystem>(bad).is_err());
    }

    #[test]
    fn index_set_display_and_serde() {
        let s = IndexSet::from_indices([0, 2]);
        assert_eq!(s.to_string(), "{1,3}");
        assert_eq!(serde_json::to_string(&s).unwrap(), "[1,3]");
        assert_eq!(s.complement(3), IndexSet::from_indices([1]));
        assert_eq!(IndexSet::all(3).count(), 8);
    }
}
