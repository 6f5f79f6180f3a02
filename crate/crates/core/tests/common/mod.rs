#![allow(dead_code)]

use beckner_core::{admissibility_margin, CoefficientSystem, IndexSet};
use rand::Rng;

pub fn unit_system() -> CoefficientSystem {
    CoefficientSystem::from_rows(&[&[1.0]], &[1.0]).unwrap()
}

pub fn sys2() -> CoefficientSystem {
    CoefficientSystem::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]], &[1.0, 1.0]).unwrap()
}

/// Determinant by Laplace expansion along the first row.
pub fn cofactor_det(a: &[f64], n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    if n == 1 {
        return a[0];
    }
    let mut total = 0.0;
    for col in 0..n {
        let mut minor = Vec::with_capacity((n - 1) * (n - 1));
        for r in 1..n {
            for c in 0..n {
                if c != col {
                    minor.push(a[r * n + c]);
                }
            }
        }
        let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * a[col] * cofactor_det(&minor, n - 1);
    }
    total
}

/// Principal minor `Δ_I` through the cofactor oracle.
pub fn oracle_minor(sys: &CoefficientSystem, set: IndexSet) -> f64 {
    let idx: Vec<usize> = set.members().collect();
    let sub: Vec<f64> = idx
        .iter()
        .flat_map(|&i| idx.iter().map(move |&j| sys.a(i, j)))
        .collect();
    cofactor_det(&sub, idx.len())
}

/// `Δ_{I,j}` through the cofactor oracle: rows `I, j`, columns `I, m`.
pub fn oracle_augmented(sys: &CoefficientSystem, set: IndexSet, j: usize) -> f64 {
    let mut rows: Vec<usize> = set.members().collect();
    rows.push(j);
    let cols: Vec<usize> = set.members().collect();
    let r = rows.len();
    let mut sub = Vec::with_capacity(r * r);
    for &i in &rows {
        for &c in &cols {
            sub.push(sys.a(i, c));
        }
        sub.push(sys.vector_m()[i]);
    }
    cofactor_det(&sub, r)
}

/// A system with arbitrary (not necessarily admissible) entries.
pub fn random_system<R: Rng>(rng: &mut R, n: usize) -> CoefficientSystem {
    let a: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let m: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    CoefficientSystem::new(n, a, m).unwrap()
}

/// Row diagonally dominant `A` with positive diagonal and `m` redrawn until
/// the admissibility margin exceeds `1e-3`.
pub fn random_admissible<R: Rng>(rng: &mut R, n: usize) -> CoefficientSystem {
    loop {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            let d = rng.gen_range(1.0..2.0);
            a[i * n + i] = d;
            let budget = 0.9 * d / (n.max(2) - 1) as f64;
            for j in 0..n {
                if j != i {
                    a[i * n + j] = rng.gen_range(-0.5 * budget..budget);
                }
            }
        }
        for _ in 0..50 {
            let m: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
            let sys = CoefficientSystem::new(n, a.clone(), m).unwrap();
            if admissibility_margin(&sys).unwrap().kappa_star > 1e-3 {
                return sys;
            }
        }
    }
}

/// `A = [[1, a12], [c, 1]]`, `m = (1, m2)` with `m2 < c`: every `Δ_I` and
/// every `Δ_{I,j}` is positive except `Δ_{{1},2} = m2 − c`.
pub fn one_negative_augmented<R: Rng>(rng: &mut R) -> CoefficientSystem {
    let c = rng.gen_range(0.3..0.9);
    let m2 = rng.gen_range(0.05..c - 0.05);
    let a12 = rng.gen_range(0.0..0.9);
    CoefficientSystem::from_rows(&[&[1.0, a12], &[c, 1.0]], &[1.0, m2]).unwrap()
}

/// Number of negative `Δ_I` (I ≠ ∅) and negative `Δ_{I,j}` (j ∉ I).
pub fn negative_counts(sys: &CoefficientSystem) -> (usize, usize) {
    let n = sys.n_species();
    let mut minors = 0;
    let mut aug = 0;
    for set in IndexSet::all(n) {
        if !set.is_empty() && sys.minor_determinant(set).unwrap() < 0.0 {
            minors += 1;
        }
        for j in 0..n {
            if !set.contains(j) && sys.augmented_determinant(set, j).unwrap() < 0.0 {
                aug += 1;
            }
        }
    }
    (minors, aug)
}
