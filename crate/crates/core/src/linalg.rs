//! Small dense linear algebra: LU with partial pivoting, determinants,
//! solves and numerical rank. Matrices are row-major `Vec<f64>`.

/// In-place LU factorization with partial pivoting.
///
/// Returns the permutation sign, or `None` when a pivot is exactly zero.
fn lu_in_place(a: &mut [f64], n: usize, perm: &mut [usize]) -> Option<f64> {
    let mut sign = 1.0;
    for (i, p) in perm.iter_mut().enumerate() {
        *p = i;
    }
    for k in 0..n {
        let mut piv = k;
        let mut best = a[k * n + k].abs();
        for r in (k + 1)..n {
            let v = a[r * n + k].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return None;
        }
        if piv != k {
            for c in 0..n {
                a.swap(k * n + c, piv * n + c);
            }
            perm.swap(k, piv);
            sign = -sign;
        }
        let d = a[k * n + k];
        for r in (k + 1)..n {
            let l = a[r * n + k] / d;
            a[r * n + k] = l;
            if l != 0.0 {
                for c in (k + 1)..n {
                    a[r * n + c] -= l * a[k * n + c];
                }
            }
        }
    }
    Some(sign)
}

/// Determinant of an `n × n` row-major matrix. The empty matrix has determinant 1.
pub fn determinant(a: &[f64], n: usize) -> f64 {
    debug_assert_eq!(a.len(), n * n);
    if n == 0 {
        return 1.0;
    }
    let mut lu = a.to_vec();
    let mut perm = vec![0; n];
    match lu_in_place(&mut lu, n, &mut perm) {
        None => 0.0,
        Some(sign) => (0..n).fold(sign, |acc, k| acc * lu[k * n + k]),
    }
}

/// Solve `a x = b`. Returns the solution together with the determinant of `a`,
/// or `None` if `a` is exactly singular.
pub fn solve(a: &[f64], b: &[f64], n: usize) -> Option<(Vec<f64>, f64)> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    if n == 0 {
        return Some((Vec::new(), 1.0));
    }
    let mut lu = a.to_vec();
    let mut perm = vec![0; n];
    let sign = lu_in_place(&mut lu, n, &mut perm)?;
    let det = (0..n).fold(sign, |acc, k| acc * lu[k * n + k]);
    let mut x: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
    for r in 0..n {
        let mut s = x[r];
        for c in 0..r {
            s -= lu[r * n + c] * x[c];
        }
        x[r] = s;
    }
    for r in (0..n).rev() {
        let mut s = x[r];
        for c in (r + 1)..n {
            s -= lu[r * n + c] * x[c];
        }
        x[r] = s / lu[r * n + r];
    }
    Some((x, det))
}

/// Numerical rank of a `rows × cols` row-major matrix by Gaussian elimination
/// with full pivoting; entries below `tol` (relative to the largest entry) count as zero.
pub fn rank(a: &[f64], rows: usize, cols: usize, tol: f64) -> usize {
    let mut m = a.to_vec();
    let scale = m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return 0;
    }
    let thresh = tol * scale;
    let mut rank = 0;
    let mut row_used = vec![false; rows];
    let mut col_used = vec![false; cols];
    loop {
        let mut best = thresh;
        let mut pivot = None;
        for r in (0..rows).filter(|&r| !row_used[r]) {
            for c in (0..cols).filter(|&c| !col_used[c]) {
                let v = m[r * cols + c].abs();
                if v > best {
                    best = v;
                    pivot = Some((r, c));
                }
            }
        }
        let Some((pr, pc)) = pivot else { break };
        row_used[pr] = true;
        col_used[pc] = true;
        rank += 1;
        let d = m[pr * cols + pc];
        for r in (0..rows).filter(|&r| !row_used[r]) {
            let l = m[r * cols + pc] / d;
            if l != 0.0 {
                for c in 0..cols {
                    m[r * cols + c] -= l * m[pr * cols + c];
                }
            }
        }
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinant_small_cases() {
        assert_eq!(determinant(&[], 0), 1.0);
        assert_eq!(determinant(&[3.0], 1), 3.0);
        assert!((determinant(&[2.0, 1.0, 1.0, 2.0], 2) - 3.0).abs() < 1e-15);
        assert!((determinant(&[0.0, 1.0, 1.0, 0.0], 2) + 1.0).abs() < 1e-15);
        assert_eq!(determinant(&[1.0, 2.0, 2.0, 4.0], 2), 0.0);
    }

    #[test]
    fn solve_recovers_rhs() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, -1.0, 0.0, 2.0, 5.0];
        let x_true = [0.3, -1.2, 2.0];
        let b: Vec<f64> = (0..3)
            .map(|r| (0..3).map(|c| a[r * 3 + c] * x_true[c]).sum())
            .collect();
        let (x, det) = solve(&a, &b, 3).unwrap();
        for (xi, ti) in x.iter().zip(x_true) {
            assert!((xi - ti).abs() < 1e-13);
        }
        assert!((det - determinant(&a, 3)).abs() < 1e-12);
    }

    #[test]
    fn rank_detects_dependence() {
        assert_eq!(rank(&[1.0, 2.0, 2.0, 4.0], 2, 2, 1e-12), 1);
        assert_eq!(rank(&[1.0, 0.0, 0.0, 1.0, 1.0, 1.0], 3, 2, 1e-12), 2);
        assert_eq!(rank(&[0.0; 4], 2, 2, 1e-12), 0);
    }
}
