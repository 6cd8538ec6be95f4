//! Dense solves for the tiny (n ≤ 4) normal systems produced by the fitters.

#![allow(clippy::needless_range_loop)]

/// Maximum system size used anywhere in the crate.
pub(crate) const NMAX: usize = 4;

pub(crate) type Mat = [[f64; NMAX]; NMAX];

/// Solve `a x = b` in place by Gauss elimination with partial pivoting.
/// Returns `None` if the matrix is numerically singular.
pub(crate) fn solve(mut a: Mat, mut b: [f64; NMAX], n: usize) -> Option<[f64; NMAX]> {
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if crate::math::abs(a[row][col]) > crate::math::abs(a[pivot][col]) {
                pivot = row;
            }
        }
        if crate::math::abs(a[pivot][col]) < f64::MIN_POSITIVE {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; NMAX];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    if x[..n].iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Invert an `n`×`n` matrix by Gauss-Jordan elimination with partial pivoting.
pub(crate) fn invert(a: Mat, n: usize) -> Option<Mat> {
    let mut aug = [[0.0; 2 * NMAX]; NMAX];
    for i in 0..n {
        aug[i][..n].copy_from_slice(&a[i][..n]);
        aug[i][n + i] = 1.0;
    }
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if crate::math::abs(aug[row][col]) > crate::math::abs(aug[pivot][col]) {
                pivot = row;
            }
        }
        if crate::math::abs(aug[pivot][col]) < f64::MIN_POSITIVE {
            return None;
        }
        aug.swap(col, pivot);
        let d = aug[col][col];
        for k in 0..2 * n {
            aug[col][k] /= d;
        }
        for row in 0..n {
            if row != col {
                let f = aug[row][col];
                for k in 0..2 * n {
                    aug[row][k] -= f * aug[col][k];
                }
            }
        }
    }
    let mut out = [[0.0; NMAX]; NMAX];
    for i in 0..n {
        out[i][..n].copy_from_slice(&aug[i][n..n + n]);
        if out[i][..n].iter().any(|v| !v.is_finite()) {
            return None;
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_3x3() {
        let a: Mat = [
            [4.0, 1.0, 0.0, 0.0],
            [1.0, 3.0, 1.0, 0.0],
            [0.0, 1.0, 2.0, 0.0],
            [0.0; 4],
        ];
        let x = solve(a, [9.0, 13.0, 8.0, 0.0], 3).unwrap();
        // Verify by substitution.
        for (row, rhs) in [(0usize, 9.0), (1, 13.0), (2, 8.0)] {
            let lhs: f64 = (0..3).map(|k| a[row][k] * x[k]).sum();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn invert_roundtrip() {
        let a: Mat = [
            [2.0, 1.0, 0.0, 0.0],
            [1.0, 3.0, 0.5, 0.0],
            [0.0, 0.5, 1.5, 0.0],
            [0.0; 4],
        ];
        let inv = invert(a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let prod: f64 = (0..3).map(|k| a[i][k] * inv[k][j]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_detected() {
        let a: Mat = [
            [1.0, 2.0, 0.0, 0.0],
            [2.0, 4.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0; 4],
        ];
        assert!(solve(a, [1.0, 2.0, 3.0, 0.0], 3).is_none());
        assert!(invert(a, 3).is_none());
    }
}
