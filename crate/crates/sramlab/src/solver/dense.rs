//! Dense linear solve with partial pivoting. Cell and column systems top
//! out at a few hundred unknowns, so dense Gaussian elimination is the
//! right tool.

/// Solve `a * x = b` in place (`a` is row-major n x n, `b` becomes x).
/// Returns the failing variable index when a pivot column is numerically
/// empty.
pub fn solve_in_place(a: &mut [f64], n: usize, b: &mut [f64]) -> Result<(), usize> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    for k in 0..n {
        // Partial pivot search on column k.
        let mut piv = k;
        let mut max = a[k * n + k].abs();
        for r in (k + 1)..n {
            let v = a[r * n + k].abs();
            if v > max {
                max = v;
                piv = r;
            }
        }
        if !(max > 1e-250) {
            return Err(k);
        }
        if piv != k {
            for j in k..n {
                a.swap(k * n + j, piv * n + j);
            }
            b.swap(k, piv);
        }
        let akk = a[k * n + k];
        for r in (k + 1)..n {
            let f = a[r * n + k] / akk;
            if f == 0.0 {
                continue;
            }
            a[r * n + k] = 0.0;
            let (head, tail) = a.split_at_mut(r * n);
            let row_k = &head[k * n..(k + 1) * n];
            let row_r = &mut tail[..n];
            for j in (k + 1)..n {
                row_r[j] -= f * row_k[j];
            }
            b[r] -= f * b[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = b[k];
        let row = &a[k * n..(k + 1) * n];
        for j in (k + 1)..n {
            s -= row[j] * b[j];
        }
        b[k] = s / row[k];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        // [2 1; 1 3] x = [5; 10] -> x = [1, 3]
        let mut a = vec![2.0, 1.0, 1.0, 3.0];
        let mut b = vec![5.0, 10.0];
        solve_in_place(&mut a, 2, &mut b).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-12);
        assert!((b[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn pivots_through_zero_diagonal() {
        let mut a = vec![0.0, 1.0, 1.0, 0.0];
        let mut b = vec![2.0, 3.0];
        solve_in_place(&mut a, 2, &mut b).unwrap();
        assert!((b[0] - 3.0).abs() < 1e-12);
        assert!((b[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reports_singular_column() {
        let mut a = vec![1.0, 0.0, 0.0, 0.0];
        let mut b = vec![1.0, 1.0];
        assert_eq!(solve_in_place(&mut a, 2, &mut b), Err(1));
    }
}
