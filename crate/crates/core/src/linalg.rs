//! Dense solves for the handful of tiny systems in this crate.

/// Solve `a x = b` for square row-major `a` (n×n) by Gaussian elimination
/// with partial pivoting. Returns `None` when a pivot falls below
/// `rel_tol` times the largest entry of `a`.
pub(crate) fn solve(a: &[f64], b: &[f64], n: usize, rel_tol: f64) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    let scale = m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .unwrap();
        if m[piv * n + col].abs() <= rel_tol * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
            }
            rhs.swap(piv, col);
        }
        let d = m[col * n + col];
        for row in col + 1..n {
            let f = m[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc -= m[row * n + k] * x[k];
        }
        x[row] = acc / m[row * n + row];
    }
    Some(x)
}

/// Inverse of a square row-major matrix, or `None` if numerically singular.
pub(crate) fn invert(a: &[f64], n: usize, rel_tol: f64) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    for col in 0..n {
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        let x = solve(a, &e, n, rel_tol)?;
        for row in 0..n {
            inv[row * n + col] = x[row];
        }
    }
    Some(inv)
}

/// Weighted least squares: minimise Σ wᵢ (yᵢ − xᵢᵀθ)² for rows `x` of width
/// `k`. Solves the normal equations directly.
pub(crate) fn weighted_least_squares(
    rows: &[f64],
    y: &[f64],
    w: &[f64],
    k: usize,
    rel_tol: f64,
) -> Option<Vec<f64>> {
    let mut xtx = vec![0.0; k * k];
    let mut xty = vec![0.0; k];
    for (i, (&yi, &wi)) in y.iter().zip(w).enumerate() {
        if wi == 0.0 {
            continue;
        }
        let xi = &rows[i * k..(i + 1) * k];
        for a in 0..k {
            xty[a] += wi * xi[a] * yi;
            for b in a..k {
                xtx[a * k + b] += wi * xi[a] * xi[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            xtx[a * k + b] = xtx[b * k + a];
        }
    }
    solve(&xtx, &xty, k, rel_tol)
}
