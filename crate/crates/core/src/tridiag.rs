//! Tridiagonal kernels: the Thomas solver and an implicit QL eigensolver for
//! symmetric tridiagonal matrices.

use std::ops::{Mul, Sub};

/// Solves `A x = rhs` in place for a tridiagonal `A` with real entries.
///
/// `lower[i]` couples row `i` to `i-1` (ignored for `i = 0`), `upper[i]`
/// couples row `i` to `i+1` (ignored for the last row). `scratch` must hold
/// at least `n` values. No pivoting: intended for diagonally dominant or
/// symmetric positive definite systems.
pub fn solve<T>(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [T], scratch: &mut [f64])
where
    T: Copy + Mul<f64, Output = T> + Sub<Output = T>,
{
    let n = rhs.len();
    debug_assert!(diag.len() >= n && lower.len() >= n && upper.len() >= n);
    if n == 0 {
        return;
    }
    let cp = &mut scratch[..n];
    let mut denom = diag[0];
    cp[0] = upper[0] / denom;
    rhs[0] = rhs[0] * (1.0 / denom);
    for i in 1..n {
        denom = diag[i] - lower[i] * cp[i - 1];
        cp[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        rhs[i] = (rhs[i] - rhs[i - 1] * lower[i]) * (1.0 / denom);
    }
    for i in (0..n - 1).rev() {
        rhs[i] = rhs[i] - rhs[i + 1] * cp[i];
    }
}

/// Multiplies a tridiagonal matrix by `x`.
pub fn matvec(lower: &[f64], diag: &[f64], upper: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for i in 0..n {
        let mut acc = diag[i] * x[i];
        if i > 0 {
            acc += lower[i] * x[i - 1];
        }
        if i + 1 < n {
            acc += upper[i] * x[i + 1];
        }
        out[i] = acc;
    }
}

/// Eigen-decomposition result: ascending eigenvalues and, optionally,
/// column-major orthonormal eigenvectors (`vectors[j * n + i]` is entry `i`
/// of eigenvector `j`).
#[derive(Debug, Clone)]
pub struct SymTridiagEigen {
    pub values: Vec<f64>,
    pub vectors: Option<Vec<f64>>,
}

/// Failure of the QL iteration, carrying the eigenvalue index that stalled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoConvergence {
    pub index: usize,
}

/// Symmetric tridiagonal eigen-decomposition by the implicit QL method with
/// Wilkinson-type shifts. `off[i]` is the entry at `(i, i+1)`.
///
/// Eigenvectors are accumulated from plane rotations, so they are orthonormal
/// to working precision without any explicit reorthogonalization.
pub fn sym_tridiag_eigen(
    diag: &[f64],
    off: &[f64],
    want_vectors: bool,
) -> Result<SymTridiagEigen, NoConvergence> {
    let n = diag.len();
    assert!(n == 0 || off.len() + 1 >= n, "off-diagonal too short");
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    let mut v = if want_vectors {
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        Some(v)
    } else {
        None
    };
    let eps = f64::EPSILON;
    let max_iter = 30 * n.max(1);
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > max_iter {
                    return Err(NoConvergence { index: l });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(v) = v.as_mut() {
                        let (left, right) = v.split_at_mut((i + 1) * n);
                        let col_i = &mut left[i * n..];
                        let col_j = &mut right[..n];
                        for k in 0..n {
                            let hk = col_j[k];
                            col_j[k] = s * col_i[k] + c * hk;
                            col_i[k] = c * col_i[k] - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&j| d[j]).collect();
    let vectors = v.map(|v| {
        let mut out = vec![0.0; n * n];
        for (dst, &src) in order.iter().enumerate() {
            out[dst * n..(dst + 1) * n].copy_from_slice(&v[src * n..(src + 1) * n]);
        }
        out
    });
    Ok(SymTridiagEigen { values, vectors })
}
