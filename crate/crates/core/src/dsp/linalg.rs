//! Minimal dense symmetric linear algebra (f64) used by the filter designer
//! and the covariance determinants.

/// Cholesky factorization of a symmetric positive-definite matrix stored
/// row-major. Returns the lower factor, or `None` when a pivot falls below
/// `rel_tol` times the original diagonal entry.
pub(crate) fn cholesky(a: &[f64], n: usize, rel_tol: f64) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        let floor = rel_tol * a[j * n + j].abs();
        if d <= floor || !d.is_finite() {
            return None;
        }
        let dj = d.sqrt();
        l[j * n + j] = dj;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / dj;
        }
    }
    Some(l)
}

/// Log-determinant from a Cholesky factor.
pub(crate) fn logdet_from_chol(l: &[f64], n: usize) -> f64 {
    (0..n).map(|j| l[j * n + j].ln()).sum::<f64>() * 2.0
}

/// Solve `A x = b` for symmetric positive-definite `A` via Cholesky,
/// retrying with a small diagonal jitter if the factorization stalls
/// numerically.
pub(crate) fn solve_spd(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut work = a.to_vec();
    let mut jitter = 0.0;
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    for _ in 0..4 {
        if jitter > 0.0 {
            for i in 0..n {
                work[i * n + i] = a[i * n + i] + jitter;
            }
        }
        if let Some(l) = cholesky(&work, n, 1e-14) {
            // forward substitution L y = b
            let mut y = b.to_vec();
            for i in 0..n {
                for k in 0..i {
                    y[i] -= l[i * n + k] * y[k];
                }
                y[i] /= l[i * n + i];
            }
            // back substitution L^T x = y
            let mut x = y;
            for i in (0..n).rev() {
                for k in (i + 1)..n {
                    x[i] -= l[k * n + i] * x[k];
                }
                x[i] /= l[i * n + i];
            }
            return Some(x);
        }
        jitter = if jitter == 0.0 {
            scale * 1e-12
        } else {
            jitter * 100.0
        };
    }
    None
}
