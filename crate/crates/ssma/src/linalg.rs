//! Small dense linear algebra kernels shared across the crate.
//!
//! Everything here targets matrices of the order of the joint feature
//! dimension (tens, occasionally a few hundred), where cyclic Jacobi and
//! unpivoted Cholesky are accurate, simple, and bitwise deterministic.

use ndarray::{Array1, Array2};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors as columns of an
/// orthogonal matrix, unsorted. The caller symmetrizes beforehand if needed.
pub fn jacobi_eigh(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut d = a.to_owned();
    let mut v = Array2::<f64>::eye(n);
    if n <= 1 {
        return (d.diag().to_owned(), v);
    }

    let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-15 * norm.max(1e-300);
    let max_sweeps = 100;

    for _ in 0..max_sweeps {
        let off: f64 = {
            let mut s = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    s += d[[i, j]] * d[[i, j]];
                }
            }
            (2.0 * s).sqrt()
        };
        if off <= tol {
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = d[[p, q]];
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let app = d[[p, p]];
                let aqq = d[[q, q]];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for i in 0..n {
                    if i != p && i != q {
                        let dip = d[[i, p]];
                        let diq = d[[i, q]];
                        d[[i, p]] = c * dip - s * diq;
                        d[[p, i]] = d[[i, p]];
                        d[[i, q]] = s * dip + c * diq;
                        d[[q, i]] = d[[i, q]];
                    }
                }
                d[[p, p]] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
                d[[q, q]] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
                d[[p, q]] = 0.0;
                d[[q, p]] = 0.0;

                for i in 0..n {
                    let vip = v[[i, p]];
                    let viq = v[[i, q]];
                    v[[i, p]] = c * vip - s * viq;
                    v[[i, q]] = s * vip + c * viq;
                }
            }
        }
    }

    (d.diag().to_owned(), v)
}

/// Unpivoted Cholesky factorization `a = l lᵀ` with `l` lower triangular.
///
/// Returns `None` when a pivot is not strictly positive, i.e. the matrix is
/// not numerically positive definite.
pub fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return None;
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    Some(l)
}

/// Solve `l x = b` column-wise for lower-triangular `l`.
pub fn solve_lower(l: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let n = l.nrows();
    let m = b.ncols();
    let mut x = b.to_owned();
    for col in 0..m {
        for i in 0..n {
            let mut s = x[[i, col]];
            for k in 0..i {
                s -= l[[i, k]] * x[[k, col]];
            }
            x[[i, col]] = s / l[[i, i]];
        }
    }
    x
}

/// Solve `lᵀ x = b` column-wise for lower-triangular `l`.
pub fn solve_lower_transpose(l: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let n = l.nrows();
    let m = b.ncols();
    let mut x = b.to_owned();
    for col in 0..m {
        for i in (0..n).rev() {
            let mut s = x[[i, col]];
            for k in (i + 1)..n {
                s -= l[[k, i]] * x[[k, col]];
            }
            x[[i, col]] = s / l[[i, i]];
        }
    }
    x
}

/// Moore–Penrose pseudoinverse via the eigendecomposition of the smaller
/// Gram matrix. Singular values below `rel_cutoff * sigma_max` are dropped.
///
/// Returns `None` when the matrix is numerically rank zero.
pub fn pinv(m: &Array2<f64>, rel_cutoff: f64) -> Option<Array2<f64>> {
    let (rows, cols) = m.dim();
    // Work with the thinner Gram side.
    if rows < cols {
        return pinv(&m.t().to_owned(), rel_cutoff).map(|p| p.t().to_owned());
    }
    let gram = m.t().dot(m); // cols × cols
    let (vals, vecs) = jacobi_eigh(&gram);
    let sigma_max_sq = vals.iter().cloned().fold(0.0f64, f64::max);
    if sigma_max_sq <= 0.0 {
        return None;
    }
    let cutoff_sq = (rel_cutoff * rel_cutoff) * sigma_max_sq;

    // pinv = V Σ⁻¹ Uᵀ with U = M V Σ⁻¹  =>  pinv = V Σ⁻² Vᵀ Mᵀ.
    let n = cols;
    let mut core = Array2::<f64>::zeros((n, n));
    let mut any = false;
    for k in 0..n {
        if vals[k] > cutoff_sq && vals[k] > 0.0 {
            any = true;
            let inv = 1.0 / vals[k];
            for i in 0..n {
                for j in 0..n {
                    core[[i, j]] += vecs[[i, k]] * inv * vecs[[j, k]];
                }
            }
        }
    }
    if !any {
        return None;
    }
    Some(core.dot(&m.t()))
}

/// Largest absolute entry.
pub fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Frobenius norm.
pub fn fro_norm(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}
