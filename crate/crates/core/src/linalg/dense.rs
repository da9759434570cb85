use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::{Complex64, Error, Result};

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigensolver for a small dense real symmetric matrix.
///
/// `a` is row-major `n x n`. Returns ascending eigenvalues and the matching
/// eigenvectors, stored eigenvector-major (`vectors[k*n + i]`).
pub fn symmetric_eigen_dense(a: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    assert_eq!(a.len(), n * n, "matrix buffer does not match size {n}");
    let mut m = a.to_vec();
    // v[i*n + k]: component i of eigenvector k
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let scale = m.iter().fold(0.0_f64, |s, x| s.max(x.abs()));
    // Off-diagonal entries at rounding level are dropped outright.
    let negligible = f64::EPSILON * scale;
    let mut sweeps = 0;
    loop {
        let converged = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .all(|(p, q)| m[p * n + q] == 0.0);
        if converged {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence {
                size: n,
                index: 0,
                iterations: sweeps,
            });
        }
        sweeps += 1;

        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() <= negligible {
                    m[p * n + q] = 0.0;
                    m[q * n + p] = 0.0;
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + math::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;

                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[x * n + x].total_cmp(&m[y * n + y]));
    let values = order.iter().map(|&k| m[k * n + k]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &k in &order {
        vectors.extend((0..n).map(|i| v[i * n + k]));
    }
    Ok((values, vectors))
}

// Hermitian H = A + iB is represented by the real symmetric [[A, -B], [B, A]].
// Every eigenvalue of H appears twice in the embedding.
fn real_embedding(h: &[Complex64], n: usize) -> Vec<f64> {
    let size = 2 * n;
    let mut out = vec![0.0; size * size];
    for r in 0..n {
        for c in 0..n {
            let z = h[r * n + c];
            out[r * size + c] = z.re;
            out[(r + n) * size + (c + n)] = z.re;
            out[r * size + (c + n)] = -z.im;
            out[(r + n) * size + c] = z.im;
        }
    }
    out
}

/// Ascending eigenvalues of a small Hermitian matrix (row-major).
pub fn hermitian_eigenvalues(h: &[Complex64], n: usize) -> Result<Vec<f64>> {
    assert_eq!(h.len(), n * n, "matrix buffer does not match size {n}");
    let (values, _) = symmetric_eigen_dense(&real_embedding(h, n), 2 * n)?;
    Ok(values.into_iter().step_by(2).collect())
}

/// Principal square root of a positive semidefinite Hermitian matrix.
///
/// Eigenvalues within `64 eps` of zero, relative to the largest one, are
/// treated as exact zeros.
pub fn hermitian_sqrt_psd(h: &[Complex64], n: usize) -> Result<Vec<Complex64>> {
    assert_eq!(h.len(), n * n, "matrix buffer does not match size {n}");
    let size = 2 * n;
    let (values, vectors) = symmetric_eigen_dense(&real_embedding(h, n), size)?;
    let largest = values.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let cutoff = 64.0 * f64::EPSILON * largest;
    let mut root = vec![0.0; size * size];
    for (k, &lambda) in values.iter().enumerate() {
        // eigenvalues at rounding level are zero; their square roots would not be
        let w = if lambda <= cutoff {
            0.0
        } else {
            math::sqrt(lambda)
        };
        let v = &vectors[k * size..(k + 1) * size];
        for r in 0..size {
            for c in 0..size {
                root[r * size + c] += w * v[r] * v[c];
            }
        }
    }
    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            out.push(Complex64::new(root[r * size + c], root[(r + n) * size + c]));
        }
    }
    Ok(out)
}

/// Singular values of a small complex matrix (row-major, `rows x cols`), descending.
///
/// One-sided Jacobi on the real embedding; small singular values keep an
/// absolute accuracy of order `eps * ||A||`.
pub fn complex_singular_values(a: &[Complex64], rows: usize, cols: usize) -> Result<Vec<f64>> {
    assert_eq!(
        a.len(),
        rows * cols,
        "matrix buffer does not match {rows}x{cols}"
    );
    let (m, n) = (2 * rows, 2 * cols);
    // columns stored contiguously: col[j*m + i]
    let mut col = vec![0.0; m * n];
    for r in 0..rows {
        for c in 0..cols {
            let z = a[r * cols + c];
            col[c * m + r] = z.re;
            col[(c + cols) * m + (r + rows)] = z.re;
            col[(c + cols) * m + r] = -z.im;
            col[c * m + (r + rows)] = z.im;
        }
    }

    let mut sweeps = 0;
    loop {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let (head, tail) = col.split_at_mut(j * m);
                let ci = &mut head[i * m..(i + 1) * m];
                let cj = &mut tail[..m];
                let alpha: f64 = ci.iter().map(|x| x * x).sum();
                let beta: f64 = cj.iter().map(|x| x * x).sum();
                let gamma: f64 = ci.iter().zip(cj.iter()).map(|(x, y)| x * y).sum();
                if gamma.abs() <= f64::EPSILON * math::sqrt(alpha * beta) || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + math::sqrt(1.0 + zeta * zeta));
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = c * t;
                for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
                    let (xi, yj) = (*x, *y);
                    *x = c * xi - s * yj;
                    *y = s * xi + c * yj;
                }
            }
        }
        if !rotated {
            break;
        }
        sweeps += 1;
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence {
                size: n,
                index: 0,
                iterations: sweeps,
            });
        }
    }

    let mut values: Vec<f64> = (0..n)
        .map(|j| math::sqrt(col[j * m..(j + 1) * m].iter().map(|x| x * x).sum()))
        .collect();
    values.sort_by(|x, y| y.total_cmp(x));
    Ok(values.into_iter().step_by(2).collect())
}
