use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::{ComplexAmplitude, Error, Result};

/// QL sweeps allowed per eigenvalue before the solver gives up.
pub const MAX_SWEEPS: usize = 50;

/// Real symmetric tridiagonal matrix given by its main and first off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSymmetric {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl TridiagonalSymmetric {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.len() < 2 {
            return Err(Error::invalid("diag", "matrix size must be at least 2"));
        }
        if offdiag.len() + 1 != diag.len() {
            return Err(Error::invalid(
                "offdiag",
                alloc::format!(
                    "expected {} off-diagonal entries, got {}",
                    diag.len() - 1,
                    offdiag.len()
                ),
            ));
        }
        if diag.iter().chain(offdiag.iter()).any(|x| !x.is_finite()) {
            return Err(Error::invalid("entries", "all entries must be finite"));
        }
        Ok(Self { diag, offdiag })
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    /// Largest absolute entry, used to scale reconstruction tolerances.
    pub fn max_abs_entry(&self) -> f64 {
        self.diag
            .iter()
            .chain(self.offdiag.iter())
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Entry `(row, col)` of the full matrix.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        let n = self.size();
        assert!(
            row < n && col < n,
            "index ({row}, {col}) out of range for size {n}"
        );
        match row.abs_diff(col) {
            0 => self.diag[row],
            1 => self.offdiag[row.min(col)],
            _ => 0.0,
        }
    }
}

/// Full spectrum with an orthonormal eigenbasis.
///
/// Eigenvalues are ascending. Each eigenvector is normalized so that its
/// largest-magnitude component is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    // eigenvector k occupies vectors[k*n .. (k+1)*n]
    vectors: Vec<f64>,
}

impl SpectralDecomposition {
    pub fn size(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvector paired with `eigenvalues()[k]`.
    pub fn eigenvector(&self, k: usize) -> &[f64] {
        let n = self.size();
        &self.vectors[k * n..(k + 1) * n]
    }

    /// `<j| exp(-iHt) |i>` with 0-based site indices.
    pub fn amplitude(&self, i: usize, j: usize, t: f64) -> ComplexAmplitude {
        let n = self.size();
        assert!(
            i < n && j < n,
            "site index ({i}, {j}) out of range for {n} sites"
        );
        let mut acc = ComplexAmplitude::new(0.0, 0.0);
        for (k, &energy) in self.eigenvalues.iter().enumerate() {
            let v = self.eigenvector(k);
            acc += phase_factor(energy, t) * (v[i] * v[j]);
        }
        acc
    }

    /// `V diag(E) V^T` as a dense row-major matrix.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.size();
        let mut out = vec![0.0; n * n];
        for (k, &e) in self.eigenvalues.iter().enumerate() {
            let v = self.eigenvector(k);
            for r in 0..n {
                let scaled = e * v[r];
                for c in 0..n {
                    out[r * n + c] += scaled * v[c];
                }
            }
        }
        out
    }
}

/// Eigenvalues plus the first and last component of every eigenvector.
///
/// This is all the end-to-end amplitude `<N|exp(-iHt)|1>` needs and costs a
/// fraction of the full eigenvector accumulation.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointSpectrum {
    pub eigenvalues: Vec<f64>,
    pub first: Vec<f64>,
    pub last: Vec<f64>,
}

impl EndpointSpectrum {
    pub fn end_to_end_amplitude(&self, t: f64) -> ComplexAmplitude {
        let mut acc = ComplexAmplitude::new(0.0, 0.0);
        for ((&energy, &a), &b) in self.eigenvalues.iter().zip(&self.first).zip(&self.last) {
            acc += phase_factor(energy, t) * (a * b);
        }
        acc
    }
}

#[inline]
fn phase_factor(energy: f64, t: f64) -> ComplexAmplitude {
    let angle = energy * t;
    ComplexAmplitude::new(math::cos(angle), -math::sin(angle))
}

/// Spectral decomposition of a symmetric tridiagonal matrix by implicit QL.
pub fn eigh_tridiag(h: &TridiagonalSymmetric) -> Result<SpectralDecomposition> {
    let n = h.size();
    let rows: Vec<usize> = (0..n).collect();
    let (eigenvalues, mut vectors) = solve(h, &rows)?;

    for k in 0..n {
        let v = &mut vectors[k * n..(k + 1) * n];
        let mut pivot = 0;
        for (idx, x) in v.iter().enumerate() {
            if x.abs() > v[pivot].abs() {
                pivot = idx;
            }
        }
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }

    Ok(SpectralDecomposition {
        eigenvalues,
        vectors,
    })
}

/// Eigenvalues together with eigenvector components on the first and last site.
pub fn eigh_tridiag_endpoints(h: &TridiagonalSymmetric) -> Result<EndpointSpectrum> {
    let n = h.size();
    let (eigenvalues, z) = solve(h, &[0, n - 1])?;
    let first = (0..n).map(|k| z[2 * k]).collect();
    let last = (0..n).map(|k| z[2 * k + 1]).collect();
    Ok(EndpointSpectrum {
        eigenvalues,
        first,
        last,
    })
}

/// `<j| exp(-iHt) |i>` for 0-based sites `i`, `j`.
pub fn propagation_amplitude(
    d: &SpectralDecomposition,
    i: usize,
    j: usize,
    t: f64,
) -> ComplexAmplitude {
    d.amplitude(i, j, t)
}

/// Implicit-shift QL with Wilkinson-style shifts.
///
/// Only the components listed in `rows` are accumulated; the returned buffer
/// holds `rows.len()` entries per eigenvector, eigenvectors sorted by ascending
/// eigenvalue.
fn solve(h: &TridiagonalSymmetric, rows: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = h.size();
    let m = rows.len();
    let mut d = h.diag.clone();
    // e[i] couples sites i and i+1; e[n-1] is scratch.
    let mut e = h.offdiag.clone();
    e.push(0.0);

    // z[col*m + r] = component rows[r] of eigenvector col
    let mut z = vec![0.0; n * m];
    for (r, &row) in rows.iter().enumerate() {
        z[row * m + r] = 1.0;
    }

    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut split = l;
            while split + 1 < n {
                let dd = d[split].abs() + d[split + 1].abs();
                if e[split].abs() <= f64::EPSILON * dd {
                    break;
                }
                split += 1;
            }
            if split == l {
                break;
            }
            if iterations == MAX_SWEEPS {
                return Err(Error::NoConvergence {
                    size: n,
                    index: l,
                    iterations,
                });
            }
            iterations += 1;

            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = math::hypot(g, 1.0);
            g = d[split] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;

            let mut i = split;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = math::hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[split] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;

                let (lo, hi) = z.split_at_mut((i + 1) * m);
                let col_i = &mut lo[i * m..];
                let col_next = &mut hi[..m];
                for (zi, zn) in col_i.iter_mut().zip(col_next.iter_mut()) {
                    let f = *zn;
                    *zn = s * *zi + c * f;
                    *zi = c * *zi - s * f;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[split] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let eigenvalues = order.iter().map(|&k| d[k]).collect();
    let mut sorted = Vec::with_capacity(n * m);
    for &k in &order {
        sorted.extend_from_slice(&z[k * m..(k + 1) * m]);
    }
    Ok((eigenvalues, sorted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

    fn tri(diag: &[f64], off: &[f64]) -> TridiagonalSymmetric {
        TridiagonalSymmetric::new(diag.to_vec(), off.to_vec()).unwrap()
    }

    #[test]
    fn two_by_two() {
        let d = eigh_tridiag(&tri(&[0.0, 0.0], &[1.0])).unwrap();
        assert!((d.eigenvalues()[0] + 1.0).abs() < 1e-14);
        assert!((d.eigenvalues()[1] - 1.0).abs() < 1e-14);
        let low = d.eigenvector(0);
        let high = d.eigenvector(1);
        assert!((low[0].abs() - FRAC_1_SQRT_2).abs() < 1e-14);
        assert!((low[0] + low[1]).abs() < 1e-14);
        assert!((high[0] - high[1]).abs() < 1e-14);
    }

    #[test]
    fn three_site_uniform() {
        let d = eigh_tridiag(&tri(&[0.0; 3], &[1.0, 1.0])).unwrap();
        let expected = [-SQRT_2, 0.0, SQRT_2];
        for (a, b) in d.eigenvalues().iter().zip(expected) {
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
    }

    #[test]
    fn diagonal_matrix_keeps_standard_basis() {
        let d = eigh_tridiag(&tri(&[5.0; 4], &[0.0; 3])).unwrap();
        assert_eq!(d.eigenvalues(), &[5.0; 4]);
        for k in 0..4 {
            for (i, &x) in d.eigenvector(k).iter().enumerate() {
                assert_eq!(x, if i == k { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn sign_convention() {
        let d = eigh_tridiag(&tri(&[0.3, -1.0, 2.0, 0.5], &[0.7, -0.2, 1.1])).unwrap();
        for k in 0..4 {
            let v = d.eigenvector(k);
            let big = v
                .iter()
                .copied()
                .fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn amplitudes_of_the_dimer() {
        let d = eigh_tridiag(&tri(&[0.0, 0.0], &[1.0])).unwrap();
        let identity = d.amplitude(0, 0, 0.0);
        assert!((identity.re - 1.0).abs() < 1e-15 && identity.im.abs() < 1e-15);
        let hop = d.amplitude(0, 1, PI / 2.0);
        assert!(hop.re.abs() < 1e-14 && (hop.im + 1.0).abs() < 1e-14);
        let stay = d.amplitude(0, 0, PI / 4.0);
        assert!((stay.re - FRAC_1_SQRT_2).abs() < 1e-14 && stay.im.abs() < 1e-14);
    }

    #[test]
    fn endpoints_match_full_solution() {
        let h = tri(&[0.1, -0.4, 0.9, 0.0, 0.3], &[1.0, 0.5, -0.7, 1.2]);
        let full = eigh_tridiag(&h).unwrap();
        let ends = eigh_tridiag_endpoints(&h).unwrap();
        for t in [0.0, 0.5, 3.7, 12.0] {
            let a = full.amplitude(0, 4, t);
            let b = ends.end_to_end_amplitude(t);
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(TridiagonalSymmetric::new(vec![1.0], vec![]).is_err());
        assert!(TridiagonalSymmetric::new(vec![1.0, 2.0], vec![]).is_err());
        assert!(TridiagonalSymmetric::new(vec![1.0, f64::NAN], vec![0.0]).is_err());
    }

    #[test]
    #[should_panic]
    fn amplitude_index_out_of_range() {
        let d = eigh_tridiag(&tri(&[0.0, 0.0], &[1.0])).unwrap();
        d.amplitude(0, 2, 1.0);
    }
}
