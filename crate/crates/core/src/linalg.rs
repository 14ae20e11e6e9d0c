//! Dense symmetric eigen-solvers used by spectral clustering and PCA.

use alloc::vec::Vec;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::math::{dot, sqrt};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// `self * other`
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = out.row_mut(i);
                for (d, o) in dst.iter_mut().zip(orow) {
                    *d += a * o;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigen-decomposition of a symmetric matrix.
///
/// Eigenvalues are sorted in descending order; `vectors` holds the matching
/// unit eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Cyclic Jacobi rotations. Suitable for the small matrices used here
/// (PCA covariances, affinity graphs of a few hundred series).
pub fn symmetric_eigen(a: &Matrix) -> SymmetricEigen {
    assert_eq!(a.rows, a.cols, "matrix must be square");
    let n = a.rows;
    let mut m = a.clone();
    let mut v = Matrix::identity(n);

    let total: f64 = m.data.iter().map(|x| x * x).sum();
    let tol = 1e-30 * total.max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        // fix the sign so the largest-magnitude component is positive
        let mut pivot = 0.0f64;
        for k in 0..n {
            if v[(k, src)].abs() > pivot.abs() {
                pivot = v[(k, src)];
            }
        }
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            vectors[(k, dst)] = sign * v[(k, src)];
        }
    }
    SymmetricEigen { values, vectors }
}

/// Leading `k` eigenpairs of a symmetric positive semi-definite matrix by
/// block power iteration with Rayleigh-Ritz extraction.
pub fn top_eigen_psd(a: &Matrix, k: usize, seed: u64, max_iter: usize, tol: f64) -> SymmetricEigen {
    let n = a.rows;
    assert!(k <= n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // columns stored as separate vectors
    let mut basis: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..n).map(|_| rng.gen::<f64>() - 0.5).collect())
        .collect();
    orthonormalize(&mut basis);
    let mut prev_vals = vec![f64::INFINITY; k];
    let mut values = vec![0.0; k];
    for _ in 0..max_iter {
        let mut next: Vec<Vec<f64>> = basis.iter().map(|b| sym_matvec(a, b)).collect();
        orthonormalize(&mut next);
        basis = next;
        // Rayleigh-Ritz on the current subspace
        let ab: Vec<Vec<f64>> = basis.iter().map(|b| sym_matvec(a, b)).collect();
        let mut small = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                small[(i, j)] = dot(&basis[i], &ab[j]);
            }
        }
        let eig = symmetric_eigen(&small);
        let rotated: Vec<Vec<f64>> = (0..k)
            .map(|c| {
                let mut v = vec![0.0; n];
                for (j, b) in basis.iter().enumerate() {
                    crate::math::axpy(eig.vectors[(j, c)], b, &mut v);
                }
                v
            })
            .collect();
        basis = rotated;
        values = eig.values;
        let delta = values
            .iter()
            .zip(&prev_vals)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if delta < tol {
            break;
        }
        prev_vals.clone_from(&values);
    }
    let mut vectors = Matrix::zeros(n, k);
    for (c, b) in basis.iter().enumerate() {
        for r in 0..n {
            vectors[(r, c)] = b[r];
        }
    }
    SymmetricEigen { values, vectors }
}

fn sym_matvec(a: &Matrix, x: &[f64]) -> Vec<f64> {
    (0..a.rows).map(|i| dot(a.row(i), x)).collect()
}

/// Modified Gram-Schmidt; columns that collapse are replaced with zeros.
fn orthonormalize(cols: &mut [Vec<f64>]) {
    for i in 0..cols.len() {
        for j in 0..i {
            let (head, tail) = cols.split_at_mut(i);
            let proj = dot(&tail[0], &head[j]);
            crate::math::axpy(-proj, &head[j], &mut tail[0]);
        }
        let nrm = crate::math::norm(&cols[i]);
        if nrm > 1e-300 {
            cols[i].iter_mut().for_each(|x| *x /= nrm);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_symmetric(n: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let x = rng.gen::<f64>() - 0.5;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        m
    }

    #[test]
    fn jacobi_reconstructs_matrix() {
        let a = random_symmetric(12, 3);
        let eig = symmetric_eigen(&a);
        for w in eig.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
        let n = a.rows;
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += eig.vectors[(i, k)] * eig.values[k] * eig.vectors[(j, k)];
                }
                assert!((s - a[(i, j)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn eigenvectors_orthonormal() {
        let a = random_symmetric(9, 11);
        let eig = symmetric_eigen(&a);
        let vtv = eig.vectors.transpose().matmul(&eig.vectors);
        for i in 0..9 {
            for j in 0..9 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((vtv[(i, j)] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn power_iteration_matches_jacobi_on_psd() {
        let b = random_symmetric(30, 5);
        let a = b.matmul(&b); // PSD
        let full = symmetric_eigen(&a);
        let top = top_eigen_psd(&a, 3, 1, 2000, 1e-14);
        for i in 0..3 {
            assert!((full.values[i] - top.values[i]).abs() < 1e-8);
        }
    }
}
