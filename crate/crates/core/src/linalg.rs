//! Small dense linear-algebra helpers shared by the precoders and solvers.

use nalgebra::{SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::{CMatrix, Error, Result};

/// `H H^H` for a wide matrix `H`.
pub fn row_gram(h: &CMatrix) -> CMatrix {
    h * h.adjoint()
}

pub fn frobenius_norm(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending; column `k` of the
/// returned matrix belongs to eigenvalue `k`.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(a.clone());
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Singular values in descending order.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    let mut sv: Vec<f64> = SVD::new(a.clone(), false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Rank threshold `max(rows, cols) * eps * sigma_max`.
pub fn rank_tolerance(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

/// Orthonormal basis (columns) of the row space of `a`, using the SVD rank rule.
pub fn row_space_basis(a: &CMatrix) -> CMatrix {
    let (rows, cols) = a.shape();
    if rows == 0 {
        return CMatrix::zeros(cols, 0);
    }
    let svd = SVD::new(a.adjoint(), true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let tol = rank_tolerance(rows, cols, smax);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > tol)
        .collect();
    CMatrix::from_fn(cols, keep.len(), |r, c| u[(r, keep[c])])
}

/// Reduction of a full-row-rank wide `K x M` channel onto its row space:
/// `H = R^H Q^H` with `Q` (`M x K`) orthonormal columns and `R^H` square.
///
/// Determinants and capacities of `I + H^H A H` only depend on `R^H`.
#[derive(Debug, Clone)]
pub struct RowSpaceReduction {
    /// `K x K` lower-triangular equivalent channel `R^H`.
    pub reduced: CMatrix,
    /// `M x K` orthonormal basis of the row space.
    pub basis: CMatrix,
}

impl RowSpaceReduction {
    pub fn new(h: &CMatrix) -> Result<Self> {
        let (k, m) = h.shape();
        if k > m {
            return Err(Error::Dimension(format!(
                "channel has {k} rows but only {m} columns"
            )));
        }
        let qr = h.adjoint().qr();
        let r = qr.r();
        let rmax = (0..k).map(|i| r[(i, i)].norm()).fold(0.0, f64::max);
        let rmin = (0..k).map(|i| r[(i, i)].norm()).fold(f64::INFINITY, f64::min);
        if k > 0 && !(rmin > rank_tolerance(k, m, rmax)) {
            let sv = singular_values(h);
            return Err(Error::RankDeficient {
                min_singular_value: sv.last().copied().unwrap_or(0.0),
            });
        }
        Ok(Self { reduced: r.adjoint(), basis: qr.q() })
    }

    /// `log2 |H H^H|` from the triangular factor.
    pub fn log2_gram_det(&self) -> f64 {
        (0..self.reduced.nrows())
            .map(|i| 2.0 * self.reduced[(i, i)].norm().log2())
            .sum()
    }
}

/// Order-preserving compensated (Neumaier) summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::default();
        iter.into_iter().for_each(|x| s.add(x));
        s
    }
}

/// Row `i` of `a` as a `1 x n` matrix.
pub fn row(a: &CMatrix, i: usize) -> CMatrix {
    a.rows(i, 1).into_owned()
}

/// Builds a complex matrix from row-major real and imaginary parts.
pub fn cmatrix(rows: usize, cols: usize, entries: &[(f64, f64)]) -> CMatrix {
    assert_eq!(entries.len(), rows * cols);
    CMatrix::from_row_iterator(
        rows,
        cols,
        entries.iter().map(|&(re, im)| Complex64::new(re, im)),
    )
}

/// Real-valued convenience constructor (row-major).
pub fn cmatrix_real(rows: usize, cols: usize, entries: &[f64]) -> CMatrix {
    assert_eq!(entries.len(), rows * cols);
    CMatrix::from_row_iterator(rows, cols, entries.iter().map(|&x| Complex64::new(x, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduction_preserves_gram() {
        let h = cmatrix(
            2,
            3,
            &[(1.0, 0.5), (0.0, -1.0), (2.0, 0.0), (0.3, 0.0), (1.0, 1.0), (-0.5, 0.2)],
        );
        let red = RowSpaceReduction::new(&h).unwrap();
        let g1 = row_gram(&h);
        let g2 = row_gram(&red.reduced);
        assert!(frobenius_norm(&(g1 - g2)) < 1e-12);
        let back = &red.reduced * red.basis.adjoint();
        assert!(frobenius_norm(&(back - &h)) < 1e-12);
    }

    #[test]
    fn reduction_rejects_dependent_rows() {
        let h = cmatrix_real(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert!(matches!(
            RowSpaceReduction::new(&h),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let s: CompensatedSum = [1e16, 1.0, -1e16, 1.0].into_iter().collect();
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn row_space_basis_of_rank_one() {
        let a = cmatrix_real(2, 3, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        let b = row_space_basis(&a);
        assert_eq!(b.ncols(), 1);
        assert!((b[(0, 0)].norm() - 1.0).abs() < 1e-14);
    }
}
