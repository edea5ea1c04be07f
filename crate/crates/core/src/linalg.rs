//! Dense linear-algebra helpers shared by the analysis modules.
//!
//! Everything here works on small `nalgebra` matrices. Eigen and singular
//! systems are returned in a canonical order with a fixed sign convention so
//! downstream results are deterministic.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Floor below which an eigenvalue is treated as zero when forming
/// `A^{-1/2}` or `A^{1/2}`.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Singular values closer than this (relative to the largest) are ties.
const TIE_TOL: f64 = 1e-12;

/// Flip `v` so that its entry of largest magnitude is positive.
/// Returns `true` if the vector was negated.
pub fn fix_sign(v: &mut [f64]) -> bool {
    let mut best = 0usize;
    let mut best_abs: f64 = -1.0;
    for (i, x) in v.iter().enumerate() {
        // strict comparison keeps the first index on exact ties
        if x.abs() > best_abs + 1e-14 * best_abs.max(0.0) {
            best = i;
            best_abs = x.abs();
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
        true
    } else {
        false
    }
}

/// `(A + Aᵀ) / 2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Symmetric eigendecomposition with eigenvalues sorted non-increasing and
/// each eigenvector sign-normalised by [`fix_sign`].
pub fn sym_eigen_desc(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(symmetrize(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(Ordering::Equal)
    });
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: Vec<f64> = eig.eigenvectors.column(src).iter().copied().collect();
        fix_sign(&mut col);
        vectors.set_column(dst, &DVector::from_vec(col));
    }
    (values, vectors)
}

fn sym_power(a: &DMatrix<f64>, power: f64) -> Result<DMatrix<f64>> {
    let (values, vectors) = sym_eigen_desc(a);
    if let Some(&min) = values.iter().last() {
        if min < EIGEN_FLOOR {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: min,
            });
        }
    }
    let scaled = DVector::from_iterator(values.len(), values.iter().map(|v| v.powf(power)));
    Ok(&vectors * DMatrix::from_diagonal(&scaled) * vectors.transpose())
}

/// `A^{-1/2}` for symmetric positive definite `A`.
pub fn sym_inv_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    sym_power(a, -0.5)
}

/// `A^{1/2}` for symmetric positive definite `A`.
pub fn sym_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    sym_power(a, 0.5)
}

/// `A^{-1}` for symmetric positive definite `A`, via the eigendecomposition.
pub fn sym_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    sym_power(a, -1.0)
}

/// Largest singular value; zero for empty matrices.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.singular_values().iter().fold(0.0_f64, |acc, &s| acc.max(s))
}

/// Largest absolute entry.
pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Thin singular system `A = U diag(s) Vᵀ` in canonical order.
#[derive(Debug, Clone)]
pub struct SingularSystem {
    pub values: DVector<f64>,
    /// Left singular vectors as columns (rows(A) × k).
    pub left: DMatrix<f64>,
    /// Right singular vectors as columns (cols(A) × k).
    pub right: DMatrix<f64>,
}

/// Singular value decomposition sorted by non-increasing singular value.
///
/// Each left vector has its largest-magnitude entry positive (the paired
/// right vector is flipped along with it). Tied singular values are ordered
/// lexicographically by their left vectors.
pub fn svd_sorted(a: &DMatrix<f64>) -> SingularSystem {
    let (rows, cols) = a.shape();
    let k = rows.min(cols);
    if k == 0 {
        return SingularSystem {
            values: DVector::zeros(0),
            left: DMatrix::zeros(rows, 0),
            right: DMatrix::zeros(cols, 0),
        };
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");

    let mut triples: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..k)
        .map(|i| {
            let mut l: Vec<f64> = u.column(i).iter().copied().collect();
            let mut r: Vec<f64> = v_t.row(i).iter().copied().collect();
            if fix_sign(&mut l) {
                r.iter_mut().for_each(|x| *x = -*x);
            }
            (svd.singular_values[i].max(0.0), l, r)
        })
        .collect();

    triples.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));
    let scale = triples[0].0.max(1.0);
    let mut start = 0;
    while start < triples.len() {
        let mut end = start + 1;
        while end < triples.len() && (triples[start].0 - triples[end].0).abs() <= TIE_TOL * scale {
            end += 1;
        }
        triples[start..end].sort_by(|a, b| lexicographic(&b.1, &a.1));
        start = end;
    }

    let values = DVector::from_iterator(k, triples.iter().map(|t| t.0));
    let mut left = DMatrix::zeros(rows, k);
    let mut right = DMatrix::zeros(cols, k);
    for (i, (_, l, r)) in triples.iter().enumerate() {
        left.set_column(i, &DVector::from_column_slice(l));
        right.set_column(i, &DVector::from_column_slice(r));
    }
    SingularSystem {
        values,
        left,
        right,
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}

/// Factor `L` with `L Lᵀ = A` for a symmetric positive semidefinite `A`.
///
/// Runs an unpivoted Cholesky sweep that zeroes columns whose pivot falls
/// below `1e-12 · max diag`; a diagonal input yields `diag(sqrt(a_jj))`
/// exactly.
pub fn psd_factor(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    let scale = a.diagonal().iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    if n > 0 && scale > 0.0 {
        let (values, _) = sym_eigen_desc(a);
        let min = values[n - 1];
        if min < -1e-10 * scale {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: min,
            });
        }
    }
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = a[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if pivot <= tol {
            continue;
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fix_sign_flips_negative_peak() {
        let mut v = vec![0.1, -0.9, 0.3];
        assert!(fix_sign(&mut v));
        assert_eq!(v, vec![-0.1, 0.9, -0.3]);
        let mut w = vec![0.5, -0.2];
        assert!(!fix_sign(&mut w));
    }

    #[test]
    fn inv_sqrt_squares_to_inverse() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let r = sym_inv_sqrt(&a).unwrap();
        let prod = &r * &a * &r;
        assert_relative_eq!(prod, DMatrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn inv_sqrt_rejects_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            sym_inv_sqrt(&a),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn svd_sorted_reconstructs() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -0.5, 0.3, 0.7, -1.1]);
        let s = svd_sorted(&a);
        assert!(s.values[0] >= s.values[1]);
        let back = &s.left * DMatrix::from_diagonal(&s.values) * s.right.transpose();
        assert_relative_eq!(back, a, epsilon = 1e-12);
    }

    #[test]
    fn svd_ties_are_deterministic() {
        let a = DMatrix::<f64>::identity(3, 3) * 0.5;
        let s = svd_sorted(&a);
        assert_relative_eq!(s.left, DMatrix::identity(3, 3), epsilon = 1e-14);
    }

    #[test]
    fn psd_factor_handles_zero_and_diagonal() {
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(psd_factor(&z).unwrap(), z);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5, 1.0 / 3.0]));
        let l = psd_factor(&d).unwrap();
        assert_eq!(l[(1, 1)], 0.5_f64.sqrt());
        assert_eq!(l[(2, 2)], (1.0_f64 / 3.0).sqrt());
        assert_eq!(l[(1, 0)], 0.0);
    }

    #[test]
    fn psd_factor_rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            psd_factor(&a),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn psd_factor_rank_one() {
        let v = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let a = &v * v.transpose();
        let l = psd_factor(&a).unwrap();
        assert_relative_eq!(&l * l.transpose(), a, epsilon = 1e-12);
    }
}
