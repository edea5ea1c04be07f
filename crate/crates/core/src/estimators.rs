//! Sample canonical and partial canonical correlations of functional data.
//!
//! Each dataset is reduced to its leading FPCA scores; the canonical
//! correlations are the singular values of the scores' sample
//! cross-covariance (covariance mode) or cross-correlation (correlation
//! mode). For partial correlations the scores of the two target datasets
//! are first regressed on the scores of the conditioning dataset.
//!
//! Samples are processed in a canonical order (lexicographic on the joint
//! rows), so estimates do not depend on how the input rows are ordered.

use std::cmp::Ordering;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fpca::{self, FunctionalDataset, Grid};
use crate::hilbert::Mode;
use crate::linalg;

/// Singular values below this fraction of the largest count as zero when
/// checking the rank of a regressor matrix.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CcaEstimate {
    /// `d₁ ≥ d₂ ≥ … ≥ 0`.
    pub correlations: Vec<f64>,
    /// Unit coefficient vectors `u_i` as columns (m₁ × k).
    pub left_coeffs: DMatrix<f64>,
    /// Unit coefficient vectors `v_i` as columns (m₂ × k).
    pub right_coeffs: DMatrix<f64>,
    /// Weight functions of the first dataset on the grid (p × k).
    pub left_weights: DMatrix<f64>,
    /// Weight functions of the second dataset on the grid (p × k).
    pub right_weights: DMatrix<f64>,
    pub grid: Grid,
    pub mode: Mode,
    /// Requested number of harmonics.
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PccaEstimate {
    /// Canonical analysis of the two residual score sets.
    pub estimate: CcaEstimate,
    /// OLS coefficients of the second dataset's scores on the conditioning
    /// scores (m_cond × m₂).
    pub regression2: DMatrix<f64>,
    /// Same for the third dataset.
    pub regression3: DMatrix<f64>,
    /// Number of conditioning harmonics requested.
    pub m_cond: usize,
}

/// Row order sorting the joint rows `(row of a, row of b, …)`
/// lexicographically.
fn canonical_order(sets: &[&DMatrix<f64>]) -> Vec<usize> {
    let n = sets[0].nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        for m in sets {
            for (x, y) in m.row(i).iter().zip(m.row(j).iter()) {
                match x.total_cmp(y) {
                    Ordering::Equal => continue,
                    o => return o,
                }
            }
        }
        Ordering::Equal
    });
    order
}

fn canonicalize(sets: &[&FunctionalDataset]) -> Result<Vec<FunctionalDataset>> {
    let values: Vec<&DMatrix<f64>> = sets.iter().map(|d| d.values()).collect();
    let order = canonical_order(&values);
    sets.iter().map(|d| d.permuted(&order)).collect()
}

fn check_same_n(sets: &[&FunctionalDataset]) -> Result<usize> {
    let n = sets[0].n();
    for d in &sets[1..] {
        if d.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: d.n(),
            });
        }
    }
    Ok(n)
}

fn center_columns(w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = w.nrows() as f64;
    let mut out = w.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    out
}

/// `S^{-1/2}` of the sample covariance of centred scores.
fn whitening(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = w.nrows() as f64;
    let s = linalg::symmetrize(&(w.transpose() * w / (n - 1.0)));
    let top = s.diagonal().max();
    let (values, _) = linalg::sym_eigen_desc(&s);
    let min = values.iter().last().copied().unwrap_or(0.0);
    if !(top > 0.0) || min <= RANK_TOL * top {
        return Err(Error::RankDeficient(format!(
            "score covariance is singular (eigenvalues {min:e} .. {top:e})"
        )));
    }
    linalg::sym_inv_sqrt(&s)
}

/// Canonical analysis of two centred score matrices.
///
/// Covariance mode takes the singular system of the raw cross-covariance.
/// Correlation mode whitens each side first, `S₁₁^{-1/2} S₁₂ S₂₂^{-1/2}`;
/// for FPCA scores (uncorrelated within a dataset) this is the matrix of
/// score cross-correlations. The returned matrices map coefficient vectors
/// to weights on the raw scores.
fn canonical_scores(
    w1: &DMatrix<f64>,
    w2: &DMatrix<f64>,
    mode: Mode,
) -> Result<(linalg::SingularSystem, DMatrix<f64>, DMatrix<f64>)> {
    let n = w1.nrows() as f64;
    let cross = w1.transpose() * w2 / (n - 1.0);
    let (a, t1, t2) = match mode {
        Mode::Covariance => (
            cross,
            DMatrix::identity(w1.ncols(), w1.ncols()),
            DMatrix::identity(w2.ncols(), w2.ncols()),
        ),
        Mode::Correlation => {
            let t1 = whitening(w1)?;
            let t2 = whitening(w2)?;
            (&t1 * cross * &t2, t1, t2)
        }
    };
    Ok((linalg::svd_sorted(&a), t1, t2))
}

fn assemble(
    svd: linalg::SingularSystem,
    transforms: (DMatrix<f64>, DMatrix<f64>),
    functions: (&DMatrix<f64>, &DMatrix<f64>),
    grid: &Grid,
    mode: Mode,
    m: usize,
) -> CcaEstimate {
    let left_weights = functions.0 * (&transforms.0 * &svd.left);
    let right_weights = functions.1 * (&transforms.1 * &svd.right);
    CcaEstimate {
        correlations: svd.values.iter().copied().collect(),
        left_coeffs: svd.left,
        right_coeffs: svd.right,
        left_weights,
        right_weights,
        grid: grid.clone(),
        mode,
        m,
    }
}

fn check_grids(sets: &[&FunctionalDataset]) -> Result<()> {
    let g = sets[0].grid();
    if sets[1..].iter().all(|d| d.grid().matches(g)) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Sample functional CCA with `m` harmonics per dataset.
pub fn estimate_cca(
    ds1: &FunctionalDataset,
    ds2: &FunctionalDataset,
    m: usize,
    mode: Mode,
) -> Result<CcaEstimate> {
    let n = check_same_n(&[ds1, ds2])?;
    check_grids(&[ds1, ds2])?;
    if n <= m {
        return Err(Error::InsufficientSamples {
            required: m + 1,
            got: n,
        });
    }
    let sets = canonicalize(&[ds1, ds2])?;
    let f1 = fpca::fpca(&sets[0], m)?;
    let f2 = fpca::fpca(&sets[1], m)?;
    let w1 = center_columns(&f1.scores);
    let w2 = center_columns(&f2.scores);
    let (svd, s1, s2) = canonical_scores(&w1, &w2, mode)?;
    Ok(assemble(
        svd,
        (s1, s2),
        (f1.eigensystem.eigenfunctions(), f2.eigensystem.eigenfunctions()),
        ds1.grid(),
        mode,
        m,
    ))
}

/// Least-squares fit `W ≈ Wcond B` without intercept; returns `(B, W − Wcond B)`.
pub fn regress_scores(
    w: &DMatrix<f64>,
    wcond: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if w.nrows() != wcond.nrows() {
        return Err(Error::DimensionMismatch {
            expected: wcond.nrows(),
            got: w.nrows(),
        });
    }
    if wcond.nrows() < wcond.ncols() {
        return Err(Error::RankDeficient(format!(
            "{} conditioning columns but only {} samples",
            wcond.ncols(),
            wcond.nrows()
        )));
    }
    let svd = wcond.clone().svd(true, true);
    let top = svd.singular_values.max();
    let min = svd.singular_values.min();
    if !(top > 0.0) || min <= RANK_TOL * top {
        return Err(Error::RankDeficient(format!(
            "conditioning scores are rank deficient (singular values {min:e} .. {top:e})"
        )));
    }
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let inv = DMatrix::from_diagonal(&svd.singular_values.map(|s| 1.0 / s));
    let b = v_t.transpose() * inv * (u.transpose() * w);
    let residual = w - wcond * &b;
    Ok((b, residual))
}

/// Residuals of the column-wise OLS regression of `w` on `wcond`.
pub fn residualize_scores(w: &DMatrix<f64>, wcond: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    regress_scores(w, wcond).map(|(_, r)| r)
}

/// Sample functional PCCA of `ds2` and `ds3` given `dscond`, using `m`
/// harmonics everywhere.
pub fn estimate_pcca(
    dscond: &FunctionalDataset,
    ds2: &FunctionalDataset,
    ds3: &FunctionalDataset,
    m: usize,
    mode: Mode,
) -> Result<PccaEstimate> {
    estimate_pcca_with(dscond, ds2, ds3, m, m, mode)
}

/// As [`estimate_pcca`] with `m_cond` conditioning harmonics.
///
/// The weight functions act on the second and third datasets before
/// residualization.
pub fn estimate_pcca_with(
    dscond: &FunctionalDataset,
    ds2: &FunctionalDataset,
    ds3: &FunctionalDataset,
    m: usize,
    m_cond: usize,
    mode: Mode,
) -> Result<PccaEstimate> {
    let n = check_same_n(&[dscond, ds2, ds3])?;
    check_grids(&[dscond, ds2, ds3])?;
    let needed = 2 * m.max(m_cond);
    if n <= needed {
        return Err(Error::InsufficientSamples {
            required: needed + 1,
            got: n,
        });
    }
    let sets = canonicalize(&[dscond, ds2, ds3])?;
    let fc = fpca::fpca(&sets[0], m_cond)?;
    let f2 = fpca::fpca(&sets[1], m)?;
    let f3 = fpca::fpca(&sets[2], m)?;
    let wc = center_columns(&fc.scores);
    let (b2, r2) = regress_scores(&center_columns(&f2.scores), &wc)?;
    let (b3, r3) = regress_scores(&center_columns(&f3.scores), &wc)?;
    let (svd, s2, s3) = canonical_scores(&r2, &r3, mode)?;
    Ok(PccaEstimate {
        estimate: assemble(
            svd,
            (s2, s3),
            (f2.eigensystem.eigenfunctions(), f3.eigensystem.eigenfunctions()),
            ds2.grid(),
            mode,
            m,
        ),
        regression2: b2,
        regression3: b3,
        m_cond,
    })
}
