use nalgebra::DVector;
use serde::Serialize;

use super::{require_assumption1, require_correlation, BlockOperator3};
use crate::error::{Error, Result};
use crate::hilbert::{HsVector, OperatorMatrix};
use crate::linalg;

/// One canonical (or partial canonical) correlation and its weight pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalPair {
    pub rho: f64,
    pub left: HsVector,
    pub right: HsVector,
}

/// Summary row used in reports.
#[derive(Debug, Clone, Serialize)]
pub struct CanonicalSummary {
    pub rho: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl From<&CanonicalPair> for CanonicalSummary {
    fn from(p: &CanonicalPair) -> Self {
        Self {
            rho: p.rho,
            left: p.left.coords.iter().copied().collect(),
            right: p.right.coords.iter().copied().collect(),
        }
    }
}

/// Canonical correlations of a pair: the singular system of `C₁₂`.
///
/// `left` lies in `H(S₁)`, `right` in `H(S₂)`; both have unit norm and
/// `ρ_k = leftᵀ C₁₂ right`.
pub fn cca_from_operators(m12: &OperatorMatrix, tol: f64) -> Result<Vec<CanonicalPair>> {
    require_correlation(m12, "C12")?;
    require_assumption1(m12, "C12", tol)?;
    let svd = linalg::svd_sorted(&m12.entries);
    Ok((0..svd.values.len())
        .map(|k| CanonicalPair {
            rho: svd.values[k],
            left: HsVector::new(svd.left.column(k).into_owned(), m12.codomain),
            right: HsVector::new(svd.right.column(k).into_owned(), m12.domain),
        })
        .collect())
}

/// Partial canonical correlations of processes 2 and 3 given process 1:
/// the singular values of `C₂₂.₁^{-1/2}(C₂₃ − C₂₁C₁₃)C₃₃.₁^{-1/2}`.
///
/// Weight vectors are the singular vectors mapped back through the
/// `^{-1/2}` factors, so each has unit residual variance.
pub fn pcca_from_operators(
    m12: &OperatorMatrix,
    m13: &OperatorMatrix,
    m23: &OperatorMatrix,
    tol: f64,
) -> Result<Vec<CanonicalPair>> {
    let q = BlockOperator3::new(m12.clone(), m13.clone(), m23.clone())?;
    q.check(tol)?;
    let a = linalg::sym_inv_sqrt(&q.c22_1())?;
    let b = linalg::sym_inv_sqrt(&q.c33_1())?;
    let t = &a * q.residual_cross() * &b;
    let norm = linalg::spectral_norm(&t);
    if norm > 1.0 - tol {
        return Err(Error::AssumptionViolated {
            what: "partial operator".into(),
            norm,
            tol,
        });
    }
    let svd = linalg::svd_sorted(&t);
    Ok((0..svd.values.len())
        .map(|k| {
            let u: DVector<f64> = svd.left.column(k).into_owned();
            let v: DVector<f64> = svd.right.column(k).into_owned();
            CanonicalPair {
                rho: svd.values[k],
                left: HsVector::new(&a * u, m23.codomain),
                right: HsVector::new(&b * v, m23.domain),
            }
        })
        .collect())
}
