use nalgebra::DMatrix;

use super::QOperator;
use crate::error::{Error, Result};
use crate::linalg;

const RANK_TOL: f64 = 1e-10;

/// Orthonormal bases of `L_k = (M₁ + … + M_k) ∩ (M₁ + … + M_{k−1})^⊥`.
///
/// Block Gram–Schmidt in the metric `⟨x, y⟩ = xᵀ G y`: each spanning set is
/// stripped of its component along the bases found so far (twice, for
/// stability) and then whitened by its own Gram matrix. A residual Gram
/// matrix that is numerically singular means the `M_k` do not form an
/// algebraic direct sum.
pub fn sunder_decompose(spans: &[DMatrix<f64>], metric: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
    let dim = metric.nrows();
    let mut acc = DMatrix::<f64>::zeros(dim, 0);
    let mut out = Vec::with_capacity(spans.len());
    for (k, span) in spans.iter().enumerate() {
        if span.nrows() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: span.nrows(),
            });
        }
        let scale = linalg::sym_eigen_desc(&(span.transpose() * metric * span))
            .0
            .iter()
            .next()
            .copied()
            .unwrap_or(0.0);
        let mut r = span.clone();
        for _ in 0..2 {
            let coef = acc.transpose() * metric * &r;
            r -= &acc * coef;
        }
        let gram = linalg::symmetrize(&(r.transpose() * metric * &r));
        let (values, _) = linalg::sym_eigen_desc(&gram);
        let min = values.iter().last().copied().unwrap_or(0.0);
        if !(min > RANK_TOL * scale) {
            return Err(Error::RankDeficient(format!(
                "subspace {} is not independent of the preceding ones (min Gram eigenvalue {min:e})",
                k + 1
            )));
        }
        let basis = r * linalg::sym_inv_sqrt(&gram)?;
        let mut grown = DMatrix::zeros(dim, acc.ncols() + basis.ncols());
        grown.columns_mut(0, acc.ncols()).copy_from(&acc);
        grown.columns_mut(acc.ncols(), basis.ncols()).copy_from(&basis);
        acc = grown;
        out.push(basis);
    }
    Ok(out)
}

/// [`sunder_decompose`] for the subspaces `M_k` of `H(Q)` under the
/// closed-form `Q⁻¹` metric.
pub fn sunder_decompose_hq(q: &dyn QOperator, tol: f64) -> Result<Vec<DMatrix<f64>>> {
    let metric = q.inverse(tol)?;
    let full = q.assemble();
    let spans: Vec<DMatrix<f64>> = q
        .block_dims()
        .iter()
        .enumerate()
        .map(|(k, &d)| full.columns(q.offset(k), d).into_owned())
        .collect();
    sunder_decompose(&spans, &metric)
}
