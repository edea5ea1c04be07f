//! Numeric projections in the `H(Q)` metric by the normal equations.
//!
//! This is the independent reference for the closed forms in the parent
//! module: the metric is a dense LU inverse of the assembled `Q`, subspaces
//! are spanned by columns of `Q`, and every projection solves
//! `(AᵀGA) c = AᵀG x`. Nothing here calls the closed-form inverses,
//! projections or `B*B` formulas.

use nalgebra::{DMatrix, DVector};

use super::QOperator;
use crate::error::{Error, Result};

/// Dense `Q⁻¹` via LU, symmetrised.
pub fn dense_metric(q: &dyn QOperator) -> Result<DMatrix<f64>> {
    let inv = q
        .assemble()
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("Q is singular".into()))?;
    Ok((&inv + inv.transpose()) * 0.5)
}

/// Spanning set of `M_k = Q(0, …, f_k, …, 0)`: the block-`k` columns of `Q`.
pub fn m_span(q: &dyn QOperator, k: usize) -> DMatrix<f64> {
    let dims = q.block_dims();
    q.assemble().columns(q.offset(k), dims[k]).into_owned()
}

/// `P = A (AᵀGA)⁻¹ AᵀG`, the `G`-orthogonal projector onto `span(A)`.
pub fn projector(span: &DMatrix<f64>, metric: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if span.ncols() == 0 {
        return Ok(DMatrix::zeros(span.nrows(), span.nrows()));
    }
    let ga = metric * span;
    let gram = span.transpose() * &ga;
    let inv = gram
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("spanning set is linearly dependent".into()))?;
    Ok(span * inv * ga.transpose())
}

/// `G`-orthogonal projection of `x` onto `span(A)`.
pub fn project(span: &DMatrix<f64>, metric: &DMatrix<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(projector(span, metric)? * x)
}

fn hcat(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut off = 0;
    for b in blocks {
        out.columns_mut(off, b.ncols()).copy_from(b);
        off += b.ncols();
    }
    out
}

/// Spanning sets of `L₁, …, L_n` obtained by removing from each `M_k` its
/// projection onto `M₁ + … + M_{k−1}`.
pub fn l_spans(q: &dyn QOperator, metric: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
    let n = q.block_dims().len();
    let m: Vec<DMatrix<f64>> = (0..n).map(|k| m_span(q, k)).collect();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let prior: Vec<&DMatrix<f64>> = m[..k].iter().collect();
        let l = if prior.is_empty() {
            m[k].clone()
        } else {
            let p = projector(&hcat(&prior), metric)?;
            &m[k] - p * &m[k]
        };
        out.push(l);
    }
    Ok(out)
}

/// Projections of `x` onto each `L_k`.
pub fn l_components(q: &dyn QOperator, x: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
    let g = dense_metric(q)?;
    l_spans(q, &g)?
        .iter()
        .map(|l| project(l, &g, x))
        .collect()
}

/// `B*B h̃` for `h̃ ∈ L_n` (the last Sunder subspace), with
/// `B = P_{L_{n−1}|M_n} (P_{L_n|M_n})⁻¹`, built by composing numeric
/// projections. `h_tilde` is given in stacked `H₀` coordinates.
pub fn bstarb_numeric(q: &dyn QOperator, h_tilde: &DVector<f64>) -> Result<DVector<f64>> {
    let g = dense_metric(q)?;
    let n = q.block_dims().len();
    let spans = l_spans(q, &g)?;
    let a_last = m_span(q, n - 1);
    let l_last = &spans[n - 1];
    let p_prev = projector(&spans[n - 2], &g)?;

    // Coordinates of h̃ in the L_n spanning set.
    let c = l_last
        .clone()
        .svd(true, true)
        .solve(h_tilde, 1e-14)
        .map_err(|e| Error::RankDeficient(e.to_string()))?;

    // B in those coordinates: column j is P_{L_{n-1}} applied to the M_n
    // preimage of the j-th spanning vector of L_n.
    let b = &p_prev * &a_last;
    let gram_l = l_last.transpose() * &g * l_last;
    let bb = b.transpose() * &g * &b;
    let coeff = gram_l
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("L_n spanning set is dependent".into()))?
        * bb
        * c;
    Ok(l_last * coeff)
}
