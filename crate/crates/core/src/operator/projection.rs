//! Closed-form projections between the Sunder subspaces and the `B*B`
//! operators whose spectra give the (partial) canonical correlations.
//!
//! Subspaces of `H(Q)`: `M_k = Q(0, …, f_k, …, 0)`, `L₁ = M₁`,
//! `L₂ = M₂ ∩ M₁^⊥`, `L₃ = M₃ ∩ (M₁ + M₂)^⊥`.

use nalgebra::DMatrix;

use super::{BlockOperator2, BlockOperator3, HQElement};
use crate::error::Result;
use crate::hilbert::{check_basis, check_len, HsVector};
use crate::linalg;

fn conform(f: &HsVector, basis: crate::hilbert::BasisId, dim: usize) -> Result<()> {
    check_basis(basis, f.basis)?;
    check_len(dim, f.dim())
}

fn element(parts: Vec<(nalgebra::DVector<f64>, crate::hilbert::BasisId)>) -> HQElement {
    HQElement::new(
        parts
            .into_iter()
            .map(|(c, b)| HsVector::new(c, b))
            .collect(),
    )
}

/// Splits `h = (C₁₂f₂, f₂) ∈ M₂` into its `L₁` part `(C₁₂f₂, C₂₁C₁₂f₂)` and
/// its `L₂` part `(0, C₂₂.₁f₂)`.
pub fn project_l1_m2(f2: &HsVector, q: &BlockOperator2) -> Result<(HQElement, HQElement)> {
    let m12 = q.c12();
    conform(f2, m12.domain, m12.ncols())?;
    let (b1, b2) = (m12.codomain, m12.domain);
    let c12f2 = &m12.entries * &f2.coords;
    let l1 = element(vec![
        (c12f2.clone(), b1),
        (m12.entries.transpose() * &c12f2, b2),
    ]);
    let l2 = element(vec![
        (c12f2.scale(0.0), b1),
        (q.c22_1() * &f2.coords, b2),
    ]);
    Ok((l1, l2))
}

/// Splits `h = (C₁₂f₂, f₂, C₃₂f₂) ∈ M₂` of the three-process space into
/// `(C₁₂f₂, C₂₁C₁₂f₂, C₃₁C₁₂f₂) ∈ L₁` and `(0, C₂₂.₁f₂, (C₃₂ − C₃₁C₁₂)f₂) ∈ L₂`.
pub fn project_m2_components(f2: &HsVector, q: &BlockOperator3) -> Result<(HQElement, HQElement)> {
    let (m12, m13) = (q.c12(), q.c13());
    conform(f2, m12.domain, m12.ncols())?;
    let bases = [m12.codomain, m12.domain, m13.domain];
    let c12f2 = &m12.entries * &f2.coords;
    let l1 = element(vec![
        (c12f2.clone(), bases[0]),
        (m12.entries.transpose() * &c12f2, bases[1]),
        (m13.entries.transpose() * &c12f2, bases[2]),
    ]);
    let l2 = element(vec![
        (c12f2.scale(0.0), bases[0]),
        (q.c22_1() * &f2.coords, bases[1]),
        (q.residual_cross().transpose() * &f2.coords, bases[2]),
    ]);
    Ok((l1, l2))
}

/// `C₀ = C₃₃.₁ − (C₃₂ − C₃₁C₁₂) C₂₂.₁⁻¹ (C₂₃ − C₂₁C₁₃)`.
pub fn residual_concentration(q: &BlockOperator3, tol: f64) -> Result<DMatrix<f64>> {
    q.check(tol)?;
    let n23 = q.residual_cross();
    let inv22 = linalg::sym_inverse(&q.c22_1())?;
    Ok(linalg::symmetrize(
        &(q.c33_1() - n23.transpose() * inv22 * &n23),
    ))
}

/// Splits `h = (C₁₃f₃, C₂₃f₃, f₃) ∈ M₃` into its `L₁`, `L₂` and `L₃`
/// components; the last is `(0, 0, C₀f₃)`.
pub fn project_m3_components(
    f3: &HsVector,
    q: &BlockOperator3,
    tol: f64,
) -> Result<[HQElement; 3]> {
    let (m12, m13) = (q.c12(), q.c13());
    conform(f3, m13.domain, m13.ncols())?;
    let bases = [m12.codomain, m12.domain, m13.domain];
    let c0 = residual_concentration(q, tol)?;
    let n23 = q.residual_cross();

    let c13f3 = &m13.entries * &f3.coords;
    let l1 = element(vec![
        (c13f3.clone(), bases[0]),
        (m12.entries.transpose() * &c13f3, bases[1]),
        (m13.entries.transpose() * &c13f3, bases[2]),
    ]);
    let zero1 = c13f3.scale(0.0);
    let l2 = element(vec![
        (zero1.clone(), bases[0]),
        (&n23 * &f3.coords, bases[1]),
        ((q.c33_1() - &c0) * &f3.coords, bases[2]),
    ]);
    let l3 = element(vec![
        (zero1, bases[0]),
        (nalgebra::DVector::zeros(m12.ncols()), bases[1]),
        (&c0 * &f3.coords, bases[2]),
    ]);
    Ok([l1, l2, l3])
}

/// Matrix of `B*B` on `L₂ = {(0, f̃₂)}`: `C₂₁C₁₂C₂₂.₁⁻¹`.
pub fn bstarb_2_matrix(q: &BlockOperator2, tol: f64) -> Result<DMatrix<f64>> {
    q.check(tol)?;
    let m = &q.c12().entries;
    let inv22 = linalg::sym_inverse(&q.c22_1())?;
    Ok(m.transpose() * m * inv22)
}

/// `B*B(0, f̃₂) = (0, C₂₁C₁₂C₂₂.₁⁻¹f̃₂)`; returns the second slot.
///
/// Its eigenvalues `α²` map to canonical correlations by
/// `ρ = α / √(1 + α²)`.
pub fn bstarb_2(f2: &HsVector, q: &BlockOperator2, tol: f64) -> Result<HsVector> {
    conform(f2, q.c12().domain, q.c12().ncols())?;
    let k = bstarb_2_matrix(q, tol)?;
    Ok(HsVector::new(k * &f2.coords, f2.basis))
}

/// Matrix of `B*B` on `L₃ = {(0, 0, f̃₃)}`:
/// `(C₃₂ − C₃₁C₁₂) C₂₂.₁⁻¹ (C₂₃ − C₂₁C₁₃) C₀⁻¹`.
pub fn bstarb_3_matrix(q: &BlockOperator3, tol: f64) -> Result<DMatrix<f64>> {
    let c0 = residual_concentration(q, tol)?;
    let n23 = q.residual_cross();
    let inv22 = linalg::sym_inverse(&q.c22_1())?;
    let inv0 = linalg::sym_inverse(&c0)?;
    Ok(n23.transpose() * inv22 * n23 * inv0)
}

/// `B*B(0, 0, f̃₃)`; returns the third slot.
pub fn bstarb_3(f3: &HsVector, q: &BlockOperator3, tol: f64) -> Result<HsVector> {
    conform(f3, q.c13().domain, q.c13().ncols())?;
    let k = bstarb_3_matrix(q, tol)?;
    Ok(HsVector::new(k * &f3.coords, f3.basis))
}
