//! Block `Q` operators for two and three processes and the geometry of
//! `H(Q)`.
//!
//! All blocks are correlation-mode [`OperatorMatrix`] values, so `Q` has
//! identity diagonal blocks and the cross-operators off the diagonal:
//!
//! ```text
//!       [ I    C₁₂ ]            [ I    C₁₂  C₁₃ ]
//!  Q₂ = [ C₂₁  I   ]       Q₃ = [ C₂₁  I    C₂₃ ]
//!                               [ C₃₁  C₃₂  I   ]
//! ```
//!
//! Elements of `H₀ = H(S₁) × H(S₂) [× H(S₃)]` are [`HQElement`]s; the `H(Q)`
//! inner product is `⟨h, Q⁻¹h'⟩₀`.

mod canonical;
pub mod gram;
mod projection;
mod sunder;

pub use canonical::{cca_from_operators, pcca_from_operators, CanonicalPair, CanonicalSummary};
pub use projection::{
    bstarb_2, bstarb_2_matrix, bstarb_3, bstarb_3_matrix, project_l1_m2, project_m2_components,
    project_m3_components, residual_concentration,
};
pub use sunder::{sunder_decompose, sunder_decompose_hq};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hilbert::{
    check_basis, check_len, concentration_operator, validate_assumption1, BasisId, HsVector,
    Mode, OperatorMatrix,
};
use crate::linalg;

/// Common surface of the two- and three-process `Q` operators.
pub trait QOperator {
    /// Sizes `m₁, m₂[, m₃]` of the diagonal blocks.
    fn block_dims(&self) -> Vec<usize>;

    /// Bases of `H(S₁), H(S₂)[, H(S₃)]`.
    fn bases(&self) -> Vec<BasisId>;

    /// The full symmetric block matrix.
    fn assemble(&self) -> DMatrix<f64>;

    /// Closed-form `Q⁻¹`, after validating the norm assumptions at `tol`.
    fn inverse(&self, tol: f64) -> Result<DMatrix<f64>>;

    fn total_dim(&self) -> usize {
        self.block_dims().iter().sum()
    }

    /// Offset of block `k` inside the stacked coordinates.
    fn offset(&self, k: usize) -> usize {
        self.block_dims()[..k].iter().sum()
    }
}

fn require_correlation(m: &OperatorMatrix, name: &str) -> Result<()> {
    if m.mode == Mode::Correlation {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{name} must be a correlation-mode operator"
        )))
    }
}

fn require_assumption1(m: &OperatorMatrix, name: &str, tol: f64) -> Result<()> {
    let chk = validate_assumption1(m, tol);
    if chk.passed {
        Ok(())
    } else {
        Err(Error::AssumptionViolated {
            what: name.to_string(),
            norm: chk.norm,
            tol,
        })
    }
}

/// `Q` for a pair of processes.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOperator2 {
    m12: OperatorMatrix,
}

impl BlockOperator2 {
    pub fn new(m12: OperatorMatrix) -> Result<Self> {
        require_correlation(&m12, "C12")?;
        Ok(Self { m12 })
    }

    pub fn c12(&self) -> &OperatorMatrix {
        &self.m12
    }

    pub fn c21(&self) -> OperatorMatrix {
        self.m12.adjoint()
    }

    /// `C₁₁.₂ = I − C₁₂C₂₁`.
    pub fn c11_2(&self) -> DMatrix<f64> {
        concentration_operator(&self.m12.adjoint())
    }

    /// `C₂₂.₁ = I − C₂₁C₁₂`.
    pub fn c22_1(&self) -> DMatrix<f64> {
        concentration_operator(&self.m12)
    }

    pub fn check(&self, tol: f64) -> Result<()> {
        require_assumption1(&self.m12, "C12", tol)
    }
}

impl QOperator for BlockOperator2 {
    fn block_dims(&self) -> Vec<usize> {
        vec![self.m12.nrows(), self.m12.ncols()]
    }

    fn bases(&self) -> Vec<BasisId> {
        vec![self.m12.codomain, self.m12.domain]
    }

    fn assemble(&self) -> DMatrix<f64> {
        let (m1, m2) = (self.m12.nrows(), self.m12.ncols());
        let mut q = DMatrix::identity(m1 + m2, m1 + m2);
        q.view_mut((0, m1), (m1, m2)).copy_from(&self.m12.entries);
        q.view_mut((m1, 0), (m2, m1))
            .copy_from(&self.m12.entries.transpose());
        q
    }

    fn inverse(&self, tol: f64) -> Result<DMatrix<f64>> {
        q2_inverse(self, tol)
    }
}

/// `Q` for three processes; process 1 is the conditioning process.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOperator3 {
    m12: OperatorMatrix,
    m13: OperatorMatrix,
    m23: OperatorMatrix,
}

impl BlockOperator3 {
    pub fn new(m12: OperatorMatrix, m13: OperatorMatrix, m23: OperatorMatrix) -> Result<Self> {
        require_correlation(&m12, "C12")?;
        require_correlation(&m13, "C13")?;
        require_correlation(&m23, "C23")?;
        check_basis(m12.codomain, m13.codomain)?;
        check_basis(m12.domain, m23.codomain)?;
        check_basis(m13.domain, m23.domain)?;
        check_len(m12.nrows(), m13.nrows())?;
        check_len(m12.ncols(), m23.nrows())?;
        check_len(m13.ncols(), m23.ncols())?;
        Ok(Self { m12, m13, m23 })
    }

    pub fn c12(&self) -> &OperatorMatrix {
        &self.m12
    }

    pub fn c13(&self) -> &OperatorMatrix {
        &self.m13
    }

    pub fn c23(&self) -> &OperatorMatrix {
        &self.m23
    }

    /// `C₂₂.₁ = I − C₂₁C₁₂`.
    pub fn c22_1(&self) -> DMatrix<f64> {
        concentration_operator(&self.m12)
    }

    /// `C₃₃.₁ = I − C₃₁C₁₃`.
    pub fn c33_1(&self) -> DMatrix<f64> {
        concentration_operator(&self.m13)
    }

    /// `C₂₃ − C₂₁C₁₃`, the residual cross-operator after removing process 1.
    pub fn residual_cross(&self) -> DMatrix<f64> {
        &self.m23.entries - self.m12.entries.transpose() * &self.m13.entries
    }

    /// `C₂₂.₁^{-1/2} (C₂₃ − C₂₁C₁₃) C₃₃.₁^{-1/2}`; its singular values are the
    /// partial canonical correlations.
    pub fn partial_operator(&self) -> Result<DMatrix<f64>> {
        let a = linalg::sym_inv_sqrt(&self.c22_1())?;
        let b = linalg::sym_inv_sqrt(&self.c33_1())?;
        Ok(a * self.residual_cross() * b)
    }

    /// Norm of the off-diagonal block of `V`.
    pub fn residual_cross_norm(&self) -> Result<f64> {
        Ok(linalg::spectral_norm(&self.partial_operator()?))
    }

    /// Assumption 1 for both pairs involving process 1 and the `V` norm
    /// bound.
    pub fn check(&self, tol: f64) -> Result<()> {
        require_assumption1(&self.m12, "C12", tol)?;
        require_assumption1(&self.m13, "C13", tol)?;
        let norm = self.residual_cross_norm().map_err(|_| Error::AssumptionViolated {
            what: "C22.1 / C33.1 invertibility".into(),
            norm: 1.0,
            tol,
        })?;
        if norm.is_finite() && norm <= 1.0 - tol {
            Ok(())
        } else {
            Err(Error::AssumptionViolated {
                what: "residual cross-operator V".into(),
                norm,
                tol,
            })
        }
    }
}

impl QOperator for BlockOperator3 {
    fn block_dims(&self) -> Vec<usize> {
        vec![self.m12.nrows(), self.m12.ncols(), self.m13.ncols()]
    }

    fn bases(&self) -> Vec<BasisId> {
        vec![self.m12.codomain, self.m12.domain, self.m13.domain]
    }

    fn assemble(&self) -> DMatrix<f64> {
        let (m1, m2, m3) = (self.m12.nrows(), self.m12.ncols(), self.m13.ncols());
        let n = m1 + m2 + m3;
        let mut q = DMatrix::identity(n, n);
        let mut put = |r: usize, c: usize, b: &DMatrix<f64>| {
            q.view_mut((r, c), b.shape()).copy_from(b);
            q.view_mut((c, r), (b.ncols(), b.nrows()))
                .copy_from(&b.transpose());
        };
        put(0, m1, &self.m12.entries);
        put(0, m1 + m2, &self.m13.entries);
        put(m1, m1 + m2, &self.m23.entries);
        q
    }

    fn inverse(&self, tol: f64) -> Result<DMatrix<f64>> {
        q3_inverse(self, tol)
    }
}

/// Element `h = (f₁, f₂[, f₃])` of `H₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct HQElement {
    pub parts: Vec<HsVector>,
}

impl HQElement {
    pub fn new(parts: Vec<HsVector>) -> Self {
        Self { parts }
    }

    /// Zero element shaped like `q`.
    pub fn zeros(q: &dyn QOperator) -> Self {
        let parts = q
            .block_dims()
            .into_iter()
            .zip(q.bases())
            .map(|(d, b)| HsVector::zeros(d, b))
            .collect();
        Self { parts }
    }

    /// Split stacked coordinates into parts shaped like `q`.
    pub fn from_stacked(v: &DVector<f64>, q: &dyn QOperator) -> Result<Self> {
        check_len(q.total_dim(), v.len())?;
        let mut parts = Vec::new();
        let mut off = 0;
        for (d, b) in q.block_dims().into_iter().zip(q.bases()) {
            parts.push(HsVector::new(v.rows(off, d).into_owned(), b));
            off += d;
        }
        Ok(Self { parts })
    }

    pub fn stacked(&self) -> DVector<f64> {
        let n = self.parts.iter().map(HsVector::dim).sum();
        DVector::from_iterator(n, self.parts.iter().flat_map(|p| p.coords.iter().copied()))
    }

    /// The ambient norm `‖h‖₀`.
    pub fn norm0(&self) -> f64 {
        self.parts
            .iter()
            .map(|p| p.coords.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    fn conforms(&self, q: &dyn QOperator) -> Result<()> {
        let dims = q.block_dims();
        check_len(dims.len(), self.parts.len())?;
        for ((p, d), b) in self.parts.iter().zip(dims).zip(q.bases()) {
            check_basis(b, p.basis)?;
            check_len(d, p.dim())?;
        }
        Ok(())
    }
}

/// `Qh`; realises `Cov(Z(h), Z(h')) = ⟨h, Qh'⟩₀`.
pub fn q_apply(q: &dyn QOperator, h: &HQElement) -> Result<HQElement> {
    h.conforms(q)?;
    HQElement::from_stacked(&(q.assemble() * h.stacked()), q)
}

/// `[[I, M],[Mᵀ, I]]⁻¹` by the concentration-operator formula.
fn pair_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m1, m2) = m.shape();
    let c11_2 = linalg::symmetrize(&(DMatrix::identity(m1, m1) - m * m.transpose()));
    let c22_1 = linalg::symmetrize(&(DMatrix::identity(m2, m2) - m.transpose() * m));
    let inv11 = linalg::sym_inverse(&c11_2)?;
    let inv22 = linalg::sym_inverse(&c22_1)?;
    let mut out = DMatrix::zeros(m1 + m2, m1 + m2);
    out.view_mut((0, 0), (m1, m1)).copy_from(&inv11);
    out.view_mut((m1, m1), (m2, m2)).copy_from(&inv22);
    out.view_mut((0, m1), (m1, m2)).copy_from(&(-(m * &inv22)));
    out.view_mut((m1, 0), (m2, m1))
        .copy_from(&(-(m.transpose() * &inv11)));
    Ok(out)
}

/// Closed-form inverse of the two-process `Q`:
/// `[[C₁₁.₂⁻¹, −C₁₂C₂₂.₁⁻¹], [−C₂₁C₁₁.₂⁻¹, C₂₂.₁⁻¹]]`.
pub fn q2_inverse(q: &BlockOperator2, tol: f64) -> Result<DMatrix<f64>> {
    q.check(tol)?;
    pair_inverse(&q.m12.entries)
}

/// Closed-form inverse of the three-process `Q` through the Schur
/// complement `G = D^{1/2}(I − V)D^{1/2}` of the conditioning block, with
/// `D = diag(C₂₂.₁, C₃₃.₁)`:
///
/// ```text
/// Q⁻¹ = [[I + E G⁻¹ F, −E G⁻¹], [−G⁻¹ F, G⁻¹]],   E = [C₁₂ C₁₃], F = Eᵀ
/// ```
pub fn q3_inverse(q: &BlockOperator3, tol: f64) -> Result<DMatrix<f64>> {
    q.check(tol)?;
    let (m1, m2, m3) = (q.m12.nrows(), q.m12.ncols(), q.m13.ncols());
    let tail = m2 + m3;

    let mut e = DMatrix::zeros(m1, tail);
    e.view_mut((0, 0), (m1, m2)).copy_from(&q.m12.entries);
    e.view_mut((0, m2), (m1, m3)).copy_from(&q.m13.entries);
    let f = e.transpose();

    let c22_1 = q.c22_1();
    let c33_1 = q.c33_1();
    let mut d_inv_half = DMatrix::zeros(tail, tail);
    d_inv_half
        .view_mut((0, 0), (m2, m2))
        .copy_from(&linalg::sym_inv_sqrt(&c22_1)?);
    d_inv_half
        .view_mut((m2, m2), (m3, m3))
        .copy_from(&linalg::sym_inv_sqrt(&c33_1)?);

    // I − V = [[I, T], [Tᵀ, I]] with T the partial operator
    let t = q.partial_operator()?;
    let g_inv = &d_inv_half * pair_inverse(&t)? * &d_inv_half;

    let eg = &e * &g_inv;
    let mut out = DMatrix::zeros(m1 + tail, m1 + tail);
    out.view_mut((0, 0), (m1, m1))
        .copy_from(&(DMatrix::identity(m1, m1) + &eg * &f));
    out.view_mut((0, m1), (m1, tail)).copy_from(&(-&eg));
    out.view_mut((m1, 0), (tail, m1)).copy_from(&(-(&g_inv * &f)));
    out.view_mut((m1, m1), (tail, tail)).copy_from(&g_inv);
    Ok(out)
}

/// `⟨h, h'⟩_{H(Q)} = ⟨h, Q⁻¹h'⟩₀`.
pub fn hq_inner(h: &HQElement, h2: &HQElement, q: &dyn QOperator, tol: f64) -> Result<f64> {
    h.conforms(q)?;
    h2.conforms(q)?;
    let inv = q.inverse(tol)?;
    Ok(h.stacked().dot(&(inv * h2.stacked())))
}

#[cfg(test)]
mod tests;
