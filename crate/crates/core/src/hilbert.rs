//! Finite truncations of the reproducing kernel Hilbert spaces `H(S)`.
//!
//! Elements of `H(S)` are stored in the orthonormal basis `e_j = λ_j^{1/2} φ_j`
//! built from the eigen pairs of the covariance operator `S`. In these
//! coordinates the `H(S)` inner product is the Euclidean dot product, and the
//! cross-operator `C₁₂ : H(S₂) → H(S₁)` is represented by the matrix of score
//! cross-correlations `Corr(⟨X₁, φ₁ᵢ⟩, ⟨X₂, φ₂ⱼ⟩)`.

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpca::Grid;
use crate::linalg;

/// Relative floor below which trailing eigenvalues are discarded.
pub const RELATIVE_EIGEN_FLOOR: f64 = 1e-10;

/// Tolerance on the quadrature Gram matrix of the eigenfunctions.
pub const GRAM_TOL: f64 = 1e-8;

/// Default tolerance on `1 − ‖C‖` for the norm assumptions.
pub const DEFAULT_ASSUMPTION_TOL: f64 = 1e-6;

/// Identifier tying coordinates and operators to an eigensystem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisId(pub u64);

/// Coordinate convention used when a cross-operator was assembled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Orthonormal-coordinate matrix of `C₁₂` (score cross-correlations).
    #[default]
    Correlation,
    /// Raw score cross-covariances.
    Covariance,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Correlation => f.write_str("correlation"),
            Mode::Covariance => f.write_str("covariance"),
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "correlation" => Ok(Mode::Correlation),
            "covariance" => Ok(Mode::Covariance),
            other => Err(Error::InvalidInput(format!("unknown mode `{other}`"))),
        }
    }
}

/// Truncated eigen pairs of a covariance operator sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    id: BasisId,
    eigenvalues: DVector<f64>,
    /// p × m, one eigenfunction per column.
    eigenfunctions: DMatrix<f64>,
    grid: Grid,
}

impl EigenSystem {
    /// Validates and assembles an eigensystem.
    ///
    /// Trailing eigenvalues below `1e-10 · λ₁` are dropped with a warning.
    pub fn new(eigenvalues: DVector<f64>, eigenfunctions: DMatrix<f64>, grid: Grid) -> Result<Self> {
        if eigenfunctions.nrows() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: eigenfunctions.nrows(),
            });
        }
        if eigenfunctions.ncols() != eigenvalues.len() {
            return Err(Error::DimensionMismatch {
                expected: eigenvalues.len(),
                got: eigenfunctions.ncols(),
            });
        }
        if eigenvalues.is_empty() {
            return Err(Error::InvalidInput("eigensystem has no components".into()));
        }
        for (i, &v) in eigenvalues.iter().enumerate() {
            if !(v > 0.0) {
                return Err(Error::NonPositiveEigenvalue { index: i, value: v });
            }
            if i > 0 && v > eigenvalues[i - 1] {
                return Err(Error::InvalidInput(format!(
                    "eigenvalues must be non-increasing (index {i})"
                )));
            }
        }

        let floor = RELATIVE_EIGEN_FLOOR * eigenvalues[0];
        let keep = eigenvalues.iter().take_while(|&&v| v >= floor).count();
        let (eigenvalues, eigenfunctions) = if keep < eigenvalues.len() {
            warn!(
                "dropping {} near-singular eigenvalue(s) below {floor:e}",
                eigenvalues.len() - keep
            );
            (
                eigenvalues.rows(0, keep).into_owned(),
                eigenfunctions.columns(0, keep).into_owned(),
            )
        } else {
            (eigenvalues, eigenfunctions)
        };

        let w = DMatrix::from_diagonal(&DVector::from_column_slice(grid.weights()));
        let gram = eigenfunctions.transpose() * w * &eigenfunctions;
        let err = linalg::max_abs(&(gram - DMatrix::identity(keep, keep)));
        if err > GRAM_TOL {
            return Err(Error::InvalidInput(format!(
                "eigenfunctions are not quadrature-orthonormal (max Gram error {err:e})"
            )));
        }

        let id = content_id(&eigenvalues, &eigenfunctions, &grid);
        Ok(Self {
            id,
            eigenvalues,
            eigenfunctions,
            grid,
        })
    }

    pub fn id(&self) -> BasisId {
        self.id
    }

    /// Number of retained components `m`.
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenfunctions(&self) -> &DMatrix<f64> {
        &self.eigenfunctions
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Keep only the leading `m` components.
    pub fn truncate(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.dim() {
            return Err(Error::RankTooLow {
                requested: m,
                rank: self.dim(),
            });
        }
        Self::new(
            self.eigenvalues.rows(0, m).into_owned(),
            self.eigenfunctions.columns(0, m).into_owned(),
            self.grid.clone(),
        )
    }
}

fn content_id(values: &DVector<f64>, functions: &DMatrix<f64>, grid: &Grid) -> BasisId {
    let mut h = DefaultHasher::new();
    values.len().hash(&mut h);
    functions.nrows().hash(&mut h);
    for x in values.iter().chain(functions.iter()).chain(grid.points()) {
        x.to_bits().hash(&mut h);
    }
    BasisId(h.finish())
}

/// Element of `H(S)` in orthonormal coordinates, so `‖f‖² = Σ coordsⱼ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct HsVector {
    pub coords: DVector<f64>,
    pub basis: BasisId,
}

impl HsVector {
    pub fn new(coords: DVector<f64>, basis: BasisId) -> Self {
        Self { coords, basis }
    }

    pub fn zeros(dim: usize, basis: BasisId) -> Self {
        Self::new(DVector::zeros(dim), basis)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }
}

/// Convert `⟨f, φ_j⟩` coordinates to orthonormal ones: `raw_j / λ_j^{1/2}`.
pub fn raw_to_ortho(raw: &DVector<f64>, system: &EigenSystem) -> Result<HsVector> {
    check_len(system.dim(), raw.len())?;
    let coords = raw.zip_map(system.eigenvalues(), |r, l| r / l.sqrt());
    Ok(HsVector::new(coords, system.id()))
}

/// Inverse of [`raw_to_ortho`].
pub fn ortho_to_raw(v: &HsVector, system: &EigenSystem) -> Result<DVector<f64>> {
    check_basis(v.basis, system.id())?;
    check_len(system.dim(), v.dim())?;
    Ok(v.coords.zip_map(system.eigenvalues(), |c, l| c * l.sqrt()))
}

/// `⟨f, g⟩_{H(S)}`.
pub fn hs_inner(f: &HsVector, g: &HsVector) -> Result<f64> {
    check_basis(f.basis, g.basis)?;
    check_len(f.dim(), g.dim())?;
    Ok(f.coords.dot(&g.coords))
}

/// Matrix of a cross-operator between two truncated `H(Sᵢ)` spaces.
///
/// `entries` is `m₁ × m₂` and represents `C₁₂ : H(S₂) → H(S₁)`; its transpose
/// represents the adjoint `C₂₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub entries: DMatrix<f64>,
    /// Basis of the target space (process 1 for `C₁₂`).
    pub codomain: BasisId,
    /// Basis of the source space (process 2 for `C₁₂`).
    pub domain: BasisId,
    pub mode: Mode,
}

impl OperatorMatrix {
    pub fn new(entries: DMatrix<f64>, codomain: BasisId, domain: BasisId, mode: Mode) -> Self {
        Self {
            entries,
            codomain,
            domain,
            mode,
        }
    }

    /// Zero operator between the given bases (correlation mode).
    pub fn zeros(rows: usize, cols: usize, codomain: BasisId, domain: BasisId) -> Self {
        Self::new(DMatrix::zeros(rows, cols), codomain, domain, Mode::Correlation)
    }

    /// The adjoint `C₂₁ = C₁₂*`.
    pub fn adjoint(&self) -> Self {
        Self::new(self.entries.transpose(), self.domain, self.codomain, self.mode)
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn norm(&self) -> f64 {
        linalg::spectral_norm(&self.entries)
    }

    pub fn apply(&self, f: &HsVector) -> Result<HsVector> {
        check_basis(self.domain, f.basis)?;
        check_len(self.ncols(), f.dim())?;
        Ok(HsVector::new(&self.entries * &f.coords, self.codomain))
    }
}

/// Assemble `C₁₂` from raw score cross-covariances
/// `Cov(⟨X₁, φ₁ᵢ⟩, ⟨X₂, φ₂ⱼ⟩)`.
///
/// Correlation mode divides by `√(λ₁ᵢ λ₂ⱼ)` and clips to `±(1 + 1e-10)`;
/// covariance mode keeps the entries verbatim.
pub fn build_cross_operator(
    raw_cross_cov: &DMatrix<f64>,
    sys1: &EigenSystem,
    sys2: &EigenSystem,
    mode: Mode,
) -> Result<OperatorMatrix> {
    check_len(sys1.dim(), raw_cross_cov.nrows())?;
    check_len(sys2.dim(), raw_cross_cov.ncols())?;
    let entries = match mode {
        Mode::Covariance => raw_cross_cov.clone(),
        Mode::Correlation => {
            let l1 = sys1.eigenvalues();
            let l2 = sys2.eigenvalues();
            let bound = 1.0 + 1e-10;
            DMatrix::from_fn(raw_cross_cov.nrows(), raw_cross_cov.ncols(), |i, j| {
                (raw_cross_cov[(i, j)] / (l1[i] * l2[j]).sqrt()).clamp(-bound, bound)
            })
        }
    };
    Ok(OperatorMatrix::new(entries, sys1.id(), sys2.id(), mode))
}

/// `I − MᵀM`, the coordinate form of `C₂₂.₁` for `M = C₁₂`.
///
/// Only meaningful for correlation-mode operators.
pub fn concentration_operator(m: &OperatorMatrix) -> DMatrix<f64> {
    let n = m.ncols();
    linalg::symmetrize(&(DMatrix::identity(n, n) - m.entries.transpose() * &m.entries))
}

/// Outcome of an operator-norm assumption check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormCheck {
    pub norm: f64,
    pub passed: bool,
}

/// Checks `‖C₁₂‖ ≤ 1 − tol`; a failure means one process (nearly) predicts
/// the other perfectly.
pub fn validate_assumption1(m: &OperatorMatrix, tol: f64) -> NormCheck {
    let norm = m.norm();
    NormCheck {
        norm,
        passed: norm.is_finite() && norm <= 1.0 - tol,
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

pub(crate) fn check_basis(left: BasisId, right: BasisId) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(Error::BasisMismatch {
            left: left.0,
            right: right.0,
        })
    }
}
