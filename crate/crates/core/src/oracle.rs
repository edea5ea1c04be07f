//! Finite-dimensional references used to check the operator and estimator
//! routines: classical Hotelling CCA, Roy's partial CCA, and the exact
//! truncated cross-operators of the simulation models.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fpca::{eigendecompose_kernel, Grid};
use crate::hilbert::{build_cross_operator, EigenSystem, Mode, OperatorMatrix};
use crate::linalg;
use crate::simulate::{Model, SimConfig};

/// Covariance blocks of two or three finite-dimensional vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CovBlocks {
    pub s11: DMatrix<f64>,
    pub s22: DMatrix<f64>,
    pub s12: DMatrix<f64>,
    pub s33: Option<DMatrix<f64>>,
    pub s13: Option<DMatrix<f64>>,
    pub s23: Option<DMatrix<f64>>,
}

impl CovBlocks {
    pub fn pair(s11: DMatrix<f64>, s22: DMatrix<f64>, s12: DMatrix<f64>) -> Self {
        Self {
            s11,
            s22,
            s12,
            s33: None,
            s13: None,
            s23: None,
        }
    }

    /// Slice a full joint covariance into blocks of sizes `dims` (two or
    /// three entries).
    pub fn from_full(full: &DMatrix<f64>, dims: &[usize]) -> Result<Self> {
        let total: usize = dims.iter().sum();
        if full.nrows() != total || full.ncols() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                got: full.nrows(),
            });
        }
        let off = |k: usize| dims[..k].iter().sum::<usize>();
        let block = |a: usize, b: usize| full.view((off(a), off(b)), (dims[a], dims[b])).into_owned();
        match dims.len() {
            2 => Ok(Self::pair(block(0, 0), block(1, 1), block(0, 1))),
            3 => Ok(Self {
                s11: block(0, 0),
                s22: block(1, 1),
                s12: block(0, 1),
                s33: Some(block(2, 2)),
                s13: Some(block(0, 2)),
                s23: Some(block(1, 2)),
            }),
            n => Err(Error::InvalidInput(format!(
                "expected two or three blocks, got {n}"
            ))),
        }
    }

    fn third(&self) -> Result<(&DMatrix<f64>, &DMatrix<f64>, &DMatrix<f64>)> {
        match (&self.s33, &self.s13, &self.s23) {
            (Some(s33), Some(s13), Some(s23)) => Ok((s33, s13, s23)),
            _ => Err(Error::InvalidInput("three-process blocks required".into())),
        }
    }
}

/// Correlations with weight vectors (columns) for each side.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCca {
    pub correlations: DVector<f64>,
    pub left_weights: DMatrix<f64>,
    pub right_weights: DMatrix<f64>,
}

fn whitening(s: &DMatrix<f64>, which: &str) -> Result<DMatrix<f64>> {
    linalg::sym_inv_sqrt(s).map_err(|e| match e {
        Error::NotPositiveDefinite { min_eigenvalue } => Error::InvalidInput(format!(
            "{which} is singular (min eigenvalue {min_eigenvalue:e})"
        )),
        other => other,
    })
}

/// Classical CCA: singular system of `S₁₁^{-1/2} S₁₂ S₂₂^{-1/2}`, weights
/// back-transformed by `S^{-1/2}`.
pub fn hotelling_cca(blocks: &CovBlocks) -> Result<OracleCca> {
    hotelling(&blocks.s11, &blocks.s22, &blocks.s12)
}

fn hotelling(s11: &DMatrix<f64>, s22: &DMatrix<f64>, s12: &DMatrix<f64>) -> Result<OracleCca> {
    if s12.nrows() != s11.nrows() || s12.ncols() != s22.nrows() {
        return Err(Error::DimensionMismatch {
            expected: s11.nrows(),
            got: s12.nrows(),
        });
    }
    let w1 = whitening(s11, "S11")?;
    let w2 = whitening(s22, "S22")?;
    let svd = linalg::svd_sorted(&(&w1 * s12 * &w2));
    Ok(OracleCca {
        correlations: svd.values,
        left_weights: w1 * svd.left,
        right_weights: w2 * svd.right,
    })
}

/// Conditional blocks `S_{ij.1} = S_{ij} − S_{i1} S₁₁⁻¹ S_{1j}` for i, j ∈ {2, 3}.
pub fn conditional_blocks(blocks: &CovBlocks) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let (s33, s13, s23) = blocks.third()?;
    let inv11 = linalg::sym_inverse(&blocks.s11)
        .map_err(|_| Error::InvalidInput("S11 is singular".into()))?;
    let s21 = blocks.s12.transpose();
    let s22_1 = linalg::symmetrize(&(&blocks.s22 - &s21 * &inv11 * &blocks.s12));
    let s33_1 = linalg::symmetrize(&(s33 - s13.transpose() * &inv11 * s13));
    let s23_1 = s23 - &s21 * &inv11 * s13;
    Ok((s22_1, s33_1, s23_1))
}

/// Roy's partial CCA of vectors 2 and 3 given vector 1: Hotelling CCA of
/// the conditional blocks.
pub fn roy_pcca(blocks: &CovBlocks) -> Result<OracleCca> {
    let (s22_1, s33_1, s23_1) = conditional_blocks(blocks)?;
    for (name, s) in [("S22.1", &s22_1), ("S33.1", &s33_1)] {
        let (values, _) = linalg::sym_eigen_desc(s);
        let min = values.iter().last().copied().unwrap_or(0.0);
        if min < linalg::EIGEN_FLOOR {
            return Err(Error::AssumptionViolated {
                what: format!("conditional block {name} is degenerate"),
                norm: 1.0,
                tol: min,
            });
        }
    }
    hotelling(&s22_1, &s33_1, &s23_1)
}

/// Eigensystem of a covariance matrix `S`, viewing a `d`-vector as a
/// function on the `d`-point midpoint grid scaled by `√d` so that the
/// quadrature inner product is the Euclidean one.
pub fn eigensystem_of_covariance(s: &DMatrix<f64>) -> Result<EigenSystem> {
    let d = s.nrows();
    let grid = Grid::midpoint(d);
    eigendecompose_kernel(&(s * d as f64), &grid, d)
}

/// Euclidean unit eigenvectors of an eigensystem built by
/// [`eigensystem_of_covariance`].
fn unit_vectors(es: &EigenSystem) -> DMatrix<f64> {
    let w = es.grid().weights();
    DMatrix::from_fn(es.grid().len(), es.dim(), |s, j| {
        es.eigenfunctions()[(s, j)] * w[s].sqrt()
    })
}

/// Cross-operators between the eigenbases of covariance blocks, built by
/// the same path the estimators use.
#[derive(Debug, Clone)]
pub struct BlockOperators {
    pub systems: Vec<EigenSystem>,
    pub m12: OperatorMatrix,
    pub m13: Option<OperatorMatrix>,
    pub m23: Option<OperatorMatrix>,
}

pub fn operators_from_cov_blocks(blocks: &CovBlocks, mode: Mode) -> Result<BlockOperators> {
    let e1 = eigensystem_of_covariance(&blocks.s11)?;
    let e2 = eigensystem_of_covariance(&blocks.s22)?;
    let (v1, v2) = (unit_vectors(&e1), unit_vectors(&e2));
    let m12 = build_cross_operator(&(v1.transpose() * &blocks.s12 * &v2), &e1, &e2, mode)?;
    match (&blocks.s33, &blocks.s13, &blocks.s23) {
        (Some(s33), Some(s13), Some(s23)) => {
            let e3 = eigensystem_of_covariance(s33)?;
            let v3 = unit_vectors(&e3);
            let m13 = build_cross_operator(&(v1.transpose() * s13 * &v3), &e1, &e3, mode)?;
            let m23 = build_cross_operator(&(v2.transpose() * s23 * &v3), &e2, &e3, mode)?;
            Ok(BlockOperators {
                systems: vec![e1, e2, e3],
                m12,
                m13: Some(m13),
                m23: Some(m23),
            })
        }
        _ => Ok(BlockOperators {
            systems: vec![e1, e2],
            m12,
            m13: None,
            m23: None,
        }),
    }
}

/// `⟨cos(π·), √2 sin(jπ·)⟩` on `[0, 1]`.
pub fn cos_sine_inner(j: usize) -> f64 {
    if j % 2 == 1 {
        0.0
    } else {
        let jf = j as f64;
        SQRT_2 * 2.0 * jf / (PI * (jf * jf - 1.0))
    }
}

fn sine_basis(grid: &Grid, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(grid.len(), m, |s, j| {
        SQRT_2 * ((j + 1) as f64 * PI * grid.points()[s]).sin()
    })
}

/// Loadings of the first `m` sine-basis scores of the two model processes
/// on the latent normals `(Z₁₁…Z₁K, Z₂₁…Z₂K, Z)`, with confounder weights
/// `beta`.
fn sine_score_loadings(k: usize, m: usize, beta: (f64, f64)) -> (DMatrix<f64>, DMatrix<f64>) {
    let latent = 2 * k + 1;
    let mut l1 = DMatrix::zeros(m, latent);
    let mut l2 = DMatrix::zeros(m, latent);
    for j in 0..m {
        let scale = (1.0 / (j + 1) as f64).sqrt();
        l1[(j, j)] = scale;
        if j == 0 {
            l2[(0, 0)] = 1.0 / SQRT_2;
            l2[(0, k)] = 1.0 / SQRT_2;
        } else {
            l2[(j, k + j)] = scale;
        }
        let g = cos_sine_inner(j + 1);
        l1[(j, 2 * k)] = -beta.0 * g;
        l2[(j, 2 * k)] = -beta.1 * g;
    }
    (l1, l2)
}

/// Galerkin eigensystem of a process whose scores on `basis` have
/// covariance `cov`.
fn galerkin_system(cov: &DMatrix<f64>, basis: &DMatrix<f64>, grid: &Grid) -> Result<(EigenSystem, DMatrix<f64>)> {
    let (values, vectors) = linalg::sym_eigen_desc(cov);
    let es = EigenSystem::new(values, basis * &vectors, grid.clone())?;
    let kept = vectors.columns(0, es.dim()).into_owned();
    Ok((es, kept))
}

/// Exact truncated cross-operators of the simulation models.
///
/// For the pair model the processes are represented in their sine
/// eigenbases. For the triple model, process 1 is the confounder
/// `Z cos(πt)` (one component) and processes 2 and 3 use the Galerkin
/// eigenbasis of their covariance restricted to the first `m` sine
/// functions, so the residuals after removing `Z` are exactly the
/// pair-model scores.
pub fn analytic_model_operators(cfg: &SimConfig, m: usize) -> Result<BlockOperators> {
    if m == 0 || m > cfg.kl_terms {
        return Err(Error::InvalidInput(format!(
            "harmonics must be in 1..={}, got {m}",
            cfg.kl_terms
        )));
    }
    let grid = Grid::midpoint(cfg.p);
    let basis = sine_basis(&grid, m);
    let k = cfg.kl_terms;
    let beta = match cfg.model {
        Model::CcaPair => (0.0, 0.0),
        Model::PccaTriple => cfg.beta,
    };
    let (l2, l3) = sine_score_loadings(k, m, beta);
    let (e2, v2) = galerkin_system(&(&l2 * l2.transpose()), &basis, &grid)?;
    let (e3, v3) = galerkin_system(&(&l3 * l3.transpose()), &basis, &grid)?;
    let raw23 = v2.transpose() * &l2 * l3.transpose() * &v3;
    let m23 = build_cross_operator(&raw23, &e2, &e3, Mode::Correlation)?;

    match cfg.model {
        Model::CcaPair => Ok(BlockOperators {
            systems: vec![e2, e3],
            m12: m23,
            m13: None,
            m23: None,
        }),
        Model::PccaTriple => {
            // confounder: score on √2 cos(πt) is Z / √2, variance 1/2
            let mut l1 = DMatrix::zeros(1, 2 * k + 1);
            l1[(0, 2 * k)] = 1.0 / SQRT_2;
            let cos_fn = DMatrix::from_fn(grid.len(), 1, |s, _| SQRT_2 * (PI * grid.points()[s]).cos());
            let e1 = EigenSystem::new(DVector::from_element(1, 0.5), cos_fn, grid.clone())?;
            let raw12 = &l1 * l2.transpose() * &v2;
            let raw13 = &l1 * l3.transpose() * &v3;
            let m12 = build_cross_operator(&raw12, &e1, &e2, Mode::Correlation)?;
            let m13 = build_cross_operator(&raw13, &e1, &e3, Mode::Correlation)?;
            Ok(BlockOperators {
                systems: vec![e1, e2, e3],
                m12,
                m13: Some(m13),
                m23: Some(m23),
            })
        }
    }
}
