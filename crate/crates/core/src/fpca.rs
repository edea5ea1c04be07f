//! Functional principal components of grid-sampled curves.
//!
//! The covariance kernel `K(s, t)` is estimated on the grid and the integral
//! eigenproblem `∫ K(s, t) φ(t) dt = λ φ(s)` is discretised with the grid's
//! quadrature weights `W`: we diagonalise `W^{1/2} K W^{1/2}` and map the
//! eigenvectors back through `W^{-1/2}`, which makes the eigenfunctions
//! orthonormal under the same quadrature.

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hilbert::{EigenSystem, RELATIVE_EIGEN_FLOOR};
use crate::linalg;

/// Default number of retained harmonics.
pub const DEFAULT_HARMONICS: usize = 9;

/// Default number of grid points.
pub const DEFAULT_GRID_POINTS: usize = 100;

const GRID_TOL: f64 = 1e-12;

/// Sampling points in `[0, 1]` with quadrature weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput("grid needs at least two points".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: weights.len(),
            });
        }
        if points.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::InvalidInput("grid points must lie in [0, 1]".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("grid points must be strictly increasing".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidInput("quadrature weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > GRID_TOL {
            return Err(Error::InvalidInput(format!(
                "quadrature weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { points, weights })
    }

    /// Midpoint rule: `t_k = (2k − 1) / (2p)`, weights `1/p`.
    pub fn midpoint(p: usize) -> Self {
        let pf = p as f64;
        Self {
            points: (1..=p).map(|k| (2 * k - 1) as f64 / (2.0 * pf)).collect(),
            weights: vec![1.0 / pf; p],
        }
    }

    /// Grid with weights inferred from the points.
    ///
    /// A midpoint grid (to 1e-12) gets exact `1/p` weights; otherwise each
    /// point receives the length of its Voronoi cell in `[0, 1]`.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        let p = points.len();
        if p < 2 {
            return Err(Error::InvalidInput("grid needs at least two points".into()));
        }
        let mid = Self::midpoint(p);
        if points
            .iter()
            .zip(&mid.points)
            .all(|(a, b)| (a - b).abs() <= GRID_TOL)
        {
            return Ok(mid);
        }
        let mut weights = Vec::with_capacity(p);
        for k in 0..p {
            let lo = if k == 0 { 0.0 } else { 0.5 * (points[k - 1] + points[k]) };
            let hi = if k + 1 == p { 1.0 } else { 0.5 * (points[k] + points[k + 1]) };
            weights.push(hi - lo);
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Self::new(points, weights)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same number of points, pointwise equal to 1e-12.
    pub fn matches(&self, other: &Grid) -> bool {
        self.len() == other.len()
            && self
                .points
                .iter()
                .zip(&other.points)
                .all(|(a, b)| (a - b).abs() <= GRID_TOL)
    }
}

/// `n` sample paths evaluated on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalDataset {
    /// n × p, one path per row.
    values: DMatrix<f64>,
    grid: Grid,
    centered: bool,
    mean_curve: Option<DVector<f64>>,
}

impl FunctionalDataset {
    pub fn new(values: DMatrix<f64>, grid: Grid) -> Result<Self> {
        if values.ncols() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.ncols(),
            });
        }
        if values.nrows() < 2 {
            return Err(Error::InsufficientSamples {
                required: 1,
                got: values.nrows(),
            });
        }
        Ok(Self {
            values,
            grid,
            centered: false,
            mean_curve: None,
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    /// Mean curve removed by [`center`], if any.
    pub fn mean_curve(&self) -> Option<&DVector<f64>> {
        self.mean_curve.as_ref()
    }

    /// Reorder the paths; `order[k]` is the source row of output row `k`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: order.len(),
            });
        }
        let mut values = DMatrix::zeros(self.n(), self.grid.len());
        for (dst, &src) in order.iter().enumerate() {
            values.set_row(dst, &self.values.row(src));
        }
        Ok(Self {
            values,
            ..self.clone()
        })
    }
}

/// Subtract the pointwise sample mean.
pub fn center(ds: &FunctionalDataset) -> FunctionalDataset {
    let n = ds.n() as f64;
    let mean = DVector::from_iterator(
        ds.grid.len(),
        ds.values.column_iter().map(|c| c.sum() / n),
    );
    let mut values = ds.values.clone();
    for mut row in values.row_iter_mut() {
        row -= mean.transpose();
    }
    let mean_curve = match &ds.mean_curve {
        Some(prev) => prev + &mean,
        None => mean,
    };
    FunctionalDataset {
        values,
        grid: ds.grid.clone(),
        centered: true,
        mean_curve: Some(mean_curve),
    }
}

/// Sample covariance kernel `K[s, t]` with divisor `n − 1`.
///
/// Uncentred input is centred first.
pub fn empirical_covariance(ds: &FunctionalDataset) -> Result<DMatrix<f64>> {
    if ds.n() < 2 {
        return Err(Error::InsufficientSamples {
            required: 1,
            got: ds.n(),
        });
    }
    let centered;
    let x = if ds.centered {
        &ds.values
    } else {
        centered = center(ds);
        &centered.values
    };
    let k = x.transpose() * x / (ds.n() as f64 - 1.0);
    Ok(linalg::symmetrize(&k))
}

/// Solve the quadrature-discretised kernel eigenproblem and keep `m`
/// components.
///
/// Components whose eigenvalue falls below `1e-10 · λ̂₁` are not retained
/// even if requested (a warning is logged); a numerically zero kernel is an
/// error.
pub fn eigendecompose_kernel(k: &DMatrix<f64>, grid: &Grid, m: usize) -> Result<EigenSystem> {
    let p = grid.len();
    if k.nrows() != p || k.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: k.nrows(),
        });
    }
    if m == 0 || m > p {
        return Err(Error::InvalidInput(format!(
            "number of components must be in 1..={p}, got {m}"
        )));
    }
    let sqrt_w = DVector::from_iterator(p, grid.weights().iter().map(|w| w.sqrt()));
    let weighted = DMatrix::from_fn(p, p, |s, t| sqrt_w[s] * k[(s, t)] * sqrt_w[t]);
    let (values, vectors) = linalg::sym_eigen_desc(&weighted);

    let top = values[0];
    if !(top > 0.0) {
        return Err(Error::RankTooLow {
            requested: m,
            rank: 0,
        });
    }
    let rank = values
        .iter()
        .take_while(|&&v| v >= RELATIVE_EIGEN_FLOOR * top)
        .count();
    let keep = m.min(rank);
    if keep < m {
        warn!("requested {m} components but the kernel has numerical rank {rank}; keeping {keep}");
    }

    let mut functions = DMatrix::zeros(p, keep);
    for j in 0..keep {
        let mut col: Vec<f64> = (0..p).map(|s| vectors[(s, j)] / sqrt_w[s]).collect();
        linalg::fix_sign(&mut col);
        functions.set_column(j, &DVector::from_vec(col));
    }
    EigenSystem::new(values.rows(0, keep).into_owned(), functions, grid.clone())
}

/// Score matrix `W[k, j] = Σ_s w_s x_k(s) φ_j(s)`.
pub fn compute_scores(ds: &FunctionalDataset, es: &EigenSystem) -> Result<DMatrix<f64>> {
    if !ds.grid.matches(es.grid()) {
        return Err(Error::GridMismatch);
    }
    let w = DVector::from_column_slice(ds.grid.weights());
    let weighted = DMatrix::from_fn(es.grid().len(), es.dim(), |s, j| {
        w[s] * es.eigenfunctions()[(s, j)]
    });
    Ok(&ds.values * weighted)
}

/// Retained eigensystem, scores and mean curve of one dataset.
#[derive(Debug, Clone)]
pub struct FpcaResult {
    pub eigensystem: EigenSystem,
    /// n × m.
    pub scores: DMatrix<f64>,
    pub mean_curve: DVector<f64>,
}

/// Centre, estimate the kernel, eigendecompose and score.
pub fn fpca(ds: &FunctionalDataset, m: usize) -> Result<FpcaResult> {
    let centered = center(ds);
    let k = empirical_covariance(&centered)?;
    let eigensystem = eigendecompose_kernel(&k, centered.grid(), m)?;
    let scores = compute_scores(&centered, &eigensystem)?;
    Ok(FpcaResult {
        eigensystem,
        scores,
        mean_curve: centered.mean_curve.expect("centred dataset carries its mean"),
    })
}
