//! Seeded Karhunen–Loève simulation of the test processes.
//!
//! Pair model (`t ∈ [0, 1]`, all `Z` i.i.d. standard normal):
//!
//! ```text
//! X₁(t) = Σ_{j≤K} j^{-1/2} Z₁ⱼ √2 sin(jπt)
//! X₂(t) = (Z₁₁ + Z₂₁) sin(πt) + Σ_{2≤j≤K} j^{-1/2} Z₂ⱼ √2 sin(jπt)
//! ```
//!
//! The triple model adds a confounder `Z cos(πt)`: the conditioning dataset
//! is the confounder itself and the other two are `X₁ − β₁ Z cos(πt)` and
//! `X₂ − β₂ Z cos(πt)`.
//!
//! Draw order within a stream is fixed: all `Z₁` (row by row), then all
//! `Z₂`, then the `n` confounder draws. The pair part of a triple is
//! therefore bit-identical to the pair model with the same seed.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fpca::{FunctionalDataset, Grid, DEFAULT_GRID_POINTS};
use crate::linalg;
use crate::rng::NormalStream;

pub const DEFAULT_KL_TERMS: usize = 20;
pub const DEFAULT_BETA: (f64, f64) = (1.0, 2.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    CcaPair,
    PccaTriple,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::CcaPair => f.write_str("cca-pair"),
            Model::PccaTriple => f.write_str("pcca-triple"),
        }
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cca-pair" | "cca" => Ok(Model::CcaPair),
            "pcca-triple" | "pcca" => Ok(Model::PccaTriple),
            other => Err(Error::InvalidInput(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub n: usize,
    /// Grid size.
    pub p: usize,
    /// Truncation `K` of the expansions.
    pub kl_terms: usize,
    pub seed: u64,
    /// Stream index within the seed (the replication number).
    pub replication: u64,
    pub model: Model,
    /// Confounder loadings for the second and third datasets.
    pub beta: (f64, f64),
}

impl SimConfig {
    pub fn cca_pair(n: usize, seed: u64) -> Self {
        Self {
            n,
            p: DEFAULT_GRID_POINTS,
            kl_terms: DEFAULT_KL_TERMS,
            seed,
            replication: 0,
            model: Model::CcaPair,
            beta: DEFAULT_BETA,
        }
    }

    pub fn pcca_triple(n: usize, seed: u64) -> Self {
        Self {
            model: Model::PccaTriple,
            ..Self::cca_pair(n, seed)
        }
    }

    pub fn with_replication(&self, replication: u64) -> Self {
        Self {
            replication,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidInput(format!("n must be at least 2, got {}", self.n)));
        }
        if self.p < 2 {
            return Err(Error::InvalidInput(format!("grid needs at least 2 points, got {}", self.p)));
        }
        if self.kl_terms < 1 {
            return Err(Error::InvalidInput("kl_terms must be at least 1".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        Grid::midpoint(self.p)
    }
}

/// `√2 sin(jπt)` for `j = 1..=k` as columns.
pub fn sine_functions(grid: &Grid, k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(grid.len(), k, |s, j| {
        SQRT_2 * ((j + 1) as f64 * PI * grid.points()[s]).sin()
    })
}

fn model_factor(k: usize) -> DMatrix<f64> {
    let cov = DMatrix::from_diagonal(&DVector::from_iterator(k, (1..=k).map(|j| 1.0 / j as f64)));
    linalg::psd_factor(&cov).expect("diagonal covariance is PSD")
}

fn normals(stream: &mut NormalStream, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut z = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            z[(r, c)] = stream.standard_normal();
        }
    }
    z
}

/// Paths `Σ_j c_kj φ_j(t)` with coefficient rows `c_k = L z_k`.
fn kl_paths(
    stream: &mut NormalStream,
    functions: &DMatrix<f64>,
    factor: &DMatrix<f64>,
    n: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let z = normals(stream, n, factor.ncols());
    let coeffs = &z * factor.transpose();
    (&coeffs * functions.transpose(), z)
}

/// Generic KL generator: coefficient vectors `N(0, coeff_cov)` on the
/// given functions (one per column, sampled on `grid`).
pub fn simulate_kl(
    functions: &DMatrix<f64>,
    grid: &Grid,
    coeff_cov: &DMatrix<f64>,
    n: usize,
    seed: u64,
    replication: u64,
) -> Result<FunctionalDataset> {
    if functions.nrows() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: functions.nrows(),
        });
    }
    if coeff_cov.nrows() != functions.ncols() {
        return Err(Error::DimensionMismatch {
            expected: functions.ncols(),
            got: coeff_cov.nrows(),
        });
    }
    let factor = linalg::psd_factor(coeff_cov)?;
    let mut stream = NormalStream::new(seed, replication);
    let (paths, _) = kl_paths(&mut stream, functions, &factor, n);
    FunctionalDataset::new(paths, grid.clone())
}

struct PairDraws {
    x1: DMatrix<f64>,
    x2: DMatrix<f64>,
    stream: NormalStream,
}

fn draw_pair(cfg: &SimConfig) -> Result<PairDraws> {
    cfg.validate()?;
    let grid = cfg.grid();
    let k = cfg.kl_terms;
    let functions = sine_functions(&grid, k);
    let factor = model_factor(k);
    let mut stream = NormalStream::new(cfg.seed, cfg.replication);

    let (x1, z1) = kl_paths(&mut stream, &functions, &factor, cfg.n);
    let z2 = normals(&mut stream, cfg.n, k);
    let mut c2 = &z2 * factor.transpose();
    for r in 0..cfg.n {
        c2[(r, 0)] = (z1[(r, 0)] + z2[(r, 0)]) / SQRT_2;
    }
    let x2 = &c2 * functions.transpose();
    Ok(PairDraws { x1, x2, stream })
}

/// The CCA pair model.
pub fn simulate_cca_pair(cfg: &SimConfig) -> Result<(FunctionalDataset, FunctionalDataset)> {
    let d = draw_pair(cfg)?;
    let grid = cfg.grid();
    Ok((
        FunctionalDataset::new(d.x1, grid.clone())?,
        FunctionalDataset::new(d.x2, grid)?,
    ))
}

/// The confounded triple: `(conditioning, X₁ − β₁ Z cos, X₂ − β₂ Z cos)`.
pub fn simulate_pcca_triple(
    cfg: &SimConfig,
) -> Result<(FunctionalDataset, FunctionalDataset, FunctionalDataset)> {
    let PairDraws {
        mut x1,
        mut x2,
        mut stream,
    } = draw_pair(cfg)?;
    let grid = cfg.grid();
    let cos = DVector::from_iterator(grid.len(), grid.points().iter().map(|t| (PI * t).cos()));
    let z: Vec<f64> = (0..cfg.n).map(|_| stream.standard_normal()).collect();
    let cond = DMatrix::from_fn(cfg.n, grid.len(), |r, s| z[r] * cos[s]);
    let (b1, b2) = cfg.beta;
    for r in 0..cfg.n {
        for s in 0..grid.len() {
            x1[(r, s)] -= b1 * cond[(r, s)];
            x2[(r, s)] -= b2 * cond[(r, s)];
        }
    }
    Ok((
        FunctionalDataset::new(cond, grid.clone())?,
        FunctionalDataset::new(x1, grid.clone())?,
        FunctionalDataset::new(x2, grid)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inner(ds: &FunctionalDataset, f: &DVector<f64>) -> DVector<f64> {
        let w = ds.grid().weights()[0];
        ds.values() * f * w
    }

    fn sample_cov(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.mean(), b.mean());
        a.iter().zip(b.iter()).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0)
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = SimConfig::cca_pair(5, 3);
        let a = simulate_cca_pair(&cfg).unwrap();
        let b = simulate_cca_pair(&cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate_cca_pair(&cfg.with_replication(1)).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn population_scores_covariance() {
        let cfg = SimConfig::cca_pair(10_000, 17);
        let (x1, x2) = simulate_cca_pair(&cfg).unwrap();
        let basis = sine_functions(x1.grid(), 5);
        let s11 = inner(&x1, &basis.column(0).into_owned());
        let s21 = inner(&x2, &basis.column(0).into_owned());
        let c = sample_cov(&s11, &s21);
        assert!((c - 1.0 / SQRT_2).abs() < 0.04, "cov {c}");
        for j in 0..5 {
            let sj = inner(&x1, &basis.column(j).into_owned());
            let v = sample_cov(&sj, &sj);
            let target = 1.0 / (j + 1) as f64;
            assert!((v - target).abs() < 0.15 * target, "j = {j}: {v}");
        }
    }

    #[test]
    fn zero_mean_envelope() {
        let cfg = SimConfig::cca_pair(10_000, 2);
        let (x1, _) = simulate_cca_pair(&cfg).unwrap();
        let n = cfg.n as f64;
        for col in x1.values().column_iter() {
            let mean = col.mean();
            let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!(mean.abs() <= 4.0 * sd / n.sqrt());
        }
    }

    #[test]
    fn triple_without_confounding_matches_pair() {
        let mut cfg = SimConfig::pcca_triple(6, 9);
        cfg.beta = (0.0, 0.0);
        let (_, a, b) = simulate_pcca_triple(&cfg).unwrap();
        let (x1, x2) = simulate_cca_pair(&SimConfig::cca_pair(6, 9)).unwrap();
        assert_eq!(a, x1);
        assert_eq!(b, x2);
    }

    #[test]
    fn confounder_loading() {
        let cfg = SimConfig::pcca_triple(10_000, 4);
        let (cond, x2, _) = simulate_pcca_triple(&cfg).unwrap();
        let grid = cond.grid();
        let cos = DVector::from_iterator(grid.len(), grid.points().iter().map(|t| (PI * t).cos()));
        // Z recovered from the conditioning curves: ⟨Z cos, cos⟩ / ‖cos‖² with ‖cos‖² = 1/2
        let z = inner(&cond, &cos) * 2.0;
        let proj = inner(&x2, &cos);
        let c = sample_cov(&proj, &z);
        let target = -cfg.beta.0 * 0.5;
        assert!((c - target).abs() < 0.15 * target.abs(), "cov {c}");
    }

    #[test]
    fn simulate_kl_reproduces_pair_first_output() {
        let cfg = SimConfig::cca_pair(7, 12);
        let grid = cfg.grid();
        let k = cfg.kl_terms;
        let cov = DMatrix::from_diagonal(&DVector::from_iterator(k, (1..=k).map(|j| 1.0 / j as f64)));
        let ds = simulate_kl(&sine_functions(&grid, k), &grid, &cov, cfg.n, cfg.seed, 0).unwrap();
        let (x1, _) = simulate_cca_pair(&cfg).unwrap();
        assert_eq!(ds, x1);
    }

    #[test]
    fn simulate_kl_zero_and_diagonal() {
        let grid = Grid::midpoint(16);
        let f = sine_functions(&grid, 3);
        let zero = simulate_kl(&f, &grid, &DMatrix::zeros(3, 3), 4, 1, 0).unwrap();
        assert_eq!(zero.values(), &DMatrix::zeros(4, 16));

        let n = 20_000;
        let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0, 0.5]));
        let ds = simulate_kl(&f, &grid, &cov, n, 8, 0).unwrap();
        let scores = ds.values() * &f / 16.0;
        let bound = 4.0 / (n as f64).sqrt();
        for i in 0..3 {
            for j in 0..3 {
                let a = scores.column(i).into_owned();
                let b = scores.column(j).into_owned();
                let c = sample_cov(&a, &b);
                let expected = if i == j { cov[(i, i)] } else { 0.0 };
                let scale = (cov[(i, i)] * cov[(j, j)]).sqrt();
                assert!((c - expected).abs() < bound * scale * 2.0, "({i},{j}) {c}");
            }
        }
    }

    #[test]
    fn simulate_kl_rejects_indefinite() {
        let grid = Grid::midpoint(8);
        let f = sine_functions(&grid, 2);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            simulate_kl(&f, &grid, &bad, 3, 1, 0),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimConfig::cca_pair(1, 0);
        assert!(cfg.validate().is_err());
        cfg.n = 3;
        cfg.kl_terms = 0;
        assert!(cfg.validate().is_err());
    }
}
