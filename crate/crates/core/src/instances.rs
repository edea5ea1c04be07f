//! Random problem instances for property checks and the `verify` suite.

use nalgebra::DMatrix;

use crate::hilbert::{BasisId, Mode, OperatorMatrix};
use crate::linalg;
use crate::operator::{BlockOperator2, BlockOperator3};
use crate::oracle::CovBlocks;
use crate::rng::NormalStream;

pub const BASIS_1: BasisId = BasisId(1);
pub const BASIS_2: BasisId = BasisId(2);
pub const BASIS_3: BasisId = BasisId(3);

pub fn gaussian_matrix(s: &mut NormalStream, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| s.standard_normal())
}

/// Random symmetric positive definite matrix `A Aᵀ / k + 0.1 I`.
pub fn random_spd(s: &mut NormalStream, dim: usize) -> DMatrix<f64> {
    let k = dim + 2;
    let a = gaussian_matrix(s, dim, k);
    linalg::symmetrize(&(&a * a.transpose() / k as f64 + DMatrix::identity(dim, dim) * 0.1))
}

/// Random covariance blocks for processes of the given dimensions.
pub fn random_cov_blocks(s: &mut NormalStream, dims: &[usize]) -> CovBlocks {
    let full = random_spd(s, dims.iter().sum());
    CovBlocks::from_full(&full, dims).expect("dimensions add up")
}

/// Whitened block `Σᵢᵢ^{-1/2} Σᵢⱼ Σⱼⱼ^{-1/2}`.
fn whiten(full: &DMatrix<f64>, dims: &[usize], i: usize, j: usize) -> DMatrix<f64> {
    let off = |k: usize| dims[..k].iter().sum::<usize>();
    let block = |a: usize, b: usize| full.view((off(a), off(b)), (dims[a], dims[b])).into_owned();
    let wi = linalg::sym_inv_sqrt(&block(i, i)).expect("positive definite");
    let wj = linalg::sym_inv_sqrt(&block(j, j)).expect("positive definite");
    wi * block(i, j) * wj
}

/// Random `Q₂` whose cross-block comes from a positive definite joint
/// covariance, so Assumption 1 holds.
pub fn random_pair(s: &mut NormalStream, m1: usize, m2: usize) -> BlockOperator2 {
    let dims = [m1, m2];
    let full = random_spd(s, m1 + m2);
    let m12 = OperatorMatrix::new(whiten(&full, &dims, 0, 1), BASIS_1, BASIS_2, Mode::Correlation);
    BlockOperator2::new(m12).expect("correlation mode")
}

/// Random `Q₃` from a positive definite joint covariance.
pub fn random_triple(s: &mut NormalStream, m1: usize, m2: usize, m3: usize) -> BlockOperator3 {
    let dims = [m1, m2, m3];
    let full = random_spd(s, m1 + m2 + m3);
    let op = |i: usize, j: usize, a: BasisId, b: BasisId| {
        OperatorMatrix::new(whiten(&full, &dims, i, j), a, b, Mode::Correlation)
    };
    BlockOperator3::new(
        op(0, 1, BASIS_1, BASIS_2),
        op(0, 2, BASIS_1, BASIS_3),
        op(1, 2, BASIS_2, BASIS_3),
    )
    .expect("consistent bases")
}

/// Random `rows × cols` matrix rescaled to spectral norm `norm`.
pub fn random_contraction(s: &mut NormalStream, rows: usize, cols: usize, norm: f64) -> DMatrix<f64> {
    let a = gaussian_matrix(s, rows, cols);
    let n = linalg::spectral_norm(&a);
    if n > 0.0 {
        a * (norm / n)
    } else {
        a
    }
}
