//! Functional canonical and partial canonical correlation analysis.
//!
//! The crate covers the full path from grid-sampled curves to (partial)
//! canonical correlations:
//!
//! - [`fpca`]: quadrature-discretised functional principal components;
//! - [`hilbert`]: orthonormal coordinates of the spaces `H(S)` and the
//!   cross-operators between them;
//! - [`operator`]: the block `Q` operators, their inverses, projections
//!   and `B*B` operators;
//! - [`estimators`]: sample CCA and PCCA of functional datasets;
//! - [`simulate`]: seeded Karhunen–Loève simulation of the test models;
//! - [`oracle`]: classical finite-dimensional references and the exact
//!   operators of the simulation models;
//! - [`verify`]: a randomised identity suite for the operator algebra.

pub mod error;
pub mod estimators;
pub mod fpca;
pub mod hilbert;
pub mod instances;
pub mod linalg;
pub mod operator;
pub mod oracle;
pub mod rng;
pub mod simulate;
pub mod verify;

pub use error::{Error, Result};
pub use estimators::{estimate_cca, estimate_pcca, CcaEstimate, PccaEstimate};
pub use fpca::{FunctionalDataset, Grid};
pub use hilbert::{EigenSystem, HsVector, Mode, OperatorMatrix};
pub use operator::{BlockOperator2, BlockOperator3, CanonicalPair, CanonicalSummary};
pub use simulate::{Model, SimConfig};
