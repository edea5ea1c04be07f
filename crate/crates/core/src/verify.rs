//! Randomised check of the operator algebra against independent references.
//!
//! Every trial draws fresh block operators from its own seeded stream and
//! records, per identity, the largest error seen. Closed forms are compared
//! with dense LU inverses, normal-equation projections and the classical
//! Hotelling and Roy computations.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::Result;
use crate::hilbert::{HsVector, Mode, DEFAULT_ASSUMPTION_TOL};
use crate::instances::{random_cov_blocks, random_pair, random_triple};
use crate::linalg;
use crate::operator::{
    bstarb_2, bstarb_2_matrix, bstarb_3, bstarb_3_matrix, cca_from_operators, gram, hq_inner,
    pcca_from_operators, project_l1_m2, project_m2_components, project_m3_components, q2_inverse,
    q3_inverse, q_apply, sunder_decompose_hq, BlockOperator2, BlockOperator3, HQElement,
    QOperator,
};
use crate::oracle::{hotelling_cca, operators_from_cov_blocks, roy_pcca};
use crate::rng::NormalStream;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub trials: usize,
    /// Largest block dimension.
    pub dim: usize,
    pub seed: u64,
    /// Tolerance for exact matrix identities.
    pub tol: f64,
    /// Tolerance for comparisons against numeric oracles.
    pub oracle_tol: f64,
    /// Flip the sign of an off-diagonal block of the pair inverse inside the
    /// inverse identity check (negative control).
    pub inject_fault: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            trials: 200,
            dim: 8,
            seed: 0,
            tol: 1e-9,
            oracle_tol: 1e-8,
            inject_fault: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Message of the first failing trial, if any.
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

struct Check {
    name: &'static str,
    tolerance: f64,
    max_error: f64,
    detail: Option<String>,
}

impl Check {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            tolerance,
            max_error: 0.0,
            detail: None,
        }
    }

    fn record(&mut self, trial: usize, outcome: Result<f64>) {
        match outcome {
            Ok(err) if err.is_finite() => {
                if err > self.tolerance && self.detail.is_none() {
                    self.detail = Some(format!("trial {trial}: error {err:e}"));
                }
                self.max_error = self.max_error.max(err);
            }
            Ok(err) => {
                self.max_error = f64::INFINITY;
                self.detail.get_or_insert(format!("trial {trial}: error {err}"));
            }
            Err(e) => {
                self.max_error = f64::INFINITY;
                self.detail.get_or_insert(format!("trial {trial}: {e}"));
            }
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name.to_string(),
            max_error: self.max_error,
            tolerance: self.tolerance,
            passed: self.max_error <= self.tolerance,
            detail: self.detail,
        }
    }
}

fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    linalg::max_abs(&(a - b))
}

fn vec_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax()
}

fn identity_error(q: &DMatrix<f64>, inv: &DMatrix<f64>) -> f64 {
    let n = q.nrows();
    let id = DMatrix::identity(n, n);
    max_diff(&(q * inv), &id).max(max_diff(&(inv * q), &id))
}

fn random_vector(s: &mut NormalStream, dim: usize) -> DVector<f64> {
    let v = DVector::from_fn(dim, |_, _| s.standard_normal());
    let n = v.norm();
    if n > 0.0 {
        v / n
    } else {
        v
    }
}

fn random_element(s: &mut NormalStream, q: &dyn QOperator) -> Result<HQElement> {
    HQElement::from_stacked(&random_vector(s, q.total_dim()), q)
}

/// Real parts of the eigenvalues of a matrix similar to a symmetric one,
/// sorted non-increasing.
fn real_spectrum(a: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = a.complex_eigenvalues().iter().map(|z| z.re).collect();
    v.sort_by(|x, y| y.total_cmp(x));
    v
}

fn spectral_mapping_error(alpha2: &[f64], rho: &[f64]) -> f64 {
    alpha2
        .iter()
        .zip(rho)
        .map(|(a, r)| {
            let expected = r * r / (1.0 - r * r);
            (a - expected).abs() / (1.0 + expected)
        })
        .fold(0.0, f64::max)
}

struct Suite {
    q2_inverse: Check,
    q3_inverse: Check,
    inverse_vs_lu: Check,
    congruence: Check,
    projection_pair: Check,
    projection_m2: Check,
    projection_m3: Check,
    bstarb_pair: Check,
    bstarb_triple: Check,
    spectral_mapping: Check,
    sunder: Check,
    residual_cross: Check,
    hotelling: Check,
    roy: Check,
}

impl Suite {
    fn new(cfg: &VerifyConfig) -> Self {
        let (t, o) = (cfg.tol, cfg.oracle_tol);
        Self {
            q2_inverse: Check::new("pair inverse identity", t),
            q3_inverse: Check::new("triple inverse identity", t),
            inverse_vs_lu: Check::new("closed-form inverse vs LU", t),
            congruence: Check::new("congruence inner product", t),
            projection_pair: Check::new("pair projection vs Gram oracle", o),
            projection_m2: Check::new("triple M2 projection vs Gram oracle", o),
            projection_m3: Check::new("triple M3 projection vs Gram oracle", o),
            bstarb_pair: Check::new("pair B*B vs projection oracle", o),
            bstarb_triple: Check::new("triple B*B vs projection oracle", o),
            spectral_mapping: Check::new("spectral mapping alpha^2 = rho^2/(1-rho^2)", o),
            sunder: Check::new("Sunder block orthogonality", t),
            // error is the largest norm seen; the bound is strict
            residual_cross: Check::new("residual cross-operator norm < 1", 1.0 - f64::EPSILON),
            hotelling: Check::new("pipeline CCA vs Hotelling", o),
            roy: Check::new("operator PCCA vs Roy", o),
        }
    }

    fn finish(self) -> Vec<CheckResult> {
        [
            self.q2_inverse,
            self.q3_inverse,
            self.inverse_vs_lu,
            self.congruence,
            self.projection_pair,
            self.projection_m2,
            self.projection_m3,
            self.bstarb_pair,
            self.bstarb_triple,
            self.spectral_mapping,
            self.sunder,
            self.residual_cross,
            self.hotelling,
            self.roy,
        ]
        .into_iter()
        .map(Check::finish)
        .collect()
    }
}

const TOL: f64 = DEFAULT_ASSUMPTION_TOL;

fn pair_checks(suite: &mut Suite, trial: usize, s: &mut NormalStream, q: &BlockOperator2, fault: bool) {
    let (m1, m2) = (q.c12().nrows(), q.c12().ncols());
    let full = q.assemble();

    suite.q2_inverse.record(
        trial,
        q2_inverse(q, TOL).map(|mut inv| {
            if fault {
                let block = -inv.view((0, m1), (m1, m2)).into_owned();
                inv.view_mut((0, m1), (m1, m2)).copy_from(&block);
            }
            identity_error(&full, &inv)
        }),
    );
    suite.inverse_vs_lu.record(
        trial,
        q2_inverse(q, TOL).and_then(|inv| Ok(max_diff(&inv, &gram::dense_metric(q)?))),
    );

    suite.congruence.record(trial, (|| {
        let h = random_element(s, q)?;
        let h2 = random_element(s, q)?;
        let lhs = hq_inner(&q_apply(q, &h)?, &q_apply(q, &h2)?, q, TOL)?;
        let rhs = h.stacked().dot(&(&full * h2.stacked()));
        Ok((lhs - rhs).abs())
    })());

    let f2 = HsVector::new(random_vector(s, m2), q.c12().domain);
    suite.projection_pair.record(trial, (|| {
        let (l1, l2) = project_l1_m2(&f2, q)?;
        let x = q_apply(q, &HQElement::new(vec![HsVector::zeros(m1, q.c12().codomain), f2.clone()]))?;
        let parts = gram::l_components(q, &x.stacked())?;
        Ok(vec_diff(&parts[0], &l1.stacked()).max(vec_diff(&parts[1], &l2.stacked())))
    })());

    suite.bstarb_pair.record(trial, (|| {
        let closed = bstarb_2(&f2, q, TOL)?;
        let h = HQElement::new(vec![HsVector::zeros(m1, q.c12().codomain), f2.clone()]);
        let numeric = gram::bstarb_numeric(q, &h.stacked())?;
        let expected = HQElement::new(vec![HsVector::zeros(m1, q.c12().codomain), closed]);
        Ok(vec_diff(&numeric, &expected.stacked()))
    })());

    suite.spectral_mapping.record(trial, (|| {
        let alpha2 = real_spectrum(&bstarb_2_matrix(q, TOL)?);
        let rho: Vec<f64> = cca_from_operators(q.c12(), TOL)?.iter().map(|p| p.rho).collect();
        // B*B acts on H(S₂); its spectrum pads the shorter list with zeros
        let mut rho_full = rho.clone();
        rho_full.resize(alpha2.len(), 0.0);
        Ok(spectral_mapping_error(&alpha2, &rho_full))
    })());

    suite.sunder.record(trial, sunder_error(q));
}

fn sunder_error(q: &dyn QOperator) -> Result<f64> {
    let bases = sunder_decompose_hq(q, TOL)?;
    let metric = q.inverse(TOL)?;
    let all = bases.iter().fold(DMatrix::zeros(q.total_dim(), 0), |acc: DMatrix<f64>, b| {
        let mut out = DMatrix::zeros(acc.nrows(), acc.ncols() + b.ncols());
        out.columns_mut(0, acc.ncols()).copy_from(&acc);
        out.columns_mut(acc.ncols(), b.ncols()).copy_from(b);
        out
    });
    let g = all.transpose() * metric * &all;
    let n = g.nrows();
    Ok(max_diff(&g, &DMatrix::identity(n, n)))
}

fn triple_checks(suite: &mut Suite, trial: usize, s: &mut NormalStream, q: &BlockOperator3) {
    let (m2, m3) = (q.c12().ncols(), q.c13().ncols());
    let bases = q.bases();
    let full = q.assemble();

    suite.q3_inverse.record(trial, q3_inverse(q, TOL).map(|inv| identity_error(&full, &inv)));
    suite.inverse_vs_lu.record(
        trial,
        q3_inverse(q, TOL).and_then(|inv| Ok(max_diff(&inv, &gram::dense_metric(q)?))),
    );
    suite.congruence.record(trial, (|| {
        let h = random_element(s, q)?;
        let h2 = random_element(s, q)?;
        let lhs = hq_inner(&q_apply(q, &h)?, &q_apply(q, &h2)?, q, TOL)?;
        let rhs = h.stacked().dot(&(&full * h2.stacked()));
        Ok((lhs - rhs).abs())
    })());

    let f2 = HsVector::new(random_vector(s, m2), bases[1]);
    let f3 = HsVector::new(random_vector(s, m3), bases[2]);
    let embed = |slot: usize, f: &HsVector| {
        let mut h = HQElement::zeros(q);
        h.parts[slot] = f.clone();
        h
    };

    suite.projection_m2.record(trial, (|| {
        let (l1, l2) = project_m2_components(&f2, q)?;
        let x = q_apply(q, &embed(1, &f2))?;
        let parts = gram::l_components(q, &x.stacked())?;
        Ok(vec_diff(&parts[0], &l1.stacked())
            .max(vec_diff(&parts[1], &l2.stacked()))
            .max(parts[2].amax()))
    })());

    suite.projection_m3.record(trial, (|| {
        let closed = project_m3_components(&f3, q, TOL)?;
        let x = q_apply(q, &embed(2, &f3))?;
        let parts = gram::l_components(q, &x.stacked())?;
        Ok(parts
            .iter()
            .zip(closed.iter())
            .map(|(p, c)| vec_diff(p, &c.stacked()))
            .fold(0.0, f64::max))
    })());

    suite.bstarb_triple.record(trial, (|| {
        let closed = bstarb_3(&f3, q, TOL)?;
        let numeric = gram::bstarb_numeric(q, &embed(2, &f3).stacked())?;
        Ok(vec_diff(&numeric, &embed(2, &closed).stacked()))
    })());

    suite.spectral_mapping.record(trial, (|| {
        let alpha2 = real_spectrum(&bstarb_3_matrix(q, TOL)?);
        let mut rho: Vec<f64> = pcca_from_operators(q.c12(), q.c13(), q.c23(), TOL)?
            .iter()
            .map(|p| p.rho)
            .collect();
        rho.resize(alpha2.len(), 0.0);
        Ok(spectral_mapping_error(&alpha2, &rho))
    })());

    suite.sunder.record(trial, sunder_error(q));
    suite.residual_cross.record(trial, q.residual_cross_norm());
}

fn oracle_checks(suite: &mut Suite, trial: usize, s: &mut NormalStream, dims: [usize; 3]) {
    let blocks = random_cov_blocks(s, &dims[..2]);
    suite.hotelling.record(trial, (|| {
        let ops = operators_from_cov_blocks(&blocks, Mode::Correlation)?;
        let ours = cca_from_operators(&ops.m12, TOL)?;
        let oracle = hotelling_cca(&blocks)?;
        Ok(ours
            .iter()
            .zip(oracle.correlations.iter())
            .map(|(p, r)| (p.rho - r).abs())
            .fold(0.0, f64::max))
    })());

    let blocks = random_cov_blocks(s, &dims);
    suite.roy.record(trial, (|| {
        let ops = operators_from_cov_blocks(&blocks, Mode::Correlation)?;
        let m13 = ops.m13.as_ref().expect("three blocks");
        let m23 = ops.m23.as_ref().expect("three blocks");
        let ours = pcca_from_operators(&ops.m12, m13, m23, TOL)?;
        let oracle = roy_pcca(&blocks)?;
        Ok(ours
            .iter()
            .zip(oracle.correlations.iter())
            .map(|(p, r)| (p.rho - r).abs())
            .fold(0.0, f64::max))
    })());
}

/// Run the suite. Trial `t` uses stream `(seed, t)` and block dimensions
/// drawn uniformly from `1..=dim`.
pub fn run(cfg: &VerifyConfig) -> VerifyReport {
    let mut suite = Suite::new(cfg);
    let dim = cfg.dim.max(1);
    for trial in 0..cfg.trials {
        let mut s = NormalStream::new(cfg.seed, trial as u64);
        let dims = [s.int_in(1, dim), s.int_in(1, dim), s.int_in(1, dim)];
        let pair = random_pair(&mut s, dims[0], dims[1]);
        pair_checks(&mut suite, trial, &mut s, &pair, cfg.inject_fault);
        let triple = random_triple(&mut s, dims[0], dims[1], dims[2]);
        triple_checks(&mut suite, trial, &mut s, &triple);
        oracle_checks(&mut suite, trial, &mut s, dims);
    }
    let checks = suite.finish();
    let passed = checks.iter().all(|c| c.passed);
    VerifyReport { checks, passed }
}
