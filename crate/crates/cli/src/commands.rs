//! Subcommand implementations and their JSON reports.

use std::path::PathBuf;
use std::time::Instant;

use fcca_core::estimators::{estimate_cca, estimate_pcca_with, CcaEstimate};
use fcca_core::fpca::{fpca, FunctionalDataset};
use fcca_core::simulate::{simulate_cca_pair, simulate_pcca_triple};
use fcca_core::verify::{self, CheckResult, VerifyConfig};
use fcca_core::{Mode, Model, SimConfig};
use log::info;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{CcaArgs, FpcaArgs, MonteCarloArgs, OutputArgs, PccaArgs, SimulateArgs, VerifyArgs};
use crate::error::{CliError, EXIT_VERIFY_FAILED};
use crate::io::{read_dataset, write_bytes, write_dataset};
use crate::json::{self, SCHEMA};

fn columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn emit<T: Serialize>(report: &T, output: &OutputArgs) -> Result<(), CliError> {
    let bytes = json::to_bytes(report);
    if let Some(path) = &output.out {
        write_bytes(path, &bytes)?;
        info!("wrote {}", path.display());
    }
    if output.json || output.out.is_none() {
        use std::io::Write;
        std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| CliError::io("<stdout>", e))?;
    }
    Ok(())
}

/// Written file names, in process order.
pub fn simulate(args: &SimulateArgs) -> Result<Vec<PathBuf>, CliError> {
    let cfg = SimConfig {
        n: args.n,
        p: args.grid_points,
        kl_terms: args.kl_terms,
        seed: args.seed,
        replication: args.replication,
        model: args.model,
        beta: (args.beta1, args.beta2),
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let datasets = match args.model {
        Model::CcaPair => {
            let (a, b) = simulate_cca_pair(&cfg)?;
            vec![a, b]
        }
        Model::PccaTriple => {
            let (c, a, b) = simulate_pcca_triple(&cfg)?;
            vec![c, a, b]
        }
    };
    let mut written = Vec::new();
    for (k, ds) in datasets.iter().enumerate() {
        let path = args.out.join(format!("x{}.csv", k + 1));
        write_dataset(&path, ds)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Serialize)]
pub struct FpcaReport {
    pub schema: u32,
    pub command: &'static str,
    pub n: usize,
    pub harmonics_requested: usize,
    pub harmonics_retained: usize,
    pub grid: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// One grid-sampled curve per component.
    pub eigenfunctions: Vec<Vec<f64>>,
    pub mean_curve: Vec<f64>,
    /// One row of scores per sample path.
    pub scores: Vec<Vec<f64>>,
}

pub fn fpca_report(ds: &FunctionalDataset, m: usize) -> Result<FpcaReport, CliError> {
    let res = fpca(ds, m)?;
    let es = &res.eigensystem;
    Ok(FpcaReport {
        schema: SCHEMA,
        command: "fpca",
        n: ds.n(),
        harmonics_requested: m,
        harmonics_retained: es.dim(),
        grid: ds.grid().points().to_vec(),
        eigenvalues: es.eigenvalues().iter().copied().collect(),
        eigenfunctions: columns(es.eigenfunctions()),
        mean_curve: res.mean_curve.iter().copied().collect(),
        scores: rows(&res.scores),
    })
}

pub fn cmd_fpca(args: &FpcaArgs) -> Result<(), CliError> {
    let ds = read_dataset(&args.input)?;
    emit(&fpca_report(&ds, args.harmonics)?, &args.output)
}

#[derive(Debug, Serialize)]
pub struct CcaReport {
    pub schema: u32,
    pub command: &'static str,
    pub mode: Mode,
    pub harmonics: usize,
    pub n: usize,
    pub correlations: Vec<f64>,
    /// Coefficient vector of each component on the first dataset's scores.
    pub left_coeffs: Vec<Vec<f64>>,
    pub right_coeffs: Vec<Vec<f64>>,
    pub grid: Vec<f64>,
    /// Grid-sampled weight function of each component.
    pub left_weights: Vec<Vec<f64>>,
    pub right_weights: Vec<Vec<f64>>,
}

fn cca_report(command: &'static str, est: &CcaEstimate, n: usize) -> CcaReport {
    CcaReport {
        schema: SCHEMA,
        command,
        mode: est.mode,
        harmonics: est.m,
        n,
        correlations: est.correlations.clone(),
        left_coeffs: columns(&est.left_coeffs),
        right_coeffs: columns(&est.right_coeffs),
        grid: est.grid.points().to_vec(),
        left_weights: columns(&est.left_weights),
        right_weights: columns(&est.right_weights),
    }
}

pub fn cca(x1: &FunctionalDataset, x2: &FunctionalDataset, m: usize, mode: Mode) -> Result<CcaReport, CliError> {
    let est = estimate_cca(x1, x2, m, mode)?;
    Ok(cca_report("cca", &est, x1.n()))
}

pub fn cmd_cca(args: &CcaArgs) -> Result<(), CliError> {
    let x1 = read_dataset(&args.x1)?;
    let x2 = read_dataset(&args.x2)?;
    emit(&cca(&x1, &x2, args.harmonics, args.mode)?, &args.output)
}

#[derive(Debug, Serialize)]
pub struct PccaReport {
    #[serde(flatten)]
    pub canonical: CcaReport,
    pub cond_harmonics: usize,
    /// OLS coefficients of the first target's scores on the conditioning
    /// scores, one row per conditioning component.
    pub regression_x2: Vec<Vec<f64>>,
    pub regression_x3: Vec<Vec<f64>>,
}

pub fn pcca(
    cond: &FunctionalDataset,
    x2: &FunctionalDataset,
    x3: &FunctionalDataset,
    m: usize,
    m_cond: usize,
    mode: Mode,
) -> Result<PccaReport, CliError> {
    let est = estimate_pcca_with(cond, x2, x3, m, m_cond, mode)?;
    Ok(PccaReport {
        canonical: cca_report("pcca", &est.estimate, x2.n()),
        cond_harmonics: est.m_cond,
        regression_x2: rows(&est.regression2),
        regression_x3: rows(&est.regression3),
    })
}

pub fn cmd_pcca(args: &PccaArgs) -> Result<(), CliError> {
    let cond = read_dataset(&args.cond)?;
    let x2 = read_dataset(&args.x2)?;
    let x3 = read_dataset(&args.x3)?;
    let m_cond = args.cond_harmonics.unwrap_or(args.harmonics);
    emit(&pcca(&cond, &x2, &x3, args.harmonics, m_cond, args.mode)?, &args.output)
}

#[derive(Debug, Clone, Serialize)]
pub struct McConfig {
    pub model: &'static str,
    pub n: usize,
    pub replications: u64,
    pub harmonics: usize,
    pub mode: Mode,
    pub seed: u64,
    pub grid_points: usize,
    pub kl_terms: usize,
    pub beta: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct McRow {
    pub replication: u64,
    pub d1: f64,
    /// Absent when fewer than two correlations exist.
    pub d2: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct McSummary {
    pub mean_d1: f64,
    pub sd_d1: f64,
    pub mean_d2: Option<f64>,
    pub sd_d2: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub schema: u32,
    pub command: &'static str,
    pub config: McConfig,
    pub summary: McSummary,
    pub replications: Vec<McRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

/// Sample mean and standard deviation (divisor `len − 1`).
pub fn mean_sd(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

fn replicate(args: &MonteCarloArgs, r: u64) -> Result<McRow, CliError> {
    let cfg = SimConfig {
        n: args.n,
        p: args.grid_points,
        kl_terms: args.kl_terms,
        seed: args.seed,
        replication: r,
        model: args.model,
        beta: (args.beta1, args.beta2),
    };
    let est = match args.model {
        Model::CcaPair => {
            let (a, b) = simulate_cca_pair(&cfg)?;
            estimate_cca(&a, &b, args.harmonics, args.mode)?
        }
        Model::PccaTriple => {
            let (c, a, b) = simulate_pcca_triple(&cfg)?;
            estimate_pcca_with(&c, &a, &b, args.harmonics, args.harmonics, args.mode)?.estimate
        }
    };
    Ok(McRow {
        replication: r,
        d1: est.correlations[0],
        d2: est.correlations.get(1).copied(),
    })
}

pub fn montecarlo(args: &MonteCarloArgs) -> Result<McReport, CliError> {
    if args.replications < 2 {
        return Err(CliError::Usage("at least two replications are required".into()));
    }
    let probe = SimConfig {
        n: args.n,
        p: args.grid_points,
        kl_terms: args.kl_terms,
        seed: args.seed,
        replication: 0,
        model: args.model,
        beta: (args.beta1, args.beta2),
    };
    probe.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let start = Instant::now();
    // collect() keeps replication order regardless of scheduling
    let rows = (0..args.replications)
        .into_par_iter()
        .map(|r| replicate(args, r))
        .collect::<Result<Vec<_>, _>>()?;
    let elapsed = start.elapsed().as_secs_f64();

    let d1: Vec<f64> = rows.iter().map(|r| r.d1).collect();
    let d2: Option<Vec<f64>> = rows.iter().map(|r| r.d2).collect();
    let (mean_d1, sd_d1) = mean_sd(&d1).expect("at least two replications");
    let second = d2.as_deref().and_then(mean_sd);
    Ok(McReport {
        schema: SCHEMA,
        command: "montecarlo",
        config: McConfig {
            model: match args.model {
                Model::CcaPair => "cca",
                Model::PccaTriple => "pcca",
            },
            n: args.n,
            replications: args.replications,
            harmonics: args.harmonics,
            mode: args.mode,
            seed: args.seed,
            grid_points: args.grid_points,
            kl_terms: args.kl_terms,
            beta: [args.beta1, args.beta2],
        },
        summary: McSummary {
            mean_d1,
            sd_d1,
            mean_d2: second.map(|s| s.0),
            sd_d2: second.map(|s| s.1),
        },
        replications: rows,
        runtime_seconds: args.timing.then_some(elapsed),
    })
}

pub fn cmd_montecarlo(args: &MonteCarloArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let report = montecarlo(args)?;
    eprintln!(
        "{} replications in {:.2}s: mean d1 {:.4} (sd {:.4})",
        args.replications,
        start.elapsed().as_secs_f64(),
        report.summary.mean_d1,
        report.summary.sd_d1
    );
    emit(&report, &args.output)
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub schema: u32,
    pub command: &'static str,
    pub config: VerifyConfig,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

pub fn verify(args: &VerifyArgs) -> VerifyReport {
    let config = VerifyConfig {
        trials: args.trials as usize,
        dim: args.dim as usize,
        seed: args.seed,
        tol: args.tol,
        oracle_tol: args.oracle_tol,
        inject_fault: args.inject_fault,
    };
    let report = verify::run(&config);
    VerifyReport {
        schema: SCHEMA,
        command: "verify",
        config,
        checks: report.checks,
        passed: report.passed,
    }
}

/// Returns the process exit code.
pub fn cmd_verify(args: &VerifyArgs) -> Result<i32, CliError> {
    let report = verify(args);
    for c in &report.checks {
        eprintln!(
            "{:<4} {:<45} max error {:.3e} (tol {:.0e})",
            if c.passed { "ok" } else { "FAIL" },
            c.name,
            c.max_error,
            c.tolerance
        );
    }
    emit(&report, &args.output)?;
    Ok(if report.passed { 0 } else { EXIT_VERIFY_FAILED })
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    for path in simulate(args)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}
