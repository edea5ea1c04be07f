//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use clap::Parser;
use fcca_cli::args::{Cli, Command as Sub};
use fcca_cli::commands::{self, McReport};
use fcca_core::instances::random_cov_blocks;
use fcca_core::operator::{cca_from_operators, pcca_from_operators};
use fcca_core::oracle::{analytic_model_operators, hotelling_cca, operators_from_cov_blocks, roy_pcca};
use fcca_core::rng::NormalStream;
use fcca_core::{Mode, SimConfig};

const ASSUMPTION_TOL: f64 = 1e-6;

struct Outcome {
    passed: bool,
    detail: String,
}

fn report(id: usize, title: &str, outcome: Outcome) -> bool {
    println!(
        "criterion {id} [{}] {title}: {}",
        if outcome.passed { "PASS" } else { "FAIL" },
        outcome.detail
    );
    outcome.passed
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn montecarlo(args: &[&str]) -> Result<(McReport, f64), String> {
    let argv = ["fcca", "montecarlo"].iter().chain(args).copied();
    let cli = Cli::try_parse_from(argv).map_err(|e| e.to_string())?;
    let Sub::Montecarlo(a) = cli.command else {
        unreachable!("parsed a montecarlo command")
    };
    let start = Instant::now();
    let report = commands::montecarlo(&a).map_err(|e| e.to_string())?;
    Ok((report, start.elapsed().as_secs_f64()))
}

/// Means of d₁ and d₂ against targets, plus a runtime limit.
fn check_mc(
    args: &[&str],
    d1: (f64, f64),
    d2: (f64, f64),
    sd1_range: Option<(f64, f64)>,
    max_seconds: f64,
) -> Outcome {
    match montecarlo(args) {
        Err(e) => Outcome {
            passed: false,
            detail: format!("error: {e}"),
        },
        Ok((r, secs)) => {
            let s = &r.summary;
            let mean_d2 = s.mean_d2.unwrap_or(f64::NAN);
            let mut passed = within(s.mean_d1, d1.0, d1.1) && within(mean_d2, d2.0, d2.1) && secs < max_seconds;
            let mut detail = format!(
                "mean d1 {:.4} (target {} ± {}), mean d2 {:.4} (target {} ± {}), sd d1 {:.4}, {:.1}s (limit {}s)",
                s.mean_d1, d1.0, d1.1, mean_d2, d2.0, d2.1, s.sd_d1, secs, max_seconds
            );
            if let Some((lo, hi)) = sd1_range {
                passed &= (lo..=hi).contains(&s.sd_d1);
                detail.push_str(&format!(", sd d1 range [{lo}, {hi}]"));
            }
            Outcome { passed, detail }
        }
    }
}

fn criterion_analytic() -> Outcome {
    let run = || -> Result<(Vec<f64>, Vec<f64>), String> {
        let pair = analytic_model_operators(&SimConfig::cca_pair(250, 0), 9).map_err(|e| e.to_string())?;
        let cca = cca_from_operators(&pair.m12, ASSUMPTION_TOL).map_err(|e| e.to_string())?;
        let triple = analytic_model_operators(&SimConfig::pcca_triple(250, 0), 9).map_err(|e| e.to_string())?;
        let pcca = pcca_from_operators(
            &triple.m12,
            triple.m13.as_ref().expect("triple"),
            triple.m23.as_ref().expect("triple"),
            ASSUMPTION_TOL,
        )
        .map_err(|e| e.to_string())?;
        Ok((cca.iter().map(|p| p.rho).collect(), pcca.iter().map(|p| p.rho).collect()))
    };
    match run() {
        Err(e) => Outcome {
            passed: false,
            detail: format!("error: {e}"),
        },
        Ok((cca, pcca)) => {
            let ok = |r: &[f64]| within(r[0], FRAC_1_SQRT_2, 1e-12) && within(r[1], 0.0, 1e-12);
            Outcome {
                passed: ok(&cca) && ok(&pcca),
                detail: format!(
                    "CCA rho1 {:.16} rho2 {:.1e}; PCCA rho1 {:.16} rho2 {:.1e} (tol 1e-12)",
                    cca[0], cca[1], pcca[0], pcca[1]
                ),
            }
        }
    }
}

fn criterion_verify() -> Outcome {
    let cli = Cli::try_parse_from(["fcca", "verify"]).expect("default flags parse");
    let Sub::Verify(args) = cli.command else {
        unreachable!("parsed a verify command")
    };
    let start = Instant::now();
    let r = commands::verify(&args);
    let secs = start.elapsed().as_secs_f64();
    let failed: Vec<&str> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let worst = r
        .checks
        .iter()
        .filter(|c| c.tolerance < 1e-3)
        .map(|c| c.max_error)
        .fold(0.0, f64::max);
    Outcome {
        passed: r.passed && secs < 30.0,
        detail: format!(
            "{} checks over {} trials, worst error {:.2e}, failed {:?}, {:.2}s (limit 30s)",
            r.checks.len(),
            args.trials,
            worst,
            failed,
            secs
        ),
    }
}

fn criterion_oracles() -> Outcome {
    let mut worst_cca: f64 = 0.0;
    let mut worst_pcca: f64 = 0.0;
    for t in 0..50 {
        let mut s = NormalStream::new(6, t);
        let dims = [s.int_in(1, 6), s.int_in(1, 6), s.int_in(1, 6)];
        let run = |s: &mut NormalStream| -> Result<(f64, f64), String> {
            let blocks = random_cov_blocks(s, &dims[..2]);
            let ops = operators_from_cov_blocks(&blocks, Mode::Correlation).map_err(|e| e.to_string())?;
            let ours = cca_from_operators(&ops.m12, ASSUMPTION_TOL).map_err(|e| e.to_string())?;
            let oracle = hotelling_cca(&blocks).map_err(|e| e.to_string())?;
            let e1 = ours
                .iter()
                .zip(oracle.correlations.iter())
                .map(|(p, r)| (p.rho - r).abs())
                .fold(0.0, f64::max);

            let blocks = random_cov_blocks(s, &dims);
            let ops = operators_from_cov_blocks(&blocks, Mode::Correlation).map_err(|e| e.to_string())?;
            let ours = pcca_from_operators(
                &ops.m12,
                ops.m13.as_ref().expect("three blocks"),
                ops.m23.as_ref().expect("three blocks"),
                ASSUMPTION_TOL,
            )
            .map_err(|e| e.to_string())?;
            let oracle = roy_pcca(&blocks).map_err(|e| e.to_string())?;
            let e2 = ours
                .iter()
                .zip(oracle.correlations.iter())
                .map(|(p, r)| (p.rho - r).abs())
                .fold(0.0, f64::max);
            Ok((e1, e2))
        };
        match run(&mut s) {
            Ok((a, b)) => {
                worst_cca = worst_cca.max(a);
                worst_pcca = worst_pcca.max(b);
            }
            Err(e) => {
                return Outcome {
                    passed: false,
                    detail: format!("instance {t}: {e}"),
                }
            }
        }
    }
    Outcome {
        passed: worst_cca <= 1e-8 && worst_pcca <= 1e-8,
        detail: format!(
            "50 instances: max |CCA - Hotelling| {worst_cca:.2e}, max |PCCA - Roy| {worst_pcca:.2e} (tol 1e-8)"
        ),
    }
}

fn run_binary(args: &[String]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fcca"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn criterion_determinism(dir: &Path) -> Outcome {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let commands: Vec<(Vec<String>, Vec<&str>)> = vec![
        (
            vec!["simulate", "--model", "pcca-triple", "--n", "30", "--seed", "5", "--out", &p("sim{R}")],
            vec!["sim{R}/x1.csv", "sim{R}/x2.csv", "sim{R}/x3.csv"],
        ),
        (vec!["fpca", "--input", &p("sim1/x2.csv"), "--out", &p("fpca{R}.json")], vec!["fpca{R}.json"]),
        (
            vec!["cca", "--x1", &p("sim1/x2.csv"), "--x2", &p("sim1/x3.csv"), "--harmonics", "5", "--out", &p("cca{R}.json")],
            vec!["cca{R}.json"],
        ),
        (
            vec![
                "pcca", "--cond", &p("sim1/x1.csv"), "--x2", &p("sim1/x2.csv"), "--x3", &p("sim1/x3.csv"),
                "--harmonics", "4", "--mode", "correlation", "--out", &p("pcca{R}.json"),
            ],
            vec!["pcca{R}.json"],
        ),
        (
            vec!["montecarlo", "--model", "cca", "--n", "100", "--replications", "8", "--seed", "3", "--out", &p("mc{R}.json")],
            vec!["mc{R}.json"],
        ),
        (vec!["verify", "--trials", "20", "--out", &p("verify{R}.json")], vec!["verify{R}.json"]),
    ]
    .into_iter()
    .map(|(args, files)| (args.into_iter().map(String::from).collect(), files))
    .collect();

    let mut compared = 0;
    for (args, files) in &commands {
        for run in ["1", "2"] {
            let argv: Vec<String> = args.iter().map(|a| a.replace("{R}", run)).collect();
            if let Err(e) = run_binary(&argv) {
                return Outcome {
                    passed: false,
                    detail: e,
                };
            }
        }
        for f in files {
            let a = fs::read(dir.join(f.replace("{R}", "1")));
            let b = fs::read(dir.join(f.replace("{R}", "2")));
            match (a, b) {
                (Ok(a), Ok(b)) if a == b => compared += 1,
                _ => {
                    return Outcome {
                        passed: false,
                        detail: format!("{f} differs between runs"),
                    }
                }
            }
        }
    }
    Outcome {
        passed: true,
        detail: format!("{compared} output files byte-identical across repeated runs"),
    }
}

fn main() {
    let dir = std::env::temp_dir().join(format!("fcca-acceptance-{}", std::process::id()));
    fs::create_dir_all(&dir).expect("temporary directory");

    let common = ["--replications", "100", "--harmonics", "9"];
    let with = |extra: &[&'static str]| -> Vec<&'static str> { extra.iter().chain(common.iter()).copied().collect() };

    let mut all = true;
    all &= report(
        1,
        "CCA simulation, n = 250",
        check_mc(&with(&["--model", "cca", "--n", "250"]), (0.7248, 0.03), (0.0777, 0.02), Some((0.04, 0.17)), 180.0),
    );
    all &= report(
        2,
        "CCA simulation, n = 500",
        check_mc(&with(&["--model", "cca", "--n", "500"]), (0.7147, 0.03), (0.055, 0.02), None, 300.0),
    );
    let pcca250 = check_mc(&with(&["--model", "pcca", "--n", "250"]), (0.7107, 0.03), (0.0818, 0.02), None, 300.0);
    let pcca500 = check_mc(&with(&["--model", "pcca", "--n", "500"]), (0.7141, 0.03), (0.0553, 0.02), None, 300.0);
    all &= report(
        3,
        "PCCA simulation, n = 250 and n = 500",
        Outcome {
            passed: pcca250.passed && pcca500.passed,
            detail: format!("n = 250: {}; n = 500: {}", pcca250.detail, pcca500.detail),
        },
    );
    all &= report(4, "analytic model operators", criterion_analytic());
    all &= report(5, "operator identity suite", criterion_verify());
    all &= report(6, "Hotelling and Roy oracle equivalence", criterion_oracles());
    all &= report(7, "byte-identical repeated runs", criterion_determinism(&dir));

    let _ = fs::remove_dir_all(&dir);
    if all {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: some criteria FAILED");
        std::process::exit(1);
    }
}
