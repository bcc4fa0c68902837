//! Command-line surface for the radial laboratory.
//!
//! Exit codes: 0 on success (all runs converged / all checks passed), 1 on
//! a numerical failure (non-convergence, missing certificate, failed
//! checks), 2 on configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qsp::config::RunConfig;
use qsp::experiments::{self, ExperimentError};
use qsp::{checks, report};

#[derive(Parser)]
#[command(
    name = "qsp",
    about = "Numerical laboratory for a quasilinear Schrodinger-Poisson system on a radial grid",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration file; defaults apply for every key it omits.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the configured one.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit SVG charts alongside the CSV outputs.
    #[arg(long)]
    plot: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the potential equation for a stored nonnegative source (or the
    /// squared default profile when --rho is omitted).
    SolvePhi {
        #[command(flatten)]
        common: CommonArgs,
        /// Field dump holding the source density.
        #[arg(long)]
        rho: Option<PathBuf>,
    },
    /// Run one saddle search at the configured parameters.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Sweep the coupling over the configured ascending grid.
    SweepLambda {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Sweep the quasilinear strength down the configured grid and compare
    /// against the limit run at strength zero.
    SweepEpsilon {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Scan couplings under the supercritical cap until a run certifies.
    Supercritical {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the executable invariant suite.
    Check {
        /// Smaller grid, skip the saddle search.
        #[arg(long)]
        quick: bool,
    },
}

/// Loads the configuration and applies command-line overrides.
fn load_config(common: &CommonArgs) -> Result<RunConfig, qsp::config::ConfigError> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(dir) = &common.out {
        cfg.out_dir = dir.clone();
    }
    if common.plot {
        cfg.plot = true;
    }
    Ok(cfg)
}

const EXIT_NUMERICAL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn classify(err: &ExperimentError) -> u8 {
    match err {
        ExperimentError::Config(_) | ExperimentError::CapRequired => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

fn print_record(record: &report::SweepRecord) {
    println!(
        "param {:>12.6} | level {:.10e} | h1 {:.6e} | x {:.6e} | sup u {:.6e} | grad {:.3e} | {} | {:.2}s",
        record.param,
        record.level,
        record.h1_norm,
        record.x_norm,
        record.u_inf,
        record.grad_norm,
        if record.converged { "converged" } else { "NOT CONVERGED" },
        record.seconds
    );
}

fn run_solve_phi(common: &CommonArgs, rho: Option<&PathBuf>) -> u8 {
    let cfg = match load_config(common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return EXIT_CONFIG;
        }
    };
    match experiments::solve_phi(&cfg, rho.map(|p| p.as_path())) {
        Ok(outcome) => {
            let s = &outcome.solution;
            println!(
                "potential solve: {} iterations, residual {:.3e}, x-norm {:.6e}, min {:.3e}, identity residual {:.3e}, {:.2}s",
                s.iterations,
                s.residual,
                s.x_norm(),
                s.min_value,
                s.identity_residual(),
                outcome.seconds
            );
            println!("artifacts in {}", outcome.dir.display());
            if s.converged {
                0
            } else {
                eprintln!("solver did not reach its residual tolerance");
                EXIT_NUMERICAL
            }
        }
        Err(e) => {
            eprintln!("solve-phi failed: {e}");
            classify(&e)
        }
    }
}

fn run_solve(common: &CommonArgs) -> u8 {
    let cfg = match load_config(common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return EXIT_CONFIG;
        }
    };
    match experiments::solve_saddle(&cfg) {
        Ok(outcome) => {
            print_record(&outcome.record);
            for w in &outcome.point.warnings {
                println!("warning: {w}");
            }
            println!("artifacts in {}", outcome.dir.display());
            if outcome.point.converged {
                0
            } else {
                eprintln!("saddle search did not converge");
                EXIT_NUMERICAL
            }
        }
        Err(e) => {
            eprintln!("solve failed: {e}");
            classify(&e)
        }
    }
}

fn run_sweep_lambda(common: &CommonArgs) -> u8 {
    let cfg = match load_config(common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return EXIT_CONFIG;
        }
    };
    match experiments::sweep_lambda(&cfg) {
        Ok(outcome) => {
            for r in &outcome.records {
                print_record(r);
            }
            println!("artifacts in {}", outcome.dir.display());
            if outcome.all_converged() {
                0
            } else {
                eprintln!("at least one sweep row did not converge");
                EXIT_NUMERICAL
            }
        }
        Err(e) => {
            eprintln!("sweep-lambda failed: {e}");
            classify(&e)
        }
    }
}

fn run_sweep_epsilon(common: &CommonArgs) -> u8 {
    let cfg = match load_config(common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return EXIT_CONFIG;
        }
    };
    match experiments::sweep_epsilon(&cfg) {
        Ok(outcome) => {
            for r in &outcome.records {
                print_record(r);
            }
            for d in &outcome.deltas {
                println!(
                    "eps {:>8.4} | u distance {:.6e} | phi gradient distance {:.6e} | quartic size {:.6e}",
                    d.eps, d.du_h1, d.dphi_grad, d.eps_grad_quart
                );
            }
            println!("artifacts in {}", outcome.dir.display());
            if outcome.all_converged() {
                0
            } else {
                eprintln!("at least one sweep row did not converge");
                EXIT_NUMERICAL
            }
        }
        Err(e) => {
            eprintln!("sweep-epsilon failed: {e}");
            classify(&e)
        }
    }
}

fn run_supercritical(common: &CommonArgs) -> u8 {
    let cfg = match load_config(common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return EXIT_CONFIG;
        }
    };
    match experiments::supercritical_scan(&cfg) {
        Ok(outcome) => {
            for r in &outcome.records {
                print_record(r);
            }
            println!("artifacts in {}", outcome.dir.display());
            match &outcome.certificate {
                Some(cert) if cert.is_valid() => {
                    println!("{}", cert.summary());
                    0
                }
                Some(cert) => {
                    eprintln!(
                        "certificate found but its residual misses the bound: {}",
                        cert.summary()
                    );
                    EXIT_NUMERICAL
                }
                None => {
                    eprintln!("no coupling in the scan produced a solution under the cap");
                    EXIT_NUMERICAL
                }
            }
        }
        Err(e) => {
            eprintln!("supercritical failed: {e}");
            classify(&e)
        }
    }
}

fn run_check(quick: bool) -> u8 {
    let outcomes = checks::invariant_suite(quick);
    for c in &outcomes {
        println!("{}", c.render());
    }
    let failures = outcomes.iter().filter(|c| !c.passed).count();
    if failures == 0 {
        println!("all {} checks passed", outcomes.len());
        0
    } else {
        eprintln!("{failures} of {} checks failed", outcomes.len());
        EXIT_NUMERICAL
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.cmd {
        Cmd::SolvePhi { common, rho } => run_solve_phi(common, rho.as_ref()),
        Cmd::Solve { common } => run_solve(common),
        Cmd::SweepLambda { common } => run_sweep_lambda(common),
        Cmd::SweepEpsilon { common } => run_sweep_epsilon(common),
        Cmd::Supercritical { common } => run_supercritical(common),
        Cmd::Check { quick } => run_check(*quick),
    };
    ExitCode::from(code)
}
