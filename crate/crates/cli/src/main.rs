//! `stablefield`: reproducible experiments for fractional Lévy–Chentsov
//! fields and Karlin stable processes.
//!
//! Exit status is 0 when every check passes, 1 when a check fails and 2 on a
//! configuration error. Reports are written in both cases.

mod commands;
mod config;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{CliError, CliResult, CommonArgs, Settings};

#[derive(Debug, Parser)]
#[command(name = "stablefield", version, about = "Fractional stable field experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// μ(A_x Δ A_y) against the geodesic distance
    VerifyMdk,
    /// μ_β(A_x* Δ A_y*) against d(x, y)^β
    FracDistance,
    /// Poisson parity law against a brute-force oracle
    ParityCheck,
    /// Exact f.d.d. samples of the fractional or Lévy–Chentsov field
    SampleFdd,
    /// Sub-stable field samples
    SampleSubstable,
    /// Stationarity of increments under random isometries
    Invariance,
    /// Gaussian covariance structure and its two-component decomposition
    GaussianCov,
    /// M-statistic and CF convergence of the Karlin scheme over ρ
    KarlinConverge,
}

impl Command {
    fn run(self, s: &Settings) -> CliResult<stablefield::ExperimentReport> {
        match self {
            Command::VerifyMdk => commands::verify_mdk(s),
            Command::FracDistance => commands::frac_distance(s),
            Command::ParityCheck => commands::parity_check(s),
            Command::SampleFdd => commands::sample_fdd(s),
            Command::SampleSubstable => commands::sample_substable_cmd(s),
            Command::Invariance => commands::invariance(s),
            Command::GaussianCov => commands::gaussian_cov(s),
            Command::KarlinConverge => commands::karlin_converge(s),
        }
    }
}

fn write_report(s: &Settings, rep: &stablefield::ExperimentReport) -> CliResult<()> {
    let json = s.out.join(format!("{}_report.json", rep.id));
    let mut w = commands::create(&json)?;
    rep.write_json(&mut w)?;
    w.flush().map_err(|source| CliError::Io { path: json.clone(), source })?;
    let csv = s.out.join(format!("{}_report.csv", rep.id));
    let mut w = commands::create(&csv)?;
    rep.write_csv(&mut w)?;
    w.flush().map_err(|source| CliError::Io { path: csv, source })
}

fn run(cli: &Cli) -> CliResult<bool> {
    let settings = Settings::resolve(&cli.common)?;
    if let Some(n) = settings.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&settings.out).map_err(|source| CliError::Io { path: settings.out.clone(), source })?;
    let start = std::time::Instant::now();
    let mut rep = cli.command.run(&settings)?;
    rep.wall_time_s = start.elapsed().as_secs_f64();
    write_report(&settings, &rep)?;
    let passed = rep.checks.iter().filter(|c| c.passed).count();
    println!(
        "{} {}: {passed}/{} checks passed{} ({:.2}s)",
        if rep.passed() { "PASS" } else { "FAIL" },
        rep.id,
        rep.checks.len(),
        if rep.partial { ", partial (budget exhausted)" } else { "" },
        rep.wall_time_s
    );
    for c in rep.checks.iter().filter(|c| !c.passed).take(20) {
        println!("  failed {}: estimate {:.8e}, target {:.8e}, tolerance {:.3e}", c.name, c.estimate, c.target, c.tolerance);
    }
    Ok(rep.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
