//! `dke`: batch driver for basis verification, scenario runs and
//! classical-limit studies.
//!
//! Exit codes: 0 ok, 1 failed check or run, 2 usage or config error. Every
//! failure prints one line `dke-error code=<code> message=<text>` on stderr
//! before any further detail.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dke_core::cli_io::{self, VerifyOptions};
use dke_core::Error;

#[derive(Debug, Parser)]
#[command(name = "dke", version, about = "Difference kinetic equations on a plane-wavelet lattice")]
struct Cli {
    /// Directory for output files, overriding the config's `output.dir`.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the basis identities on a small grid against quadrature.
    VerifyBasis {
        /// Number of position cells (even).
        #[arg(long)]
        cells: usize,
        /// Momentum cutoff; momenta run over -nmax..=nmax.
        #[arg(long)]
        nmax: usize,
        /// Cell width.
        #[arg(long, default_value_t = 1.0)]
        d: f64,
        #[arg(long, hide = true)]
        corrupt_prefactor: bool,
    },
    /// Run a scenario and write snapshots.csv, diagnostics.csv and run_meta.txt.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare the difference and differential right-hand sides on refined grids.
    LimitStudy {
        #[arg(long)]
        config: PathBuf,
        /// Number of refinement levels, 2 to 5.
        #[arg(long)]
        levels: usize,
    },
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn fail(code: &str, message: &str, exit: u8) -> ExitCode {
    eprintln!("dke-error code={code} message={}", one_line(message));
    ExitCode::from(exit)
}

fn report(err: Error) -> ExitCode {
    let exit = if err.is_usage() { 2 } else { 1 };
    let code = fail(err.code(), &err.to_string(), exit);
    if let Error::Config(issues) = &err {
        for issue in issues {
            eprintln!("  {issue}");
        }
    }
    code
}

fn run(cli: Cli) -> ExitCode {
    let out = cli.output_dir.as_deref();
    match cli.command {
        Command::VerifyBasis { cells, nmax, d, corrupt_prefactor } => {
            let options = VerifyOptions { corrupt_prefactor };
            let report_text = match cli_io::verify_basis(d, cells, nmax, options) {
                Ok(r) => r,
                Err(e) => return report(e),
            };
            let text = report_text.render();
            print!("{text}");
            if let Some(dir) = out {
                let path = dir.join("verify_basis.txt");
                if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(&path, &text)) {
                    return report(Error::Io { path: path.display().to_string(), source: e });
                }
            }
            if report_text.passed() {
                ExitCode::SUCCESS
            } else {
                let failed: Vec<&str> = report_text.checks.iter().filter(|c| !c.passed()).map(|c| c.name).collect();
                fail("check_failed", &format!("failed checks: {}", failed.join(", ")), 1)
            }
        }
        Command::Simulate { config } => match cli_io::cmd_simulate(&config, out) {
            Ok(outcome) => {
                let last = outcome.trajectory.last().map(|s| s.t).unwrap_or(0.0);
                println!(
                    "wrote {} snapshots (t_end = {last}) to {}",
                    outcome.trajectory.len(),
                    outcome.output_dir.display()
                );
                ExitCode::SUCCESS
            }
            Err(e) => report(e),
        },
        Command::LimitStudy { config, levels } => match cli_io::cmd_limit_study(&config, levels, out) {
            Ok(rows) => {
                print!("{}", cli_io::limit_study_csv(&rows));
                ExitCode::SUCCESS
            }
            Err(e) => report(e),
        },
    }
}

fn main() -> ExitCode {
    match Cli::try_parse() {
        Ok(cli) => run(cli),
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("invalid usage").trim_start_matches("error: ");
            let code = fail("usage", first, 2);
            let _ = e.print();
            code
        }
    }
}
