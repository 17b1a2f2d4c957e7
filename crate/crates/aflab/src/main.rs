use aflab::config::ExperimentConfig;
use aflab::error::Error;
use aflab::runner::{self, RunOptions};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_PASS: u8 = 0;
const EXIT_ASSERTION: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(name = "aflab", about = "conformal-factor flow laboratory", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// experiment configuration (JSON)
    config: PathBuf,
    /// output directory (overrides the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// seed for the `random` initial condition
    #[arg(long)]
    seed: Option<u64>,
    /// worker thread count (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// integrate the flow and evaluate the configured scenario
    Run(Common),
    /// the two-initial-data experiment: collapse vs long-time existence
    Twin(Common),
    /// solve for the low spectrum only
    Spectrum(Common),
    /// check the spinorial-sample identities on the configured grid
    VerifySpinorial(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Run(c)
            | Command::Twin(c)
            | Command::Spectrum(c)
            | Command::VerifySpinorial(c) => c,
        }
    }
}

fn is_usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config { .. } | Error::Format { .. } | Error::Validation(_) | Error::Scenario(_)
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // keep clap's help/version on stdout with success, everything
            // else is a usage error
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_PASS)
            };
        }
    };
    let common = cli.command.common();

    if let Some(threads) = common.threads {
        #[cfg(feature = "parallel")]
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("aflab: cannot size the thread pool: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
        #[cfg(not(feature = "parallel"))]
        let _ = threads;
    }

    let cfg = match ExperimentConfig::from_path(&common.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("aflab: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let opts = RunOptions { out_dir: common.out.clone(), seed: common.seed };

    let result = match &cli.command {
        Command::Run(_) => runner::run(&cfg, &opts),
        Command::Twin(_) => runner::twin_run(&cfg, &opts),
        Command::Spectrum(_) => runner::spectrum(&cfg, &opts),
        Command::VerifySpinorial(_) => runner::verify_spinorial(&cfg, &opts),
    };

    match result {
        Ok(report) => {
            for a in &report.assertions {
                let mark = if a.passed { "pass" } else { "FAIL" };
                println!("[{mark}] {}: {}", a.name, a.detail);
            }
            println!(
                "aflab {}: {} (t = {:.6e}, {} steps)",
                report.command, report.status, report.t_final, report.steps
            );
            if report.passed {
                ExitCode::from(EXIT_PASS)
            } else {
                ExitCode::from(EXIT_ASSERTION)
            }
        }
        Err(e) => {
            eprintln!("aflab: {e}");
            if is_usage_error(&e) {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_ASSERTION)
            }
        }
    }
}
