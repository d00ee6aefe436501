use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use firing_vq::analytic::{oracle_csv_row, TorusSolutionType, ORACLE_CSV_HEADER};
use firing_vq_cli::error::{CliError, CliResult};
use firing_vq_cli::suite::{run_suite, SuiteOptions, DEFAULT_SEED};
use firing_vq_cli::{config, experiments};

#[derive(Parser)]
#[command(name = "firing-vq", version, about = "Coding-cost experiments for discretely firing neurons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Override a config value, e.g. `--set params.m=8`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run the full acceptance suite and print one line per criterion.
    VerifyAll {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Replace bound-check codebooks with NaN (negative control).
        #[arg(long, hide = true)]
        inject_corrupt_codebook: bool,
    },
    /// Print closed-form torus costs and centroids as CSV.
    OracleTable {
        #[arg(long, value_enum, default_value_t = KindArg::All)]
        kind: KindArg,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Type1,
    Type2,
    Type3,
    All,
}

impl KindArg {
    fn kinds(self) -> Vec<TorusSolutionType> {
        match self {
            KindArg::Type1 => vec![TorusSolutionType::Type1],
            KindArg::Type2 => vec![TorusSolutionType::Type2],
            KindArg::Type3 => vec![TorusSolutionType::Type3],
            KindArg::All => TorusSolutionType::ALL.to_vec(),
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Run { config, overrides } => {
            let cfg = config::load(&config, &overrides)?;
            let outcome = experiments::run(&cfg)?;
            for line in &outcome.summary {
                println!("{line}");
            }
            for file in &outcome.files {
                println!("wrote {}", file.display());
            }
            outcome.into_result().map(|_| ())
        }
        Command::VerifyAll {
            seed,
            inject_corrupt_codebook,
        } => {
            let results = run_suite(SuiteOptions {
                seed,
                corrupt_codebook: inject_corrupt_codebook,
            });
            for r in &results {
                println!("{}", r.line());
            }
            let failed: Vec<String> = results.iter().filter(|r| !r.passed).map(|r| r.id.to_string()).collect();
            println!("{}/{} criteria passed", results.len() - failed.len(), results.len());
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Tolerance(format!("criteria {} failed", failed.join(", "))))
            }
        }
        Command::OracleTable { kind, m, n } => {
            println!("{ORACLE_CSV_HEADER}");
            for k in kind.kinds() {
                println!("{}", oracle_csv_row(k, m, n)?);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
