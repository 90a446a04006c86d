use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uspas_cli::{exit_code, run_file, RunOptions, THREADS_ENV};

#[derive(Parser)]
#[command(name = "uspas", version, about = "Simulate, check and synthesize stability certificates for parameterized ODEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run {
        file: PathBuf,
        /// Output directory (default: the scenario's `output_dir`, else `out/<name>`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for ensemble integration.
        #[arg(long, env = THREADS_ENV)]
        threads: Option<usize>,
        /// Omit timing information so reruns give byte-identical reports.
        #[arg(long)]
        canonical: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run { file, out, seed, threads, canonical } = cli.command;
    let result = run_file(&file, &RunOptions { out, seed, threads, canonical });
    match &result {
        Ok(s) if s.holds => println!("all asserted properties hold; report at {}", s.report.display()),
        Ok(s) => println!("property falsified; report at {}", s.report.display()),
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result))
}
