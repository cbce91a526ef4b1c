use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fracnoether_cli::{acceptance, CliError, Overrides};

#[derive(Parser)]
#[command(name = "fracnoether", version, about = "Fractional variational problems, Noether quantities and optimal control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Truncation order of the transfer series (noether scenarios)
    #[arg(long, global = true)]
    truncation: Option<usize>,
    /// Gradient tolerance for the extremal and control solvers
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its CSVs and manifest
    Run { file: PathBuf },
    /// Re-run a scenario at several grid sizes
    Study {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "64,128,256,512")]
        grids: Vec<usize>,
    },
    /// Run the acceptance suite and print one line per criterion
    Accept,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let ov = Overrides { truncation: cli.truncation, tol: cli.tol };
    match cli.command {
        Command::Run { file } => {
            let m = fracnoether_cli::run(&file, cli.out.as_deref(), &ov)?;
            println!("{}", serde_json::to_string_pretty(&m).expect("manifest serializes"));
        }
        Command::Study { file, grids } => {
            let (table, _) = fracnoether_cli::study(&file, &grids, cli.out.as_deref(), &ov)?;
            println!("{}", table.header().join(","));
            let cols = table.columns();
            for i in 0..table.rows.len() {
                let row: Vec<String> = cols.iter().map(|c| format!("{:.6e}", c[i])).collect();
                println!("{}", row.join(","));
            }
        }
        Command::Accept => {
            let outcomes = acceptance::run_suite(cli.out.as_deref(), |o| println!("{}", o.line()))?;
            let failed: Vec<u32> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
            println!("{} of {} criteria passed", outcomes.len() - failed.len(), outcomes.len());
            if !failed.is_empty() {
                return Err(CliError::Acceptance { failed });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
