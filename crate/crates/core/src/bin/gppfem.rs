use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gppfem::harness::{self, Sweep};
use gppfem::linalg;

#[derive(Parser)]
#[command(name = "gppfem", version, about = "Relaxation Crank-Nicolson FEM for the Gross-Pitaevskii-Poisson system")]
struct Cli {
    /// Threaded factorisations and concurrent species solves.
    #[arg(long, global = true)]
    parallel: bool,
    /// Include the expensive finest rows of 2D P2 space sweeps.
    #[arg(long, global = true)]
    extended: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single simulation; writes diagnostics.csv and snapshot.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Convergence study; writes converge_<sweep>.csv and prints the table.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        sweep: Sweep,
        #[arg(long, default_value_t = 4)]
        levels: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => harness::load_config(config).and_then(|mut cfg| {
            cfg.parallel |= cli.parallel;
            linalg::set_parallelism(cfg.parallel);
            let report = harness::cmd_run(&cfg)?;
            println!("wrote {}", report.diagnostics_path.display());
            println!("wrote {}", report.snapshot_path.display());
            Ok(())
        }),
        Command::Converge { config, sweep, levels } => harness::load_config(config).and_then(|mut cfg| {
            cfg.parallel |= cli.parallel;
            linalg::set_parallelism(cfg.parallel);
            let table = harness::cmd_converge(&cfg, *sweep, *levels, cli.extended)?;
            print!("{}", table.display());
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
