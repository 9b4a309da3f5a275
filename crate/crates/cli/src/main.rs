use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lamelab_cli::{describe, run, RunOptions, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "lamelab", version, about = "Experiments for the damped semilinear Lame system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment and write artifacts plus manifest.json
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Evaluate the experiment's checks (default)
        #[arg(long, overrides_with = "no_check")]
        check: bool,
        /// Skip the checks; the exit status then only reflects failures
        #[arg(long)]
        no_check: bool,
    },
    /// Print the resolved configuration and derived constants
    Describe {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Describe { config } => match describe(&config) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
        Command::Run { config, output, threads, seed, check: _, no_check } => {
            if let Some(n) = threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: cannot configure {n} threads: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            }
            let opts = RunOptions { output, threads, seed, checks: !no_check };
            match run(&config, &opts) {
                Ok(m) => {
                    for c in &m.checks {
                        println!("{:<32} {} (margin {:e})", c.id, if c.pass { "pass" } else { "FAIL" }, c.margin);
                    }
                    if let Some(f) = &m.failure {
                        eprintln!("error: {}: {}", f.kind, f.message);
                    }
                    println!("status: {:?}", m.status);
                    ExitCode::from(m.status.exit_code())
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code())
                }
            }
        }
    }
}
