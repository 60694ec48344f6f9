use std::path::PathBuf;
use std::process::ExitCode;

use anisolab_cli::{default_out_root, inspect, run_config_file, sweep, CliError};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "anisolab", version, about = "Run and audit anisotropic diffusion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to $ANISOLAB_OUT/<config name>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every *.conf in a directory and tabulate the reports.
    Sweep {
        #[arg(long)]
        config_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify artifact hashes against their manifest.
    Inspect {
        #[arg(long)]
        artifact: PathBuf,
    },
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out } => match run_config_file(&config, out.as_deref()) {
            Ok(s) => {
                for r in &s.reports {
                    println!("{} {}: C={:e} margin={:e}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.fitted_constant, r.margin);
                    for w in &r.warnings {
                        println!("  warning: {w}");
                    }
                }
                println!("artifacts in {}", s.out_dir.display());
                if s.all_passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE }
            }
            Err(e) => fail(e),
        },
        Command::Sweep { config_dir, workers, out } => {
            let root = out.unwrap_or_else(default_out_root);
            match sweep(&config_dir, &root, workers) {
                Ok(s) => {
                    for row in &s.rows {
                        match &row.outcome {
                            Ok(r) => println!("{} {}", if r.all_passed() { "PASS" } else { "FAIL" }, row.config),
                            Err(e) => println!("ERROR {}: {e}", row.config),
                        }
                    }
                    println!("table in {}", s.table.display());
                    if s.all_passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE }
                }
                Err(e) => fail(e),
            }
        }
        Command::Inspect { artifact } => match inspect(&artifact) {
            Ok(r) => {
                println!("recipe {} config {}", r.recipe, r.config_hash);
                for n in &r.verified {
                    println!("ok       {n}");
                }
                for n in &r.mismatched {
                    println!("MODIFIED {n}");
                }
                for n in &r.missing {
                    println!("MISSING  {n}");
                }
                if !r.config_ok {
                    println!("MODIFIED config.txt no longer matches the recorded hash");
                }
                if r.ok() { ExitCode::SUCCESS } else { ExitCode::FAILURE }
            }
            Err(e) => fail(e),
        },
    }
}
