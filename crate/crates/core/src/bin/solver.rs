use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mortar_tsa::cli::{self, RunOptions, EXIT_CONFIG, EXIT_OK, EXIT_THRESHOLD};
use mortar_tsa::mesh::MeshMode;

#[derive(Parser)]
#[command(name = "solver", version, about = "Transient heat conduction with thin-shell insulation layers")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration and write its outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// `reference` or `mortar_tsa`; defaults to the config's mode.
        #[arg(long)]
        mode: Option<MeshMode>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dotted-path override `key=value`, repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Compare run directory A against reference run directory B.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        /// Directory for the error series and summary.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print mesh, trace and DoF statistics.
    MeshInfo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mode: Option<MeshMode>,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SOLVER_LOG", "warn")).init();
    // Usage errors are configuration errors; help and version exit cleanly.
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let result = match args.command {
        Command::Run { config, mode, out, overrides } => {
            cli::cmd_run(&RunOptions { config, mode, out, overrides }).map(|m| {
                println!("wrote {} files in {:.2} s", m.files.len(), m.wall_clock_s);
                EXIT_OK
            })
        }
        Command::Compare { a, b, threshold, out } => cli::cmd_compare(&a, &b, threshold, out.as_deref()).map(|r| {
            print!("{}", r.summary());
            if r.passed {
                EXIT_OK
            } else {
                EXIT_THRESHOLD
            }
        }),
        Command::MeshInfo { config, mode, overrides } => cli::cmd_mesh_info(&config, mode, &overrides).map(|s| {
            print!("{s}");
            EXIT_OK
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
