use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dualvar::commands::{self, EXIT_ERROR};
use dualvar::{Result, RunConfig};

#[derive(Parser)]
#[command(
    name = "dualvar",
    version,
    about = "Dual variational solves of time-dependent PDEs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maximize the dual objective and write the trace and final fields.
    /// Exits 0 on convergence, 2 when the budget ran out or the line search
    /// stalled, 1 on error.
    Run { config: PathBuf },
    /// Run the structural checks and write verify.csv. Exits 0 iff every
    /// check passes.
    Verify {
        config: PathBuf,
        /// Scale the analytic gradient by 1.01 before checking it.
        #[arg(long)]
        corrupt_gradient: bool,
    },
    /// Repeat `run` over values of one config parameter.
    Sweep {
        config: PathBuf,
        /// `section.key`, or a key that is unique across sections.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
    },
}

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Run { config } => {
            let (_, cfg) = RunConfig::load(&config)?;
            let sum = commands::run(&cfg)?;
            let r = &sum.report;
            println!(
                "{:?} after {} iterations: objective {:.10e}, gradient {:.3e}, residual {:.3e}",
                r.termination,
                r.iterations,
                r.objective_trace.last().unwrap_or(&f64::NAN),
                r.grad_norm_trace.last().unwrap_or(&f64::NAN),
                r.residual_trace.last().unwrap_or(&f64::NAN),
            );
            if let Some(e) = sum.oracle_error {
                println!("relative L2 error against the reference solution: {e:.3e}");
            }
            Ok(sum.exit_code())
        }
        Command::Verify {
            config,
            corrupt_gradient,
        } => {
            let (_, cfg) = RunConfig::load(&config)?;
            let out = commands::verify(&cfg, corrupt_gradient)?;
            for r in &out.rows {
                let verdict = if r.pass { "pass" } else { "FAIL" };
                println!(
                    "{verdict}  {:<36} {:.3e} (threshold {:.1e})",
                    r.name, r.value, r.threshold
                );
            }
            Ok(out.exit_code())
        }
        Command::Sweep {
            config,
            param,
            values,
        } => {
            let (ini, _) = RunConfig::load(&config)?;
            let values: Vec<String> = values
                .into_iter()
                .filter(|v| !v.trim().is_empty())
                .collect();
            let out = commands::sweep(&ini, base_dir(&config), &param, &values)?;
            for (row, err) in out.rows.iter().zip(&out.errors) {
                match err {
                    Some(e) => println!("{param} = {}: error: {e}", row.param),
                    None => println!(
                        "{param} = {}: converged {}, objective {:.10e}",
                        row.param, row.converged, row.final_objective
                    ),
                }
            }
            Ok(out.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
