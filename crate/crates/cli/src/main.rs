use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use modulus_cli::scenario::Command;
use modulus_cli::{execute, Overrides, Scenario};

#[derive(Parser)]
#[command(
    name = "modulus",
    version,
    about = "Curve-family modulus and distortion checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve for the p-modulus of the scenario's family.
    ComputeModulus(RunArgs),
    /// Check the modulus inequality for the scenario's mapping.
    Verify(RunArgs),
    /// Run every row of the scenario's `[sweep]` table.
    Sweep(RunArgs),
    /// Run the scenario's own command.
    Run(RunArgs),
    /// List the built-in mappings.
    Catalog,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Fixed-order reductions for bit-reproducible reports.
    #[arg(long)]
    deterministic: bool,
}

fn run(args: RunArgs, force: Option<fn(Command) -> Result<Command>>) -> Result<i32> {
    let mut s = Scenario::load(&args.scenario)?;
    if let Some(f) = force {
        s.command = f(s.command)?;
        s.validate()?;
    }
    let o = execute(
        s,
        &args.out,
        &Overrides {
            deterministic: args.deterministic,
            jobs: args.jobs,
        },
    )?;
    for f in &o.files {
        println!("wrote {}", f.display());
    }
    for e in &o.errors {
        eprintln!("error: {e}");
    }
    for f in &o.failures {
        eprintln!("FAILED {f}");
    }
    println!("{}: {}", o.name, if o.passed { "passed" } else { "failed" });
    Ok(o.exit_code())
}

fn catalog() {
    println!("{:<28} {:>3} {:>8}", "name", "dim", "branches");
    for f in modulus_core::mappings::catalog() {
        println!("{:<28} {:>3} {:>8}", f.name(), f.dim(), f.branch_count());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::ComputeModulus(a) => run(a, Some(|_| Ok(Command::ComputeModulus))),
        Cmd::Verify(a) => run(
            a,
            Some(|c| {
                Ok(match c {
                    Command::VerifyCorollary1 => c,
                    _ => Command::VerifyTheorem2,
                })
            }),
        ),
        Cmd::Sweep(a) => run(
            a,
            Some(|c| match c {
                Command::Sweep => Ok(c),
                _ => bail!("key `command`: the sweep subcommand needs `command = \"sweep\"`"),
            }),
        ),
        Cmd::Run(a) => run(a, None),
        Cmd::Catalog => {
            catalog();
            Ok(0)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
