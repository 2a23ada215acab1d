mod args;
mod commands;

use std::process::ExitCode;

use bca::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::Ctx;

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Validation => 2,
        ErrorKind::Io => 3,
        ErrorKind::Format => 4,
        ErrorKind::Invariant => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx::new(cli.seed, cli.quiet, cli.output_dir);
    let result = match &cli.command {
        Command::Gen(a) => commands::gen(&ctx, a),
        Command::Run(a) => commands::run(&ctx, a),
        Command::Ablate(a) => commands::ablate(&ctx, a),
        Command::Sweep(a) => commands::sweep(&ctx, a),
        Command::Inspect(a) => commands::inspect(&ctx, a),
        Command::ExportPrior(a) => commands::export_prior(&ctx, a),
        Command::Bench(a) => commands::bench(&ctx, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
