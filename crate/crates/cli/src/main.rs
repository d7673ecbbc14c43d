mod args;
mod commands;
mod output;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use serde::{Deserialize, Serialize};

use args::{Cli, Command};
use output::{write_json, Failure};

/// Provenance written next to every output.
#[derive(Serialize, Deserialize)]
struct Sidecar {
    tool: String,
    version: String,
    run: Command,
}

fn execute(command: &Command, out: &Path) -> Result<(), Failure> {
    if let Command::Replay(r) = command {
        let text = std::fs::read_to_string(&r.sidecar)
            .map_err(|e| Failure::Data(format!("{}: {e}", r.sidecar.display())))?;
        let sidecar: Sidecar =
            serde_json::from_str(&text).map_err(|e| Failure::Data(format!("{}: {e}", r.sidecar.display())))?;
        if sidecar.version != env!("CARGO_PKG_VERSION") {
            eprintln!("warning: sidecar written by version {}, running {}", sidecar.version, env!("CARGO_PKG_VERSION"));
        }
        return execute(&sidecar.run, out);
    }
    write_json(
        &out.join("run.json"),
        &Sidecar {
            tool: "dpdr".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            run: command.clone(),
        },
    )?;
    match command {
        Command::Simulate(a) => commands::simulate(a, out),
        Command::Estimate(a) => commands::estimate(a, out),
        Command::Order(a) => commands::order(a, out),
        Command::Bandwidth(a) => commands::bandwidth(a, out),
        Command::Benchmark(a) => commands::benchmark(a, out),
        Command::Evaluate(a) => commands::evaluate(a, out),
        Command::Replay(_) => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match execute(&cli.command, &cli.out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
