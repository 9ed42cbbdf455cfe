use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use otto_probe_cli::{run_experiment, Command, ExperimentSpec};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Trajectory,
    Energy,
    DtSweep,
    SqueezeSweep,
    Protocol,
    Threshold,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Trajectory => Command::Trajectory,
            Cmd::Energy => Command::Energy,
            Cmd::DtSweep => Command::DtSweep,
            Cmd::SqueezeSweep => Command::SqueezeSweep,
            Cmd::Protocol => Command::Protocol,
            Cmd::Threshold => Command::Threshold,
        }
    }
}

/// Single-ion Otto engine experiments.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    command: Cmd,
    /// Configuration file with `key = value` lines.
    #[arg(short, long)]
    config: PathBuf,
    /// Directory for the CSV and JSON outputs.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    /// Override a configuration key, e.g. `--set n_cycles=8`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let spec = ExperimentSpec {
        command: args.command.into(),
        config_path: args.config,
        output_dir: args.out,
        overrides: args.overrides,
        seed: args.seed,
    };
    match run_experiment(&spec) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
