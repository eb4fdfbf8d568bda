use std::process::ExitCode;

use clap::Parser;
use jrc_cli::{dump_channels, load_config, run, Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { kind } => run(kind).map(|out| {
            let m = &out.manifest;
            println!("{}", out.dir.display());
            for f in &m.outputs {
                println!("  {f}");
            }
            if m.passed || kind.common().allow_failures {
                ExitCode::SUCCESS
            } else {
                eprintln!(
                    "{} failed trials or checks; rerun with --allow-failures to accept",
                    m.failures.max(1)
                );
                ExitCode::from(2)
            }
        }),
        Command::Config(common) => load_config(common).map(|c| {
            print!("{}", c.to_toml_string());
            ExitCode::SUCCESS
        }),
        Command::DumpChannels {
            common,
            trial,
            file,
        } => dump_channels(common, *trial, file).map(|()| ExitCode::SUCCESS),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(1)
    })
}
