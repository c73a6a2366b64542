mod args;
mod config;
mod report;
mod run;

use std::io::Write;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use args::{Cli, Command};
use config::Config;
use report::Report;

/// Exit code 1 for usage errors, 2 for data errors.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] anyhow::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

fn emit(report: &Report, out: Option<&std::path::Path>) -> Result<(), CliError> {
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    match out {
        Some(dir) => {
            for path in report.write_dir(dir)? {
                println!("{path}");
            }
        }
        None => {
            let json = report.to_json()?;
            std::io::stdout().write_all(json.as_bytes()).context("cannot write to stdout")?;
        }
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match &command {
        Command::Replay(a) => {
            let original = Report::read(&a.report)?;
            let report = run::execute(original.config)?;
            emit(&report, a.out.out.as_deref())
        }
        Command::Plot(a) => {
            let report = Report::read(&a.report)?;
            let text = report.plot(a.kind)?;
            std::fs::write(&a.out, text)
                .with_context(|| format!("cannot write {}", a.out.display()))?;
            Ok(())
        }
        analysis => {
            let out = match analysis {
                Command::Corr(a) => a.out.out.clone(),
                Command::Ci(a) => a.out.out.clone(),
                Command::Test(a) => a.out.out.clone(),
                Command::Compare(a) => a.out.out.clone(),
                Command::SimCoverage(a) => a.out.out.clone(),
                Command::SimPower(a) => a.out.out.clone(),
                Command::Replay(_) | Command::Plot(_) => unreachable!(),
            };
            let config = Config::from_args(analysis)?;
            let report = run::execute(config)?;
            emit(&report, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command)),
            Err(e) => Err(CliError::Usage(format!("cannot start {n} threads: {e}"))),
        },
        None => dispatch(cli.command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code())
        }
    }
}
