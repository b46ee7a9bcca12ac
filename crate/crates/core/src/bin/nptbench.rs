use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use npt_workbench::cli_report::{emit, run, RunConfig, EXIT_FAILURE};

fn main() -> ExitCode {
    let config = RunConfig::parse();
    let report = match run(&config) {
        Ok(report) => report,
        Err(e) => {
            eprintln!("nptbench: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let bytes = emit(&report, config.format);
    let written = match &config.output {
        Some(path) => std::fs::write(path, &bytes),
        None => std::io::stdout().write_all(&bytes),
    };
    if let Err(e) = written {
        eprintln!("nptbench: cannot write report: {e}");
        return ExitCode::from(EXIT_FAILURE as u8);
    }
    ExitCode::from(report.exit_code() as u8)
}
