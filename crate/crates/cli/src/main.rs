use std::io;
use std::process::ExitCode;

use clap::Parser;
use crn_cli::{run, Cli, Style, EXIT_USAGE};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let code = run(cli, &mut io::stdout().lock(), &mut io::stderr().lock(), Style::detect());
    ExitCode::from(code)
}
