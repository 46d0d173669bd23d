//! Library side of the `mtc` command-line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod input;

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;

pub use config::{parse_config, parse_config_file, Cli, Command, OutputFormat, RunConfig};
pub use error::{CliError, EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK};
pub use input::{parse_statistics, read_statistics};

/// Runs one invocation and returns its exit status.
pub fn run<I, T>(argv: I, env: impl Fn(&str) -> Option<String>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_INPUT
                }
            };
        }
    };
    let result = config::load(cli, env).and_then(|cfg| {
        let output = commands::execute(&cfg)?;
        commands::emit(&cfg, &output, out, err)
    });
    let _ = out.flush();
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "mtc: {e}");
            e.exit_code()
        }
    }
}
