use std::process::ExitCode;

use dyson_memory::cli::{self, CliError};

fn main() -> ExitCode {
    let code = match cli::parse_args(std::env::args_os()) {
        Ok(config) => cli::run(&config),
        Err(e) => {
            match &e {
                CliError::Display(s) => print!("{s}"),
                CliError::Usage(s) => eprint!("{}", ensure_newline(s)),
            }
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn ensure_newline(s: &str) -> String {
    if s.ends_with('\n') {
        s.to_string()
    } else {
        format!("error: {s}\n")
    }
}
