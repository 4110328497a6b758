use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(ids_cli::run(std::env::args_os()))
}
