use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(statman_cli::run(std::env::args_os()) as u8)
}
