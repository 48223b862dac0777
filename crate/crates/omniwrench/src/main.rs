use std::process::ExitCode;

fn main() -> ExitCode {
    omniwrench::cli::main_with(std::env::args_os())
}
