use std::process::ExitCode;

fn main() -> ExitCode {
    periodlab::cli::main_with_args(std::env::args_os())
}
