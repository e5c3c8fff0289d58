use std::process::ExitCode;

fn main() -> ExitCode {
    minebench::cli::main_with_args(std::env::args_os())
}
