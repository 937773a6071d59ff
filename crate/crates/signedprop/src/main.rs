use std::process::ExitCode;

fn main() -> ExitCode {
    signedprop::cli::run(std::env::args_os())
}
